//! Timing and operation-count rows for doubling-`n` series.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::Result;
use crate::instance::{generate_instance, GenerateMode, RngSeed, XorInstance};
use crate::randomized::RandomizedConfig;
use crate::solve::{solve, Algo, AlgoStats, SolveOptions};
use crate::word::BitWord;

pub const SCHEMA_VERSION: u32 = 1;

/// One CSV row. Counters an algorithm does not keep are left empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub algo: String,
    pub n: usize,
    pub w: u32,
    #[serde(rename = "W")]
    pub sim_width: u32,
    pub seed: u64,
    pub reps: u32,
    /// Fastest of `reps` runs.
    pub wall_ns: u128,
    pub word_ops: Option<u64>,
    pub key_comparisons: Option<u64>,
    pub node_visits: Option<u64>,
    pub colliding_triples: Option<u64>,
    pub retries: Option<u32>,
    pub found: bool,
}

pub const BENCH_COLUMNS: [&str; 13] = [
    "algo",
    "n",
    "w",
    "W",
    "seed",
    "reps",
    "wall_ns",
    "word_ops",
    "key_comparisons",
    "node_visits",
    "colliding_triples",
    "retries",
    "found",
];

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub algo: Algo,
    pub w: u32,
    pub sim_width: u32,
    pub seed: RngSeed,
    pub reps: u32,
    pub randomized: RandomizedConfig,
}

impl BenchConfig {
    pub fn new(algo: Algo, w: u32, sim_width: u32, seed: RngSeed) -> Self {
        BenchConfig {
            algo,
            w,
            sim_width,
            seed,
            reps: 3,
            randomized: RandomizedConfig {
                sim_width,
                ..Default::default()
            },
        }
    }
}

/// Times `cfg.algo` on a random instance of size `n`; the instance depends
/// only on `(n, w, seed)`, so every algorithm sees the same input.
pub fn bench_one<W: BitWord>(n: usize, cfg: &BenchConfig) -> Result<BenchRow> {
    let inst: XorInstance<W> =
        generate_instance(n, cfg.w, cfg.seed.derive(n as u64), GenerateMode::Random)?;
    let opts = SolveOptions {
        seed: cfg.seed,
        randomized: cfg.randomized.clone(),
        ..Default::default()
    };
    let mut best = Duration::MAX;
    let mut last = None;
    for _ in 0..cfg.reps.max(1) {
        let start = Instant::now();
        let report = solve(&inst, cfg.algo, &opts)?;
        best = best.min(start.elapsed());
        last = Some(report);
    }
    let report = last.expect("at least one rep");
    let mut row = BenchRow {
        algo: cfg.algo.name().to_string(),
        n,
        w: cfg.w,
        sim_width: cfg.sim_width,
        seed: cfg.seed.0,
        reps: cfg.reps.max(1),
        wall_ns: best.as_nanos(),
        word_ops: None,
        key_comparisons: None,
        node_visits: None,
        colliding_triples: None,
        retries: None,
        found: report.solution.is_some(),
    };
    match report.stats {
        AlgoStats::Trie {
            key_comparisons,
            node_visits,
        } => {
            row.word_ops = Some(key_comparisons);
            row.key_comparisons = Some(key_comparisons);
            row.node_visits = Some(node_visits);
        }
        AlgoStats::Rand(s) => {
            row.word_ops = Some(s.word_ops);
            row.colliding_triples = Some(s.collisions.colliding_triples_seen);
            row.retries = Some(s.retries);
        }
        AlgoStats::None => {}
    }
    Ok(row)
}

/// `n = 2^lo, 2^{lo+1}, …, 2^hi`.
pub fn doubling_series<W: BitWord>(lo: u32, hi: u32, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    (lo..=hi)
        .map(|e| bench_one::<W>(1usize << e, cfg))
        .collect()
}

/// `t(2n) / t(n)` for consecutive rows.
pub fn time_ratios(rows: &[BenchRow]) -> Vec<f64> {
    rows.windows(2)
        .map(|w| w[1].wall_ns as f64 / w[0].wall_ns.max(1) as f64)
        .collect()
}
