//! One entry point over every solver.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{brute_force_solve, RngSeed, SolutionTriple, TripleConvention, XorInstance};
use crate::randomized::{solve_randomized, RandomizedConfig, SolveStats};
use crate::reductions::{
    naive_offline_disjointness, naive_offline_intersection, solve_via_disjointness,
    solve_via_intersection,
};
use crate::word::BitWord;
use crate::xortrie::{solve_quadratic_counted, QuadraticStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Brute,
    Trie,
    Rand,
    ViaDisjointness,
    ViaIntersection,
}

impl Algo {
    pub const ALL: [Algo; 5] = [
        Algo::Brute,
        Algo::Trie,
        Algo::Rand,
        Algo::ViaDisjointness,
        Algo::ViaIntersection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Brute => "brute",
            Algo::Trie => "trie",
            Algo::Rand => "rand",
            Algo::ViaDisjointness => "via-disjointness",
            Algo::ViaIntersection => "via-intersection",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub convention: TripleConvention,
    pub seed: RngSeed,
    pub randomized: RandomizedConfig,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            convention: TripleConvention::Any,
            seed: RngSeed(0),
            randomized: RandomizedConfig::default(),
            gamma: 0.5,
            delta: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum AlgoStats {
    None,
    Trie {
        key_comparisons: u64,
        node_visits: u64,
    },
    Rand(SolveStats),
}

impl From<QuadraticStats> for AlgoStats {
    fn from(s: QuadraticStats) -> Self {
        AlgoStats::Trie {
            key_comparisons: s.key_comparisons,
            node_visits: s.node_visits,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<W: BitWord> {
    pub solution: Option<SolutionTriple<W>>,
    pub stats: AlgoStats,
}

/// Runs `algo` on the instance the convention selects. A returned triple is
/// always a witness of the original instance admitted by the convention.
pub fn solve<W: BitWord>(
    inst: &XorInstance<W>,
    algo: Algo,
    opts: &SolveOptions,
) -> Result<SolveReport<W>> {
    let target = opts.convention.apply(inst);
    let target = target.as_ref();
    let (solution, stats) = if target.is_empty() {
        (None, AlgoStats::None)
    } else {
        match algo {
            Algo::Brute => (brute_force_solve(target), AlgoStats::None),
            Algo::Trie => {
                let (s, st) = solve_quadratic_counted(target);
                (s, st.into())
            }
            Algo::Rand => {
                let out = solve_randomized(target, opts.seed, &opts.randomized)?;
                (out.solution, AlgoStats::Rand(out.stats))
            }
            Algo::ViaDisjointness => (
                solve_via_disjointness(target, opts.gamma, opts.seed, naive_offline_disjointness)?,
                AlgoStats::None,
            ),
            Algo::ViaIntersection => (
                solve_via_intersection(
                    target,
                    opts.gamma,
                    opts.delta,
                    opts.seed,
                    naive_offline_intersection,
                )?,
                AlgoStats::None,
            ),
        }
    };
    if let Some(t) = &solution {
        if !(t.is_witness_for(inst) && opts.convention.admits(t)) {
            return Err(Error::InvalidParameter(format!(
                "{algo} returned a non-witness {t:?}"
            )));
        }
    }
    Ok(SolveReport { solution, stats })
}
