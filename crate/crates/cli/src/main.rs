//! `xor3`: generate 3XOR instances, run and cross-check the solvers, and
//! print benchmark and statistics tables.
//!
//! Exit status: 0 when the command answered, 2 for usage errors, 3 when
//! `verify` finds a disagreement, 1 for any other failure.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use xor3::bench::{doubling_series, BenchConfig, BENCH_COLUMNS, SCHEMA_VERSION};
use xor3::hashing::overfull_statistic;
use xor3::randomized::{RandomizedConfig, RegimeChoice};
use xor3::reductions::{instance_shape_report, reduce, ReductionParams, ReductionTarget};
use xor3::solve::AlgoStats;
use xor3::verify::{run_verify, VerifyConfig};
use xor3::xortrie::make_tree;
use xor3::{
    solve, with_instance, Algo, AnyInstance, GenerateMode, RngSeed, SolveOptions, TripleConvention,
    WideWord,
};

#[derive(Parser, Debug)]
#[command(
    name = "xor3",
    version,
    about = "3XOR solvers and their test harnesses"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    #[arg(long, global = true, env = "XOR3_SEED", default_value_t = 0)]
    seed: u64,
    /// Key width in bits.
    #[arg(long, global = true, default_value_t = 32)]
    w: u32,
    /// Simulated machine word width for packed fingerprint arrays.
    #[arg(long, global = true, default_value_t = 256)]
    simwidth: u32,
    /// Require a, b, c pairwise distinct.
    #[arg(long, global = true)]
    distinct: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write an instance file.
    Gen {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "random", value_parser = ["random", "planted", "solution-free"])]
        mode: String,
        /// Comma-separated hex words instead of a random draw.
        #[arg(long, value_delimiter = ',', conflicts_with = "mode")]
        from_list: Option<Vec<String>>,
    },
    /// Solve an instance file (`-` reads stdin).
    Solve {
        input: PathBuf,
        #[arg(long, default_value = "trie")]
        algo: String,
        #[arg(long, default_value = "auto")]
        regime: String,
        /// Bucket bits, overriding the regime formula.
        #[arg(long)]
        r: Option<u32>,
        /// Fingerprint bits, overriding the regime formula.
        #[arg(long)]
        p: Option<u32>,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Print solver statistics as a JSON line after the result.
        #[arg(long)]
        emit_stats: bool,
    },
    /// Cross-solver agreement sweep plus statistical harnesses.
    Verify {
        #[arg(long)]
        quick: bool,
        /// Corrupt the packed sorting network; the sweep should then fail.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Doubling-n timing series as CSV.
    Bench {
        #[arg(long, default_value = "trie")]
        algo: String,
        /// Smallest n is 2^lo.
        #[arg(long, default_value_t = 10)]
        lo: u32,
        /// Largest n is 2^hi.
        #[arg(long, default_value_t = 14)]
        hi: u32,
        #[arg(long, default_value_t = 3)]
        reps: u32,
        #[arg(long, default_value = "auto")]
        regime: String,
    },
    /// Write the offline set instance built from an instance file as JSON.
    Reduce {
        input: PathBuf,
        #[arg(long, value_parser = ["disjointness", "intersection"])]
        target: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: Option<f64>,
        /// Print the shape report instead of the instance.
        #[arg(long)]
        shape: bool,
    },
    /// Statistics harnesses.
    Stats {
        #[command(subcommand)]
        which: Stats,
    },
    /// Print the XOR trie of an instance file as indented text.
    DumpTree { input: PathBuf },
}

#[derive(Subcommand, Debug)]
enum Stats {
    /// Mean number of elements in buckets of size >= 3n/m.
    Hashing {
        #[arg(long, value_delimiter = ',', default_value = "1024")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "16")]
        m: Vec<u64>,
        #[arg(long, default_value_t = 200)]
        trials: u32,
    },
}

/// Reported with exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

/// Reported with exit status 3.
#[derive(Debug)]
struct Disagreement;

impl std::fmt::Display for Disagreement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("verification failed")
    }
}

impl std::error::Error for Disagreement {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) if e.is::<Disagreement>() => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen { n, mode, from_list } => {
            allow_formats(g, &[Format::Text])?;
            let inst = match from_list {
                Some(list) => {
                    if n.is_some_and(|n| n != list.len()) {
                        return usage(format!(
                            "--n={} but --from-list has {} words",
                            n.unwrap(),
                            list.len()
                        ));
                    }
                    AnyInstance::from_hex_list(g.w, list)?
                }
                None => {
                    let Some(n) = *n else {
                        return usage("gen needs --n or --from-list");
                    };
                    let mode: GenerateMode = mode.parse()?;
                    AnyInstance::generate(n, g.w, RngSeed(g.seed), mode)?
                }
            };
            emit(g, &inst.to_text())
        }
        Command::Solve {
            input,
            algo,
            regime,
            r,
            p,
            gamma,
            delta,
            emit_stats,
        } => {
            allow_formats(g, &[Format::Text, Format::Json])?;
            let algo: Algo = algo.parse().map_err(|e| Usage(format!("{e}")))?;
            let regime: RegimeChoice = regime.parse().map_err(|e| Usage(format!("{e}")))?;
            if algo != Algo::Rand && (regime != RegimeChoice::Auto || r.is_some() || p.is_some()) {
                return usage("--regime, --r and --p apply to --algo=rand only");
            }
            let inst = read_instance(input)?;
            let opts = SolveOptions {
                convention: convention(g),
                seed: RngSeed(g.seed),
                randomized: RandomizedConfig {
                    sim_width: g.simwidth,
                    regime,
                    r: *r,
                    p: *p,
                    ..Default::default()
                },
                gamma: *gamma,
                delta: *delta,
            };
            let width = inst.width();
            let (hex, stats) = with_instance!(&inst, i => {
                let rep = solve(i, algo, &opts)?;
                (rep.solution.map(|t| t.to_hex(width)), rep.stats)
            });
            let stats = stats_json(&stats);
            let text = if g.format == Some(Format::Json) {
                let mut v = json!({ "algo": algo.name(), "solution": hex });
                if *emit_stats {
                    v["stats"] = stats;
                }
                format!("{v}\n")
            } else {
                let mut s = match hex {
                    Some([a, b, c]) => format!("SOLUTION {a} {b} {c}\n"),
                    None => "NONE\n".to_string(),
                };
                if *emit_stats {
                    s.push_str(&format!("{stats}\n"));
                }
                s
            };
            emit(g, &text)
        }
        Command::Verify {
            quick,
            inject_fault,
            trials,
            threads,
        } => {
            allow_formats(g, &[Format::Text, Format::Json])?;
            let mut cfg = if *quick {
                VerifyConfig::quick()
            } else {
                VerifyConfig::default()
            };
            cfg.seed = RngSeed(g.seed);
            cfg.sim_width = g.simwidth;
            cfg.convention = convention(g);
            cfg.fault = *inject_fault;
            if let Some(t) = trials {
                cfg.trials = *t;
            }
            if let Some(t) = threads {
                cfg.threads = (*t).max(1);
            }
            let report = run_verify(&cfg)?;
            let text = if g.format == Some(Format::Json) {
                format!("{}\n", serde_json::to_string_pretty(&report)?)
            } else {
                let mut s = format!(
                    "agreement: {} checks over {} trials, {} disagreements\n",
                    report.checks,
                    report.trials,
                    report.disagreements.len()
                );
                for h in &report.harnesses {
                    s.push_str(&format!(
                        "{} {}: {}\n",
                        if h.passed { "PASS" } else { "FAIL" },
                        h.name,
                        h.detail
                    ));
                }
                s
            };
            emit(g, &text)?;
            if report.passed() {
                return Ok(());
            }
            for d in &report.disagreements {
                let mode = serde_json::to_value(d.mode)?;
                let solver = match d.variant.split_once(':') {
                    Some((algo, regime)) => format!("--algo {algo} --regime {regime}"),
                    None => format!("--algo {}", d.variant),
                };
                eprintln!(
                    "disagreement: {} on trial {}; reproduce with `xor3 gen --n {} --w {} --mode {} --seed {} --out repro.txt` \
                     then `xor3 solve repro.txt {solver} --simwidth {} --seed {}`{}",
                    d.variant,
                    d.trial,
                    d.n,
                    d.w,
                    mode.as_str().unwrap_or("random").replace('_', "-"),
                    d.instance_seed,
                    g.simwidth,
                    d.solver_seed,
                    d.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default(),
                );
            }
            eprintln!(
                "verification failed; rerun with `xor3 verify --seed {}{}{}`",
                g.seed,
                if *quick { " --quick" } else { "" },
                if *inject_fault { " --inject-fault" } else { "" }
            );
            Err(Disagreement.into())
        }
        Command::Bench {
            algo,
            lo,
            hi,
            reps,
            regime,
        } => {
            allow_formats(g, &[Format::Csv, Format::Json])?;
            let algo: Algo = algo.parse().map_err(|e| Usage(format!("{e}")))?;
            if lo > hi || *hi > 24 {
                return usage("need lo <= hi <= 24");
            }
            let mut cfg = BenchConfig::new(algo, g.w, g.simwidth, RngSeed(g.seed));
            cfg.reps = *reps;
            cfg.randomized.regime = regime.parse().map_err(|e| Usage(format!("{e}")))?;
            let rows = if g.w <= 64 {
                doubling_series::<u64>(*lo, *hi, &cfg)?
            } else {
                doubling_series::<WideWord>(*lo, *hi, &cfg)?
            };
            let text = match g.format {
                Some(Format::Json) => format!("{}\n", serde_json::to_string_pretty(&rows)?),
                _ => bench_csv(&rows)?,
            };
            emit(g, &text)
        }
        Command::Reduce {
            input,
            target,
            gamma,
            delta,
            shape,
        } => {
            allow_formats(g, &[Format::Json])?;
            let target: ReductionTarget = target.parse()?;
            let params = match (target, delta) {
                (ReductionTarget::Disjointness, Some(_)) => {
                    return usage("--delta applies to intersection only")
                }
                (ReductionTarget::Disjointness, None) => ReductionParams::disjointness(*gamma),
                (ReductionTarget::Intersection, d) => {
                    ReductionParams::intersection(*gamma, d.unwrap_or(0.5))
                }
            };
            params.validate().map_err(|e| Usage(format!("{e}")))?;
            let inst = read_instance(input)?;
            let seed = RngSeed(g.seed);
            let text = with_instance!(&inst, i => {
                let target = convention(g).apply(i);
                if *shape {
                    serde_json::to_string_pretty(&instance_shape_report(&target, params, seed)?)?
                } else {
                    serde_json::to_string(&reduce(&target, params, seed)?.offline)?
                }
            });
            emit(g, &(text + "\n"))
        }
        Command::Stats {
            which: Stats::Hashing { n, m, trials },
        } => {
            allow_formats(g, &[Format::Csv])?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["n", "m", "trials", "mean_overfull", "bound_m"])?;
            for &n in n {
                for &m in m {
                    let mean = overfull_statistic(n, g.w, m, *trials, RngSeed(g.seed))
                        .map_err(|e| Usage(format!("{e}")))?;
                    w.serialize((n, m, trials, format!("{mean:.4}"), m))?;
                }
            }
            emit(g, &String::from_utf8(w.into_inner()?)?)
        }
        Command::DumpTree { input } => {
            allow_formats(g, &[Format::Text])?;
            let inst = read_instance(input)?;
            let text = with_instance!(&inst, i => make_tree(&convention(g).apply(i))?.dump());
            emit(g, &text)
        }
    }
}

fn allow_formats(g: &Global, ok: &[Format]) -> Result<()> {
    match g.format {
        Some(f) if !ok.contains(&f) => usage(format!(
            "--format={} is not available for this command",
            f.to_possible_value()
                .expect("no skipped variants")
                .get_name()
        )),
        _ => Ok(()),
    }
}

fn convention(g: &Global) -> TripleConvention {
    if g.distinct {
        TripleConvention::Distinct
    } else {
        TripleConvention::Any
    }
}

fn read_instance(path: &Path) -> Result<AnyInstance> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    AnyInstance::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn stats_json(stats: &AlgoStats) -> serde_json::Value {
    match stats {
        AlgoStats::Rand(s) => json!({
            "regime": s.regime,
            "R": s.bucket_count,
            "p": s.p,
            "retries": s.retries,
            "colliding_triples_seen": s.collisions.colliding_triples_seen,
            "bound": s.collisions.bound,
        }),
        other => serde_json::to_value(other).unwrap_or_default(),
    }
}

fn bench_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(BENCH_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner()?)?;
    Ok(format!("# schema={SCHEMA_VERSION}\n{body}"))
}
