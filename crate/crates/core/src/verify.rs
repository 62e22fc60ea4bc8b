//! Cross-solver agreement sweep and quick statistical harnesses.

use std::thread;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::hashing::{overfull_statistic, LinearHash};
use crate::instance::{
    brute_force_solve, generate_instance, GenerateMode, RngSeed, TripleConvention, XorInstance,
};
use crate::packed::PackedMachine;
use crate::randomized::{
    count_colliding_triples, plan_for, RandomizedConfig, Regime, RegimeChoice,
};
use crate::solve::{solve, Algo, SolveOptions};
use crate::xortrie::make_tree;

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: RngSeed,
    pub trials: u32,
    pub max_n: usize,
    pub widths: Vec<u32>,
    pub sim_width: u32,
    pub convention: TripleConvention,
    /// Runs the packed machine with its sorting network corrupted.
    pub fault: bool,
    pub threads: usize,
    /// Fewer trials in the statistical harnesses.
    pub quick: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: RngSeed(0),
            trials: 200,
            max_n: 256,
            widths: vec![8, 16, 32, 64],
            sim_width: 256,
            convention: TripleConvention::Any,
            fault: false,
            threads: thread::available_parallelism().map_or(1, |n| n.get()),
            quick: false,
        }
    }
}

impl VerifyConfig {
    pub fn quick() -> Self {
        VerifyConfig {
            trials: 40,
            max_n: 96,
            quick: true,
            ..Default::default()
        }
    }
}

/// A solver variant in the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Variant {
    pub algo: Algo,
    /// For [`Algo::Rand`] only.
    pub regime: Option<Regime>,
}

impl Variant {
    pub fn all() -> Vec<Variant> {
        let mut v: Vec<Variant> = Algo::ALL
            .into_iter()
            .filter(|&a| a != Algo::Brute && a != Algo::Rand)
            .map(|algo| Variant { algo, regime: None })
            .collect();
        for r in [Regime::LongWord, Regime::ShortWord] {
            v.push(Variant {
                algo: Algo::Rand,
                regime: Some(r),
            });
        }
        v
    }

    pub fn label(&self) -> String {
        match self.regime {
            Some(r) => format!("{}:{}", self.algo, r.name()),
            None => self.algo.to_string(),
        }
    }
}

/// Enough to regenerate the failing instance and rerun the solver.
#[derive(Clone, Debug, Serialize)]
pub struct Disagreement {
    pub variant: String,
    pub trial: u32,
    pub n: usize,
    pub w: u32,
    pub mode: GenerateMode,
    pub instance_seed: u64,
    pub solver_seed: u64,
    pub expected: bool,
    pub got: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnessResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub trials: u32,
    pub checks: u64,
    pub disagreements: Vec<Disagreement>,
    pub harnesses: Vec<HarnessResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.disagreements.is_empty() && self.harnesses.iter().all(|h| h.passed)
    }
}

/// Instance parameters of trial `t`: even trials planted, odd trials random.
pub fn trial_params(cfg: &VerifyConfig, t: u32) -> (usize, u32, GenerateMode, RngSeed) {
    let seed = cfg.seed.derive(t as u64);
    let mut rng = seed.derive(0).rng();
    let w = cfg.widths[rng.gen_range(0..cfg.widths.len())];
    let cap = if w >= 16 {
        cfg.max_n
    } else {
        cfg.max_n.min(1 << (w - 1))
    };
    let n = rng.gen_range(8.min(cap)..=cap.max(8));
    let mode = if t % 2 == 0 {
        GenerateMode::Planted
    } else {
        GenerateMode::Random
    };
    (n, w, mode, seed)
}

fn run_trial(cfg: &VerifyConfig, t: u32, variants: &[Variant]) -> (u64, Vec<Disagreement>) {
    let (n, w, mode, seed) = trial_params(cfg, t);
    let inst: XorInstance<u64> = match generate_instance(n, w, seed.derive(1), mode) {
        Ok(i) => i,
        Err(_) => return (0, Vec::new()),
    };
    let expected = brute_force_solve(cfg.convention.apply(&inst).as_ref()).is_some();
    let mut out = Vec::new();
    for v in variants {
        let opts = SolveOptions {
            convention: cfg.convention,
            seed: seed.derive(2),
            randomized: RandomizedConfig {
                sim_width: cfg.sim_width,
                regime: v.regime.map_or(RegimeChoice::Auto, RegimeChoice::Forced),
                fault: cfg.fault,
                ..Default::default()
            },
            ..Default::default()
        };
        let (got, error) = match solve(&inst, v.algo, &opts) {
            Ok(r) => (Some(r.solution.is_some()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        if got != Some(expected) {
            out.push(Disagreement {
                variant: v.label(),
                trial: t,
                n,
                w,
                mode,
                instance_seed: seed.derive(1).0,
                solver_seed: seed.derive(2).0,
                expected,
                got,
                error,
            });
        }
    }
    (variants.len() as u64, out)
}

/// Every variant against brute force on `cfg.trials` instances, fanned out
/// over `cfg.threads` workers; results are ordered by trial.
pub fn agreement_sweep(cfg: &VerifyConfig, variants: &[Variant]) -> (u64, Vec<Disagreement>) {
    let threads = cfg.threads.max(1);
    let results: Vec<(u64, Vec<Disagreement>)> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|k| {
                s.spawn(move || {
                    (k as u32..cfg.trials)
                        .step_by(threads)
                        .map(|t| run_trial(cfg, t, variants))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("verify worker panicked"))
            .collect()
    });
    let checks = results.iter().map(|r| r.0).sum();
    let mut dis: Vec<Disagreement> = results.into_iter().flat_map(|r| r.1).collect();
    dis.sort_by(|a, b| (a.trial, &a.variant).cmp(&(b.trial, &b.variant)));
    (checks, dis)
}

fn harness_packed(cfg: &VerifyConfig) -> Result<HarnessResult> {
    let mut m = PackedMachine::new(cfg.sim_width)?;
    m.set_fault(cfg.fault);
    let mut rng = cfg.seed.derive(10).rng();
    let per = if cfg.quick { 30 } else { 200 };
    let mut failures = 0;
    let mut cases = 0;
    for k in [2usize, 4, 8, 16] {
        for ell in [4u32, 8] {
            for _ in 0..per {
                let mut pool: Vec<u64> = (0..1u64 << ell).collect();
                let len = rng.gen_range(1..=k);
                let mut a = pool.partial_shuffle(&mut rng, len).0.to_vec();
                // overlap b with a about half the time
                let mut b = pool.partial_shuffle(&mut rng, len).0.to_vec();
                for (i, x) in b.iter_mut().enumerate() {
                    if rng.gen_bool(0.5) {
                        *x = a[i];
                    }
                }
                b.sort_unstable();
                b.dedup();
                cases += 1;
                let pa = m.pack(&a, ell)?;
                let sorted = m.bitonic_sort(&pa)?.unpack();
                a.sort_unstable();
                if sorted != a {
                    failures += 1;
                    continue;
                }
                let pa = m.pack_to(&a, k.next_power_of_two() as u32, ell)?;
                let pb = m.pack_to(&b, k.next_power_of_two() as u32, ell)?;
                let mut got = m.intersect_listing(&pa, &pb)?;
                got.sort_unstable();
                let mut want = Vec::new();
                for (i, x) in a.iter().enumerate() {
                    for (j, y) in b.iter().enumerate() {
                        if x == y {
                            want.push((i, j));
                        }
                    }
                }
                if got != want {
                    failures += 1;
                }
            }
        }
    }
    Ok(HarnessResult {
        name: "packed_scalar_equivalence",
        passed: failures == 0,
        detail: format!("{failures} of {cases} arrays disagree with scalar sort/intersection"),
    })
}

fn harness_hashing(cfg: &VerifyConfig) -> Result<HarnessResult> {
    let trials = if cfg.quick { 20 } else { 100 };
    let stat = overfull_statistic(1024, 32, 16, trials, cfg.seed.derive(11))?;
    Ok(HarnessResult {
        name: "overfull_statistic",
        passed: stat < 1.2 * 16.0,
        detail: format!("n=1024 m=16 trials={trials}: mean {stat:.3} (limit 19.2)"),
    })
}

fn harness_evaluation(cfg: &VerifyConfig) -> Result<HarnessResult> {
    let mut rng = cfg.seed.derive(12).rng();
    let cases = if cfg.quick { 2_000 } else { 20_000 };
    let h: LinearHash<u64> = LinearHash::sample(64, 16, &mut rng)?;
    let xs: Vec<u64> = (0..cases).map(|_| rng.gen()).collect();
    let batch = h.eval_batch(&xs)?;
    let mut bad = 0;
    for (x, b) in xs.iter().zip(&batch) {
        if h.eval_rowwise(x)? != *b || h.eval_columnwise(x)? != *b {
            bad += 1;
        }
    }
    Ok(HarnessResult {
        name: "evaluation_agreement",
        passed: bad == 0,
        detail: format!("{bad} of {cases} inputs disagree"),
    })
}

fn harness_traversal(cfg: &VerifyConfig) -> Result<HarnessResult> {
    let mut rng = cfg.seed.derive(13).rng();
    let mut bad = 0;
    let trials = if cfg.quick { 20 } else { 100 };
    for t in 0..trials {
        let n = rng.gen_range(1..200);
        let inst: XorInstance<u64> =
            generate_instance(n, 32, cfg.seed.derive(100 + t), GenerateMode::Random)?;
        let tree = make_tree(&inst)?;
        let a = inst.words()[rng.gen_range(0..n)] ^ rng.gen_range(0..1u64 << 32);
        let mut it = tree.traverse(a)?;
        let ys: Vec<u64> = it.by_ref().collect();
        let mut want: Vec<u64> = inst.words().iter().map(|x| x ^ a).collect();
        want.sort_unstable();
        if ys != want || it.visits() != 2 * n as u64 - 1 {
            bad += 1;
        }
    }
    Ok(HarnessResult {
        name: "traversal_sortedness",
        passed: bad == 0,
        detail: format!("{bad} of {trials} traversals wrong"),
    })
}

fn harness_collisions(cfg: &VerifyConfig) -> Result<HarnessResult> {
    let n = 128;
    let seeds = if cfg.quick { 5 } else { 20 };
    let plan = plan_for(n, cfg.sim_width, Regime::LongWord).clamped_to(32);
    let inst: XorInstance<u64> =
        generate_instance(n, 32, cfg.seed.derive(14), GenerateMode::Random)?;
    let mut total = 0u64;
    for s in 0..seeds {
        let mut rng = cfg.seed.derive(200 + s).rng();
        let h1 = LinearHash::sample(32, plan.r, &mut rng)?;
        let h2 = LinearHash::sample(32, plan.p, &mut rng)?;
        total += count_colliding_triples(&inst, &h1, &h2)?;
    }
    let mean = total as f64 / seeds as f64;
    let limit = 1.5 * plan.collision_bound(n) + 1.0;
    Ok(HarnessResult {
        name: "colliding_triples",
        passed: mean <= limit,
        detail: format!(
            "n={n} R={} p={}: mean {mean:.3}, limit {limit:.3}",
            plan.bucket_count(),
            plan.p
        ),
    })
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let (checks, disagreements) = agreement_sweep(cfg, &Variant::all());
    let harnesses = vec![
        harness_packed(cfg)?,
        harness_hashing(cfg)?,
        harness_evaluation(cfg)?,
        harness_traversal(cfg)?,
        harness_collisions(cfg)?,
    ];
    Ok(VerifyReport {
        trials: cfg.trials,
        checks,
        disagreements,
        harnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_verify_passes() {
        let cfg = VerifyConfig {
            trials: 16,
            ..VerifyConfig::quick()
        };
        let report = run_verify(&cfg).unwrap();
        assert!(report.passed(), "{report:#?}");
        assert_eq!(report.checks, 16 * Variant::all().len() as u64);
    }

    #[test]
    fn injected_fault_is_caught() {
        let cfg = VerifyConfig {
            trials: 16,
            fault: true,
            ..VerifyConfig::quick()
        };
        let report = run_verify(&cfg).unwrap();
        assert!(!report.passed());
        assert!(!report.harnesses[0].passed);
    }
}
