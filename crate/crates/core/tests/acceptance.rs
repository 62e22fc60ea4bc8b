//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the timing
//! criteria do not share the CPU with other tests.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use xor3::bench::{bench_one, doubling_series, time_ratios, BenchConfig};
use xor3::hashing::{overfull_statistic, LinearHash};
use xor3::instance::{brute_force_solve, generate_instance, GenerateMode, RngSeed, XorInstance};
use xor3::packed::PackedMachine;
use xor3::randomized::{
    count_colliding_triples, plan_for, solve_randomized, RandomizedConfig, Regime,
};
use xor3::reductions::{
    instance_shape_report, naive_offline_disjointness, naive_offline_intersection,
    solve_via_disjointness, solve_via_intersection, ReductionParams,
};
use xor3::xortrie::{make_tree, solve_quadratic, Node};
use xor3::{Algo, BitWord, SolutionTriple, WideWord};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

// ---------------------------------------------------------------- 1

#[derive(Default)]
struct Tally {
    checks: u64,
    disagreements: Vec<String>,
    time: std::collections::BTreeMap<&'static str, Duration>,
}

impl Tally {
    fn timed<T>(&mut self, who: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.time.entry(who).or_default() += start.elapsed();
        out
    }

    fn check<W: BitWord>(
        &mut self,
        who: &str,
        t: u32,
        inst: &XorInstance<W>,
        want: bool,
        got: Option<SolutionTriple<W>>,
    ) {
        self.checks += 1;
        let witness_ok = got
            .as_ref()
            .map_or(true, |s| s.a ^ s.b == s.c && s.is_witness_for(inst));
        if got.is_some() != want || !witness_ok {
            self.disagreements
                .push(format!("{who} trial {t}: expected {want}, got {got:?}"));
        }
    }
}

fn oracle_trial<W: BitWord>(t: u32, n: usize, w: u32, mode: GenerateMode, tally: &mut Tally) {
    let seed = RngSeed(0xacce_0001).derive(t as u64);
    let inst: XorInstance<W> = generate_instance(n, w, seed, mode).expect("generate");
    let want = tally.timed("brute", || brute_force_solve(&inst).is_some());
    let got = tally.timed("trie", || solve_quadratic(&inst));
    tally.check("trie", t, &inst, want, got);
    for regime in [Regime::LongWord, Regime::ShortWord] {
        let got = tally.timed(regime.name(), || {
            solve_randomized(&inst, seed.derive(1), &RandomizedConfig::forced(regime))
                .expect("randomized")
        });
        tally.check(regime.name(), t, &inst, want, got.solution);
    }
    let got = tally.timed("via-disjointness", || {
        solve_via_disjointness(&inst, 0.5, seed.derive(2), naive_offline_disjointness)
            .expect("disjointness")
    });
    tally.check("via-disjointness", t, &inst, want, got);
    let got = tally.timed("via-intersection", || {
        solve_via_intersection(&inst, 0.5, 0.5, seed.derive(3), naive_offline_intersection)
            .expect("intersection")
    });
    tally.check("via-intersection", t, &inst, want, got);
}

fn criterion_oracle() -> Outcome {
    let start = Instant::now();
    let widths = [8u32, 16, 32, 64, 128];
    let mut rng = RngSeed(0xacce_0000).rng();
    let mut tally = Tally::default();
    let mut planted = 0;
    for t in 0..1000u32 {
        let w = widths[t as usize % widths.len()];
        let cap = if w == 8 { 128 } else { 512 };
        let n = rng.gen_range(8..=cap);
        let mode = if t % 2 == 0 {
            planted += 1;
            GenerateMode::Planted
        } else {
            GenerateMode::Random
        };
        if w <= 64 {
            oracle_trial::<u64>(t, n, w, mode, &mut tally);
        } else {
            oracle_trial::<WideWord>(t, n, w, mode, &mut tally);
        }
    }
    let elapsed = start.elapsed();
    let passed = tally.disagreements.is_empty() && elapsed < Duration::from_secs(300);
    let mut detail = format!(
        "1000 instances ({planted} planted), {} solver runs, {} disagreements, {:.1}s (budget 300s)",
        tally.checks,
        tally.disagreements.len(),
        elapsed.as_secs_f64()
    );
    let per: Vec<String> = tally
        .time
        .iter()
        .map(|(k, d)| format!("{k} {:.1}s", d.as_secs_f64()))
        .collect();
    detail.push_str(&format!(" [{}]", per.join(", ")));
    if let Some(first) = tally.disagreements.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    outcome(passed, detail)
}

// ---------------------------------------------------------------- 2

fn criterion_golden_tree() -> Outcome {
    let inst = XorInstance::<u64>::from_u64s(4, &[0b0001, 0b0010, 0b0011, 0b1010, 0b1111]).unwrap();
    let tree = make_tree(&inst).unwrap();
    let root_label = match tree.node(tree.root()) {
        Node::Inner { label, .. } => Some(*label),
        Node::Leaf(_) => None,
    };
    // inner labels in pre-order below the root
    let mut inner = Vec::new();
    let mut stack = vec![tree.root()];
    while let Some(id) = stack.pop() {
        if let Node::Inner { left, label, right } = *tree.node(id) {
            if id != tree.root() {
                inner.push(label);
            }
            stack.push(right);
            stack.push(left);
        }
    }
    let leaves = tree.leaves();
    let passed = root_label == Some(0b1001)
        && inner == vec![0b0011, 0b0001, 0b0101]
        && leaves == vec![0b0001, 0b0010, 0b0011, 0b1010, 0b1111];
    outcome(
        passed,
        format!("root {root_label:x?}, inner {inner:x?}, leaves {leaves:x?}"),
    )
}

// ---------------------------------------------------------------- 3

fn traversal_width<W: BitWord>(w: u32, rng: &mut impl Rng) -> (u32, u32) {
    let mut bad = 0;
    for t in 0..200u32 {
        let n = rng.gen_range(1..=300usize.min(1 << w.min(20) >> 1));
        let inst: XorInstance<W> = generate_instance(
            n,
            w,
            RngSeed(0xacce_0300 + w as u64).derive(t as u64),
            GenerateMode::Random,
        )
        .unwrap();
        let tree = make_tree(&inst).unwrap();
        let a = W::random(rng, w);
        let mut it = tree.traverse(a).unwrap();
        let ys: Vec<W> = it.by_ref().collect();
        let ascending = ys.windows(2).all(|p| p[0] < p[1]);
        let got: BTreeSet<W> = ys.iter().copied().collect();
        let want: BTreeSet<W> = inst.words().iter().map(|&x| a ^ x).collect();
        if !(ascending && got == want && ys.len() == n && it.visits() == 2 * n as u64 - 1) {
            bad += 1;
        }
    }
    (200, bad)
}

fn criterion_traversal() -> Outcome {
    let mut rng = RngSeed(0xacce_0003).rng();
    let mut total = 0;
    let mut bad = 0;
    for w in [4u32, 8, 16, 32, 64] {
        let (t, b) = traversal_width::<u64>(w, &mut rng);
        total += t;
        bad += b;
    }
    for w in [128u32, 512] {
        let (t, b) = traversal_width::<WideWord>(w, &mut rng);
        total += t;
        bad += b;
    }
    outcome(
        bad == 0,
        format!("{total} (X, a) pairs over 7 widths, {bad} wrong"),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_hashing() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for (n, m, limit) in [(4096usize, 64u64, 76.8), (1024, 16, 19.2)] {
        let start = Instant::now();
        let stat = overfull_statistic(n, 64, m, 200, RngSeed(0xacce_0004)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        passed &= stat < limit && secs < 30.0;
        parts.push(format!("n={n} m={m}: {stat:.3} < {limit} in {secs:.2}s"));
    }
    outcome(passed, parts.join("; "))
}

// ---------------------------------------------------------------- 5

fn criterion_collisions() -> Outcome {
    let start = Instant::now();
    let n = 256;
    let w = 64;
    let inst: XorInstance<u64> =
        generate_instance(n, w, RngSeed(0xacce_0005), GenerateMode::Random).unwrap();
    let mut passed = true;
    let mut parts = Vec::new();
    for regime in [Regime::LongWord, Regime::ShortWord] {
        let plan = plan_for(n, 256, regime).clamped_to(w);
        let mut total = 0u64;
        for s in 0..50u64 {
            let mut rng = RngSeed(0xacce_0500).derive(s).rng();
            let h1 = LinearHash::sample(w, plan.r, &mut rng).unwrap();
            let h2 = LinearHash::sample(w, plan.p, &mut rng).unwrap();
            total += count_colliding_triples(&inst, &h1, &h2).unwrap();
        }
        let mean = total as f64 / 50.0;
        // 2n³/(R·P), recomputed here from the plan's exponents
        let bound = 2.0 * (n as f64).powi(3) / ((1u64 << plan.r) as f64 * (1u64 << plan.p) as f64);
        let limit = 1.5 * bound + 1.0;
        passed &= mean <= limit;
        parts.push(format!(
            "{} R=2^{} P=2^{}: mean {mean:.3} <= {limit:.3}",
            regime.name(),
            plan.r,
            plan.p
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    passed &= secs < 120.0;
    parts.push(format!("{secs:.1}s"));
    outcome(passed, parts.join("; "))
}

// ---------------------------------------------------------------- 6

fn criterion_packed() -> Outcome {
    let mut m = PackedMachine::new(256).unwrap();
    let mut rng = RngSeed(0xacce_0006).rng();
    let mut cases = 0;
    let mut bad = 0;
    for k in [2usize, 4, 8] {
        for ell in [4u32, 8] {
            for _ in 0..2000 {
                cases += 1;
                let len = rng.gen_range(0..=k);
                let vals: Vec<u64> = (0..len).map(|_| rng.gen_range(0..1u64 << ell)).collect();
                let pa = m.pack_to(&vals, k as u32, ell).unwrap();
                let mut want = vals.clone();
                want.sort_unstable();
                let sorted = m.bitonic_sort(&pa).unwrap().unpack();
                let mut pool: Vec<u64> = (0..1u64 << ell).collect();
                let (la, lb) = (rng.gen_range(0..=k), rng.gen_range(0..=k));
                let a = pool.partial_shuffle(&mut rng, la).0.to_vec();
                let b = pool.partial_shuffle(&mut rng, lb).0.to_vec();
                let pa = m.pack_to(&a, k as u32, ell).unwrap();
                let pb = m.pack_to(&b, k as u32, ell).unwrap();
                let mut got = m.intersect_listing(&pa, &pb).unwrap();
                got.sort_unstable();
                let mut pairs = Vec::new();
                for (i, x) in a.iter().enumerate() {
                    for (j, y) in b.iter().enumerate() {
                        if x == y {
                            pairs.push((i, j));
                        }
                    }
                }
                if sorted != want || got != pairs {
                    bad += 1;
                }
            }
        }
    }

    // least-squares fit of ops = a·log²k + b over k = 4..32
    let mut pts = Vec::new();
    for k in [4u32, 8, 16, 32] {
        let vals: Vec<u64> = (0..k as u64).rev().collect();
        let pa = m.pack_to(&vals, k, 8).unwrap();
        m.reset_ops();
        m.bitonic_sort(&pa).unwrap();
        let lg = k.trailing_zeros() as f64;
        pts.push((lg * lg, m.ops() as f64));
    }
    let np = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let worst = pts
        .iter()
        .map(|&(x, y)| ((a * x + b) - y).abs() / y)
        .fold(0.0, f64::max);
    outcome(
        bad == 0 && worst <= 0.2,
        format!(
            "{cases} arrays, {bad} mismatches; ops ≈ {a:.2}·log²k + {b:.2}, worst deviation {:.1}%",
            worst * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 7

fn agree<W: BitWord>(h: &LinearHash<W>, xs: &[W]) -> bool {
    let batch = h.eval_batch(xs).unwrap();
    xs.iter()
        .zip(&batch)
        .all(|(x, &b)| h.eval_rowwise(x).unwrap() == b && h.eval_columnwise(x).unwrap() == b)
}

fn criterion_evaluation() -> Outcome {
    let mut rng = RngSeed(0xacce_0007).rng();
    let mut ok = true;
    let mut exhaustive = 0u64;
    for ell in 1..=12u32 {
        for mu in [1u32, 4, 8, 12].into_iter().filter(|&mu| mu <= ell) {
            let h: LinearHash<u64> = LinearHash::sample(ell, mu, &mut rng).unwrap();
            let xs: Vec<u64> = (0..1u64 << ell).collect();
            exhaustive += xs.len() as u64;
            ok &= agree(&h, &xs);
        }
    }
    let h: LinearHash<u64> = LinearHash::sample(64, 32, &mut rng).unwrap();
    let xs: Vec<u64> = (0..100_000).map(|_| rng.gen()).collect();
    ok &= agree(&h, &xs);
    let h: LinearHash<WideWord> = LinearHash::sample(256, 32, &mut rng).unwrap();
    let xs: Vec<WideWord> = (0..100_000)
        .map(|_| WideWord::random(&mut rng, 256))
        .collect();
    ok &= agree(&h, &xs);

    // Pr[h(x) = h(y)] for x ≠ y over fresh h
    let trials = 10_000u32;
    let mut coll = 0u32;
    for _ in 0..trials {
        let x: u64 = rng.gen();
        let mut y: u64 = rng.gen();
        while y == x {
            y = rng.gen();
        }
        let h: LinearHash<u64> = LinearHash::sample(64, 8, &mut rng).unwrap();
        if h.hash(&x) == h.hash(&y) {
            coll += 1;
        }
    }
    let p = 1.0 / 256.0;
    let rate = coll as f64 / trials as f64;
    let tol = 5.0 * (p / trials as f64).sqrt();
    let universal = (rate - p).abs() <= tol;
    outcome(
        ok && universal,
        format!(
            "{exhaustive} exhaustive + 2·10⁵ random inputs agree: {ok}; collision rate {rate:.5} vs {p:.5} ± {tol:.5}"
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_growth() -> Outcome {
    let cfg = BenchConfig {
        reps: 2,
        ..BenchConfig::new(Algo::Trie, 64, 512, RngSeed(0xacce_0008))
    };
    let rows = doubling_series::<u64>(10, 15, &cfg).unwrap();
    let ratios = time_ratios(&rows);
    let in_band = ratios.iter().filter(|r| (3.3..=4.8).contains(*r)).count();
    let trie_at = rows.iter().find(|r| r.n == 1 << 14).unwrap();
    let rand_cfg = BenchConfig {
        reps: 1,
        ..BenchConfig::new(Algo::Rand, 64, 512, RngSeed(0xacce_0008))
    };
    let rand_at = bench_one::<u64>(1 << 14, &rand_cfg).unwrap();
    let trie_cmp = trie_at.key_comparisons.unwrap();
    let rand_ops = rand_at.word_ops.unwrap();
    let agree = trie_at.found == rand_at.found;
    outcome(
        in_band >= 4 && rand_ops < trie_cmp && agree,
        format!(
            "ratios {:?} ({in_band}/5 in [3.3, 4.8]); n=2^14 W=512: rand ops {rand_ops} vs trie comparisons {trie_cmp}",
            ratios.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn ceil_pow2_exp(x: f64) -> u32 {
    let mut e = 0;
    while ((1u64 << e) as f64) < x {
        e += 1;
    }
    e
}

fn criterion_shapes() -> Outcome {
    let n = 256usize;
    let inst: XorInstance<u64> =
        generate_instance(n, 64, RngSeed(0xacce_0009), GenerateMode::Random).unwrap();
    let nf = n as f64;
    let mut passed = true;
    let mut parts = Vec::new();

    // disjointness, γ = 0.5
    let r = ceil_pow2_exp(nf.powf(0.5).ceil());
    let rr = 1u64 << r;
    let half = (5.0 * nf / rr as f64).ceil();
    let p = ceil_pow2_exp(half * half).div_ceil(2);
    let k = ceil_pow2_exp(nf) as u64;
    let fam = rr * (1 << p) * k;
    let q = rr * n as u64 * k;
    let smax = 3 * n as u64 / rr;
    let rep = instance_shape_report(&inst, ReductionParams::disjointness(0.5), RngSeed(1)).unwrap();
    let ok = rep.measured.family_a == fam
        && rep.measured.family_b == fam
        && rep.measured.queries == q
        && rep.formula.family_a == fam
        && rep.formula.queries == q
        && rep.formula.max_set_size == smax
        && rep.measured.max_set_size <= smax
        && rep.measured.universe_size == 1 << (2 * p);
    passed &= ok;
    parts.push(format!(
        "disjointness |A|=|B|={} q={} max|S|={} (bound {}) |C|={} [{}]",
        rep.measured.family_a,
        rep.measured.queries,
        rep.measured.max_set_size,
        rep.formula.max_set_size,
        rep.measured.universe_size,
        rep.rounding
    ));

    // intersection, γ = 0.25, δ = 0.5
    let r = ceil_pow2_exp(nf.powf(0.25).ceil());
    let rr = 1u64 << r;
    let p = ceil_pow2_exp((nf.powf(1.5) / rr as f64).ceil()).div_ceil(2);
    let fam = rr * (1 << p);
    let q = rr * n as u64;
    let smax = 3 * n as u64 / rr;
    let rep =
        instance_shape_report(&inst, ReductionParams::intersection(0.25, 0.5), RngSeed(1)).unwrap();
    let ok = rep.measured.family_a == fam
        && rep.measured.family_b == fam
        && rep.measured.queries == q
        && rep.formula.family_a == fam
        && rep.formula.queries == q
        && rep.formula.max_set_size == smax
        && rep.measured.max_set_size <= smax
        && rep.measured.universe_size == 1 << (2 * p);
    passed &= ok;
    parts.push(format!(
        "intersection |A|=|B|={} q={} max|S|={} (bound {}) |C|={} output {:?} [{}]",
        rep.measured.family_a,
        rep.measured.queries,
        rep.measured.max_set_size,
        rep.formula.max_set_size,
        rep.measured.universe_size,
        rep.output_size,
        rep.rounding
    ));
    outcome(passed, parts.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", criterion_oracle),
        ("five-key golden tree", criterion_golden_tree),
        ("traversal sortedness", criterion_traversal),
        ("overfull statistic", criterion_hashing),
        ("colliding-triple bound", criterion_collisions),
        ("packed primitives", criterion_packed),
        ("evaluation agreement", criterion_evaluation),
        ("quadratic growth proxy", criterion_growth),
        ("reduction shapes", criterion_shapes),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        let selected = filter
            .iter()
            .any(|f| *f == id || (f.parse::<u32>().is_err() && name.contains(f.as_str())));
        if !filter.is_empty() && !selected {
            continue;
        }
        let start = Instant::now();
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} [{id}] {name} ({:.1}s): {}",
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
