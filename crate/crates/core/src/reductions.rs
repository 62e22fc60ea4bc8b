//! 3XOR through offline set problems.
//!
//! After bucketing with `h1` and settling the bad elements directly, every
//! good bucket `X_u` is turned into shifted sets over `C = {0,1}^{2p}`:
//!
//! ```text
//! X↑_{u,v} = { (h21(a) ⊕ v, h22(a)) : a ∈ X_u }
//! X↓_{u,v} = { (h21(a), h22(a) ⊕ v) : a ∈ X_u }
//! ```
//!
//! If `a ∈ X_u`, `b ∈ X_{u⊕h1(c)}` and `a ⊕ b = c`, then `(h21(a) ⊕ h21(c), h22(a))`
//! lies in both `X↑_{u,h21(c)}` and `X↓_{u⊕h1(c),h22(c)}`, so one query per
//! `(c, u)` covers every solution. A set element is stored as `(x << p) | y`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{sample_bucket_hash, BucketTable, LinearHash, MAX_BUCKET_BITS};
use crate::instance::{RngSeed, SolutionTriple, XorInstance};
use crate::word::BitWord;

/// Fingerprint halves are capped so that `|C| = 2^{2p}` stays addressable.
pub const MAX_HALF_BITS: u32 = 24;

/// `(index into family_a, index into family_b, tag)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query(pub usize, pub usize, pub u64);

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfflineSetInstance {
    pub universe_size: u64,
    pub family_a: Vec<Vec<u64>>,
    pub family_b: Vec<Vec<u64>>,
    pub queries: Vec<Query>,
}

impl OfflineSetInstance {
    pub fn validate(&self) -> Result<()> {
        for (name, fam) in [("A", &self.family_a), ("B", &self.family_b)] {
            for (i, s) in fam.iter().enumerate() {
                if s.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter(format!(
                        "set {name}[{i}] is not strictly ascending"
                    )));
                }
                if s.last().is_some_and(|&x| x >= self.universe_size) {
                    return Err(Error::InvalidParameter(format!(
                        "set {name}[{i}] leaves the universe"
                    )));
                }
            }
        }
        for (k, q) in self.queries.iter().enumerate() {
            if q.0 >= self.family_a.len() || q.1 >= self.family_b.len() {
                return Err(Error::InvalidParameter(format!(
                    "query {k} indexes past its family"
                )));
            }
        }
        Ok(())
    }

    pub fn max_set_size(&self) -> usize {
        self.family_a
            .iter()
            .chain(&self.family_b)
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }

    fn pair(&self, q: &Query) -> (&[u64], &[u64]) {
        (&self.family_a[q.0], &self.family_b[q.1])
    }
}

fn merge_intersect(s: &[u64], t: &[u64], mut hit: impl FnMut(u64) -> bool) {
    let (mut i, mut j) = (0, 0);
    while i < s.len() && j < t.len() {
        match s[i].cmp(&t[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if !hit(s[i]) {
                    return;
                }
                i += 1;
                j += 1;
            }
        }
    }
}

/// Indices of the queries whose two sets meet, ascending.
pub fn naive_offline_disjointness(inst: &OfflineSetInstance) -> Vec<usize> {
    let mut out = Vec::new();
    for (k, q) in inst.queries.iter().enumerate() {
        let (s, t) = inst.pair(q);
        let mut meet = false;
        merge_intersect(s, t, |_| {
            meet = true;
            false
        });
        if meet {
            out.push(k);
        }
    }
    out
}

/// `S ∩ S'` for every query, in query order.
pub fn naive_offline_intersection(inst: &OfflineSetInstance) -> Vec<Vec<u64>> {
    inst.queries
        .iter()
        .map(|q| {
            let (s, t) = inst.pair(q);
            let mut common = Vec::new();
            merge_intersect(s, t, |x| {
                common.push(x);
                true
            });
            common
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionTarget {
    Disjointness,
    Intersection,
}

impl FromStr for ReductionTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disjointness" => Ok(ReductionTarget::Disjointness),
            "intersection" => Ok(ReductionTarget::Intersection),
            _ => Err(Error::InvalidParameter(format!(
                "unknown reduction target {s:?}"
            ))),
        }
    }
}

impl fmt::Display for ReductionTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionTarget::Disjointness => "disjointness",
            ReductionTarget::Intersection => "intersection",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReductionParams {
    pub target: ReductionTarget,
    pub gamma: f64,
    /// Intersection only.
    pub delta: f64,
}

impl ReductionParams {
    pub fn disjointness(gamma: f64) -> Self {
        ReductionParams {
            target: ReductionTarget::Disjointness,
            gamma,
            delta: 0.0,
        }
    }

    pub fn intersection(gamma: f64, delta: f64) -> Self {
        ReductionParams {
            target: ReductionTarget::Intersection,
            gamma,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.target {
            ReductionTarget::Disjointness => self.gamma > 0.0 && self.gamma < 1.0,
            ReductionTarget::Intersection => {
                (0.0..1.0).contains(&self.gamma)
                    && self.delta > 0.0
                    && self.delta < 1.0 + self.gamma
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "gamma = {}, delta = {} out of range for {}",
                self.gamma, self.delta, self.target
            )))
        }
    }

    /// Sizes as evaluated from the formulas, before any data is seen.
    pub fn dims(&self, n: usize, width: u32) -> Dims {
        let nf = n.max(1) as f64;
        let r_target = nf.powf(self.gamma).ceil().max(1.0) as u64;
        let r = ceil_log2(r_target).min(width).min(MAX_BUCKET_BITS);
        let rr = 1u64 << r;
        let (p_target, k) = match self.target {
            ReductionTarget::Disjointness => {
                let half = (5.0 * nf / rr as f64).ceil() as u64;
                (half.saturating_mul(half), ceil_log2(n as u64).max(1))
            }
            ReductionTarget::Intersection => {
                ((nf.powf(1.0 + self.delta) / rr as f64).ceil() as u64, 1)
            }
        };
        let p = ceil_log2(p_target)
            .div_ceil(2)
            .clamp(1, width.min(MAX_HALF_BITS));
        Dims {
            r_target,
            r,
            p_target,
            p,
            k,
        }
    }
}

fn ceil_log2(x: u64) -> u32 {
    x.max(1).next_power_of_two().trailing_zeros()
}

/// `R = 2^r`, `P = 2^{2p}`, `K` fingerprint pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Dims {
    /// `⌈n^γ⌉`.
    pub r_target: u64,
    pub r: u32,
    /// `⌈(5n/R)⌉²` or `⌈n^{1+δ}/R⌉`.
    pub p_target: u64,
    pub p: u32,
    pub k: u32,
}

impl Dims {
    pub fn bucket_count(&self) -> u64 {
        1 << self.r
    }

    pub fn universe_size(&self) -> u64 {
        1 << (2 * self.p)
    }

    /// `R · 2^p · K`.
    pub fn family_size(&self) -> u64 {
        (self.bucket_count() << self.p) * self.k as u64
    }
}

/// Triples with a bad element: for each bad `b`, merge sorted `X ⊕ b`
/// against `X`.
fn bad_pass<W: BitWord>(inst: &XorInstance<W>, bt: &BucketTable<W>) -> Option<SolutionTriple<W>> {
    let xs = inst.words();
    let mut shifted = Vec::with_capacity(xs.len());
    for &b in bt.bad_elements() {
        shifted.clear();
        shifted.extend(xs.iter().map(|&a| a ^ b));
        shifted.sort_unstable();
        let (mut i, mut j) = (0, 0);
        while i < shifted.len() && j < xs.len() {
            match shifted[i].cmp(&xs[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let c = xs[j];
                    return Some(SolutionTriple::new(c ^ b, b, c));
                }
            }
        }
    }
    None
}

/// Good buckets with their fingerprint pairs, dense over `u ∈ [R]`.
struct Shifted<W> {
    dims: Dims,
    buckets: Vec<Vec<W>>,
    h21: Vec<LinearHash<W>>,
    h22: Vec<LinearHash<W>>,
}

impl<W: BitWord> Shifted<W> {
    fn new<R: Rng + ?Sized>(
        bt: &BucketTable<W>,
        dims: Dims,
        width: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let mut buckets = vec![Vec::new(); dims.bucket_count() as usize];
        for (u, elems) in bt.nonempty() {
            if bt.is_good(u) {
                buckets[u as usize] = elems.to_vec();
            }
        }
        let mut h21 = Vec::new();
        let mut h22 = Vec::new();
        for _ in 0..dims.k {
            h21.push(LinearHash::sample(width, dims.p, rng)?);
            h22.push(LinearHash::sample(width, dims.p, rng)?);
        }
        Ok(Shifted {
            dims,
            buckets,
            h21,
            h22,
        })
    }

    fn pair(&self, i: usize, x: &W) -> (u64, u64) {
        (self.h21[i].hash(x), self.h22[i].hash(x))
    }

    fn pack(&self, x: u64, y: u64) -> u64 {
        x << self.dims.p | y
    }

    /// Families A and B, set `(i·R + u)·2^p + v` holding `X↑ⁱ_{u,v}` / `X↓ⁱ_{u,v}`.
    fn families(&self) -> (Vec<Vec<u64>>, Vec<Vec<u64>>) {
        let pv = 1u64 << self.dims.p;
        let mut up = Vec::new();
        let mut down = Vec::new();
        for i in 0..self.dims.k as usize {
            for bucket in &self.buckets {
                let fps: Vec<(u64, u64)> = bucket.iter().map(|a| self.pair(i, a)).collect();
                for v in 0..pv {
                    let mut s: Vec<u64> = fps.iter().map(|&(x, y)| self.pack(x ^ v, y)).collect();
                    let mut t: Vec<u64> = fps.iter().map(|&(x, y)| self.pack(x, y ^ v)).collect();
                    s.sort_unstable();
                    s.dedup();
                    t.sort_unstable();
                    t.dedup();
                    up.push(s);
                    down.push(t);
                }
            }
        }
        (up, down)
    }

    fn set_index(&self, i: usize, u: u64, v: u64) -> usize {
        (((i as u64 * self.dims.bucket_count()) + u) << self.dims.p | v) as usize
    }

    /// One query per `(c, u, i)`, tagged `(c_idx·R + u)·K + i`.
    fn queries(&self, xs: &[W], h1_of: &[u64]) -> Vec<Query> {
        let rr = self.dims.bucket_count();
        let k = self.dims.k as u64;
        let mut qs = Vec::with_capacity(xs.len() * (rr * k) as usize);
        for (ci, c) in xs.iter().enumerate() {
            for u in 0..rr {
                for i in 0..k as usize {
                    let (x, y) = self.pair(i, c);
                    qs.push(Query(
                        self.set_index(i, u, x),
                        self.set_index(i, u ^ h1_of[ci], y),
                        (ci as u64 * rr + u) * k + i as u64,
                    ));
                }
            }
        }
        qs
    }
}

/// An offline instance together with what is needed to map answers back.
pub struct Reduction<W> {
    pub params: ReductionParams,
    pub dims: Dims,
    pub offline: OfflineSetInstance,
    shifted: Shifted<W>,
    h1_of: Vec<u64>,
}

impl<W: BitWord> Reduction<W> {
    fn build(
        inst: &XorInstance<W>,
        bt: &BucketTable<W>,
        params: ReductionParams,
        dims: Dims,
        seed: RngSeed,
    ) -> Result<Self> {
        let shifted = Shifted::new(bt, dims, inst.width(), &mut seed.derive(2).rng())?;
        let h1_of = bt.h1().eval_batch(inst.words())?;
        let (family_a, family_b) = shifted.families();
        let offline = OfflineSetInstance {
            universe_size: dims.universe_size(),
            family_a,
            family_b,
            queries: shifted.queries(inst.words(), &h1_of),
        };
        Ok(Reduction {
            params,
            dims,
            offline,
            shifted,
            h1_of,
        })
    }

    /// Good elements of bucket `u` (bad buckets are empty here).
    pub fn bucket(&self, u: u64) -> &[W] {
        &self.shifted.buckets[u as usize]
    }

    /// `h1` of the `i`-th key in sorted order.
    pub fn bucket_of(&self, key_index: usize) -> u64 {
        self.h1_of[key_index]
    }

    /// Position in `offline.queries` of the query for `(c, u, i)`.
    pub fn query_index(&self, key_index: usize, u: u64, rep: u32) -> usize {
        ((key_index as u64 * self.dims.bucket_count() + u) * self.dims.k as u64 + rep as u64)
            as usize
    }

    /// `(X_u ⊕ c) ∩ X_{h1(c)⊕u}` by sorting and merging.
    fn real_check(&self, ci: usize, c: W, u: u64) -> Option<SolutionTriple<W>> {
        let mut shifted: Vec<W> = self.bucket(u).iter().map(|&a| a ^ c).collect();
        shifted.sort_unstable();
        let other = self.bucket(u ^ self.h1_of[ci]);
        shifted
            .iter()
            .find(|b| other.binary_search(b).is_ok())
            .map(|&b| SolutionTriple::new(b ^ c, b, c))
    }
}

fn buckets_for<W: BitWord>(
    inst: &XorInstance<W>,
    dims: &Dims,
    seed: RngSeed,
) -> Result<BucketTable<W>> {
    let h1 = sample_bucket_hash(inst.width(), dims.r, &mut seed.derive(1).rng())?;
    BucketTable::with_hash(inst, h1)
}

/// Builds the offline instance for `params` without solving anything.
pub fn reduce<W: BitWord>(
    inst: &XorInstance<W>,
    params: ReductionParams,
    seed: RngSeed,
) -> Result<Reduction<W>> {
    params.validate()?;
    let dims = params.dims(inst.len(), inst.width());
    let bt = buckets_for(inst, &dims, seed)?;
    Reduction::build(inst, &bt, params, dims, seed)
}

pub fn solve_via_disjointness<W, F>(
    inst: &XorInstance<W>,
    gamma: f64,
    seed: RngSeed,
    offline_solver: F,
) -> Result<Option<SolutionTriple<W>>>
where
    W: BitWord,
    F: FnOnce(&OfflineSetInstance) -> Vec<usize>,
{
    let params = ReductionParams::disjointness(gamma);
    params.validate()?;
    if inst.is_empty() {
        return Ok(None);
    }
    let dims = params.dims(inst.len(), inst.width());
    let bt = buckets_for(inst, &dims, seed)?;
    if let Some(t) = bad_pass(inst, &bt) {
        return Ok(Some(t));
    }
    let red = Reduction::build(inst, &bt, params, dims, seed)?;
    let answered = offline_solver(&red.offline);
    let mut positive = HashSet::with_capacity(answered.len());
    for k in answered {
        let q = red.offline.queries.get(k).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "offline solver returned query {k} of {}",
                red.offline.queries.len()
            ))
        })?;
        positive.insert(q.2);
    }
    let rr = dims.bucket_count();
    let kk = dims.k as u64;
    for (ci, &c) in inst.words().iter().enumerate() {
        for u in 0..rr {
            let base = (ci as u64 * rr + u) * kk;
            if (0..kk).all(|i| positive.contains(&(base + i))) {
                if let Some(t) = red.real_check(ci, c, u) {
                    return Ok(Some(t));
                }
            }
        }
    }
    Ok(None)
}

/// `⌈δ · n^δ · ln n⌉`.
pub fn guess_budget(n: usize, delta: f64) -> u64 {
    let nf = n as f64;
    if n < 2 {
        return 0;
    }
    (delta * nf.powf(delta) * nf.ln()).ceil() as u64
}

pub fn solve_via_intersection<W, F>(
    inst: &XorInstance<W>,
    gamma: f64,
    delta: f64,
    seed: RngSeed,
    offline_solver: F,
) -> Result<Option<SolutionTriple<W>>>
where
    W: BitWord,
    F: FnOnce(&OfflineSetInstance) -> Vec<Vec<u64>>,
{
    let params = ReductionParams::intersection(gamma, delta);
    params.validate()?;
    if inst.is_empty() {
        return Ok(None);
    }
    let xs = inst.words();
    let mut rng = seed.derive(3).rng();
    for _ in 0..guess_budget(xs.len(), delta) {
        let a = xs[rng.gen_range(0..xs.len())];
        let b = xs[rng.gen_range(0..xs.len())];
        if inst.contains(&(a ^ b)) {
            return Ok(Some(SolutionTriple::new(a, b, a ^ b)));
        }
    }
    let dims = params.dims(xs.len(), inst.width());
    let bt = buckets_for(inst, &dims, seed)?;
    if let Some(t) = bad_pass(inst, &bt) {
        return Ok(Some(t));
    }
    let red = Reduction::build(inst, &bt, params, dims, seed)?;
    let answers = offline_solver(&red.offline);
    if answers.len() != red.offline.queries.len() {
        return Err(Error::InvalidParameter(format!(
            "offline solver answered {} of {} queries",
            answers.len(),
            red.offline.queries.len()
        )));
    }

    // back-pointers: fingerprint pair -> generating elements, per bucket
    let sh = &red.shifted;
    let generators: Vec<HashMap<(u64, u64), Vec<W>>> = sh
        .buckets
        .iter()
        .map(|bucket| {
            let mut m: HashMap<(u64, u64), Vec<W>> = HashMap::new();
            for a in bucket {
                m.entry(sh.pair(0, a)).or_default().push(*a);
            }
            m
        })
        .collect();
    let p = dims.p;
    let low = (1u64 << p) - 1;
    let rr = dims.bucket_count();
    for (q, common) in red.offline.queries.iter().zip(&answers) {
        let ci = (q.2 / rr) as usize;
        let u = q.2 % rr;
        let c = xs[ci];
        let (c1, c2) = sh.pair(0, &c);
        let u2 = u ^ red.h1_of[ci];
        for &y in common {
            let (x, z) = (y >> p, y & low);
            let (Some(gen_a), Some(gen_b)) = (
                generators[u as usize].get(&(x ^ c1, z)),
                generators[u2 as usize].get(&(x, z ^ c2)),
            ) else {
                continue;
            };
            for &a in gen_a {
                for &b in gen_b {
                    if a ^ b == c {
                        return Ok(Some(SolutionTriple::new(a, b, c)));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Shape of a generated instance next to the values its parameters predict.
#[derive(Clone, Debug, Serialize)]
pub struct ShapeReport {
    pub target: ReductionTarget,
    pub n: usize,
    pub gamma: f64,
    pub delta: Option<f64>,
    pub dims: Dims,
    pub formula: ShapeCounts,
    pub measured: ShapeCounts,
    /// Θ targets without constants or rounding.
    pub nominal: NominalShape,
    /// Total size of all query intersections (intersection target only).
    pub output_size: Option<u64>,
    pub rounding: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ShapeCounts {
    pub universe_size: u64,
    pub family_a: u64,
    pub family_b: u64,
    /// Formula side: the good-bucket bound `⌊3n/R⌋`; measured side: the
    /// largest set actually built.
    pub max_set_size: u64,
    pub queries: u64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NominalShape {
    pub universe_size: f64,
    pub family_size: f64,
    pub max_set_size: f64,
    pub queries: f64,
}

impl ReductionParams {
    pub fn nominal(&self, n: usize) -> NominalShape {
        let nf = n.max(2) as f64;
        let (g, d) = (self.gamma, self.delta);
        match self.target {
            ReductionTarget::Disjointness => NominalShape {
                universe_size: nf.powf(2.0 - 2.0 * g),
                family_size: nf * nf.log2(),
                max_set_size: nf.powf(1.0 - g),
                queries: nf.powf(1.0 + g) * nf.log2(),
            },
            ReductionTarget::Intersection => NominalShape {
                universe_size: nf.powf(1.0 + d - g),
                family_size: nf.powf(1.0 + d + g).sqrt(),
                max_set_size: nf.powf(1.0 - g),
                queries: nf.powf(1.0 + g),
            },
        }
    }

    pub fn formula_counts(&self, n: usize, width: u32) -> ShapeCounts {
        let dims = self.dims(n, width);
        ShapeCounts {
            universe_size: dims.universe_size(),
            family_a: dims.family_size(),
            family_b: dims.family_size(),
            max_set_size: (3 * n as u64) >> dims.r,
            queries: n as u64 * dims.bucket_count() * dims.k as u64,
        }
    }
}

pub fn instance_shape_report<W: BitWord>(
    inst: &XorInstance<W>,
    params: ReductionParams,
    seed: RngSeed,
) -> Result<ShapeReport> {
    let red = reduce(inst, params, seed)?;
    let off = &red.offline;
    let measured = ShapeCounts {
        universe_size: off.universe_size,
        family_a: off.family_a.len() as u64,
        family_b: off.family_b.len() as u64,
        max_set_size: off.max_set_size() as u64,
        queries: off.queries.len() as u64,
    };
    let output_size = (params.target == ReductionTarget::Intersection).then(|| {
        naive_offline_intersection(off)
            .iter()
            .map(|s| s.len() as u64)
            .sum()
    });
    let d = red.dims;
    let rounding = format!(
        "R = 2^{} >= ceil(n^gamma) = {}; P = 2^(2*{}) >= {}{}",
        d.r,
        d.r_target,
        d.p,
        d.p_target,
        if params.target == ReductionTarget::Disjointness {
            format!("; K = ceil(log2 n) = {}", d.k)
        } else {
            String::new()
        }
    );
    Ok(ShapeReport {
        target: params.target,
        n: inst.len(),
        gamma: params.gamma,
        delta: (params.target == ReductionTarget::Intersection).then_some(params.delta),
        dims: d,
        formula: params.formula_counts(inst.len(), inst.width()),
        measured,
        nominal: params.nominal(inst.len()),
        output_size,
        rounding,
    })
}
