//! Randomized 3XOR via buckets and fingerprints.
//!
//! `h1` splits `X` into `R = 2^r` buckets; a triple `a ⊕ b = c` with
//! `h1(b) = u` has `c` in bucket `h1(a) ⊕ u`. Buckets larger than `3n/R` are
//! bad; `h1` is redrawn until fewer than `2R` elements are bad. Triples with
//! two or more bad elements are found by checking all pairs of bad elements
//! against a static dictionary for `X`. For the rest, `h2` replaces every
//! element of a good bucket by a `p`-bit fingerprint:
//!
//! - long words: fingerprints of a bucket are packed into one simulated word
//!   and candidate pairs come out of a packed intersection;
//! - short words: a precomputed lookup table answers, for the fingerprint
//!   arrays of three buckets (or two, after XORing in `h2(a)`), whether a
//!   matching combination exists.
//!
//! Every candidate is verified on the real keys; fingerprint matches that
//! fail verification are colliding triples and are counted.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::dict::StaticDict;
use crate::error::{Error, Result};
use crate::hashing::{
    resample_until_few_bad, BucketTable, LinearHash, DEFAULT_RESAMPLE_BUDGET, MAX_BUCKET_BITS,
};
use crate::instance::{RngSeed, SolutionTriple, XorInstance};
use crate::packed::{PackedArray, PackedMachine, DEFAULT_SIM_WIDTH, MAX_PAYLOAD_BITS};
use crate::word::{low_mask, BitWord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LongWord,
    ShortWord,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::LongWord => "long_word",
            Regime::ShortWord => "short_word",
        }
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" | "long_word" | "long-word" => Ok(Regime::LongWord),
            "short" | "short_word" | "short-word" => Ok(Regime::ShortWord),
            _ => Err(Error::InvalidParameter(format!("unknown regime {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RegimeChoice {
    #[default]
    Auto,
    Forced(Regime),
}

impl FromStr for RegimeChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(RegimeChoice::Auto),
            _ => s.parse().map(RegimeChoice::Forced),
        }
    }
}

/// Bucket and fingerprint parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FingerprintPlan {
    pub regime: Regime,
    pub r: u32,
    pub p: u32,
    pub sim_width: u32,
}

impl FingerprintPlan {
    pub fn bucket_count(&self) -> u64 {
        1u64 << self.r
    }

    pub fn fingerprint_space(&self) -> u64 {
        1u64 << self.p
    }

    /// Largest good bucket: `⌊3n/R⌋`, at least 1.
    pub fn fieldcount(&self, n: usize) -> u32 {
        ((3 * n as u64) >> self.r).max(1) as u32
    }

    /// Expected colliding triples given few bad elements: `2n³/(R·2^p)`.
    pub fn collision_bound(&self, n: usize) -> f64 {
        2.0 * (n as f64).powi(3) / (self.bucket_count() as f64 * self.fingerprint_space() as f64)
    }

    /// `r ≤ min(w, 63)` and `1 ≤ p ≤ min(w, 48)`.
    pub fn clamped_to(mut self, width: u32) -> Self {
        self.r = self.r.min(width).min(MAX_BUCKET_BITS);
        self.p = self.p.min(width).clamp(1, MAX_PAYLOAD_BITS);
        self
    }
}

fn ceil_log2(x: u64) -> u32 {
    x.max(1).next_power_of_two().trailing_zeros()
}

/// `log²n · log log n`; long words are those at least this wide.
pub fn crossover_width(n: usize) -> f64 {
    let log_n = (n.max(4) as f64).log2();
    log_n * log_n * log_n.log2()
}

pub fn choose_plan(n: usize, sim_width: u32) -> FingerprintPlan {
    let regime = if sim_width as f64 >= crossover_width(n) {
        Regime::LongWord
    } else {
        Regime::ShortWord
    };
    plan_for(n, sim_width, regime)
}

/// Parameters of a given regime, with `n` clamped to at least 4 so the
/// logarithms stay positive.
pub fn plan_for(n: usize, sim_width: u32, regime: Regime) -> FingerprintPlan {
    let nf = n.max(4) as f64;
    let (buckets, p) = match regime {
        Regime::LongWord => {
            let lw = (sim_width as f64).log2();
            (
                (6.0 * nf * lw / sim_width as f64).ceil(),
                (2.0 * lw).floor(),
            )
        }
        Regime::ShortWord => {
            let ln = nf.log2();
            let lln = ln.log2();
            ((55.0 * nf * lln / ln).ceil(), (6.0 * lln).floor())
        }
    };
    FingerprintPlan {
        regime,
        r: ceil_log2(buckets.max(1.0) as u64),
        p: (p as u32).max(1),
        sim_width,
    }
}

#[derive(Clone, Debug)]
pub struct RandomizedConfig {
    pub sim_width: u32,
    pub regime: RegimeChoice,
    /// Explicit bucket bits, replacing the regime formula.
    pub r: Option<u32>,
    /// Explicit fingerprint bits, replacing the regime formula.
    pub p: Option<u32>,
    /// Largest lookup-table index in bits; passes that would need more use
    /// packed intersection instead.
    pub lookup_cap_bits: u32,
    pub resample_budget: u32,
    /// Corrupts the packed sorting network (see [`PackedMachine::set_fault`]).
    pub fault: bool,
}

pub const DEFAULT_LOOKUP_CAP_BITS: u32 = 24;

impl Default for RandomizedConfig {
    fn default() -> Self {
        RandomizedConfig {
            sim_width: DEFAULT_SIM_WIDTH,
            regime: RegimeChoice::Auto,
            r: None,
            p: None,
            lookup_cap_bits: DEFAULT_LOOKUP_CAP_BITS,
            resample_budget: DEFAULT_RESAMPLE_BUDGET,
            fault: false,
        }
    }
}

impl RandomizedConfig {
    pub fn forced(regime: Regime) -> Self {
        RandomizedConfig {
            regime: RegimeChoice::Forced(regime),
            ..Default::default()
        }
    }

    pub fn plan(&self, n: usize, width: u32) -> FingerprintPlan {
        let mut plan = match self.regime {
            RegimeChoice::Auto => choose_plan(n, self.sim_width),
            RegimeChoice::Forced(regime) => plan_for(n, self.sim_width, regime),
        };
        if let Some(r) = self.r {
            plan.r = r;
        }
        if let Some(p) = self.p {
            plan.p = p;
        }
        plan.clamped_to(width)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CollisionStats {
    pub colliding_triples_seen: u64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveStats {
    pub regime: Regime,
    pub r: u32,
    #[serde(rename = "R")]
    pub bucket_count: u64,
    pub p: u32,
    pub retries: u32,
    pub bad_elements: usize,
    pub collisions: CollisionStats,
    /// Counted operations on simulated packed words.
    pub packed_ops: u64,
    pub lookup_probes: u64,
    pub dict_probes: u64,
    /// All counted word operations, including the two above.
    pub word_ops: u64,
    /// True when a lookup-table pass exceeded the index cap and ran as
    /// packed intersections.
    pub lookup_fallback: bool,
}

#[derive(Clone, Debug)]
pub struct RandomizedOutcome<W: BitWord> {
    pub solution: Option<SolutionTriple<W>>,
    pub plan: FingerprintPlan,
    pub stats: SolveStats,
}

/// Fingerprints of the good buckets, in bucket order, as scalars and as
/// packed arrays with a common field count.
#[derive(Clone, Debug)]
pub struct FingerprintTable<W> {
    buckets: Vec<GoodBucket<W>>,
    index: HashMap<u64, usize>,
    fieldcount: u32,
    p: u32,
}

#[derive(Clone, Debug)]
struct GoodBucket<W> {
    u: u64,
    elems: Vec<W>,
    fps: Vec<u64>,
    /// Distinct fingerprints, ascending; this is what gets packed, since a
    /// packed intersection needs set inputs.
    distinct: Vec<u64>,
    packed: Option<PackedArray>,
}

impl<W: BitWord> GoodBucket<W> {
    fn with_fingerprint(&self, fp: u64) -> impl Iterator<Item = W> + '_ {
        self.elems
            .iter()
            .zip(&self.fps)
            .filter(move |(_, &f)| f == fp)
            .map(|(&x, _)| x)
    }
}

/// Packs `h2` fingerprints of every nonempty good bucket. Packed arrays are
/// built when `packed` is set; they use `next_pow2(⌊3n/R⌋)` fields.
pub fn build_fingerprint_table<W: BitWord>(
    bt: &BucketTable<W>,
    h2: &LinearHash<W>,
    plan: &FingerprintPlan,
    packed: bool,
) -> Result<FingerprintTable<W>> {
    if h2.mu() != plan.p {
        return Err(Error::InvalidParameter(format!(
            "h2 has {} output bits, plan needs {}",
            h2.mu(),
            plan.p
        )));
    }
    let fieldcount = plan.fieldcount(bt.n());
    let k = fieldcount.next_power_of_two();
    let mut buckets = Vec::new();
    let mut index = HashMap::new();
    for (u, elems) in bt.nonempty() {
        if !bt.is_good(u) {
            continue;
        }
        let fps = h2.eval_batch(elems)?;
        let mut distinct = fps.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let packed = if packed {
            Some(PackedArray::pack_to(&distinct, k, plan.p, plan.sim_width)?)
        } else {
            None
        };
        index.insert(u, buckets.len());
        buckets.push(GoodBucket {
            u,
            elems: elems.to_vec(),
            fps,
            distinct,
            packed,
        });
    }
    Ok(FingerprintTable {
        buckets,
        index,
        fieldcount,
        p: plan.p,
    })
}

impl<W: BitWord> FingerprintTable<W> {
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn fieldcount(&self) -> u32 {
        self.fieldcount
    }

    pub fn fingerprints(&self, u: u64) -> Option<&[u64]> {
        self.index.get(&u).map(|&i| self.buckets[i].fps.as_slice())
    }

    /// Packed distinct fingerprints of bucket `u`, if packing was requested.
    pub fn array(&self, u: u64) -> Option<&PackedArray> {
        self.index
            .get(&u)
            .and_then(|&i| self.buckets[i].packed.as_ref())
    }

    /// Lookup-table index of bucket `i`: its fingerprints padded to
    /// `fieldcount` with copies of the last one, field `j` at bits `j·p`.
    fn lookup_index(&self, i: usize) -> u64 {
        let fps = &self.buckets[i].fps;
        (0..self.fieldcount as usize).fold(0u64, |acc, j| {
            let v = fps.get(j).or(fps.last()).copied().unwrap_or(0);
            acc | v << (j as u32 * self.p)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arity {
    /// Is there `i, j` with `α_i = β_j`?
    Pair,
    /// Is there `i, j, k` with `α_i ⊕ β_j = γ_k`?
    Triple,
}

impl Arity {
    fn arrays(self) -> u32 {
        match self {
            Arity::Pair => 2,
            Arity::Triple => 3,
        }
    }
}

/// One bit per combination of fingerprint arrays; array `t` of an index
/// occupies bits `t·F·p .. (t+1)·F·p`.
#[derive(Clone, Debug)]
pub struct LookupTable {
    fieldcount: u32,
    p: u32,
    arity: Arity,
    bits: Vec<u64>,
}

pub fn build_lookup_table(
    fieldcount: u32,
    p: u32,
    arity: Arity,
    cap_bits: u32,
) -> Result<LookupTable> {
    if fieldcount == 0 || p == 0 {
        return Err(Error::InvalidParameter(
            "fieldcount and p must be >= 1".into(),
        ));
    }
    let index_bits = arity.arrays() as u64 * fieldcount as u64 * p as u64;
    if index_bits > cap_bits as u64 || index_bits > 32 {
        return Err(Error::Capacity {
            needed: index_bits,
            available: cap_bits.min(32) as u64,
        });
    }
    let arr_bits = fieldcount * p;
    let arrays = 1u64 << arr_bits;
    let field = |x: u64, j: u32| (x >> (j * p)) & low_mask(p);
    let mut bits = vec![0u64; (1u64 << index_bits).div_ceil(64) as usize];
    let mut set = |idx: u64| bits[(idx / 64) as usize] |= 1 << (idx % 64);
    match arity {
        Arity::Pair => {
            for a in 0..arrays {
                for b in 0..arrays {
                    let hit = (0..fieldcount)
                        .any(|i| (0..fieldcount).any(|j| field(a, i) == field(b, j)));
                    if hit {
                        set(a | b << arr_bits);
                    }
                }
            }
        }
        Arity::Triple => {
            let values = 1usize << p;
            let mut reach = vec![false; values];
            for a in 0..arrays {
                for b in 0..arrays {
                    reach.iter_mut().for_each(|x| *x = false);
                    for i in 0..fieldcount {
                        for j in 0..fieldcount {
                            reach[(field(a, i) ^ field(b, j)) as usize] = true;
                        }
                    }
                    for c in 0..arrays {
                        if (0..fieldcount).any(|k| reach[field(c, k) as usize]) {
                            set(a | b << arr_bits | c << (2 * arr_bits));
                        }
                    }
                }
            }
        }
    }
    Ok(LookupTable {
        fieldcount,
        p,
        arity,
        bits,
    })
}

impl LookupTable {
    pub fn arity(&self) -> Arity {
        self.arity
    }

    /// Index for the given arrays, each exactly `fieldcount` values.
    pub fn index_of(&self, arrays: &[&[u64]]) -> u64 {
        let arr_bits = self.fieldcount * self.p;
        arrays.iter().enumerate().fold(0u64, |acc, (t, vals)| {
            let a = vals
                .iter()
                .enumerate()
                .fold(0u64, |x, (j, &v)| x | v << (j as u32 * self.p));
            acc | a << (t as u32 * arr_bits)
        })
    }

    #[inline]
    pub fn get(&self, idx: u64) -> bool {
        self.bits[(idx / 64) as usize] >> (idx % 64) & 1 == 1
    }
}

type TableCache = Mutex<HashMap<(u32, u32, Arity), Arc<LookupTable>>>;

fn cached_table(fieldcount: u32, p: u32, arity: Arity, cap: u32) -> Result<Arc<LookupTable>> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache
        .lock()
        .expect("table cache")
        .get(&(fieldcount, p, arity))
    {
        return Ok(t.clone());
    }
    let table = Arc::new(build_lookup_table(fieldcount, p, arity, cap)?);
    cache
        .lock()
        .expect("table cache")
        .insert((fieldcount, p, arity), table.clone());
    Ok(table)
}

/// Exact number of ordered `(a, b, c) ∈ X³` with `a ⊕ b ≠ c` whose `h1` and
/// `h2` images nevertheless satisfy the XOR relation.
pub fn count_colliding_triples<W: BitWord>(
    inst: &XorInstance<W>,
    h1: &LinearHash<W>,
    h2: &LinearHash<W>,
) -> Result<u64> {
    const LIMIT: usize = 512;
    if inst.len() > LIMIT {
        return Err(Error::TooLarge {
            what: "colliding-triple census",
            n: inst.len(),
            limit: LIMIT,
        });
    }
    let words = inst.words();
    let g1 = h1.eval_batch(words)?;
    let g2 = h2.eval_batch(words)?;
    let mut count = 0u64;
    for i in 0..words.len() {
        for j in 0..words.len() {
            let target = words[i] ^ words[j];
            let (t1, t2) = (g1[i] ^ g1[j], g2[i] ^ g2[j]);
            for k in 0..words.len() {
                if g1[k] == t1 && g2[k] == t2 && words[k] != target {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

pub fn solve_randomized<W: BitWord>(
    inst: &XorInstance<W>,
    seed: RngSeed,
    cfg: &RandomizedConfig,
) -> Result<RandomizedOutcome<W>> {
    let plan = cfg.plan(inst.len(), inst.width());
    let bt = resample_until_few_bad(inst, plan.r, seed.derive(1), cfg.resample_budget)?;
    Solver::new(inst, plan, cfg)?.run(bt, seed)
}

/// As [`solve_randomized`] with a caller-chosen `h1` and no resampling;
/// `r` is taken from `h1`.
pub fn solve_randomized_with_h1<W: BitWord>(
    inst: &XorInstance<W>,
    h1: LinearHash<W>,
    seed: RngSeed,
    cfg: &RandomizedConfig,
) -> Result<RandomizedOutcome<W>> {
    let mut plan = cfg.plan(inst.len(), inst.width());
    plan.r = h1.mu();
    let bt = BucketTable::with_hash(inst, h1)?;
    Solver::new(inst, plan, cfg)?.run(bt, seed)
}

struct Solver<'a, W: BitWord> {
    inst: &'a XorInstance<W>,
    plan: FingerprintPlan,
    cfg: &'a RandomizedConfig,
    machine: PackedMachine,
    ops: u64,
    lookup_probes: u64,
    dict_probes: u64,
    colliding: u64,
    fallback: bool,
}

impl<'a, W: BitWord> Solver<'a, W> {
    fn new(
        inst: &'a XorInstance<W>,
        plan: FingerprintPlan,
        cfg: &'a RandomizedConfig,
    ) -> Result<Self> {
        let mut machine = PackedMachine::new(cfg.sim_width)?;
        machine.set_fault(cfg.fault);
        Ok(Solver {
            inst,
            plan,
            cfg,
            machine,
            ops: 0,
            lookup_probes: 0,
            dict_probes: 0,
            colliding: 0,
            fallback: false,
        })
    }

    fn run(mut self, bt: BucketTable<W>, seed: RngSeed) -> Result<RandomizedOutcome<W>> {
        let n = self.inst.len();
        let solution = self.search(&bt, seed)?;
        let stats = SolveStats {
            regime: self.plan.regime,
            r: self.plan.r,
            bucket_count: self.plan.bucket_count(),
            p: self.plan.p,
            retries: bt.retries(),
            bad_elements: bt.bad_elements().len(),
            collisions: CollisionStats {
                colliding_triples_seen: self.colliding,
                bound: self.plan.collision_bound(n),
            },
            packed_ops: self.machine.ops(),
            lookup_probes: self.lookup_probes,
            dict_probes: self.dict_probes,
            word_ops: self.ops + self.machine.ops(),
            lookup_fallback: self.fallback,
        };
        if let Some(t) = &solution {
            debug_assert!(t.is_witness_for(self.inst));
        }
        Ok(RandomizedOutcome {
            solution,
            plan: self.plan,
            stats,
        })
    }

    fn search(&mut self, bt: &BucketTable<W>, seed: RngSeed) -> Result<Option<SolutionTriple<W>>> {
        let inst = self.inst;
        let n = inst.len() as u64;
        if inst.is_empty() {
            return Ok(None);
        }
        let words = inst.words();
        let dict = StaticDict::build(inst.width(), words, &mut seed.derive(2).rng())?;
        // hashing every key with h1 and building the dictionary
        self.ops += n * (self.plan.r as u64 + 1);

        // at least two bad elements: every pair, the third via the dictionary
        let bad = bt.bad_elements();
        for (i, &a) in bad.iter().enumerate() {
            for &b in &bad[i..] {
                self.ops += 2;
                self.dict_probes += 1;
                if dict.contains(&(a ^ b)) {
                    return Ok(Some(SolutionTriple::new(a, b, a ^ b)));
                }
            }
        }

        let h2 = LinearHash::sample(inst.width(), self.plan.p, &mut seed.derive(3).rng())?;
        self.ops += n * self.plan.p as u64;
        let long = self.plan.regime == Regime::LongWord;
        let table = build_fingerprint_table(bt, &h2, &self.plan, long)?;
        if table.is_empty() {
            return Ok(None);
        }
        let h1_of = bt.h1().eval_batch(words)?;
        let h2_of = h2.eval_batch(words)?;

        if long {
            let all: Vec<usize> = (0..words.len()).collect();
            return self.packed_pass(&table, &all, &h1_of, &h2_of);
        }
        if let Some(t) = self.good_triples_pass(&table, &h1_of, &h2_of)? {
            return Ok(Some(t));
        }
        self.one_bad_pass(bt, &table, &h1_of, &h2_of)
    }

    /// For each listed `a` and every good `u` with `h1(a) ⊕ u` good: packed
    /// intersection of `wpa_u ⊕ h2(a)` with `wpa_{h1(a)⊕u}`.
    fn packed_pass(
        &mut self,
        table: &FingerprintTable<W>,
        which: &[usize],
        h1_of: &[u64],
        h2_of: &[u64],
    ) -> Result<Option<SolutionTriple<W>>> {
        let words = self.inst.words();
        for &ai in which {
            let a = words[ai];
            for g in &table.buckets {
                self.ops += 1;
                let Some(&gj) = table.index.get(&(g.u ^ h1_of[ai])) else {
                    continue;
                };
                let other = &table.buckets[gj];
                let pairs = match (&g.packed, &other.packed) {
                    (Some(x), Some(y)) => {
                        let shifted = self.machine.xor_broadcast(x, h2_of[ai])?;
                        self.machine.intersect_listing(&shifted, y)?
                    }
                    _ => {
                        return Err(Error::InvalidParameter(
                            "packed pass needs packed fingerprint arrays".into(),
                        ))
                    }
                };
                for (i, j) in pairs {
                    for b in g.with_fingerprint(g.distinct[i]) {
                        for c in other.with_fingerprint(other.distinct[j]) {
                            self.ops += 1;
                            if a ^ b == c {
                                return Ok(Some(SolutionTriple::new(a, b, c)));
                            }
                            self.colliding += 1;
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    /// Packed arrays on demand, for passes whose lookup table is too large.
    fn ensure_packed(&mut self, table: &mut FingerprintTable<W>) -> Result<()> {
        let k = table.fieldcount.next_power_of_two();
        for g in table.buckets.iter_mut().filter(|g| g.packed.is_none()) {
            g.packed = Some(PackedArray::pack_to(
                &g.distinct,
                k,
                self.plan.p,
                self.plan.sim_width,
            )?);
        }
        Ok(())
    }

    /// All three elements good: for each unordered pair of good buckets
    /// `(u, v)`, one probe with the arrays of `u`, `v` and `u ⊕ v`.
    fn good_triples_pass(
        &mut self,
        table: &FingerprintTable<W>,
        h1_of: &[u64],
        h2_of: &[u64],
    ) -> Result<Option<SolutionTriple<W>>> {
        let lookup = match cached_table(
            table.fieldcount,
            self.plan.p,
            Arity::Triple,
            self.cfg.lookup_cap_bits,
        ) {
            Ok(t) => t,
            Err(Error::Capacity { .. }) => {
                self.fallback = true;
                let mut owned = table.clone();
                self.ensure_packed(&mut owned)?;
                let good: Vec<usize> = (0..h1_of.len())
                    .filter(|&i| owned.index.contains_key(&h1_of[i]))
                    .collect();
                return self.packed_pass(&owned, &good, h1_of, h2_of);
            }
            Err(e) => return Err(e),
        };
        let idx: Vec<u64> = (0..table.buckets.len())
            .map(|i| table.lookup_index(i))
            .collect();
        let arr_bits = table.fieldcount * self.plan.p;
        for gi in 0..table.buckets.len() {
            for gj in gi..table.buckets.len() {
                self.ops += 1;
                let w = table.buckets[gi].u ^ table.buckets[gj].u;
                let Some(&gk) = table.index.get(&w) else {
                    continue;
                };
                self.ops += 1;
                self.lookup_probes += 1;
                if !lookup.get(idx[gi] | idx[gj] << arr_bits | idx[gk] << (2 * arr_bits)) {
                    continue;
                }
                let (x, y, z) = (&table.buckets[gi], &table.buckets[gj], &table.buckets[gk]);
                for (a, fa) in x.elems.iter().zip(&x.fps) {
                    for (b, fb) in y.elems.iter().zip(&y.fps) {
                        for (c, fc) in z.elems.iter().zip(&z.fps) {
                            self.ops += 1;
                            if fa ^ fb != *fc {
                                continue;
                            }
                            if *a ^ *b == *c {
                                return Ok(Some(SolutionTriple::new(*a, *b, *c)));
                            }
                            self.colliding += 1;
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    /// One bad element `a`: for each good `u` with `h1(a) ⊕ u` good, one
    /// probe with `wpa_u ⊕ h2(a)` and `wpa_{h1(a)⊕u}`.
    fn one_bad_pass(
        &mut self,
        bt: &BucketTable<W>,
        table: &FingerprintTable<W>,
        h1_of: &[u64],
        h2_of: &[u64],
    ) -> Result<Option<SolutionTriple<W>>> {
        let words = self.inst.words();
        let bad_idx: Vec<usize> = bt
            .bad_elements()
            .iter()
            .map(|x| words.binary_search(x).expect("bad element is a member"))
            .collect();
        if bad_idx.is_empty() {
            return Ok(None);
        }
        let lookup = match cached_table(
            table.fieldcount,
            self.plan.p,
            Arity::Pair,
            self.cfg.lookup_cap_bits,
        ) {
            Ok(t) => t,
            Err(Error::Capacity { .. }) => {
                self.fallback = true;
                let mut owned = table.clone();
                self.ensure_packed(&mut owned)?;
                return self.packed_pass(&owned, &bad_idx, h1_of, h2_of);
            }
            Err(e) => return Err(e),
        };
        let idx: Vec<u64> = (0..table.buckets.len())
            .map(|i| table.lookup_index(i))
            .collect();
        let arr_bits = table.fieldcount * self.plan.p;
        let ones = (0..table.fieldcount).fold(0u64, |acc, j| acc | 1 << (j * self.plan.p));
        for &ai in &bad_idx {
            let a = words[ai];
            let spread = h2_of[ai] * ones;
            for (gi, g) in table.buckets.iter().enumerate() {
                self.ops += 1;
                let Some(&gj) = table.index.get(&(g.u ^ h1_of[ai])) else {
                    continue;
                };
                self.ops += 2;
                self.lookup_probes += 1;
                if !lookup.get((idx[gi] ^ spread) | idx[gj] << arr_bits) {
                    continue;
                }
                let other = &table.buckets[gj];
                for (b, fb) in g.elems.iter().zip(&g.fps) {
                    for (c, fc) in other.elems.iter().zip(&other.fps) {
                        self.ops += 1;
                        if fb ^ h2_of[ai] != *fc {
                            continue;
                        }
                        if a ^ *b == *c {
                            return Ok(Some(SolutionTriple::new(a, *b, *c)));
                        }
                        self.colliding += 1;
                    }
                }
            }
        }
        Ok(None)
    }
}
