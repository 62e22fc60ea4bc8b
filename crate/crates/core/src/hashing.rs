//! GF(2)-linear hashing: `h_A(x) = A·x` for a random `μ × ℓ` bit matrix `A`.
//!
//! A [`LinearHash`] keeps the matrix in two layouts. Rows are stored as
//! `ℓ`-bit words, so one output bit is the parity of `row & x`. Columns are
//! stored as `μ`-bit fields packed into 64-bit words, so the hash of `x` is
//! the XOR of the columns selected by the 1-bits of `x`; the packed
//! selections are folded together by repeated halving.
//!
//! Output bit order follows the bit-string notation: row 0 produces the most
//! significant output bit, and column `j` (counted from the most significant
//! input bit) multiplies input bit `j`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{generate_instance, GenerateMode, RngSeed, XorInstance};
use crate::word::{low_mask, BitWord};

/// Hash outputs are returned in a `u64`.
pub const MAX_OUTPUT_BITS: u32 = 64;

#[derive(Clone, PartialEq, Eq)]
pub struct LinearHash<W> {
    ell: u32,
    mu: u32,
    rows: Vec<W>,
    packed_columns: PackedColumns,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct PackedColumns {
    fields_per_word: u32,
    words: Vec<u64>,
}

impl<W: BitWord> std::fmt::Debug for LinearHash<W> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<String> = self.rows.iter().map(|r| r.to_hex(self.ell)).collect();
        write!(
            f,
            "LinearHash({}x{}, rows=[{}])",
            self.mu,
            self.ell,
            rows.join(",")
        )
    }
}

impl<W: BitWord> LinearHash<W> {
    /// A fixed matrix given by its rows (row 0 = most significant output bit).
    /// Zero rows give the constant map into `{0,1}^0`.
    pub fn from_matrix(ell: u32, rows: Vec<W>) -> Result<Self> {
        if ell == 0 || ell > W::CAPACITY {
            return Err(Error::WidthOutOfRange {
                width: ell,
                max: W::CAPACITY,
            });
        }
        let mu = rows.len() as u32;
        if mu > ell || mu > MAX_OUTPUT_BITS {
            return Err(Error::InvalidParameter(format!(
                "output width {mu} must not exceed input width {ell} or {MAX_OUTPUT_BITS}"
            )));
        }
        if let Some(r) = rows.iter().find(|r| !r.fits(ell)) {
            return Err(Error::WidthMismatch {
                expected: ell,
                actual: r.bit_len(),
            });
        }
        let packed_columns = PackedColumns::build(ell, mu, &rows);
        Ok(LinearHash {
            ell,
            mu,
            rows,
            packed_columns,
        })
    }

    /// Uniform member of the full linear family: `μ·ℓ` fair bits.
    pub fn sample<R: Rng + ?Sized>(ell: u32, mu: u32, rng: &mut R) -> Result<Self> {
        check_dims(ell, mu)?;
        let rows = (0..mu).map(|_| W::random(rng, ell)).collect();
        Self::from_matrix(ell, rows)
    }

    /// Member of the convolution (Toeplitz) subfamily, drawn from `ℓ+μ−1`
    /// random bits.
    pub fn sample_convolution<R: Rng + ?Sized>(ell: u32, mu: u32, rng: &mut R) -> Result<Self> {
        check_dims(ell, mu)?;
        let bits: Vec<bool> = (0..ell + mu - 1).map(|_| rng.gen()).collect();
        Self::convolution_from_bits(ell, mu, &bits)
    }

    /// The matrix `(a_{i+j})` for a bit vector `a` of length `ℓ+μ−1`.
    pub fn convolution_from_bits(ell: u32, mu: u32, a: &[bool]) -> Result<Self> {
        check_dims(ell, mu)?;
        if a.len() != (ell + mu - 1) as usize {
            return Err(Error::InvalidParameter(format!(
                "convolution vector needs {} bits, got {}",
                ell + mu - 1,
                a.len()
            )));
        }
        let rows = (0..mu as usize)
            .map(|i| {
                (0..ell as usize).fold(W::zero(), |row, j| {
                    if a[i + j] {
                        row.with_bit(ell - 1 - j as u32)
                    } else {
                        row
                    }
                })
            })
            .collect();
        Self::from_matrix(ell, rows)
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn mu(&self) -> u32 {
        self.mu
    }

    pub fn rows(&self) -> &[W] {
        &self.rows
    }

    /// Column for input bit position `pos` (counted from the least
    /// significant end), as a `μ`-bit value.
    pub fn column(&self, pos: u32) -> u64 {
        let fpw = self.packed_columns.fields_per_word;
        let word = self.packed_columns.words[(pos / fpw) as usize];
        (word >> ((pos % fpw) * self.mu)) & low_mask(self.mu)
    }

    /// True when the packed columns describe the same matrix as the rows.
    pub fn layouts_agree(&self) -> bool {
        (0..self.ell).all(|pos| {
            let col = self.column(pos);
            self.rows
                .iter()
                .enumerate()
                .all(|(i, row)| row.bit(pos) == (col >> (self.mu - 1 - i as u32) & 1 == 1))
        })
    }

    fn check_input(&self, x: &W) -> Result<()> {
        if x.fits(self.ell) {
            Ok(())
        } else {
            Err(Error::WidthMismatch {
                expected: self.ell,
                actual: x.bit_len(),
            })
        }
    }

    /// Row-wise evaluation: one AND and one parity per output bit.
    #[inline]
    pub fn hash(&self, x: &W) -> u64 {
        let mut out = 0u64;
        for row in &self.rows {
            out = (out << 1) | ((*row & *x).count_ones() & 1) as u64;
        }
        out
    }

    pub fn eval_rowwise(&self, x: &W) -> Result<u64> {
        self.check_input(x)?;
        Ok(self.hash(x))
    }

    /// Column-wise evaluation: select the packed columns named by the 1-bits
    /// of `x`, XOR the selections word by word, then fold the fields of the
    /// accumulator onto field 0 by halving.
    pub fn eval_columnwise(&self, x: &W) -> Result<u64> {
        self.check_input(x)?;
        if self.mu == 0 {
            return Ok(0);
        }
        let mu = self.mu;
        let fpw = self.packed_columns.fields_per_word;
        let field = low_mask(mu);
        let mut acc = 0u64;
        for (q, &word) in self.packed_columns.words.iter().enumerate() {
            let mut sel = x.extract(q as u32 * fpw, fpw);
            if sel == 0 {
                continue;
            }
            let mut mask = 0u64;
            while sel != 0 {
                let f = sel.trailing_zeros();
                mask |= field << (f * mu);
                sel &= sel - 1;
            }
            acc ^= word & mask;
        }
        let mut half = fpw / 2;
        while half >= 1 {
            acc ^= acc >> (half * mu);
            half /= 2;
        }
        Ok(acc & field)
    }

    /// Batch evaluation. The columns are grouped eight at a time and every
    /// XOR combination within a group is tabulated once for the whole batch,
    /// so each input costs `⌈ℓ/8⌉` table reads.
    pub fn eval_batch(&self, xs: &[W]) -> Result<Vec<u64>> {
        if let Some(bad) = xs.iter().find(|x| !x.fits(self.ell)) {
            return Err(Error::WidthMismatch {
                expected: self.ell,
                actual: bad.bit_len(),
            });
        }
        if xs.is_empty() || self.mu == 0 {
            return Ok(vec![0; xs.len()]);
        }
        let table = ChunkTable::build(self);
        Ok(xs.iter().map(|x| table.eval(x)).collect())
    }
}

fn check_dims(ell: u32, mu: u32) -> Result<()> {
    if mu == 0 {
        return Err(Error::InvalidParameter(
            "hash output width must be >= 1".into(),
        ));
    }
    if mu > ell {
        return Err(Error::InvalidParameter(format!(
            "hash output width {mu} exceeds input width {ell}"
        )));
    }
    Ok(())
}

impl PackedColumns {
    fn build<W: BitWord>(ell: u32, mu: u32, rows: &[W]) -> Self {
        if mu == 0 {
            return PackedColumns {
                fields_per_word: 64,
                words: vec![0; ell.div_ceil(64) as usize],
            };
        }
        // largest power of two with fields_per_word * mu <= 64
        let fpw = 1u32 << (31 - (64 / mu).leading_zeros());
        let mut words = vec![0u64; ell.div_ceil(fpw) as usize];
        for pos in 0..ell {
            let mut col = 0u64;
            for row in rows {
                col = (col << 1) | row.bit(pos) as u64;
            }
            words[(pos / fpw) as usize] |= col << ((pos % fpw) * mu);
        }
        PackedColumns {
            fields_per_word: fpw,
            words,
        }
    }
}

struct ChunkTable {
    chunks: u32,
    table: Vec<u64>,
}

impl ChunkTable {
    fn build<W: BitWord>(h: &LinearHash<W>) -> Self {
        let chunks = h.ell.div_ceil(8);
        let mut table = vec![0u64; chunks as usize * 256];
        for c in 0..chunks {
            let base = c as usize * 256;
            for bit in 0..8u32 {
                let pos = c * 8 + bit;
                if pos >= h.ell {
                    break;
                }
                let col = h.column(pos);
                let step = 1usize << bit;
                for v in 0..step {
                    table[base + step + v] = table[base + v] ^ col;
                }
            }
        }
        ChunkTable { chunks, table }
    }

    #[inline]
    fn eval<W: BitWord>(&self, x: &W) -> u64 {
        let mut acc = 0u64;
        for c in 0..self.chunks {
            acc ^= self.table[c as usize * 256 + x.extract(c * 8, 8) as usize];
        }
        acc
    }
}

pub fn sample_linear_hash<W: BitWord>(ell: u32, mu: u32, seed: RngSeed) -> Result<LinearHash<W>> {
    LinearHash::sample(ell, mu, &mut seed.rng())
}

pub fn sample_convolution_hash<W: BitWord>(
    ell: u32,
    mu: u32,
    seed: RngSeed,
) -> Result<LinearHash<W>> {
    LinearHash::sample_convolution(ell, mu, &mut seed.rng())
}

/// A draw of `h1` from the linear family into `2^r` buckets; `r = 0` is the
/// constant map.
pub fn sample_bucket_hash<W: BitWord, R: Rng + ?Sized>(
    width: u32,
    r: u32,
    rng: &mut R,
) -> Result<LinearHash<W>> {
    if r == 0 {
        LinearHash::from_matrix(width, Vec::new())
    } else {
        LinearHash::sample(width, r, rng)
    }
}

/// `X` split by `h1` into `R = 2^r` buckets, with the good/bad classification
/// (a bucket is bad when it holds more than `3n/R` elements).
#[derive(Clone)]
pub struct BucketTable<W> {
    r: u32,
    n: usize,
    h1: LinearHash<W>,
    buckets: BTreeMap<u64, Vec<W>>,
    bad_elements: Vec<W>,
    retries: u32,
}

impl<W: BitWord> std::fmt::Debug for BucketTable<W> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BucketTable")
            .field("r", &self.r)
            .field("n", &self.n)
            .field("nonempty", &self.buckets.len())
            .field("bad", &self.bad_elements.len())
            .field("retries", &self.retries)
            .finish()
    }
}

/// Largest supported bucket-index width.
pub const MAX_BUCKET_BITS: u32 = 63;

impl<W: BitWord> BucketTable<W> {
    /// Buckets `X` with a given `h1`; `r = h1.mu()`.
    pub fn with_hash(inst: &XorInstance<W>, h1: LinearHash<W>) -> Result<Self> {
        if h1.ell() != inst.width() {
            return Err(Error::WidthMismatch {
                expected: inst.width(),
                actual: h1.ell(),
            });
        }
        let r = h1.mu();
        if r > MAX_BUCKET_BITS {
            return Err(Error::InvalidParameter(format!(
                "bucket index width {r} exceeds {MAX_BUCKET_BITS}"
            )));
        }
        let hashes = h1.eval_batch(inst.words())?;
        let mut buckets: BTreeMap<u64, Vec<W>> = BTreeMap::new();
        // words are sorted, so each bucket list comes out sorted
        for (&x, &u) in inst.words().iter().zip(&hashes) {
            buckets.entry(u).or_default().push(x);
        }
        let n = inst.len();
        let mut bad_elements: Vec<W> = buckets
            .values()
            .filter(|b| is_overfull(b.len(), n, r))
            .flatten()
            .copied()
            .collect();
        bad_elements.sort_unstable();
        Ok(BucketTable {
            r,
            n,
            h1,
            buckets,
            bad_elements,
            retries: 0,
        })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn bucket_count(&self) -> u64 {
        1u64 << self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h1(&self) -> &LinearHash<W> {
        &self.h1
    }

    /// `3n/R`; buckets strictly larger are bad.
    pub fn good_threshold(&self) -> f64 {
        3.0 * self.n as f64 / self.bucket_count() as f64
    }

    pub fn bucket(&self, u: u64) -> &[W] {
        self.buckets.get(&u).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Nonempty buckets in index order.
    pub fn nonempty(&self) -> impl Iterator<Item = (u64, &[W])> + '_ {
        self.buckets.iter().map(|(&u, b)| (u, b.as_slice()))
    }

    pub fn is_good(&self, u: u64) -> bool {
        !is_overfull(self.bucket(u).len(), self.n, self.r)
    }

    pub fn bad_elements(&self) -> &[W] {
        &self.bad_elements
    }

    /// How many times `h1` was redrawn before this table was accepted.
    pub fn retries(&self) -> u32 {
        self.retries
    }
}

/// `size > 3n / 2^r`, in exact arithmetic.
pub fn is_overfull(size: usize, n: usize, r: u32) -> bool {
    (size as u128) << r > 3 * n as u128
}

pub fn split_buckets<W: BitWord>(
    inst: &XorInstance<W>,
    r: u32,
    seed: RngSeed,
) -> Result<BucketTable<W>> {
    check_bucket_bits(inst.width(), r)?;
    let h1 = sample_bucket_hash(inst.width(), r, &mut seed.rng())?;
    BucketTable::with_hash(inst, h1)
}

fn check_bucket_bits(width: u32, r: u32) -> Result<()> {
    if r > width || r > MAX_BUCKET_BITS {
        return Err(Error::InvalidParameter(format!(
            "bucket bits r={r} must be <= w={width} and <= {MAX_BUCKET_BITS}"
        )));
    }
    Ok(())
}

pub const DEFAULT_RESAMPLE_BUDGET: u32 = 64;

/// Redraws `h1` until fewer than `2R` elements are bad.
pub fn resample_until_few_bad<W: BitWord>(
    inst: &XorInstance<W>,
    r: u32,
    seed: RngSeed,
    budget: u32,
) -> Result<BucketTable<W>> {
    check_bucket_bits(inst.width(), r)?;
    let mut rng = seed.rng();
    for attempt in 0..budget.max(1) {
        let h1 = sample_bucket_hash(inst.width(), r, &mut rng)?;
        let mut table = BucketTable::with_hash(inst, h1)?;
        if (table.bad_elements.len() as u128) < 2u128 << r {
            table.retries = attempt;
            return Ok(table);
        }
    }
    Err(Error::RetryBudgetExhausted {
        what: "bucket hash with fewer than 2R bad elements",
        retries: budget,
    })
}

/// Mean, over `trials` fresh draws of `h`, of the number of elements of one
/// fixed random `X` lying in buckets of size at least `3n/m`.
pub fn overfull_statistic(n: usize, width: u32, m: u64, trials: u32, seed: RngSeed) -> Result<f64> {
    overfull_statistic_at(n, width, m, trials, seed, 3.0 * n as f64 / m as f64)
}

/// As [`overfull_statistic`] with an explicit bucket-size threshold `t`.
pub fn overfull_statistic_at(
    n: usize,
    width: u32,
    m: u64,
    trials: u32,
    seed: RngSeed,
    threshold: f64,
) -> Result<f64> {
    if !m.is_power_of_two() || (width < 64 && m > 1u64 << width) {
        return Err(Error::InvalidParameter(format!(
            "m={m} must be a power of two <= 2^w"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let inst: XorInstance<u64> = if width <= 64 {
        generate_instance(n, width, seed.derive(0), GenerateMode::Random)?
    } else {
        return Err(Error::InvalidParameter(
            "overfull statistic supports w <= 64".into(),
        ));
    };
    let mu = m.trailing_zeros();
    let mut rng = seed.derive(1).rng();
    let mut sizes = vec![0usize; m as usize];
    let mut total = 0u64;
    for _ in 0..trials {
        let h = sample_bucket_hash::<u64, _>(width, mu, &mut rng)?;
        let hashes = h.eval_batch(inst.words())?;
        sizes.iter_mut().for_each(|s| *s = 0);
        for &u in &hashes {
            sizes[u as usize] += 1;
        }
        total += hashes
            .iter()
            .filter(|&&u| sizes[u as usize] as f64 >= threshold)
            .count() as u64;
    }
    Ok(total as f64 / trials as f64)
}
