//! Static membership dictionary with constant-time lookups: two levels of
//! GF(2)-linear hashing. The top level splits `n` keys into `2^⌈log n⌉`
//! buckets and is redrawn until the squared bucket sizes sum to at most
//! `4n`; a bucket of `b` keys gets its own table of at least `b²` slots and a
//! hash redrawn until it is injective on the bucket.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hashing::LinearHash;
use crate::word::BitWord;

const RETRY_BUDGET: u32 = 256;

#[derive(Clone, Debug)]
pub struct StaticDict<W: BitWord> {
    top: LinearHash<W>,
    /// Per top-level bucket: offset into `slots` and its second-level hash.
    buckets: Vec<(usize, LinearHash<W>)>,
    slots: Vec<Option<W>>,
    len: usize,
}

impl<W: BitWord> StaticDict<W> {
    /// Builds the dictionary for distinct `keys`, all fitting in `width` bits.
    pub fn build<R: Rng + ?Sized>(width: u32, keys: &[W], rng: &mut R) -> Result<Self> {
        let n = keys.len();
        let mu = ceil_log2(n).min(width).min(63);
        let top = draw(width, mu, rng, |h| {
            let mut sizes = vec![0u64; 1 << mu];
            for x in keys {
                sizes[h.hash(x) as usize] += 1;
            }
            sizes.iter().map(|b| b * b).sum::<u64>() <= 4 * n.max(1) as u64
        })?;

        let mut grouped: Vec<Vec<W>> = vec![Vec::new(); 1 << mu];
        for &x in keys {
            grouped[top.hash(&x) as usize].push(x);
        }
        let mut buckets = Vec::with_capacity(grouped.len());
        let mut slots = Vec::new();
        for group in &grouped {
            let inner_mu = ceil_log2(group.len() * group.len()).min(width);
            let inner = if inner_mu == width && width <= 63 {
                identity(width)?
            } else {
                draw(width, inner_mu, rng, |h| injective(h, group))?
            };
            let offset = slots.len();
            slots.resize(offset + (1usize << inner_mu), None);
            for &x in group {
                slots[offset + inner.hash(&x) as usize] = Some(x);
            }
            buckets.push((offset, inner));
        }
        Ok(StaticDict {
            top,
            buckets,
            slots,
            len: n,
        })
    }

    #[inline]
    pub fn contains(&self, x: &W) -> bool {
        let (offset, inner) = &self.buckets[self.top.hash(x) as usize];
        self.slots[offset + inner.hash(x) as usize] == Some(*x)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Total number of slots, at most about `5n`.
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }
}

fn ceil_log2(n: usize) -> u32 {
    n.max(1).next_power_of_two().trailing_zeros()
}

fn identity<W: BitWord>(width: u32) -> Result<LinearHash<W>> {
    LinearHash::from_matrix(
        width,
        (0..width).rev().map(|i| W::zero().with_bit(i)).collect(),
    )
}

fn draw<W: BitWord, R: Rng + ?Sized>(
    width: u32,
    mu: u32,
    rng: &mut R,
    accept: impl Fn(&LinearHash<W>) -> bool,
) -> Result<LinearHash<W>> {
    for _ in 0..RETRY_BUDGET {
        let h = if mu == 0 {
            LinearHash::from_matrix(width, Vec::new())?
        } else {
            LinearHash::sample(width, mu, rng)?
        };
        if accept(&h) {
            return Ok(h);
        }
    }
    Err(Error::RetryBudgetExhausted {
        what: "static dictionary hash",
        retries: RETRY_BUDGET,
    })
}

fn injective<W: BitWord>(h: &LinearHash<W>, keys: &[W]) -> bool {
    let mut seen: Vec<u64> = keys.iter().map(|x| h.hash(x)).collect();
    seen.sort_unstable();
    seen.windows(2).all(|p| p[0] != p[1])
}
