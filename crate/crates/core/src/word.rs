//! Fixed-width bit words.
//!
//! Keys up to 64 bits live in a native `u64`; wider keys (up to
//! [`MAX_WIDTH`] bits) use [`WideWord`], an array of 64-bit limbs stored
//! most-significant limb first so that the derived lexicographic order on the
//! limb array coincides with unsigned integer order.

use std::fmt;
use std::hash::Hash;
use std::ops::{BitAnd, BitOr, BitXor};

use rand::Rng;

use crate::error::{Error, Result};

/// Largest supported key width in bits.
pub const MAX_WIDTH: u32 = 512;

const WIDE_LIMBS: usize = (MAX_WIDTH / 64) as usize;

/// A bit string of some fixed width `w`, compared as an unsigned integer.
///
/// Bit positions are counted from the least significant end; the textual
/// (bit-string) notation used throughout the crate writes the most
/// significant bit first.
pub trait BitWord:
    Copy
    + Eq
    + Ord
    + Hash
    + Default
    + fmt::Debug
    + Send
    + Sync
    + BitXor<Output = Self>
    + BitAnd<Output = Self>
    + BitOr<Output = Self>
    + 'static
{
    /// Widest `w` this representation can hold.
    const CAPACITY: u32;

    fn zero() -> Self {
        Self::default()
    }

    fn from_u64(v: u64) -> Self;

    fn count_ones(&self) -> u32;

    fn bit(&self, i: u32) -> bool;

    fn with_bit(self, i: u32) -> Self;

    /// Bits `start..start+len` as an integer, `len <= 64`.
    fn extract(&self, start: u32, len: u32) -> u64;

    /// Position of the highest set bit plus one (0 for the zero word).
    fn bit_len(&self) -> u32;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    /// True when no bit at position `>= width` is set.
    fn fits(&self, width: u32) -> bool {
        self.bit_len() <= width
    }

    fn random<R: Rng + ?Sized>(rng: &mut R, width: u32) -> Self;

    /// Lowercase hex, exactly `ceil(width / 4)` digits, most significant first.
    fn to_hex(&self, width: u32) -> String {
        let digits = hex_digits(width);
        let mut s = String::with_capacity(digits as usize);
        for d in (0..digits).rev() {
            let nib = self.extract(4 * d, 4) as u32;
            s.push(char::from_digit(nib, 16).expect("nibble"));
        }
        s
    }

    fn from_hex(s: &str, width: u32) -> Result<Self> {
        let digits = hex_digits(width) as usize;
        if s.len() != digits {
            return Err(Error::Parse(format!(
                "expected {digits} hex digits for w={width}, got {:?}",
                s
            )));
        }
        let mut word = Self::zero();
        for (pos, ch) in s.chars().rev().enumerate() {
            let nib = match ch {
                '0'..='9' | 'a'..='f' => ch.to_digit(16).unwrap(),
                _ => {
                    return Err(Error::Parse(format!(
                        "invalid hex digit {ch:?} (lowercase only)"
                    )))
                }
            };
            for b in 0..4 {
                if nib >> b & 1 == 1 {
                    let i = 4 * pos as u32 + b;
                    if i >= width {
                        return Err(Error::Parse(format!(
                            "word {s} has bits beyond width {width}"
                        )));
                    }
                    word = word.with_bit(i);
                }
            }
        }
        Ok(word)
    }
}

pub fn hex_digits(width: u32) -> u32 {
    width.div_ceil(4)
}

/// Mask with the low `width` bits set (`width <= 64`).
#[inline]
pub fn low_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl BitWord for u64 {
    const CAPACITY: u32 = 64;

    #[inline]
    fn from_u64(v: u64) -> Self {
        v
    }

    #[inline]
    fn count_ones(&self) -> u32 {
        u64::count_ones(*self)
    }

    #[inline]
    fn bit(&self, i: u32) -> bool {
        i < 64 && (self >> i) & 1 == 1
    }

    #[inline]
    fn with_bit(self, i: u32) -> Self {
        self | (1u64 << i)
    }

    #[inline]
    fn extract(&self, start: u32, len: u32) -> u64 {
        if start >= 64 {
            return 0;
        }
        (self >> start) & low_mask(len)
    }

    #[inline]
    fn bit_len(&self) -> u32 {
        64 - self.leading_zeros()
    }

    fn random<R: Rng + ?Sized>(rng: &mut R, width: u32) -> Self {
        rng.gen::<u64>() & low_mask(width)
    }
}

/// A key of up to [`MAX_WIDTH`] bits as eight 64-bit limbs, most significant
/// limb first. Bits above the instance width are always zero.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct WideWord {
    limbs: [u64; WIDE_LIMBS],
}

impl WideWord {
    /// Limbs, most significant first.
    pub fn limbs(&self) -> &[u64; WIDE_LIMBS] {
        &self.limbs
    }

    pub fn from_limbs(limbs: [u64; WIDE_LIMBS]) -> Self {
        WideWord { limbs }
    }

    #[inline]
    fn slot(i: u32) -> (usize, u32) {
        (WIDE_LIMBS - 1 - (i / 64) as usize, i % 64)
    }
}

impl fmt::Debug for WideWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.bit_len().max(1);
        write!(f, "WideWord(0x{})", self.to_hex(width))
    }
}

impl BitXor for WideWord {
    type Output = Self;
    #[inline]
    fn bitxor(mut self, rhs: Self) -> Self {
        for (a, b) in self.limbs.iter_mut().zip(rhs.limbs) {
            *a ^= b;
        }
        self
    }
}

impl BitAnd for WideWord {
    type Output = Self;
    #[inline]
    fn bitand(mut self, rhs: Self) -> Self {
        for (a, b) in self.limbs.iter_mut().zip(rhs.limbs) {
            *a &= b;
        }
        self
    }
}

impl BitOr for WideWord {
    type Output = Self;
    #[inline]
    fn bitor(mut self, rhs: Self) -> Self {
        for (a, b) in self.limbs.iter_mut().zip(rhs.limbs) {
            *a |= b;
        }
        self
    }
}

impl BitWord for WideWord {
    const CAPACITY: u32 = MAX_WIDTH;

    fn from_u64(v: u64) -> Self {
        let mut w = WideWord::default();
        w.limbs[WIDE_LIMBS - 1] = v;
        w
    }

    #[inline]
    fn count_ones(&self) -> u32 {
        self.limbs.iter().map(|l| l.count_ones()).sum()
    }

    #[inline]
    fn bit(&self, i: u32) -> bool {
        if i >= MAX_WIDTH {
            return false;
        }
        let (limb, off) = Self::slot(i);
        (self.limbs[limb] >> off) & 1 == 1
    }

    #[inline]
    fn with_bit(mut self, i: u32) -> Self {
        let (limb, off) = Self::slot(i);
        self.limbs[limb] |= 1u64 << off;
        self
    }

    fn extract(&self, start: u32, len: u32) -> u64 {
        if start >= MAX_WIDTH || len == 0 {
            return 0;
        }
        let (limb, off) = Self::slot(start);
        let mut v = self.limbs[limb] >> off;
        if off > 0 && limb > 0 {
            v |= self.limbs[limb - 1] << (64 - off);
        }
        v & low_mask(len)
    }

    fn bit_len(&self) -> u32 {
        for (idx, limb) in self.limbs.iter().enumerate() {
            if *limb != 0 {
                let from_top = idx as u32 * 64 + limb.leading_zeros();
                return MAX_WIDTH - from_top;
            }
        }
        0
    }

    fn random<R: Rng + ?Sized>(rng: &mut R, width: u32) -> Self {
        let mut w = WideWord::default();
        let mut remaining = width.min(MAX_WIDTH);
        let mut limb = WIDE_LIMBS;
        while remaining > 0 {
            limb -= 1;
            let take = remaining.min(64);
            w.limbs[limb] = rng.gen::<u64>() & low_mask(take);
            remaining -= take;
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hex_round_trip_narrow() {
        let x = 0b1010u64;
        assert_eq!(x.to_hex(4), "a");
        assert_eq!(x.to_hex(9), "00a");
        assert_eq!(u64::from_hex("00a", 9).unwrap(), 10);
    }

    #[test]
    fn hex_rejects_bits_beyond_width() {
        // w = 6 allows two digits but only values below 0x40
        assert!(u64::from_hex("3f", 6).is_ok());
        assert!(u64::from_hex("40", 6).is_err());
        assert!(u64::from_hex("A", 4).is_err());
        assert!(u64::from_hex("0a", 4).is_err());
    }

    #[test]
    fn wide_order_matches_integer_order() {
        let lo = WideWord::from_u64(u64::MAX);
        let hi = WideWord::zero().with_bit(64);
        assert!(lo < hi);
        assert_eq!(hi.bit_len(), 65);
        assert_eq!(hi.extract(60, 8), 0x10);
    }

    #[test]
    fn wide_random_respects_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for width in [65, 100, 128, 200, 512] {
            for _ in 0..50 {
                let x = WideWord::random(&mut rng, width);
                assert!(x.fits(width));
            }
        }
    }

    #[test]
    fn wide_hex_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for width in [65, 127, 128, 333, 512] {
            let x = WideWord::random(&mut rng, width);
            let s = x.to_hex(width);
            assert_eq!(s.len() as u32, hex_digits(width));
            assert_eq!(WideWord::from_hex(&s, width).unwrap(), x);
        }
    }
}
