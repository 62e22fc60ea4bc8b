//! Word-packed arrays on a simulated word RAM.
//!
//! A [`SimWord`] is an exact `bits`-wide unsigned word built from 64-bit
//! limbs. A [`PackedArray`] stores `k` fields (k a power of two) side by side
//! in one such word, field `i` at bits `i·f .. (i+1)·f`. Within a field, from
//! the least significant end:
//!
//! ```text
//! | index (ib) | flag (1) | marker (1) | payload (pb) | test (1) |
//! ```
//!
//! The index tag is the field's original position, the flag marks padding
//! duplicates, the marker tells the two inputs of an intersection apart, and
//! the test bit is scratch space for word-parallel comparisons (zero between
//! operations). Fields compare as integers, so sorting orders by payload
//! first and the tags break ties.
//!
//! Every full-word operation executed through a [`PackedMachine`] is counted.
//! Arrays may span a few simulated words; an operation on such an array is
//! still counted once and [`PackedMachine::span`] reports the factor.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::word::low_mask;

pub const DEFAULT_SIM_WIDTH: u32 = 256;
pub const MAX_SIM_WIDTH: u32 = 512;
/// Simulated words one packed value (including temporary fields) may span.
pub const MAX_SPAN: u32 = 8;
pub const MAX_PAYLOAD_BITS: u32 = 48;

/// An unsigned integer of exactly `bits` bits; arithmetic wraps mod `2^bits`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SimWord {
    bits: u32,
    limbs: Vec<u64>,
}

impl SimWord {
    pub fn zero(bits: u32) -> Self {
        SimWord {
            bits,
            limbs: vec![0; bits.div_ceil(64) as usize],
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Limbs, least significant first.
    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    fn normalize(&mut self) {
        let rem = self.bits % 64;
        if rem != 0 {
            if let Some(top) = self.limbs.last_mut() {
                *top &= low_mask(rem);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    /// Bits `start..start+len` (`len <= 64`); bits past the top read as zero.
    pub fn get(&self, start: u32, len: u32) -> u64 {
        if start >= self.bits || len == 0 {
            return 0;
        }
        let (limb, off) = ((start / 64) as usize, start % 64);
        let mut v = self.limbs[limb] >> off;
        if off > 0 && limb + 1 < self.limbs.len() {
            v |= self.limbs[limb + 1] << (64 - off);
        }
        v & low_mask(len)
    }

    /// Overwrites bits `start..start+len` with the low `len` bits of `v`.
    pub fn set(&mut self, start: u32, len: u32, v: u64) {
        let v = v & low_mask(len);
        let (limb, off) = ((start / 64) as usize, start % 64);
        let mask = low_mask(len);
        self.limbs[limb] = (self.limbs[limb] & !(mask << off)) | (v << off);
        if off > 0 && off + len > 64 {
            let hi = 64 - off;
            self.limbs[limb + 1] = (self.limbs[limb + 1] & !(mask >> hi)) | (v >> hi);
        }
        self.normalize();
    }

    /// Same value in a word of a different width (truncating if narrower).
    pub fn resized(&self, bits: u32) -> SimWord {
        let mut w = SimWord::zero(bits);
        let n = w.limbs.len().min(self.limbs.len());
        w.limbs[..n].copy_from_slice(&self.limbs[..n]);
        w.normalize();
        w
    }

    fn check(&self, other: &SimWord) {
        debug_assert_eq!(self.bits, other.bits, "operand widths differ");
    }

    pub fn and_assign(&mut self, o: &SimWord) {
        self.check(o);
        self.limbs
            .iter_mut()
            .zip(&o.limbs)
            .for_each(|(a, b)| *a &= b);
    }

    pub fn or_assign(&mut self, o: &SimWord) {
        self.check(o);
        self.limbs
            .iter_mut()
            .zip(&o.limbs)
            .for_each(|(a, b)| *a |= b);
    }

    pub fn xor_assign(&mut self, o: &SimWord) {
        self.check(o);
        self.limbs
            .iter_mut()
            .zip(&o.limbs)
            .for_each(|(a, b)| *a ^= b);
    }

    pub fn shl_assign(&mut self, n: u32) {
        if n >= self.bits {
            self.limbs.iter_mut().for_each(|l| *l = 0);
            return;
        }
        let (q, r) = ((n / 64) as usize, n % 64);
        let len = self.limbs.len();
        for i in (0..len).rev() {
            let mut v = if i >= q { self.limbs[i - q] << r } else { 0 };
            if r > 0 && i > q {
                v |= self.limbs[i - q - 1] >> (64 - r);
            }
            self.limbs[i] = v;
        }
        self.normalize();
    }

    pub fn shr_assign(&mut self, n: u32) {
        if n >= self.bits {
            self.limbs.iter_mut().for_each(|l| *l = 0);
            return;
        }
        let (q, r) = ((n / 64) as usize, n % 64);
        let len = self.limbs.len();
        for i in 0..len {
            let mut v = if i + q < len {
                self.limbs[i + q] >> r
            } else {
                0
            };
            if r > 0 && i + q + 1 < len {
                v |= self.limbs[i + q + 1] << (64 - r);
            }
            self.limbs[i] = v;
        }
    }

    pub fn wrapping_add_assign(&mut self, o: &SimWord) {
        self.check(o);
        let mut carry = false;
        for (a, &b) in self.limbs.iter_mut().zip(&o.limbs) {
            let (s1, c1) = a.overflowing_add(b);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *a = s2;
            carry = c1 || c2;
        }
        self.normalize();
    }

    pub fn wrapping_sub_assign(&mut self, o: &SimWord) {
        self.check(o);
        let mut borrow = false;
        for (a, &b) in self.limbs.iter_mut().zip(&o.limbs) {
            let (d1, b1) = a.overflowing_sub(b);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            *a = d2;
            borrow = b1 || b2;
        }
        self.normalize();
    }

    /// Multiplication by a one-limb value, mod `2^bits`.
    pub fn wrapping_mul_u64(&mut self, v: u64) {
        let mut carry = 0u128;
        for a in self.limbs.iter_mut() {
            let p = *a as u128 * v as u128 + carry;
            *a = p as u64;
            carry = p >> 64;
        }
        self.normalize();
    }
}

impl fmt::Debug for SimWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SimWord<{}>(0x", self.bits)?;
        for l in self.limbs.iter().rev() {
            write!(f, "{l:016x}")?;
        }
        write!(f, ")")
    }
}

/// Field geometry shared by all arrays with the same `k` and payload width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Layout {
    pub k: u32,
    pub payload_bits: u32,
    /// Wide enough for positions in a concatenation of two arrays.
    pub index_bits: u32,
    pub field_bits: u32,
}

impl Layout {
    pub fn new(k: u32, payload_bits: u32) -> Result<Self> {
        if !k.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "k={k} must be a power of two"
            )));
        }
        if payload_bits == 0 || payload_bits > MAX_PAYLOAD_BITS {
            return Err(Error::InvalidParameter(format!(
                "payload width {payload_bits} must be in 1..={MAX_PAYLOAD_BITS}"
            )));
        }
        let index_bits = k.trailing_zeros() + 1;
        Ok(Layout {
            k,
            payload_bits,
            index_bits,
            field_bits: index_bits + payload_bits + 3,
        })
    }

    pub fn flag_off(&self) -> u32 {
        self.index_bits
    }

    pub fn marker_off(&self) -> u32 {
        self.index_bits + 1
    }

    pub fn payload_off(&self) -> u32 {
        self.index_bits + 2
    }

    pub fn test_off(&self) -> u32 {
        self.field_bits - 1
    }

    /// Simulated words needed for `m` fields.
    pub fn span(&self, m: u32, sim_width: u32) -> u32 {
        (m as u64 * self.field_bits as u64).div_ceil(sim_width as u64) as u32
    }
}

/// One decoded field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Field {
    pub payload: u64,
    pub marker: bool,
    pub pad: bool,
    pub index: usize,
}

/// State of a packed array after one layer of the sorting network, which
/// compare-exchanged fields `distance` apart.
#[derive(Clone, Debug)]
pub struct SortLayer {
    pub distance: u32,
    pub array: PackedArray,
}

#[derive(Clone, PartialEq, Eq)]
pub struct PackedArray {
    layout: Layout,
    sim_width: u32,
    len: usize,
    word: SimWord,
}

impl PackedArray {
    /// Packs `values` into `k = next_pow2(len)` fields; missing fields are
    /// flagged duplicates of the last value (of `0` for an empty list).
    /// Capacity is checked for the array plus `k` temporary fields.
    pub fn pack(values: &[u64], payload_bits: u32, sim_width: u32) -> Result<Self> {
        let k = values.len().max(1).next_power_of_two() as u32;
        Self::pack_to(values, k, payload_bits, sim_width)
    }

    /// As [`PackedArray::pack`] with a fixed field count `k >= len`, so that
    /// arrays of different lengths share one layout.
    pub fn pack_to(values: &[u64], k: u32, payload_bits: u32, sim_width: u32) -> Result<Self> {
        check_sim_width(sim_width)?;
        if (k as usize) < values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values do not fit in k={k} fields",
                values.len()
            )));
        }
        let layout = Layout::new(k, payload_bits)?;
        if let Some(v) = values.iter().find(|&&v| v > low_mask(payload_bits)) {
            return Err(Error::InvalidParameter(format!(
                "value {v} does not fit in {payload_bits} payload bits"
            )));
        }
        let needed = 2 * k as u64 * layout.field_bits as u64;
        let available = MAX_SPAN as u64 * sim_width as u64;
        if needed > available {
            return Err(Error::Capacity { needed, available });
        }
        let bits = layout.span(k, sim_width) * sim_width;
        let mut word = SimWord::zero(bits);
        let fill = values.last().copied().unwrap_or(0);
        for i in 0..k as usize {
            let (v, pad) = match values.get(i) {
                Some(&v) => (v, false),
                None => (fill, true),
            };
            word.set(
                i as u32 * layout.field_bits,
                layout.field_bits,
                encode(&layout, v, false, pad, i),
            );
        }
        Ok(PackedArray {
            layout,
            sim_width,
            len: values.len(),
            word,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn k(&self) -> usize {
        self.layout.k as usize
    }

    /// Number of values before padding.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sim_width(&self) -> u32 {
        self.sim_width
    }

    pub fn word(&self) -> &SimWord {
        &self.word
    }

    pub fn field(&self, i: usize) -> Field {
        decode(
            &self.layout,
            self.word
                .get(i as u32 * self.layout.field_bits, self.layout.field_bits),
        )
    }

    pub fn fields(&self) -> Vec<Field> {
        (0..self.k()).map(|i| self.field(i)).collect()
    }

    /// Payloads of the non-padding fields in field order.
    pub fn unpack(&self) -> Vec<u64> {
        self.fields()
            .into_iter()
            .filter(|f| !f.pad)
            .map(|f| f.payload)
            .collect()
    }
}

impl fmt::Debug for PackedArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.layout.payload_bits.div_ceil(4) as usize;
        let parts: Vec<String> = self
            .fields()
            .iter()
            .map(|fl| {
                let pad = if fl.pad { "*" } else { "" };
                format!("{:0digits$x}{pad}", fl.payload)
            })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}

fn check_sim_width(sim_width: u32) -> Result<()> {
    if !(64..=MAX_SIM_WIDTH).contains(&sim_width) {
        return Err(Error::InvalidParameter(format!(
            "simulated width {sim_width} must be in 64..={MAX_SIM_WIDTH}"
        )));
    }
    Ok(())
}

fn encode(l: &Layout, payload: u64, marker: bool, pad: bool, index: usize) -> u64 {
    (payload << l.payload_off())
        | (marker as u64) << l.marker_off()
        | (pad as u64) << l.flag_off()
        | index as u64
}

fn decode(l: &Layout, v: u64) -> Field {
    Field {
        payload: (v >> l.payload_off()) & low_mask(l.payload_bits),
        marker: (v >> l.marker_off()) & 1 == 1,
        pad: (v >> l.flag_off()) & 1 == 1,
        index: (v & low_mask(l.index_bits)) as usize,
    }
}

/// Constants for `m` fields of one layout.
struct Masks {
    bits: u32,
    /// `(distance in fields, lower-partner mask, test bits, descending mask)`
    stages: Vec<(u32, SimWord, SimWord, SimWord)>,
    /// Bit 0 of every field.
    ones: SimWord,
    /// Flag bits of fields `0..m/2`.
    flags_low: SimWord,
    /// Marker bits of fields `0..m/2`.
    markers_low: SimWord,
    /// Payload and marker bits of fields `0..m-1`.
    payload_marker: SimWord,
    /// Field `i` holds `i` in its index bits.
    positions: SimWord,
}

impl Masks {
    fn build(layout: &Layout, m: u32, bits: u32) -> Masks {
        let f = layout.field_bits;
        let fill = |pred: &dyn Fn(u32) -> bool, start: u32, len: u32| {
            let mut w = SimWord::zero(bits);
            for i in (0..m).filter(|&i| pred(i)) {
                w.set(i * f + start, len, u64::MAX);
            }
            w
        };
        let mut stages = Vec::new();
        let mut s = 2;
        while s <= m {
            let mut d = s / 2;
            while d >= 1 {
                let lower = |i: u32| i & d == 0;
                let m_d = fill(&lower, 0, f - 1);
                let h = fill(&lower, f - 1, 1);
                let dsc = fill(&|i| i & d == 0 && i & s != 0, 0, f - 1);
                stages.push((d, m_d, h, dsc));
                d /= 2;
            }
            s *= 2;
        }
        let ones = fill(&|_| true, 0, 1);
        let flags_low = fill(&|i| i < m / 2, layout.flag_off(), 1);
        let markers_low = fill(&|i| i < m / 2, layout.marker_off(), 1);
        let payload_marker = fill(&|i| i + 1 < m, layout.marker_off(), layout.payload_bits + 1);
        let mut positions = SimWord::zero(bits);
        for i in 0..m {
            positions.set(i * f, layout.index_bits, i as u64);
        }
        Masks {
            bits,
            stages,
            ones,
            flags_low,
            markers_low,
            payload_marker,
            positions,
        }
    }
}

/// Executes packed operations and counts simulated-word operations.
#[derive(Clone)]
pub struct PackedMachine {
    sim_width: u32,
    ops: u64,
    fault: bool,
    masks: HashMap<(Layout, u32), Arc<Masks>>,
}

impl fmt::Debug for PackedMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PackedMachine")
            .field("sim_width", &self.sim_width)
            .field("ops", &self.ops)
            .field("fault", &self.fault)
            .finish()
    }
}

impl PackedMachine {
    pub fn new(sim_width: u32) -> Result<Self> {
        check_sim_width(sim_width)?;
        Ok(PackedMachine {
            sim_width,
            ops: 0,
            fault: false,
            masks: HashMap::new(),
        })
    }

    pub fn sim_width(&self) -> u32 {
        self.sim_width
    }

    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn reset_ops(&mut self) {
        self.ops = 0;
    }

    /// Simulated words per operation for `m` fields of `layout`.
    pub fn span(&self, layout: &Layout, m: u32) -> u32 {
        layout.span(m, self.sim_width)
    }

    /// Deliberately breaks the compare-exchange step (descending blocks are
    /// sorted ascending), for checking that verification catches it.
    pub fn set_fault(&mut self, on: bool) {
        self.fault = on;
    }

    pub fn pack(&self, values: &[u64], payload_bits: u32) -> Result<PackedArray> {
        PackedArray::pack(values, payload_bits, self.sim_width)
    }

    pub fn pack_to(&self, values: &[u64], k: u32, payload_bits: u32) -> Result<PackedArray> {
        PackedArray::pack_to(values, k, payload_bits, self.sim_width)
    }

    fn masks(&mut self, layout: Layout, m: u32) -> Arc<Masks> {
        let bits = layout.span(m, self.sim_width) * self.sim_width;
        self.masks
            .entry((layout, m))
            .or_insert_with(|| Arc::new(Masks::build(&layout, m, bits)))
            .clone()
    }

    fn check_machine(&self, pa: &PackedArray) -> Result<()> {
        if pa.sim_width != self.sim_width {
            return Err(Error::InvalidParameter(format!(
                "array packed for W={}, machine has W={}",
                pa.sim_width, self.sim_width
            )));
        }
        Ok(())
    }

    /// XORs `v` into every payload: one broadcast multiplication and one XOR.
    pub fn xor_broadcast(&mut self, pa: &PackedArray, v: u64) -> Result<PackedArray> {
        self.check_machine(pa)?;
        let layout = pa.layout;
        if v > low_mask(layout.payload_bits) {
            return Err(Error::InvalidParameter(format!(
                "broadcast value {v} overflows {} payload bits",
                layout.payload_bits
            )));
        }
        let masks = self.masks(layout, layout.k);
        let mut b = masks.ones.clone();
        b.wrapping_mul_u64(v << layout.payload_off());
        let mut out = pa.clone();
        out.word.xor_assign(&b);
        self.ops += 3;
        Ok(out)
    }

    /// Batcher's bitonic sorting network, one compare-exchange layer per
    /// stage, all pairs of a layer handled by the same few word operations.
    pub fn bitonic_sort(&mut self, pa: &PackedArray) -> Result<PackedArray> {
        self.check_machine(pa)?;
        let masks = self.masks(pa.layout, pa.layout.k);
        let mut out = pa.clone();
        self.sort_word(&mut out.word, &pa.layout, &masks, None);
        Ok(out)
    }

    /// As [`bitonic_sort`](Self::bitonic_sort), also returning the array
    /// after every compare-exchange layer.
    pub fn bitonic_sort_trace(
        &mut self,
        pa: &PackedArray,
    ) -> Result<(PackedArray, Vec<SortLayer>)> {
        self.check_machine(pa)?;
        let masks = self.masks(pa.layout, pa.layout.k);
        let mut out = pa.clone();
        let mut words = Vec::new();
        self.sort_word(&mut out.word, &pa.layout, &masks, Some(&mut words));
        let layers = masks
            .stages
            .iter()
            .zip(words)
            .map(|((d, ..), word)| SortLayer {
                distance: *d,
                array: PackedArray { word, ..pa.clone() },
            })
            .collect();
        Ok((out, layers))
    }

    fn sort_word(
        &mut self,
        x: &mut SimWord,
        layout: &Layout,
        masks: &Masks,
        mut trace: Option<&mut Vec<SimWord>>,
    ) {
        debug_assert_eq!(x.bits(), masks.bits);
        let f = layout.field_bits;
        let mut a = SimWord::zero(masks.bits);
        let mut b = SimWord::zero(masks.bits);
        let mut t = SimWord::zero(masks.bits);
        let mut u = SimWord::zero(masks.bits);
        for (d, m_d, h, dsc) in &masks.stages {
            let shift = d * f;
            a.clone_from(x);
            a.and_assign(m_d);
            b.clone_from(x);
            b.shr_assign(shift);
            b.and_assign(m_d);
            // test bit of each lower field survives iff a >= b
            t.clone_from(&a);
            t.or_assign(h);
            t.wrapping_sub_assign(&b);
            t.and_assign(h);
            // spread each test bit over the f-1 bits below it
            u.clone_from(&t);
            u.shr_assign(f - 1);
            t.wrapping_sub_assign(&u);
            if !self.fault {
                t.xor_assign(dsc);
            }
            u.clone_from(&a);
            u.xor_assign(&b);
            u.and_assign(&t);
            a.xor_assign(&u);
            b.xor_assign(&u);
            b.shl_assign(shift);
            a.or_assign(&b);
            x.clone_from(&a);
            self.ops += 16;
            if let Some(t) = trace.as_mut() {
                t.push(x.clone());
            }
        }
    }

    /// Lists all `(i, j)` with `a_i = b_j` among the non-padding fields.
    ///
    /// The two arrays are concatenated into `2k` fields (`b` marked), sorted,
    /// and XORed with themselves shifted by one field, so that a zero payload
    /// with marker bit set marks an `a`-run directly followed by a `b`-run of
    /// the same value. Positions are written into the difference fields,
    /// which are sorted again; the marked zero-payload entries then form one
    /// contiguous run found by binary search. In `a` the flag is inverted
    /// first, so the real element of each run sits next to the boundary on
    /// both sides.
    pub fn intersect_listing(
        &mut self,
        a: &PackedArray,
        b: &PackedArray,
    ) -> Result<Vec<(usize, usize)>> {
        self.check_machine(a)?;
        self.check_machine(b)?;
        if a.layout != b.layout {
            return Err(Error::InvalidParameter(format!(
                "layouts differ: {:?} vs {:?}",
                a.layout, b.layout
            )));
        }
        if a.is_empty() || b.is_empty() {
            return Ok(Vec::new());
        }
        let layout = a.layout;
        let k = layout.k;
        let m = 2 * k;
        let f = layout.field_bits;
        let masks = self.masks(layout, m);

        let mut c = a.word.resized(masks.bits);
        c.xor_assign(&masks.flags_low);
        let mut hi = b.word.resized(masks.bits);
        hi.or_assign(&masks.markers_low);
        hi.shl_assign(k * f);
        c.or_assign(&hi);
        self.ops += 4;
        self.sort_word(&mut c, &layout, &masks, None);

        let mut d = c.clone();
        d.shr_assign(f);
        d.xor_assign(&c);
        d.and_assign(&masks.payload_marker);
        d.or_assign(&masks.positions);
        self.ops += 4;
        self.sort_word(&mut d, &layout, &masks, None);

        let key = |this: &mut Self, j: u32| {
            this.ops += 1;
            d.get(j * f + layout.marker_off(), layout.payload_bits + 1)
        };
        let (mut lo, mut hi_idx) = (0u32, m);
        while lo < hi_idx {
            let mid = (lo + hi_idx) / 2;
            if key(self, mid) >= 1 {
                hi_idx = mid;
            } else {
                lo = mid + 1;
            }
        }
        let mut pairs = Vec::new();
        let mut j = lo;
        while j < m && key(self, j) == 1 {
            let pos = d.get(j * f, layout.index_bits) as u32;
            let left = decode(&layout, c.get(pos * f, f));
            let right = decode(&layout, c.get((pos + 1) * f, f));
            self.ops += 3;
            let well_formed = !left.marker && left.pad && right.marker && !right.pad;
            debug_assert!(well_formed || self.fault);
            if well_formed {
                pairs.push((left.index, right.index));
            }
            j += 1;
        }
        Ok(pairs)
    }
}
