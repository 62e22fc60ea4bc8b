//! The 3XOR instance model, triple conventions, generators, the text file
//! format and the brute-force reference solver.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::{BitWord, WideWord, MAX_WIDTH};

/// Seed for every randomized component. Equal seeds give equal streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// An independent seed for sub-stream `stream`.
    pub fn derive(self, stream: u64) -> RngSeed {
        // splitmix64 finalizer over (seed, stream)
        let mut z = self
            .0
            .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
            .wrapping_add(0x6a09_e667_f3bc_c909);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        RngSeed(z ^ (z >> 31))
    }
}

/// A set of `n` distinct `w`-bit words, kept in ascending order.
#[derive(Clone, PartialEq, Eq)]
pub struct XorInstance<W> {
    words: Vec<W>,
    width: u32,
}

impl<W: BitWord> XorInstance<W> {
    /// Validates widths, sorts, and rejects duplicates.
    pub fn new(width: u32, mut words: Vec<W>) -> Result<Self> {
        check_width::<W>(width)?;
        for x in &words {
            if !x.fits(width) {
                return Err(Error::WidthMismatch {
                    expected: width,
                    actual: x.bit_len(),
                });
            }
        }
        words.sort_unstable();
        if let Some(pair) = words.windows(2).find(|p| p[0] == p[1]) {
            return Err(Error::DuplicateWord(pair[0].to_hex(width)));
        }
        Ok(XorInstance { words, width })
    }

    pub fn from_u64s(width: u32, words: &[u64]) -> Result<Self> {
        Self::new(width, words.iter().map(|&v| W::from_u64(v)).collect())
    }

    pub fn words(&self) -> &[W] {
        &self.words
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, x: &W) -> bool {
        self.words.binary_search(x).is_ok()
    }

    /// The same set without the zero word.
    pub fn without_zero(&self) -> XorInstance<W> {
        XorInstance {
            words: self
                .words
                .iter()
                .copied()
                .filter(|x| !x.is_zero())
                .collect(),
            width: self.width,
        }
    }

    /// Serializes to the `3XOR v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("3XOR v1 n={} w={}\n", self.len(), self.width);
        for x in &self.words {
            out.push_str(&x.to_hex(self.width));
            out.push('\n');
        }
        out
    }
}

impl<W: BitWord> fmt::Debug for XorInstance<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex: Vec<String> = self.words.iter().map(|x| x.to_hex(self.width)).collect();
        write!(f, "XorInstance(w={}, {{{}}})", self.width, hex.join(","))
    }
}

fn check_width<W: BitWord>(width: u32) -> Result<()> {
    let max = W::CAPACITY.min(MAX_WIDTH);
    if width == 0 || width > max {
        return Err(Error::WidthOutOfRange { width, max });
    }
    Ok(())
}

/// `a ⊕ b = c` with all three in the instance.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SolutionTriple<W> {
    pub a: W,
    pub b: W,
    pub c: W,
}

impl<W: BitWord> SolutionTriple<W> {
    pub fn new(a: W, b: W, c: W) -> Self {
        SolutionTriple { a, b, c }
    }

    pub fn holds(&self) -> bool {
        self.a ^ self.b == self.c
    }

    /// XOR relation plus membership of all three words.
    pub fn is_witness_for(&self, inst: &XorInstance<W>) -> bool {
        self.holds() && inst.contains(&self.a) && inst.contains(&self.b) && inst.contains(&self.c)
    }

    pub fn is_distinct(&self) -> bool {
        self.a != self.b && self.b != self.c && self.a != self.c
    }

    pub fn to_hex(&self, width: u32) -> [String; 3] {
        [
            self.a.to_hex(width),
            self.b.to_hex(width),
            self.c.to_hex(width),
        ]
    }
}

impl<W: BitWord> fmt::Debug for SolutionTriple<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} ^ {:?} = {:?})", self.a, self.b, self.c)
    }
}

/// Which triples count as solutions.
///
/// `Any` admits every `(a, b, c) ∈ X³`, including `a = b` with `c = 0`.
/// `Distinct` additionally requires `a, b, c` pairwise distinct. Within a set
/// the zero word can only occur in degenerate triples, so `Distinct` is the
/// `Any` problem on `X \ {0}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripleConvention {
    #[default]
    Any,
    Distinct,
}

impl TripleConvention {
    pub fn apply<'a, W: BitWord>(&self, inst: &'a XorInstance<W>) -> Cow<'a, XorInstance<W>> {
        match self {
            TripleConvention::Any => Cow::Borrowed(inst),
            TripleConvention::Distinct => Cow::Owned(inst.without_zero()),
        }
    }

    pub fn admits<W: BitWord>(&self, t: &SolutionTriple<W>) -> bool {
        t.holds()
            && match self {
                TripleConvention::Any => true,
                TripleConvention::Distinct => t.is_distinct(),
            }
    }
}

/// Reference solver: every pair `(a, b)` with a hash-set membership test for
/// `a ⊕ b`.
pub fn brute_force_solve<W: BitWord>(inst: &XorInstance<W>) -> Option<SolutionTriple<W>> {
    let set: HashSet<W> = inst.words().iter().copied().collect();
    let words = inst.words();
    for (i, &a) in words.iter().enumerate() {
        for &b in &words[i..] {
            let c = a ^ b;
            if set.contains(&c) {
                return Some(SolutionTriple::new(a, b, c));
            }
        }
    }
    None
}

/// Number of ordered triples `(a, b, c) ∈ X³` with `a ⊕ b = c`.
pub fn count_all_solutions<W: BitWord>(inst: &XorInstance<W>) -> u64 {
    let set: HashSet<W> = inst.words().iter().copied().collect();
    let mut count = 0u64;
    for &a in inst.words() {
        for &b in inst.words() {
            if set.contains(&(a ^ b)) {
                count += 1;
            }
        }
    }
    count
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerateMode {
    Random,
    Planted,
    SolutionFree,
}

impl std::str::FromStr for GenerateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(GenerateMode::Random),
            "planted" => Ok(GenerateMode::Planted),
            "solution_free" | "solution-free" => Ok(GenerateMode::SolutionFree),
            _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}"))),
        }
    }
}

/// Rejection-sampling budget for [`GenerateMode::SolutionFree`].
pub const DEFAULT_SOLUTION_FREE_RETRIES: u32 = 64;

pub fn generate_instance<W: BitWord>(
    n: usize,
    width: u32,
    seed: RngSeed,
    mode: GenerateMode,
) -> Result<XorInstance<W>> {
    generate_instance_with_budget(n, width, seed, mode, DEFAULT_SOLUTION_FREE_RETRIES)
}

pub fn generate_instance_with_budget<W: BitWord>(
    n: usize,
    width: u32,
    seed: RngSeed,
    mode: GenerateMode,
    retries: u32,
) -> Result<XorInstance<W>> {
    check_width::<W>(width)?;
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    if width < 64 && n as u128 > 1u128 << width {
        return Err(Error::Infeasible(format!(
            "cannot draw {n} distinct words of width {width}"
        )));
    }
    let mut rng = seed.rng();
    match mode {
        GenerateMode::Random => XorInstance::new(width, draw_distinct(&mut rng, n, width, &[])),
        GenerateMode::Planted => {
            if n < 3 || width < 2 {
                return Err(Error::Infeasible(
                    "planted instances need n >= 3 and w >= 2".into(),
                ));
            }
            let a = draw_nonzero::<W, _>(&mut rng, width);
            let b = loop {
                let b = draw_nonzero::<W, _>(&mut rng, width);
                if b != a {
                    break b;
                }
            };
            let planted = [a, b, a ^ b];
            let mut words = draw_distinct(&mut rng, n - 3, width, &planted);
            words.extend_from_slice(&planted);
            words.shuffle(&mut rng);
            XorInstance::new(width, words)
        }
        GenerateMode::SolutionFree => {
            for _ in 0..retries.max(1) {
                let words = draw_distinct(&mut rng, n, width, &[]);
                let inst = XorInstance::new(width, words)?;
                if brute_force_solve(&inst).is_none() {
                    return Ok(inst);
                }
            }
            Err(Error::RetryBudgetExhausted {
                what: "solution-free generation (solutions are dense for this n and w)",
                retries,
            })
        }
    }
}

fn draw_nonzero<W: BitWord, R: Rng>(rng: &mut R, width: u32) -> W {
    loop {
        let x = W::random(rng, width);
        if !x.is_zero() {
            return x;
        }
    }
}

/// `count` distinct words avoiding `exclude`. Dense requests on small widths
/// fall back to shuffling the whole universe.
fn draw_distinct<W: BitWord, R: Rng>(
    rng: &mut R,
    count: usize,
    width: u32,
    exclude: &[W],
) -> Vec<W> {
    let dense = width <= 24 && (count + exclude.len()) * 2 > (1usize << width);
    if dense {
        let mut all: Vec<W> = (0..1u64 << width)
            .map(W::from_u64)
            .filter(|x| !exclude.contains(x))
            .collect();
        let (picked, _) = all.partial_shuffle(rng, count);
        return picked.to_vec();
    }
    let mut seen: HashSet<W> = exclude.iter().copied().collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = W::random(rng, width);
        if seen.insert(x) {
            out.push(x);
        }
    }
    out
}

/// An instance of either key representation, chosen by width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyInstance {
    Narrow(XorInstance<u64>),
    Wide(XorInstance<WideWord>),
}

/// Runs `$body` with `$inst` bound to the concrete instance.
#[macro_export]
macro_rules! with_instance {
    ($any:expr, $inst:ident => $body:expr) => {
        match $any {
            $crate::instance::AnyInstance::Narrow($inst) => $body,
            $crate::instance::AnyInstance::Wide($inst) => $body,
        }
    };
}

impl AnyInstance {
    pub fn width(&self) -> u32 {
        with_instance!(self, i => i.width())
    }

    pub fn len(&self) -> usize {
        with_instance!(self, i => i.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_text(&self) -> String {
        with_instance!(self, i => i.to_text())
    }

    pub fn generate(n: usize, width: u32, seed: RngSeed, mode: GenerateMode) -> Result<Self> {
        if width <= 64 {
            generate_instance(n, width, seed, mode).map(AnyInstance::Narrow)
        } else {
            generate_instance(n, width, seed, mode).map(AnyInstance::Wide)
        }
    }

    /// Builds an instance from hex words in any order.
    pub fn from_hex_list<S: AsRef<str>>(width: u32, list: &[S]) -> Result<Self> {
        fn parse<W: BitWord, S: AsRef<str>>(width: u32, list: &[S]) -> Result<XorInstance<W>> {
            let digits = crate::word::hex_digits(width) as usize;
            let mut words = Vec::with_capacity(list.len());
            for s in list {
                let s = s.as_ref().trim().to_ascii_lowercase();
                let padded = format!("{s:0>digits$}");
                words.push(W::from_hex(&padded, width)?);
            }
            XorInstance::new(width, words)
        }
        if width <= 64 {
            parse(width, list).map(AnyInstance::Narrow)
        } else {
            parse(width, list).map(AnyInstance::Wide)
        }
    }

    /// Parses the `3XOR v1` text format. Rejects duplicates, wrong digit
    /// counts, unsorted lists and count mismatches.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))?;
        let (n, width) = parse_header(header)?;
        let body: Vec<&str> = lines.collect();
        let trailing_blank = body.iter().rev().take_while(|l| l.is_empty()).count();
        let body = &body[..body.len() - trailing_blank];
        if body.len() != n {
            return Err(Error::Parse(format!(
                "header says n={n} but {} word lines follow",
                body.len()
            )));
        }
        fn words<W: BitWord>(width: u32, body: &[&str]) -> Result<XorInstance<W>> {
            check_width::<W>(width)?;
            let mut out: Vec<W> = Vec::with_capacity(body.len());
            for (lineno, line) in body.iter().enumerate() {
                let x = W::from_hex(line, width)
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
                if let Some(prev) = out.last() {
                    if *prev == x {
                        return Err(Error::DuplicateWord(line.to_string()));
                    }
                    if *prev > x {
                        return Err(Error::Parse(format!(
                            "line {}: words not in ascending order",
                            lineno + 2
                        )));
                    }
                }
                out.push(x);
            }
            XorInstance::new(width, out)
        }
        if width <= 64 {
            words(width, body).map(AnyInstance::Narrow)
        } else {
            words(width, body).map(AnyInstance::Wide)
        }
    }
}

fn parse_header(line: &str) -> Result<(usize, u32)> {
    let bad = || {
        Error::Parse(format!(
            "bad header {line:?}, expected `3XOR v1 n=<n> w=<w>`"
        ))
    };
    let tokens: Vec<&str> = line.split(' ').collect();
    if tokens.len() != 4 || tokens[0] != "3XOR" || tokens[1] != "v1" {
        return Err(bad());
    }
    let n = tokens[2]
        .strip_prefix("n=")
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(bad)?;
    let w = tokens[3]
        .strip_prefix("w=")
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(bad)?;
    if w == 0 || w > MAX_WIDTH {
        return Err(Error::WidthOutOfRange {
            width: w,
            max: MAX_WIDTH,
        });
    }
    Ok((n, w))
}
