//! Symbolic words over `N*` and `N* x N*`, the continued-fraction branches
//! `phi_n(x) = 1/(x + n)` and the codings between symbol space and the plane.
//!
//! Words are always finite. A word of length `k` stands for the cylinder of
//! all infinite sequences that start with it, and every coding returns an
//! enclosure of that cylinder's image rather than a single point.

use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iterates below this value are treated as an exact hit on a rational.
pub const RATIONAL_THRESHOLD: f64 = 1e-12;

/// Default cap on the number of words an enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// A positive integer, the index of a branch `phi_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Digit(u64);

impl Digit {
    pub const ONE: Digit = Digit(1);

    pub fn new(value: u64) -> Result<Self> {
        if value == 0 {
            return Err(Error::InvalidDigit(value));
        }
        Ok(Digit(value))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub(crate) fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<u64> for Digit {
    type Error = Error;

    fn try_from(value: u64) -> Result<Self> {
        Digit::new(value)
    }
}

impl From<Digit> for u64 {
    fn from(d: Digit) -> u64 {
        d.0
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A letter `(m, n)` of the pair alphabet. Ordering is by `m`, then `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u64; 2]", into = "[u64; 2]")]
pub struct PairSymbol {
    m: Digit,
    n: Digit,
}

impl PairSymbol {
    pub fn new(m: u64, n: u64) -> Result<Self> {
        Ok(PairSymbol {
            m: Digit::new(m)?,
            n: Digit::new(n)?,
        })
    }

    pub fn from_digits(m: Digit, n: Digit) -> Self {
        PairSymbol { m, n }
    }

    pub fn m(self) -> Digit {
        self.m
    }

    pub fn n(self) -> Digit {
        self.n
    }

    /// The coordinate selected by `which` (1 or 2).
    pub fn coordinate(self, which: Coordinate) -> Digit {
        match which {
            Coordinate::First => self.m,
            Coordinate::Second => self.n,
        }
    }

    pub fn swapped(self) -> Self {
        PairSymbol {
            m: self.n,
            n: self.m,
        }
    }
}

impl TryFrom<[u64; 2]> for PairSymbol {
    type Error = Error;

    fn try_from(v: [u64; 2]) -> Result<Self> {
        PairSymbol::new(v[0], v[1])
    }
}

impl From<PairSymbol> for [u64; 2] {
    fn from(s: PairSymbol) -> [u64; 2] {
        [s.m.0, s.n.0]
    }
}

impl fmt::Display for PairSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

/// Which digit coordinate of a pair symbol a marginal refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    First,
    Second,
}

impl Coordinate {
    pub fn from_index(which: u8) -> Result<Self> {
        match which {
            1 => Ok(Coordinate::First),
            2 => Ok(Coordinate::Second),
            _ => Err(Error::InvalidArgument(format!(
                "coordinate must be 1 or 2, got {which}"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DigitWord(Vec<Digit>);

impl DigitWord {
    pub fn new(digits: Vec<Digit>) -> Self {
        DigitWord(digits)
    }

    pub fn from_values(values: &[u64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| Digit::new(v))
            .collect::<Result<Vec<_>>>()
            .map(DigitWord)
    }

    pub fn repeat(digit: Digit, len: usize) -> Self {
        DigitWord(vec![digit; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Digit] {
        &self.0
    }

    pub fn push(&mut self, d: Digit) {
        self.0.push(d);
    }

    pub fn values(&self) -> Vec<u64> {
        self.0.iter().map(|d| d.0).collect()
    }
}

impl FromIterator<Digit> for DigitWord {
    fn from_iter<I: IntoIterator<Item = Digit>>(iter: I) -> Self {
        DigitWord(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairWord(Vec<PairSymbol>);

impl PairWord {
    pub fn new(symbols: Vec<PairSymbol>) -> Self {
        PairWord(symbols)
    }

    pub fn repeat(symbol: PairSymbol, len: usize) -> Self {
        PairWord(vec![symbol; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[PairSymbol] {
        &self.0
    }

    pub fn first(&self) -> Option<PairSymbol> {
        self.0.first().copied()
    }

    pub fn push(&mut self, s: PairSymbol) {
        self.0.push(s);
    }

    /// The word with its first symbol dropped.
    pub fn shift(&self) -> PairWord {
        PairWord(self.0.iter().skip(1).copied().collect())
    }

    /// `s` followed by this word.
    pub fn prepend(&self, s: PairSymbol) -> PairWord {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(s);
        v.extend_from_slice(&self.0);
        PairWord(v)
    }

    pub fn truncated(&self, len: usize) -> PairWord {
        PairWord(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn projection(&self, which: Coordinate) -> DigitWord {
        self.0.iter().map(|s| s.coordinate(which)).collect()
    }

    pub fn p1(&self) -> DigitWord {
        self.projection(Coordinate::First)
    }

    pub fn p2(&self) -> DigitWord {
        self.projection(Coordinate::Second)
    }
}

impl FromIterator<PairSymbol> for PairWord {
    fn from_iter<I: IntoIterator<Item = PairSymbol>>(iter: I) -> Self {
        PairWord(iter.into_iter().collect())
    }
}

impl fmt::Display for PairWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// The finite alphabet `{1..=M} x {1..=M}` standing in for `N* x N*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncatedAlphabet {
    max_digit: u64,
}

impl TruncatedAlphabet {
    pub fn new(max_digit: u64) -> Result<Self> {
        if max_digit == 0 {
            return Err(Error::InvalidArgument(
                "truncation M must be at least 1".into(),
            ));
        }
        Ok(TruncatedAlphabet { max_digit })
    }

    pub fn max_digit(&self) -> u64 {
        self.max_digit
    }

    pub fn size(&self) -> usize {
        (self.max_digit * self.max_digit) as usize
    }

    pub fn contains(&self, s: PairSymbol) -> bool {
        s.m.0 <= self.max_digit && s.n.0 <= self.max_digit
    }

    /// All `M^2` symbols in lexicographic order.
    pub fn symbols(&self) -> Vec<PairSymbol> {
        let mut out = Vec::with_capacity(self.size());
        for m in 1..=self.max_digit {
            for n in 1..=self.max_digit {
                out.push(PairSymbol {
                    m: Digit(m),
                    n: Digit(n),
                });
            }
        }
        out
    }
}

/// A closed real interval. `width` is the width of the enclosed set, which can
/// be far below `hi - lo` once outward rounding dominates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalEnclosure {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl IntervalEnclosure {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        IntervalEnclosure {
            lo,
            hi,
            width: hi - lo,
        }
    }

    pub fn unit() -> Self {
        IntervalEnclosure::new(0.0, 1.0)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &IntervalEnclosure) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Interiors are disjoint when the intervals overlap in at most the
    /// rounding slack of a shared endpoint.
    pub fn interiors_disjoint(&self, other: &IntervalEnclosure) -> bool {
        let overlap = self.hi.min(other.hi) - self.lo.max(other.lo);
        overlap <= 32.0 * f64::EPSILON * self.hi.abs().max(other.hi.abs()).max(1.0)
    }

    fn translated(&self, by: f64) -> Self {
        let slack = 2.0 * f64::EPSILON * (self.hi.abs() + by.abs());
        IntervalEnclosure {
            lo: self.lo + by - slack,
            hi: self.hi + by + slack,
            width: self.width,
        }
    }
}

/// A product of two enclosures in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexBox {
    pub re: IntervalEnclosure,
    pub im: IntervalEnclosure,
}

impl ComplexBox {
    pub fn midpoint(&self) -> Complex64 {
        Complex64::new(self.re.midpoint(), self.im.midpoint())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.re.contains(z.re) && self.im.contains(z.im)
    }
}

fn check_unit_domain(x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain { value: x })
    }
}

/// `phi_n(x) = 1/(x + n)`.
pub fn cf_map(n: Digit, x: f64) -> Result<f64> {
    check_unit_domain(x)?;
    Ok(1.0 / (x + n.as_f64()))
}

/// `|phi_n'(x)| = 1/(x + n)^2`.
pub fn cf_map_derivative_mod(n: Digit, x: f64) -> Result<f64> {
    check_unit_domain(x)?;
    let d = x + n.as_f64();
    Ok(1.0 / (d * d))
}

/// Continuants of `[0; a_0, ..., a_{k-1}]`, kept normalised so that long words
/// with large digits do not overflow.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Continuants {
    pub q: f64,
    pub q_prev: f64,
    /// Natural log of the factor divided out of `q` and `q_prev`.
    pub log_scale: f64,
}

impl Continuants {
    pub fn of(digits: impl IntoIterator<Item = u64>) -> Self {
        let (mut q_prev, mut q) = (0.0_f64, 1.0_f64);
        let mut log_scale = 0.0;
        for a in digits {
            let next = a as f64 * q + q_prev;
            q_prev = q;
            q = next;
            if q > 1e150 {
                q_prev /= q;
                log_scale += q.ln();
                q = 1.0;
            }
        }
        Continuants {
            q,
            q_prev,
            log_scale,
        }
    }

    /// Width of the cylinder image, `1 / (q_k (q_k + q_{k-1}))`.
    pub fn cylinder_width(&self) -> f64 {
        (-2.0 * self.log_scale).exp() / (self.q * (self.q + self.q_prev))
    }

    /// `|(phi_{a_0} o ... o phi_{a_{k-1}})'(x)| = 1 / (q_k + x q_{k-1})^2`.
    pub fn derivative_at(&self, x: f64) -> f64 {
        let d = self.q + x * self.q_prev;
        (-2.0 * self.log_scale).exp() / (d * d)
    }
}

/// Evaluates `phi_{a_0} o ... o phi_{a_{k-1}}(x)` from the innermost branch out.
pub(crate) fn compose_branches(digits: &[u64], x: f64) -> f64 {
    digits
        .iter()
        .rev()
        .fold(x, |acc, &a| 1.0 / (acc + a as f64))
}

fn cylinder_image(digits: &[u64]) -> IntervalEnclosure {
    if digits.is_empty() {
        return IntervalEnclosure::unit();
    }
    let a = compose_branches(digits, 0.0);
    let b = compose_branches(digits, 1.0);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    // Each backward step is a contraction, so the accumulated relative error
    // stays within a few ulps.
    let slack = 8.0 * f64::EPSILON * hi;
    IntervalEnclosure {
        lo: (lo - slack).max(0.0),
        hi: (hi + slack).min(1.0),
        width: Continuants::of(digits.iter().copied()).cylinder_width(),
    }
}

/// Image of the cylinder `[w]` under the continued-fraction coding `rho_0`,
/// that is `phi_{w_0} o ... o phi_{w_{k-1}}([0, 1])`. The empty word maps to
/// `[0, 1]`.
pub fn rho0_value(w: &DigitWord) -> IntervalEnclosure {
    cylinder_image(&w.values())
}

/// First `depth` continued-fraction digits of `x` by the Gauss algorithm.
pub fn rho0_digits(x: f64, depth: usize) -> Result<DigitWord> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain { value: x });
    }
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let mut digits = DigitWord::default();
    let mut t = x;
    for _ in 0..depth {
        if t < RATIONAL_THRESHOLD {
            return Err(Error::RationalTermination { digits });
        }
        let inv = 1.0 / t;
        let d = inv.floor();
        digits.push(Digit(d as u64));
        t = inv - d;
    }
    Ok(digits)
}

/// Box enclosing `pi~([w]) = pi_1 + i pi_2`, the pair of continued fractions
/// `m_0 + 1/(m_1 + ...)` and `n_0 + 1/(n_1 + ...)`.
pub fn pi_tilde(w: &PairWord) -> Result<ComplexBox> {
    let Some(head) = w.first() else {
        return Err(Error::InvalidArgument(
            "pi_tilde needs a nonempty word".into(),
        ));
    };
    let tail = &w.as_slice()[1..];
    let re_tail: Vec<u64> = tail.iter().map(|s| s.m.0).collect();
    let im_tail: Vec<u64> = tail.iter().map(|s| s.n.0).collect();
    Ok(ComplexBox {
        re: cylinder_image(&re_tail).translated(head.m.as_f64()),
        im: cylinder_image(&im_tail).translated(head.n.as_f64()),
    })
}

/// Midpoint of the `pi_tilde` enclosure of `symbols`, without building the box.
pub(crate) fn pi_tilde_midpoint(symbols: &[PairSymbol]) -> Complex64 {
    let head = symbols[0];
    let tail = &symbols[1..];
    let coord = |pick: fn(&PairSymbol) -> u64, head_digit: Digit| {
        let mut lo = 0.0;
        let mut hi = 1.0;
        for s in tail.iter().rev() {
            let a = pick(s) as f64;
            let (nlo, nhi) = (1.0 / (hi + a), 1.0 / (lo + a));
            lo = nlo;
            hi = nhi;
        }
        head_digit.as_f64() + 0.5 * (lo + hi)
    };
    Complex64::new(coord(|s| s.m.0, head.m), coord(|s| s.n.0, head.n))
}

/// Order of composition in an induced branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InducedOrder {
    /// `phi_1^k o phi_j`
    ParabolicOuter,
    /// `phi_j o phi_1^k`
    ParabolicInner,
}

/// One branch of the system induced away from the parabolic point of `phi_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducedMap {
    pub parabolic_power: u32,
    pub branch: Digit,
    pub order: InducedOrder,
    /// Sup of `|derivative|` over `[0, 1)`, from the Moebius form of the branch.
    pub derivative_sup: f64,
}

impl InducedMap {
    fn new(parabolic_power: u32, branch: Digit, order: InducedOrder) -> Self {
        let mut map = InducedMap {
            parabolic_power,
            branch,
            order,
            derivative_sup: f64::NAN,
        };
        // The composite is x -> (p + x p') / (q + x q'), with derivative
        // modulus 1/(q + x q')^2, so the sup sits at x = 0.
        map.derivative_sup = Continuants::of(map.digits()).derivative_at(0.0);
        map
    }

    /// Branch digits from the outermost map inwards.
    pub fn digits(&self) -> Vec<u64> {
        let ones = std::iter::repeat_n(1, self.parabolic_power as usize);
        match self.order {
            InducedOrder::ParabolicOuter => ones.chain([self.branch.0]).collect(),
            InducedOrder::ParabolicInner => [self.branch.0].into_iter().chain(ones).collect(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        compose_branches(&self.digits(), x)
    }

    pub fn derivative_mod(&self, x: f64) -> f64 {
        Continuants::of(self.digits()).derivative_at(x)
    }
}

/// All branches `phi_1^k o phi_j` and `phi_j o phi_1^k` with `k <= k_max` and
/// `2 <= j <= M`. For `k = 0` both orders are listed, so the count is
/// `2 (k_max + 1)(M - 1)`.
pub fn induced_ifs_maps(alphabet: &TruncatedAlphabet, k_max: u32) -> Result<Vec<InducedMap>> {
    if alphabet.max_digit < 2 {
        return Err(Error::InvalidArgument(
            "the induced system needs M >= 2".into(),
        ));
    }
    let mut maps = Vec::new();
    for k in 0..=k_max {
        for j in 2..=alphabet.max_digit {
            for order in [InducedOrder::ParabolicOuter, InducedOrder::ParabolicInner] {
                maps.push(InducedMap::new(k, Digit(j), order));
            }
        }
    }
    Ok(maps)
}

/// Lexicographic enumeration of all words of a fixed length over an alphabet
/// of `base` letters, addressed by rank so ranges can be split across workers.
#[derive(Clone, Debug)]
pub struct WordRanks {
    base: usize,
    depth: usize,
    ranks: Range<u64>,
}

impl WordRanks {
    pub fn new(base: usize, depth: usize, cap: u64) -> Result<Self> {
        let total = (base as f64).powi(depth as i32);
        if total > cap as f64 {
            return Err(Error::EnumerationCap {
                requested: total,
                cap,
            });
        }
        Ok(WordRanks {
            base,
            depth,
            ranks: 0..(base as u64).pow(depth as u32),
        })
    }

    pub fn total(&self) -> u64 {
        self.ranks.end
    }

    /// Writes the letters of word number `rank` into `out` (most significant first).
    pub fn decode_into(&self, mut rank: u64, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = (rank % self.base as u64) as usize;
            rank /= self.base as u64;
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

/// Iterator over `PairWord`s of one length, in lexicographic order.
#[derive(Clone, Debug)]
pub struct PairWordIter {
    symbols: Vec<PairSymbol>,
    ranks: WordRanks,
    next: u64,
    end: u64,
}

impl PairWordIter {
    /// Restricts the iterator to ranks in `range`, for range-partitioned work.
    pub fn range(mut self, range: Range<u64>) -> Self {
        self.next = range.start.min(self.ranks.total());
        self.end = range.end.min(self.ranks.total());
        self
    }

    pub fn total(&self) -> u64 {
        self.ranks.total()
    }
}

impl Iterator for PairWordIter {
    type Item = PairWord;

    fn next(&mut self) -> Option<PairWord> {
        if self.next >= self.end {
            return None;
        }
        let mut idx = vec![0usize; self.ranks.depth];
        self.ranks.decode_into(self.next, &mut idx);
        self.next += 1;
        Some(idx.into_iter().map(|i| self.symbols[i]).collect())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for PairWordIter {}

pub fn enumerate_pair_words(alphabet: &TruncatedAlphabet, depth: usize) -> Result<PairWordIter> {
    enumerate_pair_words_capped(alphabet, depth, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_pair_words_capped(
    alphabet: &TruncatedAlphabet,
    depth: usize,
    cap: u64,
) -> Result<PairWordIter> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let symbols = alphabet.symbols();
    let ranks = WordRanks::new(symbols.len(), depth, cap)?;
    let end = ranks.total();
    Ok(PairWordIter {
        symbols,
        ranks,
        next: 0,
        end,
    })
}
