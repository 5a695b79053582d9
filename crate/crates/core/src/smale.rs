//! Conformal Smale skew-products `T(omega, y) = (sigma omega, T_omega(y))`.
//!
//! Three fiber families are supported:
//!
//! * `InverseConjugate`: `T_omega(z) = 1/(conj(z) + pi~(omega))` on the closed
//!   disk `B(1/2, 1/2)`.
//! * `InverseSquare`: `T_omega(z) = 1/(z^2 + 2 pi~(omega))` on the same disk.
//! * `Similarity`: `T_omega(y) = r_e c_f y + z_e` on the closed unit disk,
//!   where `e = omega_0`.
//!
//! For the inverse families `T_omega` depends on the whole forward word through
//! `pi~(omega)`; it is evaluated at the midpoint of the `pi~` enclosure of a
//! finite prefix (24 symbols by default).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coding::{pi_tilde_midpoint, PairSymbol, PairWord, TruncatedAlphabet};
use crate::error::{Error, Result};
use crate::mc::par_chunks;

/// Prefix length used when resolving `T_omega` from a forward word.
pub const DEFAULT_ENCLOSURE_DEPTH: usize = 24;

/// Images may leave the domain by this much before `DomainEscape` is raised.
pub const DOMAIN_TOLERANCE: f64 = 1e-10;

/// A closed disk in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Disk { center, radius }
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn excess(&self, z: Complex64) -> f64 {
        (z - self.center).norm() - self.radius
    }

    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        self.excess(z) <= tol
    }

    pub fn contains_disk(&self, other: &Disk, tol: f64) -> bool {
        (other.center - self.center).norm() + other.radius <= self.radius + tol
    }

    pub fn interiors_disjoint(&self, other: &Disk, tol: f64) -> bool {
        (other.center - self.center).norm() >= self.radius + other.radius - tol
    }

    /// Image of the disk under `u -> 1/u`, valid when the disk avoids 0.
    fn inverted(&self) -> Disk {
        let denom = self.center.norm_sqr() - self.radius * self.radius;
        Disk {
            center: self.center.conj() / denom,
            radius: self.radius / denom,
        }
    }

    /// Roughly `count` points spread over the disk on concentric rings.
    pub fn grid(&self, count: usize) -> Vec<Complex64> {
        let rings = ((count as f64 / PI).sqrt().ceil() as usize).max(1);
        let mut out = vec![self.center];
        for i in 1..=rings {
            let rho = self.radius * i as f64 / rings as f64;
            let k = (2.0 * PI * i as f64).ceil() as usize;
            for j in 0..k {
                let t = 2.0 * PI * j as f64 / k as f64;
                out.push(self.center + Complex64::from_polar(rho, t));
            }
        }
        out
    }
}

/// One map `T_e(y) = ratio * c_f * y + translation` of a similarity system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMap {
    pub symbol: PairSymbol,
    pub ratio: f64,
    pub translation: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilaritySchedule {
    /// `r_(m,n) = 2^-(m+n)` for every pair symbol, images laid out on a grid.
    Geometric,
    Explicit(Vec<SimilarityMap>),
}

impl SimilaritySchedule {
    /// `k` maps of equal ratio with images centred on a circle, indexed by the
    /// first `k` symbols of the smallest square alphabet holding them.
    pub fn ring(k: usize, ratio: f64, placement_radius: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "a ring needs at least one map".into(),
            ));
        }
        Self::ring_with_ratios(&vec![ratio; k], placement_radius)
    }

    /// Like `ring`, with one ratio per map.
    pub fn ring_with_ratios(ratios: &[f64], placement_radius: f64) -> Result<Self> {
        let k = ratios.len();
        let side = (k as f64).sqrt().ceil() as u64;
        let symbols = TruncatedAlphabet::new(side)?.symbols();
        let maps = ratios
            .iter()
            .zip(symbols)
            .enumerate()
            .map(|(i, (&ratio, symbol))| SimilarityMap {
                symbol,
                ratio,
                translation: if k == 1 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(placement_radius, 2.0 * PI * i as f64 / k as f64)
                },
            })
            .collect();
        Ok(SimilaritySchedule::Explicit(maps))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemVariant {
    InverseConjugate,
    InverseSquare,
    Similarity {
        /// Contraction factor `c_f` of the inner map `f(y) = c_f y`.
        contraction: f64,
        schedule: SimilaritySchedule,
    },
}

/// Contraction and distortion constants of a system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConstants {
    /// Every fiber map is Lipschitz with constant `1/lambda` on the domain.
    pub lambda: f64,
    pub alpha: f64,
    /// Distortion constant measured over the depth-1 images at the reference truncation.
    pub distortion: f64,
}

const REFERENCE_TRUNCATION: u64 = 3;

#[derive(Clone, Debug)]
pub struct SmaleSystem {
    variant: SystemVariant,
    domain: Disk,
    lookup: BTreeMap<PairSymbol, (f64, Complex64)>,
    constants: SystemConstants,
}

/// `T_omega` with its dependence on `omega` resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FiberMap {
    InverseConjugate { shift: Complex64 },
    InverseSquare { shift: Complex64 },
    Affine { scale: f64, shift: Complex64 },
}

impl FiberMap {
    pub fn apply(&self, w: Complex64) -> Complex64 {
        match *self {
            FiberMap::InverseConjugate { shift } => (w.conj() + shift).inv(),
            FiberMap::InverseSquare { shift } => (w * w + 2.0 * shift).inv(),
            FiberMap::Affine { scale, shift } => w * scale + shift,
        }
    }

    pub fn derivative_mod(&self, w: Complex64) -> f64 {
        match *self {
            FiberMap::InverseConjugate { shift } => 1.0 / (w.conj() + shift).norm_sqr(),
            FiberMap::InverseSquare { shift } => 2.0 * w.norm() / (w * w + 2.0 * shift).norm_sqr(),
            FiberMap::Affine { scale, .. } => scale,
        }
    }

    /// A disk containing the image of `d`. Exact for the Moebius and affine
    /// maps, an enclosure for `z -> 1/(z^2 + c)`.
    pub fn image_disk(&self, d: &Disk) -> Disk {
        match *self {
            FiberMap::InverseConjugate { shift } => {
                Disk::new(d.center.conj() + shift, d.radius).inverted()
            }
            FiberMap::InverseSquare { shift } => {
                let sq = Disk::new(
                    d.center * d.center + 2.0 * shift,
                    d.radius * (2.0 * d.center.norm() + d.radius),
                );
                sq.inverted()
            }
            FiberMap::Affine { scale, shift } => {
                Disk::new(d.center * scale + shift, d.radius * scale)
            }
        }
    }
}

/// The finite forward word through which `T_omega` is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberWordContext {
    pub forward_word: PairWord,
    pub enclosure_depth: usize,
}

impl FiberWordContext {
    pub fn new(forward_word: PairWord, enclosure_depth: usize) -> Result<Self> {
        if forward_word.is_empty() || enclosure_depth == 0 {
            return Err(Error::InvalidArgument(
                "a fiber context needs a nonempty word and positive depth".into(),
            ));
        }
        if enclosure_depth > forward_word.len() {
            return Err(Error::InvalidArgument(format!(
                "enclosure depth {enclosure_depth} exceeds word length {}",
                forward_word.len()
            )));
        }
        Ok(FiberWordContext {
            forward_word,
            enclosure_depth,
        })
    }

    /// Uses `min(24, len)` symbols of `forward_word`.
    pub fn from_word(forward_word: PairWord) -> Result<Self> {
        let depth = forward_word.len().min(DEFAULT_ENCLOSURE_DEPTH);
        Self::new(forward_word, depth)
    }

    fn symbols(&self) -> &[PairSymbol] {
        &self.forward_word.as_slice()[..self.enclosure_depth]
    }
}

/// A past `eta_-1, eta_-2, ..., eta_-n`; step `j` carries the context of
/// `tau|_{-j}^infinity`.
#[derive(Clone, Debug, PartialEq)]
pub struct PastWord {
    steps: Vec<FiberWordContext>,
}

impl PastWord {
    pub fn from_contexts(steps: Vec<FiberWordContext>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument(
                "a past word needs length >= 1".into(),
            ));
        }
        Ok(PastWord { steps })
    }

    /// Builds the contexts `eta_-j ... eta_-1 omega` for a past given nearest
    /// symbol first.
    pub fn over(past: &[PairSymbol], forward: &PairWord, enclosure_depth: usize) -> Result<Self> {
        let mut steps = Vec::with_capacity(past.len());
        let mut word = forward.clone();
        for &s in past {
            word = word.prepend(s);
            let depth = enclosure_depth.min(word.len());
            steps.push(FiberWordContext::new(word.truncated(depth), depth)?);
        }
        Self::from_contexts(steps)
    }

    /// `n` copies of the same context.
    pub fn constant(ctx: FiberWordContext, n: usize) -> Result<Self> {
        Self::from_contexts(vec![ctx; n])
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[FiberWordContext] {
        &self.steps
    }
}

impl SmaleSystem {
    pub fn inverse_conjugate() -> Self {
        Self::build(SystemVariant::InverseConjugate, BTreeMap::new())
    }

    pub fn inverse_square() -> Self {
        Self::build(SystemVariant::InverseSquare, BTreeMap::new())
    }

    /// A similarity system whose images are checked to lie in the unit disk
    /// and to be pairwise disjoint.
    pub fn similarity(contraction: f64, schedule: SimilaritySchedule) -> Result<Self> {
        let system = Self::similarity_unverified(contraction, schedule)?;
        if let SystemVariant::Similarity {
            schedule: SimilaritySchedule::Explicit(maps),
            ..
        } = &system.variant
        {
            let disks: Vec<Disk> = maps
                .iter()
                .map(|m| {
                    system
                        .resolve_symbols(&[m.symbol])
                        .image_disk(&system.domain)
                })
                .collect();
            for i in 0..disks.len() {
                for j in i + 1..disks.len() {
                    if !disks[i].interiors_disjoint(&disks[j], 0.0) {
                        return Err(Error::InvalidArgument(format!(
                            "images of {} and {} overlap",
                            maps[i].symbol, maps[j].symbol
                        )));
                    }
                }
            }
        }
        Ok(system)
    }

    /// A similarity system without the disjointness check, for building
    /// counterexamples to the open set condition.
    pub fn similarity_unverified(contraction: f64, schedule: SimilaritySchedule) -> Result<Self> {
        if !(contraction > 0.0 && contraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "inner contraction must lie in (0, 1), got {contraction}"
            )));
        }
        let mut lookup = BTreeMap::new();
        if let SimilaritySchedule::Explicit(maps) = &schedule {
            if maps.is_empty() {
                return Err(Error::InvalidArgument("empty similarity schedule".into()));
            }
            for m in maps {
                if !(m.ratio > 0.0 && m.ratio < 1.0 / 3.0) {
                    return Err(Error::InvalidArgument(format!(
                        "ratio {} of {} outside (0, 1/3)",
                        m.ratio, m.symbol
                    )));
                }
                if m.translation.norm() + m.ratio * contraction > 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "image of {} leaves the unit disk",
                        m.symbol
                    )));
                }
                if lookup.insert(m.symbol, (m.ratio, m.translation)).is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate symbol {}",
                        m.symbol
                    )));
                }
            }
        }
        Ok(Self::build(
            SystemVariant::Similarity {
                contraction,
                schedule,
            },
            lookup,
        ))
    }

    fn build(variant: SystemVariant, lookup: BTreeMap<PairSymbol, (f64, Complex64)>) -> Self {
        let domain = match variant {
            SystemVariant::Similarity { .. } => Disk::new(Complex64::new(0.0, 0.0), 1.0),
            _ => Disk::new(Complex64::new(0.5, 0.0), 0.5),
        };
        let mut system = SmaleSystem {
            variant,
            domain,
            lookup,
            constants: SystemConstants {
                lambda: f64::NAN,
                alpha: 1.0,
                distortion: f64::NAN,
            },
        };
        let sup = system.derivative_sup_bound();
        system.constants.lambda = 1.0 / sup;
        let alphabet = TruncatedAlphabet::new(REFERENCE_TRUNCATION).expect("positive truncation");
        system.constants.distortion = system.measure_distortion(&alphabet, 1.0, 400);
        system
    }

    pub fn variant(&self) -> &SystemVariant {
        &self.variant
    }

    pub fn domain(&self) -> Disk {
        self.domain
    }

    pub fn constants(&self) -> SystemConstants {
        self.constants
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            SystemVariant::InverseConjugate => "inverse_conjugate",
            SystemVariant::InverseSquare => "inverse_square",
            SystemVariant::Similarity { .. } => "similarity",
        }
    }

    /// Whether `T_omega` depends only on `omega_0` and has constant derivative.
    pub fn is_similarity(&self) -> bool {
        matches!(self.variant, SystemVariant::Similarity { .. })
    }

    /// Symbols of the system at truncation `M`, lexicographically.
    pub fn alphabet(&self, truncation: &TruncatedAlphabet) -> Vec<PairSymbol> {
        match &self.variant {
            SystemVariant::Similarity {
                schedule: SimilaritySchedule::Explicit(_),
                ..
            } => self
                .lookup
                .keys()
                .copied()
                .filter(|s| truncation.contains(*s))
                .collect(),
            _ => truncation.symbols(),
        }
    }

    fn similarity_params(&self, s: PairSymbol) -> (f64, Complex64) {
        match &self.variant {
            SystemVariant::Similarity {
                schedule: SimilaritySchedule::Geometric,
                ..
            } => geometric_layout(s),
            _ => *self
                .lookup
                .get(&s)
                .unwrap_or_else(|| panic!("symbol {s} is not in the similarity schedule")),
        }
    }

    pub fn has_symbol(&self, s: PairSymbol) -> bool {
        match &self.variant {
            SystemVariant::Similarity {
                schedule: SimilaritySchedule::Explicit(_),
                ..
            } => self.lookup.contains_key(&s),
            _ => true,
        }
    }

    /// Resolves `T_omega` from the leading symbols of `omega`. The inverse
    /// families use every symbol given; similarities use only the first.
    pub(crate) fn resolve_symbols(&self, symbols: &[PairSymbol]) -> FiberMap {
        match &self.variant {
            SystemVariant::InverseConjugate => FiberMap::InverseConjugate {
                shift: pi_tilde_midpoint(symbols),
            },
            SystemVariant::InverseSquare => FiberMap::InverseSquare {
                shift: pi_tilde_midpoint(symbols),
            },
            SystemVariant::Similarity { contraction, .. } => {
                let (ratio, shift) = self.similarity_params(symbols[0]);
                FiberMap::Affine {
                    scale: ratio * contraction,
                    shift,
                }
            }
        }
    }

    pub fn resolve(&self, ctx: &FiberWordContext) -> Result<FiberMap> {
        let symbols = ctx.symbols();
        if !self.has_symbol(symbols[0]) {
            return Err(Error::InvalidArgument(format!(
                "symbol {} is not in the similarity schedule",
                symbols[0]
            )));
        }
        Ok(self.resolve_symbols(symbols))
    }

    /// Upper bound for `sup |T'_{e omega}|` over the domain and all tails `omega`.
    pub fn symbol_derivative_sup(&self, s: PairSymbol) -> f64 {
        let corner = Complex64::new(s.m().get() as f64, s.n().get() as f64);
        match &self.variant {
            // dist(-c, conj(Y)) = |c + 1/2| - 1/2, minimised at the lower corner.
            SystemVariant::InverseConjugate => {
                let d = (corner + 0.5).norm() - 0.5;
                1.0 / (d * d)
            }
            // z^2 ranges over a subset of B(1/4, 1/2) and |z| <= 1.
            SystemVariant::InverseSquare => {
                let d = (2.0 * corner + 0.25).norm() - 0.5;
                2.0 / (d * d)
            }
            SystemVariant::Similarity { contraction, .. } => {
                self.similarity_params(s).0 * contraction
            }
        }
    }

    fn derivative_sup_bound(&self) -> f64 {
        match &self.variant {
            SystemVariant::Similarity {
                schedule: SimilaritySchedule::Explicit(maps),
                contraction,
            } => maps
                .iter()
                .map(|m| m.ratio * contraction)
                .fold(0.0, f64::max),
            // The bound decreases in both digits.
            _ => self.symbol_derivative_sup(PairSymbol::new(1, 1).expect("valid symbol")),
        }
    }

    /// Max over pairs of sampled points of `|log|T'(y)| - log|T'(z)|| / |y - z|^alpha`,
    /// sampled within the depth-1 images where limit points live.
    fn measure_distortion(&self, truncation: &TruncatedAlphabet, alpha: f64, points: usize) -> f64 {
        let alphabet = self.alphabet(truncation);
        if alphabet.is_empty() {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for &a in &alphabet {
            let outer = self.resolve_symbols(&[a, alphabet[0]]);
            for &b in &alphabet {
                let inner = self.resolve_symbols(&[b, a, alphabet[0]]);
                let region = inner.image_disk(&self.domain);
                let grid: Vec<Complex64> = region
                    .grid(points / alphabet.len().max(1) + 8)
                    .into_iter()
                    .filter(|z| self.domain.contains(*z, DOMAIN_TOLERANCE))
                    .collect();
                let logs: Vec<f64> = grid.iter().map(|&z| outer.derivative_mod(z).ln()).collect();
                for i in 0..grid.len() {
                    for j in i + 1..grid.len() {
                        let dist = (grid[i] - grid[j]).norm();
                        if dist > 0.0 {
                            worst = worst.max((logs[i] - logs[j]).abs() / dist.powf(alpha));
                        }
                    }
                }
            }
        }
        worst
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        let excess = self.domain.excess(z);
        if excess > DOMAIN_TOLERANCE || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::DomainEscape {
                re: z.re,
                im: z.im,
                excess,
            });
        }
        Ok(())
    }
}

/// `r_(m,n) = 2^-(m+n)`; image centres on a grid inside `[-0.7, 0.7]^2`,
/// row `m` occupying a band of height `1.4 * 2^-m`.
fn geometric_layout(s: PairSymbol) -> (f64, Complex64) {
    let m = s.m().get() as i32;
    let n = s.n().get() as i32;
    let ratio = 2f64.powi(-(m + n));
    let y = -0.7 + 1.4 * (1.0 - 2f64.powi(-(m - 1))) + 0.7 * 2f64.powi(-m);
    let row = 2f64.powi(-m);
    let x = -0.7 + 1.4 * row * (1.0 - 2f64.powi(-(n - 1))) + 0.7 * ratio;
    (ratio, Complex64::new(x, y))
}

/// `T_omega(w)`, with `w` and its image checked against the domain.
pub fn fiber_map(system: &SmaleSystem, ctx: &FiberWordContext, w: Complex64) -> Result<Complex64> {
    system.check_domain(w)?;
    let image = system.resolve(ctx)?.apply(w);
    system.check_domain(image)?;
    Ok(image)
}

/// `|T_omega'(w)|`.
pub fn fiber_derivative_mod(
    system: &SmaleSystem,
    ctx: &FiberWordContext,
    w: Complex64,
) -> Result<f64> {
    system.check_domain(w)?;
    Ok(system.resolve(ctx)?.derivative_mod(w))
}

/// Approximates `pi^_2(tau)` by `T_{tau|-1} o ... o T_{tau|-n}` applied to the
/// centre of the domain. The second value bounds the distance to the limit
/// point by `lambda^-n diam(Y)`.
pub fn pi2_hat(system: &SmaleSystem, past: &PastWord) -> Result<(Complex64, f64)> {
    let mut w = system.domain.center;
    for ctx in past.steps.iter().rev() {
        w = system.resolve(ctx)?.apply(w);
        system.check_domain(w)?;
    }
    let bound = system.constants.lambda.powi(-(past.len() as i32)) * system.domain.diameter();
    Ok((w, bound))
}

/// `pi^_2` over a buffer `[eta_-n, ..., eta_-1, omega_0, omega_1, ...]`.
pub(crate) fn pi2_hat_buffer(
    system: &SmaleSystem,
    buffer: &[PairSymbol],
    past_len: usize,
    enclosure_depth: usize,
) -> Result<Complex64> {
    let mut w = system.domain.center;
    for start in 0..past_len {
        let end = (start + enclosure_depth).min(buffer.len());
        w = system.resolve_symbols(&buffer[start..end]).apply(w);
    }
    system.check_domain(w)?;
    Ok(w)
}

/// A sampled limit point together with the first past symbol that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSample {
    pub first_past: PairSymbol,
    pub point: Complex64,
}

/// `count` points within `lambda^-depth diam(Y)` of the fiber limit set over
/// `forward`, each from an independent uniformly drawn past of length `depth`.
pub fn sample_fiber_limit_set(
    system: &SmaleSystem,
    forward: &PairWord,
    truncation: &TruncatedAlphabet,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<FiberSample>> {
    if depth == 0 || count == 0 || forward.is_empty() {
        return Err(Error::InvalidArgument(
            "depth, count and the forward word must be nonempty".into(),
        ));
    }
    let alphabet = system.alphabet(truncation);
    if alphabet.is_empty() {
        return Err(Error::InvalidArgument(
            "empty alphabet at this truncation".into(),
        ));
    }
    let chunks = par_chunks(count, seed, |rng, range| {
        let mut buffer = vec![alphabet[0]; depth + forward.len()];
        buffer[depth..].copy_from_slice(forward.as_slice());
        range
            .map(|_| {
                for slot in buffer[..depth].iter_mut() {
                    *slot = alphabet[rng.gen_range(0..alphabet.len())];
                }
                let point = pi2_hat_buffer(system, &buffer, depth, DEFAULT_ENCLOSURE_DEPTH)?;
                Ok(FiberSample {
                    first_past: buffer[depth - 1],
                    point,
                })
            })
            .collect::<Result<Vec<_>>>()
    });
    Ok(chunks.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub osc_ok: bool,
    pub overlapping: Vec<(PairSymbol, PairSymbol)>,
    pub lambda_hat: f64,
    pub lambda_certified: f64,
    pub distortion_h_hat: f64,
    pub alpha: f64,
    /// Smallest and largest sampled `|T'|`.
    pub derivative_band: (f64, f64),
    pub forward_words_checked: usize,
}

/// Checks contraction, distortion and the open set condition on the truncated
/// alphabet. Failures are reported rather than raised.
pub fn verify_system(
    system: &SmaleSystem,
    truncation: &TruncatedAlphabet,
    depth: usize,
    sample_count: usize,
) -> Result<VerificationReport> {
    let alphabet = system.alphabet(truncation);
    if alphabet.is_empty() || depth == 0 {
        return Err(Error::InvalidArgument("nothing to verify".into()));
    }
    let forwards = forward_words(&alphabet, depth, sample_count.max(1));

    let mut overlapping = Vec::new();
    for omega in &forwards {
        let disks: Vec<Disk> = alphabet
            .iter()
            .map(|&a| {
                let word = omega.prepend(a);
                let len = word.len().min(DEFAULT_ENCLOSURE_DEPTH);
                system
                    .resolve_symbols(&word.as_slice()[..len])
                    .image_disk(&system.domain)
            })
            .collect();
        for i in 0..disks.len() {
            for j in i + 1..disks.len() {
                if !disks[i].interiors_disjoint(&disks[j], 1e-12) {
                    let pair = (alphabet[i], alphabet[j]);
                    if !overlapping.contains(&pair) {
                        overlapping.push(pair);
                    }
                }
            }
        }
    }

    let grid = system.domain.grid(sample_count.max(16));
    let mut band = (f64::INFINITY, 0.0_f64);
    for omega in forwards.iter().take(8) {
        for &a in &alphabet {
            let word = omega.prepend(a);
            let len = word.len().min(DEFAULT_ENCLOSURE_DEPTH);
            let map = system.resolve_symbols(&word.as_slice()[..len]);
            for &z in &grid {
                let d = map.derivative_mod(z);
                band.0 = band.0.min(d);
                band.1 = band.1.max(d);
            }
        }
    }

    Ok(VerificationReport {
        osc_ok: overlapping.is_empty(),
        overlapping,
        lambda_hat: 1.0 / band.1,
        lambda_certified: system.constants.lambda,
        distortion_h_hat: system.measure_distortion(truncation, 1.0, sample_count.clamp(16, 400)),
        alpha: 1.0,
        derivative_band: band,
        forward_words_checked: forwards.len(),
    })
}

/// Up to `limit` forward words of length `depth`, spread evenly over the
/// lexicographic order.
fn forward_words(alphabet: &[PairSymbol], depth: usize, limit: usize) -> Vec<PairWord> {
    let k = alphabet.len() as f64;
    let total = k.powi(depth as i32);
    let count = (limit as f64).min(total) as usize;
    let stride = total / count as f64;
    (0..count)
        .map(|i| {
            let mut rank = (i as f64 * stride).floor() as u64;
            let mut symbols = vec![alphabet[0]; depth];
            for slot in symbols.iter_mut().rev() {
                *slot = alphabet[(rank % alphabet.len() as u64) as usize];
                rank /= alphabet.len() as u64;
            }
            PairWord::new(symbols)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sym(m: u64, n: u64) -> PairSymbol {
        PairSymbol::new(m, n).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fiber_map_examples() {
        let ic = FiberMap::InverseConjugate { shift: c(2.0, 2.0) };
        assert!((ic.apply(c(0.0, 0.0)) - c(0.25, -0.25)).norm() < 1e-15);
        assert_relative_eq!(ic.derivative_mod(c(0.0, 0.0)), 0.125, epsilon = 1e-15);

        let is = FiberMap::InverseSquare { shift: c(2.0, 2.0) };
        assert!((is.apply(c(0.0, 0.0)) - c(0.125, -0.125)).norm() < 1e-15);
        assert_relative_eq!(
            is.derivative_mod(c(0.5, 0.0)),
            1.0 / 34.0625,
            epsilon = 1e-15
        );

        let sim = FiberMap::Affine {
            scale: 0.25 * 0.5,
            shift: c(0.5, 0.0),
        };
        assert!((sim.apply(c(1.0, 0.0)) - c(0.625, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn similarity_through_public_api() {
        let maps = vec![SimilarityMap {
            symbol: sym(1, 1),
            ratio: 0.25,
            translation: c(0.5, 0.0),
        }];
        let system = SmaleSystem::similarity(0.5, SimilaritySchedule::Explicit(maps)).unwrap();
        let ctx = FiberWordContext::from_word(PairWord::repeat(sym(1, 1), 3)).unwrap();
        let w = fiber_map(&system, &ctx, c(1.0, 0.0)).unwrap();
        assert!((w - c(0.625, 0.0)).norm() < 1e-15);
        assert_relative_eq!(
            fiber_derivative_mod(&system, &ctx, c(0.3, 0.1)).unwrap(),
            0.125
        );
    }

    #[test]
    fn domain_escape_on_bad_input() {
        let system = SmaleSystem::inverse_conjugate();
        let ctx = FiberWordContext::from_word(PairWord::repeat(sym(1, 1), 3)).unwrap();
        assert!(matches!(
            fiber_map(&system, &ctx, c(3.0, 0.0)),
            Err(Error::DomainEscape { .. })
        ));
    }

    #[test]
    fn inverse_conjugate_derivative_band_on_small_digits() {
        // With only (1,1) symbols pi~ is g(1 + i), g the golden ratio, so
        // |conj(z) + pi~| ranges over |pi~ + 1/2| -+ 1/2 on the domain.
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        let centre = c(g + 0.5, g).norm();
        let lo = (centre + 0.5).powi(-2);
        let hi = (centre - 0.5).powi(-2);
        let system = SmaleSystem::inverse_conjugate();
        let ctx = FiberWordContext::from_word(PairWord::repeat(sym(1, 1), 12)).unwrap();
        for z in system.domain().grid(500) {
            let d = fiber_derivative_mod(&system, &ctx, z).unwrap();
            assert!(d <= 4.0);
            assert!(
                d >= lo * (1.0 - 1e-9) && d <= hi * (1.0 + 1e-9),
                "{d} at {z}"
            );
        }
    }

    #[test]
    fn certified_lambda_values() {
        let ic = SmaleSystem::inverse_conjugate();
        let d = (c(1.5, 1.0)).norm() - 0.5;
        assert_relative_eq!(ic.constants().lambda, d * d, epsilon = 1e-12);
        assert!(SmaleSystem::inverse_square().constants().lambda > 1.0);
        let geo = SmaleSystem::similarity(0.5, SimilaritySchedule::Geometric).unwrap();
        assert_relative_eq!(geo.constants().lambda, 8.0);
    }

    #[test]
    fn pi2_hat_depth_one_and_bounds() {
        let system = SmaleSystem::inverse_conjugate();
        let forward = PairWord::repeat(sym(2, 1), 12);
        let past = PastWord::over(&[sym(1, 3)], &forward, 12).unwrap();
        let (w, bound) = pi2_hat(&system, &past).unwrap();
        let image = system
            .resolve(&past.steps()[0])
            .unwrap()
            .image_disk(&system.domain());
        assert!(image.contains(w, 1e-12));
        assert_relative_eq!(
            bound,
            system.domain().diameter() / system.constants().lambda
        );

        let mut prev = f64::INFINITY;
        for n in 1..10 {
            let past = PastWord::over(&vec![sym(1, 1); n], &forward, 12).unwrap();
            let (_, b) = pi2_hat(&system, &past).unwrap();
            assert!(b < prev);
            if prev.is_finite() {
                assert_relative_eq!(b / prev, 1.0 / system.constants().lambda, epsilon = 1e-12);
            }
            prev = b;
        }
    }

    /// Damped fixed-point iteration, independent of `pi2_hat`.
    fn damped_fixed_point(map: FiberMap, start: Complex64) -> Complex64 {
        let mut z = start;
        for _ in 0..10_000 {
            z = 0.5 * z + 0.5 * map.apply(z);
        }
        z
    }

    #[test]
    fn constant_past_converges_to_fixed_point() {
        for system in [
            SmaleSystem::inverse_conjugate(),
            SmaleSystem::inverse_square(),
        ] {
            let ctx = FiberWordContext::from_word(PairWord::repeat(sym(1, 2), 12)).unwrap();
            let fixed = damped_fixed_point(system.resolve(&ctx).unwrap(), system.domain().center);
            let past = PastWord::constant(ctx, 40).unwrap();
            let (w, bound) = pi2_hat(&system, &past).unwrap();
            assert!(
                (w - fixed).norm() <= 1e-10 + bound,
                "{} {}",
                system.name(),
                (w - fixed).norm()
            );
        }
    }

    #[test]
    fn nested_images_shrink() {
        for system in [
            SmaleSystem::inverse_conjugate(),
            SmaleSystem::similarity(0.5, SimilaritySchedule::Geometric).unwrap(),
        ] {
            let forward = PairWord::repeat(sym(1, 2), 12);
            let past_symbols = [
                sym(2, 1),
                sym(1, 1),
                sym(1, 2),
                sym(2, 2),
                sym(1, 1),
                sym(2, 1),
                sym(1, 2),
                sym(2, 2),
            ];
            let mut prev = system.domain();
            for n in 1..=8 {
                let past = PastWord::over(&past_symbols[..n], &forward, 12).unwrap();
                let disk = past.steps().iter().rev().fold(system.domain(), |d, ctx| {
                    system.resolve(ctx).unwrap().image_disk(&d)
                });
                assert!(
                    prev.contains_disk(&disk, 1e-12),
                    "{} depth {n}",
                    system.name()
                );
                prev = disk;
            }
        }
    }

    #[test]
    fn conformal_stretch_matches_derivative() {
        let h = 1e-6;
        for system in [
            SmaleSystem::inverse_conjugate(),
            SmaleSystem::inverse_square(),
        ] {
            let map = system
                .resolve(&FiberWordContext::from_word(PairWord::repeat(sym(2, 3), 12)).unwrap())
                .unwrap();
            let inner = Disk::new(system.domain().center, 0.45);
            for z in inner.grid(200).into_iter().filter(|z| z.norm() > 0.05) {
                let along = |dir: Complex64| {
                    (map.apply(z + dir * h) - map.apply(z - dir * h)).norm() / (2.0 * h)
                };
                let (dx, dy) = (along(c(1.0, 0.0)), along(c(0.0, 1.0)));
                let formula = map.derivative_mod(z);
                assert!((dx - dy).abs() <= 1e-6 * formula);
                assert!((dx - formula).abs() <= 1e-6 * formula);
            }
        }
    }

    #[test]
    fn inverse_conjugate_pieces_disjoint() {
        let system = SmaleSystem::inverse_conjugate();
        let m = TruncatedAlphabet::new(3).unwrap();
        let forward = PairWord::repeat(sym(1, 1), 12);
        let samples = sample_fiber_limit_set(&system, &forward, &m, 12, 2000, 11).unwrap();
        for s in &samples {
            assert!(system.domain().contains(s.point, DOMAIN_TOLERANCE));
            let own = system
                .resolve(&FiberWordContext::from_word(forward.prepend(s.first_past)).unwrap())
                .unwrap()
                .image_disk(&system.domain());
            assert!(own.contains(s.point, 1e-9));
            for other in m.symbols().into_iter().filter(|&o| o != s.first_past) {
                let disk = system
                    .resolve(&FiberWordContext::from_word(forward.prepend(other)).unwrap())
                    .unwrap()
                    .image_disk(&system.domain());
                assert!(!disk.contains(s.point, -1e-9));
            }
        }
    }

    #[test]
    fn similarity_samples_match_moran_recursion() {
        let schedule = SimilaritySchedule::ring(3, 0.3, 0.6).unwrap();
        let system = SmaleSystem::similarity(0.5, schedule).unwrap();
        let alphabet = TruncatedAlphabet::new(2).unwrap();
        let symbols = system.alphabet(&alphabet);
        let depth = 6;
        // Moran set of level `depth` by explicit recursion from the domain centre.
        let mut level = vec![system.domain().center];
        for _ in 0..depth {
            level = symbols
                .iter()
                .flat_map(|&s| {
                    let map = system.resolve_symbols(&[s]);
                    level.iter().map(move |&z| map.apply(z)).collect::<Vec<_>>()
                })
                .collect();
        }
        let forward = PairWord::repeat(symbols[0], 1);
        let samples = sample_fiber_limit_set(&system, &forward, &alphabet, depth, 500, 3).unwrap();
        let tol = system.constants().lambda.powi(-(depth as i32)) * system.domain().diameter();
        for s in samples {
            let d = level
                .iter()
                .map(|z| (z - s.point).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d <= tol);
        }
    }

    #[test]
    fn verify_examples() {
        let m5 = TruncatedAlphabet::new(5).unwrap();
        let report = verify_system(&SmaleSystem::inverse_conjugate(), &m5, 2, 200).unwrap();
        assert!(report.osc_ok, "{:?}", report.overlapping);
        assert!(report.lambda_hat > 1.0);
        assert!(report.lambda_hat >= report.lambda_certified);

        let report = verify_system(&SmaleSystem::inverse_square(), &m5, 2, 200).unwrap();
        assert!(report.osc_ok);
        assert!(report.derivative_band.0 >= 0.0 && report.derivative_band.1 < 1.0);

        let maps = vec![
            SimilarityMap {
                symbol: sym(1, 1),
                ratio: 0.3,
                translation: c(0.1, 0.0),
            },
            SimilarityMap {
                symbol: sym(1, 2),
                ratio: 0.3,
                translation: c(-0.1, 0.0),
            },
        ];
        assert!(SmaleSystem::similarity(0.5, SimilaritySchedule::Explicit(maps.clone())).is_err());
        let bad =
            SmaleSystem::similarity_unverified(0.5, SimilaritySchedule::Explicit(maps)).unwrap();
        let report = verify_system(&bad, &TruncatedAlphabet::new(2).unwrap(), 1, 10).unwrap();
        assert!(!report.osc_ok);
        assert_eq!(report.overlapping, vec![(sym(1, 1), sym(1, 2))]);
    }

    #[test]
    fn osc_stable_under_enclosure_depth() {
        let system = SmaleSystem::inverse_conjugate();
        let m = TruncatedAlphabet::new(4).unwrap();
        for depth in [1, 2, 4] {
            assert!(verify_system(&system, &m, depth, 64).unwrap().osc_ok);
        }
    }

    #[test]
    fn geometric_layout_is_disjoint() {
        let system = SmaleSystem::similarity(0.5, SimilaritySchedule::Geometric).unwrap();
        let m = TruncatedAlphabet::new(6).unwrap();
        let report = verify_system(&system, &m, 1, 4).unwrap();
        assert!(report.osc_ok, "{:?}", report.overlapping);
        for s in m.symbols() {
            let disk = system.resolve_symbols(&[s]).image_disk(&system.domain());
            assert!(system.domain().contains_disk(&disk, 0.0));
        }
    }
}
