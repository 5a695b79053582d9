//! Point clouds from the invariant measures and dimension estimates on them.

use std::collections::HashMap;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{compose_branches, PairSymbol, PairWord};
use crate::dimension::least_squares_slope;
use crate::error::{Error, Result};
use crate::mc::{par_chunks, stream_rng};
use crate::smale::{pi2_hat_buffer, SmaleSystem, DEFAULT_ENCLOSURE_DEPTH};
use crate::thermodynamics::GibbsApprox;

/// Ball counts below this do not enter a slope fit.
pub const MIN_BALL_COUNT: usize = 50;
/// Scales a centre needs after filtering.
pub const MIN_SCALES: usize = 4;
pub const MIN_BOX_SCALES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fiber,
    ZMarginal,
    Global,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// The fiber over a fixed forward word.
    Fiber(PairWord),
    ZMarginal,
    Global,
}

/// Points stored row-major, `dim` coordinates each. The z coordinates use the
/// unit-square chart `(rho_0(p_1 omega), rho_0(p_2 omega))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<f64>,
    pub provenance: Provenance,
    pub seed: u64,
    pub truncation: u64,
    pub depth: usize,
}

impl PointCloud {
    pub fn synthetic(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not split into points of dimension {dim}",
                points.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "cloud coordinates must be finite".into(),
            ));
        }
        Ok(PointCloud {
            dim,
            points,
            provenance: Provenance::Synthetic,
            seed: 0,
            truncation: 0,
            depth: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Keeps only the listed coordinates.
    pub fn project(&self, coords: &[usize]) -> Result<PointCloud> {
        if coords.is_empty() || coords.iter().any(|&c| c >= self.dim) {
            return Err(Error::InvalidArgument(format!("bad projection {coords:?}")));
        }
        Ok(PointCloud {
            dim: coords.len(),
            points: self
                .iter()
                .flat_map(|p| coords.iter().map(move |&c| p[c]))
                .collect(),
            provenance: self.provenance.clone(),
            seed: self.seed,
            truncation: self.truncation,
            depth: self.depth,
        })
    }
}

/// Midpoint of the image of the cylinder of `digits` under `rho_0`.
fn rho0_midpoint(digits: &[u64]) -> f64 {
    0.5 * (compose_branches(digits, 0.0) + compose_branches(digits, 1.0))
}

/// Samples `count` points of the chosen measure. Forward words of length
/// `depth` come from the stationary chain, pasts of length `depth` from the
/// reversed chain.
pub fn sample_measure(
    g: &GibbsApprox,
    system: &SmaleSystem,
    target: &Target,
    count: usize,
    depth: usize,
    seed: u64,
) -> Result<PointCloud> {
    if count < 1000 || depth < 20 {
        return Err(Error::InvalidArgument(
            "sampling needs count >= 1000 and depth >= 20".into(),
        ));
    }
    let symbols: Vec<PairSymbol> = g.symbols().to_vec();
    let forward_len = depth.max(DEFAULT_ENCLOSURE_DEPTH).max(g.state_len());
    let fixed: Option<Vec<usize>> = match target {
        Target::Fiber(w) => {
            if w.len() < g.state_len() {
                return Err(Error::InvalidArgument(
                    "forward word shorter than a chain state".into(),
                ));
            }
            let idx: Vec<usize> = w
                .as_slice()
                .iter()
                .map(|s| {
                    symbols.iter().position(|t| t == s).ok_or_else(|| {
                        Error::InvalidArgument(format!("forward symbol {s} is not a chain symbol"))
                    })
                })
                .collect::<Result<_>>()?;
            if g.cylinder_mass(&idx[..g.state_len()]) == 0.0 {
                return Err(Error::InvalidArgument("forward word has zero mass".into()));
            }
            Some(idx)
        }
        _ => None,
    };
    if !matches!(target, Target::ZMarginal) {
        if let Some(s) = symbols.iter().find(|s| !system.has_symbol(**s)) {
            return Err(Error::InvalidArgument(format!(
                "chain symbol {s} is not a system symbol"
            )));
        }
    }
    let dim = match target {
        Target::Fiber(_) | Target::ZMarginal => 2,
        Target::Global => 4,
    };
    let chunks = par_chunks(count, seed, |rng, range| {
        let mut out = Vec::with_capacity(range.len() * dim);
        let mut forward = vec![0usize; forward_len];
        let mut past = vec![0usize; depth];
        let mut buffer = vec![symbols[0]; depth + forward_len];
        let mut digits = vec![0u64; depth];
        for _ in range {
            let forward: &[usize] = match &fixed {
                Some(idx) => idx,
                None => {
                    g.sample_forward(rng, &mut forward);
                    &forward
                }
            };
            if !matches!(target, Target::Fiber(_)) {
                for coord in [0, 1] {
                    for (slot, &i) in digits.iter_mut().zip(forward.iter()) {
                        let s = symbols[i];
                        *slot = if coord == 0 { s.m().get() } else { s.n().get() };
                    }
                    out.push(rho0_midpoint(&digits));
                }
            }
            if !matches!(target, Target::ZMarginal) {
                g.sample_past(rng, g.state_of(forward), &mut past);
                for (j, &x) in past.iter().enumerate() {
                    buffer[depth - 1 - j] = symbols[x];
                }
                buffer.truncate(depth);
                buffer.extend(
                    forward
                        .iter()
                        .take(DEFAULT_ENCLOSURE_DEPTH)
                        .map(|&y| symbols[y]),
                );
                let w = pi2_hat_buffer(system, &buffer, depth, DEFAULT_ENCLOSURE_DEPTH)?;
                out.push(w.re);
                out.push(w.im);
            }
        }
        Ok(out)
    });
    let points = chunks
        .into_iter()
        .collect::<Result<Vec<Vec<f64>>>>()?
        .concat();
    Ok(PointCloud {
        dim,
        points,
        provenance: match target {
            Target::Fiber(_) => Provenance::Fiber,
            Target::ZMarginal => Provenance::ZMarginal,
            Target::Global => Provenance::Global,
        },
        seed,
        truncation: symbols
            .iter()
            .map(|s| s.m().get().max(s.n().get()))
            .max()
            .unwrap_or(0),
        depth,
    })
}

/// Geometric radius ladder from `r_min` to `r_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub r_min: f64,
    pub r_max: f64,
    pub n_scales: usize,
}

impl ScaleWindow {
    pub fn new(r_min: f64, r_max: f64, n_scales: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_min < r_max) || n_scales < 2 {
            return Err(Error::InvalidArgument(format!(
                "scale window needs 0 < r_min < r_max and two or more scales, got ({r_min}, {r_max}, {n_scales})"
            )));
        }
        Ok(ScaleWindow {
            r_min,
            r_max,
            n_scales,
        })
    }

    /// Eight scales of ratio `sqrt 2` starting at `r_min`.
    pub fn ladder(r_min: f64) -> Result<Self> {
        Self::new(r_min, r_min * 2f64.powf(3.5), 8)
    }

    /// The default ladder with `r_min` at ten times the coding error.
    pub fn above_coding_error(coding_error: f64) -> Result<Self> {
        Self::ladder(10.0 * coding_error)
    }

    pub fn radii(&self) -> Vec<f64> {
        let step = (self.r_max / self.r_min).ln() / (self.n_scales - 1) as f64;
        (0..self.n_scales)
            .map(|i| self.r_min * (step * i as f64).exp())
            .collect()
    }

    /// The same ladder moved by `steps` ladder steps.
    pub fn shifted(&self, steps: i32) -> Self {
        let factor =
            ((self.r_max / self.r_min).ln() / (self.n_scales - 1) as f64 * steps as f64).exp();
        ScaleWindow {
            r_min: self.r_min * factor,
            r_max: self.r_max * factor,
            n_scales: self.n_scales,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDimEstimate {
    pub per_point_slopes: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub window: ScaleWindow,
    /// Centres without enough populated scales.
    pub dropped_centers: usize,
}

type CellKey = [i64; 4];

struct GridIndex<'a> {
    cloud: &'a PointCloud,
    cell: f64,
    cells: HashMap<CellKey, Vec<u32>>,
}

impl<'a> GridIndex<'a> {
    fn new(cloud: &'a PointCloud, cell: f64) -> Self {
        let mut cells: HashMap<CellKey, Vec<u32>> = HashMap::new();
        for (i, p) in cloud.iter().enumerate() {
            cells.entry(key(p, cell)).or_default().push(i as u32);
        }
        GridIndex { cloud, cell, cells }
    }

    /// Sorted distances from `x` to every other point within one cell size.
    fn distances(&self, x: &[f64], skip: usize) -> Vec<f64> {
        let dim = self.cloud.dim;
        let base = key(x, self.cell);
        let mut out = Vec::new();
        let neighbours = 3usize.pow(dim as u32);
        for code in 0..neighbours {
            let mut k = base;
            let mut c = code;
            for slot in k.iter_mut().take(dim) {
                *slot += (c % 3) as i64 - 1;
                c /= 3;
            }
            if let Some(members) = self.cells.get(&k) {
                for &j in members {
                    if j as usize == skip {
                        continue;
                    }
                    let d = self
                        .cloud
                        .point(j as usize)
                        .iter()
                        .zip(x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    if d <= self.cell {
                        out.push(d);
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

fn key(p: &[f64], cell: f64) -> CellKey {
    let mut k = [0i64; 4];
    for (slot, x) in k.iter_mut().zip(p) {
        *slot = (x / cell).floor() as i64;
    }
    k
}

/// Ball-counting slopes of `log mu(B(x, r))` against `log r` around
/// `n_centers` cloud points drawn without replacement.
pub fn local_dimension(
    cloud: &PointCloud,
    window: &ScaleWindow,
    n_centers: usize,
    seed: u64,
) -> Result<LocalDimEstimate> {
    if cloud.dim > 4 {
        return Err(Error::InvalidArgument(
            "clouds of dimension above 4 are not indexed".into(),
        ));
    }
    if n_centers == 0 || n_centers * 10 > cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "{n_centers} centres for {} points; need 1 <= centres <= N/10",
            cloud.len()
        )));
    }
    let radii = window.radii();
    let index = GridIndex::new(cloud, window.r_max);
    let mut rng = stream_rng(seed, u64::MAX);
    let centers = sample(&mut rng, cloud.len(), n_centers).into_vec();
    let fits: Vec<std::result::Result<f64, usize>> = centers
        .par_iter()
        .map(|&c| {
            let dists = index.distances(cloud.point(c), c);
            let points: Vec<(f64, f64)> = radii
                .iter()
                .map(|&r| (r.ln(), dists.partition_point(|d| *d <= r)))
                .filter(|&(_, n)| n >= MIN_BALL_COUNT)
                .map(|(lr, n)| (lr, (n as f64).ln()))
                .collect();
            if points.len() >= MIN_SCALES {
                Ok(least_squares_slope(&points))
            } else {
                Err(points.len())
            }
        })
        .collect();
    let slopes: Vec<f64> = fits
        .iter()
        .filter_map(|f| f.as_ref().ok().copied())
        .collect();
    if slopes.is_empty() {
        return Err(Error::InsufficientScales {
            usable: fits
                .iter()
                .filter_map(|f| f.as_ref().err().copied())
                .max()
                .unwrap_or(0),
            needed: MIN_SCALES,
            min_count: MIN_BALL_COUNT,
        });
    }
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let stddev = if slopes.len() > 1 {
        (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(LocalDimEstimate {
        dropped_centers: centers.len() - slopes.len(),
        per_point_slopes: slopes,
        mean,
        stddev,
        window: *window,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDimension {
    pub value: f64,
    pub scales: Vec<f64>,
    pub occupied: Vec<usize>,
}

/// Least-squares slope of `log N(eps)` against `log(1/eps)` over the ladder.
pub fn box_dimension(cloud: &PointCloud, scales: &[f64]) -> Result<BoxDimension> {
    if scales.len() < MIN_BOX_SCALES {
        return Err(Error::InsufficientScales {
            usable: scales.len(),
            needed: MIN_BOX_SCALES,
            min_count: 1,
        });
    }
    if scales.iter().any(|e| !(*e > 0.0)) || cloud.dim > 4 || cloud.is_empty() {
        return Err(Error::InvalidArgument(
            "box counting needs positive scales and a nonempty cloud".into(),
        ));
    }
    let occupied: Vec<usize> = scales
        .par_iter()
        .map(|&eps| {
            let mut keys: Vec<CellKey> = cloud.iter().map(|p| key(p, eps)).collect();
            keys.sort_unstable();
            keys.dedup();
            keys.len()
        })
        .collect();
    let points: Vec<(f64, f64)> = scales
        .iter()
        .zip(&occupied)
        .map(|(e, &n)| (-e.ln(), (n as f64).ln()))
        .collect();
    Ok(BoxDimension {
        value: least_squares_slope(&points),
        scales: scales.to_vec(),
        occupied,
    })
}

/// `count` dyadic scales `2^-first, 2^-(first+1), ...`.
pub fn dyadic_scales(first: i32, count: usize) -> Vec<f64> {
    (0..count).map(|i| 2f64.powi(-(first + i as i32))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessTolerance {
    pub bias: f64,
    pub dispersion: f64,
}

impl Default for ExactnessTolerance {
    fn default() -> Self {
        ExactnessTolerance {
            bias: 0.05,
            dispersion: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub predicted: f64,
    pub mean: f64,
    pub bias: f64,
    pub dispersion: f64,
    pub bias_ok: bool,
    pub dispersion_ok: bool,
    pub pass: bool,
}

pub fn exactness_report(
    estimate: &LocalDimEstimate,
    predicted: f64,
    tolerance: &ExactnessTolerance,
) -> ExactnessReport {
    let bias = estimate.mean - predicted;
    let bias_ok = bias.abs() <= tolerance.bias;
    let dispersion_ok = estimate.stddev <= tolerance.dispersion;
    ExactnessReport {
        predicted,
        mean: estimate.mean,
        bias,
        dispersion: estimate.stddev,
        bias_ok,
        dispersion_ok,
        pass: bias_ok && dispersion_ok,
    }
}
