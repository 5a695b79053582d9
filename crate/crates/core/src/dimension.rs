//! Fiber dimension `h/chi`, the Bowen root, the global dimension formula, the
//! summability range and the variational sweep.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{PairWord, TruncatedAlphabet};
use crate::error::{Error, Result};
use crate::smale::{SimilaritySchedule, SmaleSystem, SystemVariant};
use crate::thermodynamics::{
    entropy, log_pressure, lyapunov_fiber, lyapunov_fiber_conditional, GibbsApprox,
    LogDerivativeTable, MeasureStats,
};

pub const DEFAULT_BOWEN_TOL: f64 = 1e-4;
pub const S_MAX: f64 = 10.0;
/// Half-width of the band around a power-law critical exponent reported as inconclusive.
pub const INCONCLUSIVE_BAND: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Summable,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub s_grid: Vec<f64>,
    pub m_schedule: Vec<u64>,
    /// `depth1_sums[i][j]` = sum of `sup|T'_e|^s_i` over symbols with digits at most `M_j`.
    pub depth1_sums: Vec<Vec<f64>>,
    pub verdicts: Vec<Verdict>,
    /// Critical exponent of the comparison series, if the alphabet is infinite.
    pub critical_exponent: Option<f64>,
    /// Boundary of the summable range fitted from the partial sums.
    pub boundary_estimate: f64,
}

enum Tail {
    Finite,
    /// Terms decay geometrically in the digits; summable for every `s > 0`.
    Geometric,
    /// Terms comparable to `(m^2 + n^2)^-s`; summable iff `s > 1`.
    PowerLaw,
}

fn tail_kind(system: &SmaleSystem) -> Tail {
    match system.variant() {
        SystemVariant::InverseConjugate | SystemVariant::InverseSquare => Tail::PowerLaw,
        SystemVariant::Similarity {
            schedule: SimilaritySchedule::Geometric,
            ..
        } => Tail::Geometric,
        SystemVariant::Similarity { .. } => Tail::Finite,
    }
}

/// Partial sums `sum_{e <= M} sup|T'_e|^s` and verdicts on the infinite system.
pub fn summability_scan(
    system: &SmaleSystem,
    s_grid: &[f64],
    m_schedule: &[u64],
) -> Result<SummabilityReport> {
    if s_grid.is_empty() || m_schedule.is_empty() {
        return Err(Error::InvalidArgument(
            "summability scan needs s values and truncations".into(),
        ));
    }
    if s_grid.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidArgument(
            "s values must be nonnegative".into(),
        ));
    }
    let mut ms = m_schedule.to_vec();
    ms.sort();
    ms.dedup();
    let sums: Vec<Vec<f64>> = s_grid
        .par_iter()
        .map(|&s| {
            ms.iter()
                .map(|&m| {
                    let alphabet = TruncatedAlphabet::new(m)?;
                    Ok(system
                        .alphabet(&alphabet)
                        .iter()
                        .map(|&e| system.symbol_derivative_sup(e).powf(s))
                        .sum())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let kind = tail_kind(system);
    let critical_exponent = match kind {
        Tail::Finite => None,
        Tail::Geometric => Some(0.0),
        Tail::PowerLaw => Some(1.0),
    };
    let verdicts = s_grid
        .iter()
        .map(|&s| match kind {
            Tail::Finite => Verdict::Summable,
            Tail::Geometric if s > 0.0 => Verdict::Summable,
            Tail::Geometric => Verdict::Divergent,
            Tail::PowerLaw if s > 1.0 + INCONCLUSIVE_BAND => Verdict::Summable,
            Tail::PowerLaw if s < 1.0 - INCONCLUSIVE_BAND => Verdict::Divergent,
            Tail::PowerLaw => Verdict::Inconclusive,
        })
        .collect();

    // Shell increments of a power-law series grow like M^(1 - 2s); the series
    // converges iff that exponent is below -1.
    let boundary_estimate = match kind {
        Tail::PowerLaw if ms.len() >= 3 => {
            let estimates: Vec<f64> = s_grid
                .iter()
                .zip(&sums)
                .filter_map(|(&s, row)| {
                    let points: Vec<(f64, f64)> = ms
                        .windows(2)
                        .zip(row.windows(2))
                        .filter(|(_, r)| r[1] > r[0])
                        .map(|(m, r)| {
                            (
                                ((m[0] + m[1]) as f64 / 2.0).ln(),
                                ((r[1] - r[0]) / (m[1] - m[0]) as f64).ln(),
                            )
                        })
                        .collect();
                    (points.len() >= 2).then(|| s + (least_squares_slope(&points) + 1.0) / 2.0)
                })
                .collect();
            if estimates.is_empty() {
                1.0
            } else {
                estimates.iter().sum::<f64>() / estimates.len() as f64
            }
        }
        Tail::PowerLaw => 1.0,
        _ => 0.0,
    };

    Ok(SummabilityReport {
        s_grid: s_grid.to_vec(),
        m_schedule: ms,
        depth1_sums: sums,
        verdicts,
        critical_exponent,
        boundary_estimate,
    })
}

pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberDimension {
    pub s: f64,
    pub value: f64,
    pub entropy: f64,
    pub chi: f64,
    /// Zero for exact chain values.
    pub std_error: f64,
}

/// `delta_{T,s} = h(mu_{T,s}) / chi(mu_{T,s})` with both quantities taken from
/// the memory-`k` chain, `chi = -int log|T'| dmu` exactly.
pub fn fiber_measure_dimension(
    system: &SmaleSystem,
    s: f64,
    alphabet: &TruncatedAlphabet,
    memory: usize,
) -> Result<FiberDimension> {
    let table = LogDerivativeTable::new(system, alphabet, memory)?;
    fiber_dimension_from_table(&table, s)
}

fn fiber_dimension_from_table(table: &LogDerivativeTable, s: f64) -> Result<FiberDimension> {
    let g = GibbsApprox::from_table(table.potential(s))?;
    let h = entropy(&g);
    let chi = -g.integral(table.table());
    if !(chi > 0.0) {
        return Err(Error::DegenerateExponent {
            name: "chi_T",
            value: chi,
        });
    }
    Ok(FiberDimension {
        s,
        value: h / chi,
        entropy: h,
        chi,
        std_error: 0.0,
    })
}

/// `fiber_measure_dimension` with `chi_T` from Monte Carlo samples, unconditioned
/// (`forward = None`) or on the fiber over a fixed forward word.
#[allow(clippy::too_many_arguments)]
pub fn fiber_measure_dimension_mc(
    system: &SmaleSystem,
    s: f64,
    alphabet: &TruncatedAlphabet,
    memory: usize,
    forward: Option<&PairWord>,
    n_samples: usize,
    past_depth: usize,
    seed: u64,
) -> Result<FiberDimension> {
    let table = LogDerivativeTable::new(system, alphabet, memory)?;
    let g = GibbsApprox::from_table(table.potential(s))?;
    let h = entropy(&g);
    let chi = match forward {
        None => lyapunov_fiber(&g, system, n_samples, past_depth, seed)?,
        Some(w) => lyapunov_fiber_conditional(&g, system, w, n_samples, 32, past_depth, seed)?,
    };
    if !(chi.mean > 0.0) {
        return Err(Error::DegenerateExponent {
            name: "chi_T",
            value: chi.mean,
        });
    }
    Ok(FiberDimension {
        s,
        value: h / chi.mean,
        entropy: h,
        chi: chi.mean,
        std_error: h * chi.std_error / (chi.mean * chi.mean),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenRoot {
    pub root: f64,
    /// `P(root)`.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Root of `s -> P(s log|T'|)` on the `M`-truncated system by bisection.
pub fn bowen_dimension(
    system: &SmaleSystem,
    alphabet: &TruncatedAlphabet,
    memory: usize,
    tol: f64,
) -> Result<BowenRoot> {
    let table = LogDerivativeTable::new(system, alphabet, memory)?;
    bowen_from_table(&table, tol)
}

fn bowen_from_table(table: &LogDerivativeTable, tol: f64) -> Result<BowenRoot> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let pressure = |s: f64| log_pressure(&table.potential(s));
    let mut evaluations = 1;
    let p0 = pressure(0.0)?;
    if p0 <= 0.0 {
        return Err(Error::BracketFailure(format!(
            "P(0) = {p0} is not positive"
        )));
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    loop {
        evaluations += 1;
        if pressure(hi)? < 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > S_MAX {
            return Err(Error::BracketFailure(format!(
                "pressure stays nonnegative up to s = {S_MAX}"
            )));
        }
    }
    let bracket = (lo, hi);
    let mut mid;
    let mut p_mid;
    loop {
        mid = 0.5 * (lo + hi);
        p_mid = pressure(mid)?;
        evaluations += 1;
        if p_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < tol && p_mid.abs() <= tol) || hi - lo < f64::EPSILON * hi.max(1.0) {
            break;
        }
    }
    Ok(BowenRoot {
        root: mid,
        residual: p_mid,
        bracket,
        evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `lambda_1 < lambda_2`
    B,
    C,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalDimension {
    pub value: f64,
    pub branch: Branch,
    pub branch_b_value: f64,
    pub branch_c_value: f64,
    /// Dimension of the z-marginal under the selected branch.
    pub z_part: f64,
    /// `h_mu / chi_T`.
    pub fiber_part: f64,
}

/// Pointwise dimension of the global measure from its entropies and exponents.
pub fn global_dimension(stats: &MeasureStats) -> Result<GlobalDimension> {
    for (name, value) in [
        ("chi1", stats.chi1),
        ("chi2", stats.chi2),
        ("chi_T", stats.chi_t),
    ] {
        if !(value > 0.0) {
            return Err(Error::DegenerateExponent { name, value });
        }
    }
    let h = stats.h_mu;
    let z_b = (h - stats.h_mu1 * (1.0 - stats.chi2 / stats.chi1)) / stats.chi2;
    let z_c = (h - stats.h_mu2 * (1.0 - stats.chi1 / stats.chi2)) / stats.chi1;
    let fiber_part = h / stats.chi_t;
    let branch = if stats.lambda1 < stats.lambda2 {
        Branch::B
    } else {
        Branch::C
    };
    let z_part = match branch {
        Branch::B => z_b,
        Branch::C => z_c,
    };
    Ok(GlobalDimension {
        value: z_part + fiber_part,
        branch,
        branch_b_value: z_b + fiber_part,
        branch_c_value: z_c + fiber_part,
        z_part,
        fiber_part,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub s: f64,
    pub delta: f64,
    pub chi: f64,
    pub flag: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub curve: Vec<CurvePoint>,
    pub sup_value: f64,
    pub argmax: f64,
    pub delta_t: f64,
    pub gap: f64,
    /// Largest `|delta''|` from three-point differences.
    pub max_second_difference: f64,
    /// `max |delta''| / median |delta''|`.
    pub spike_ratio: f64,
    /// Smallest `chi` met along the sweep.
    pub min_chi: f64,
}

/// `delta_{T,s}` over `s_grid` against the Bowen root. Points that fail are
/// kept with a NaN value and flagged.
pub fn variational_sweep(
    system: &SmaleSystem,
    alphabet: &TruncatedAlphabet,
    memory: usize,
    s_grid: &[f64],
    tol: f64,
) -> Result<SweepReport> {
    if s_grid.is_empty() {
        return Err(Error::InvalidArgument("empty s grid".into()));
    }
    let table = Arc::new(LogDerivativeTable::new(system, alphabet, memory)?);
    let bowen = bowen_from_table(&table, tol)?;
    let verdicts = summability_scan(system, s_grid, &[alphabet.max_digit()])?.verdicts;
    let curve: Vec<CurvePoint> = s_grid
        .par_iter()
        .zip(verdicts.par_iter())
        .map(
            |(&s, verdict)| match fiber_dimension_from_table(&table, s) {
                Ok(d) => CurvePoint {
                    s,
                    delta: d.value,
                    chi: d.chi,
                    flag: match verdict {
                        Verdict::Summable => "ok",
                        Verdict::Inconclusive => "inconclusive",
                        Verdict::Divergent => "outside_summable_range",
                    }
                    .to_string(),
                },
                Err(e) => CurvePoint {
                    s,
                    delta: f64::NAN,
                    chi: f64::NAN,
                    flag: format!("failed: {e}"),
                },
            },
        )
        .collect();

    let valid: Vec<&CurvePoint> = curve.iter().filter(|p| p.delta.is_finite()).collect();
    let best = valid
        .iter()
        .copied()
        .max_by(|a, b| a.delta.total_cmp(&b.delta))
        .ok_or_else(|| Error::InvalidArgument("no grid point could be evaluated".into()))?;
    let second: Vec<f64> = valid
        .windows(3)
        .map(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let (h1, h2) = (b.s - a.s, c.s - b.s);
            2.0 * (h1 * c.delta - (h1 + h2) * b.delta + h2 * a.delta) / (h1 * h2 * (h1 + h2))
        })
        .map(f64::abs)
        .collect();
    let max_second_difference = second.iter().copied().fold(0.0, f64::max);
    let spike_ratio = if second.is_empty() {
        0.0
    } else {
        let mut sorted = second.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        if median > 0.0 {
            max_second_difference / median
        } else if max_second_difference > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    Ok(SweepReport {
        sup_value: best.delta,
        argmax: best.s,
        delta_t: bowen.root,
        gap: (best.delta - bowen.root).abs(),
        max_second_difference,
        spike_ratio,
        min_chi: valid.iter().map(|p| p.chi).fold(f64::INFINITY, f64::min),
        curve,
    })
}
