use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::gibbs::{entropy, log_pressure, marginal_entropy, GibbsApprox};
use super::potential::LogDerivativeTable;
use crate::coding::{Coordinate, PairSymbol, PairWord, TruncatedAlphabet};
use crate::error::{Error, Result};
use crate::mc::{par_chunks, MonteCarloEstimate};
use crate::smale::{pi2_hat_buffer, SmaleSystem, DEFAULT_ENCLOSURE_DEPTH};

/// Extra symbols drawn beyond the averaging window so the backward continued
/// fraction recursion has converged.
const CF_BURN: usize = 40;

/// `chi_i = -int log|phi'_{zeta_0}(rho_0 sigma zeta)| dmu_i` by Birkhoff averages
/// along stationary chain paths. Per-path averages feed the standard error.
pub fn lyapunov_marginal(
    g: &GibbsApprox,
    which: u8,
    n_samples: usize,
    orbit_len: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let coord = Coordinate::from_index(which)?;
    if orbit_len < 50 || n_samples == 0 {
        return Err(Error::InvalidArgument(
            "marginal Lyapunov exponent needs orbit_len >= 50 and samples >= 1".into(),
        ));
    }
    let digit: Vec<f64> = g
        .symbols()
        .iter()
        .map(|s| s.coordinate(coord).get() as f64)
        .collect();
    let values = par_chunks(n_samples, seed, |rng, range| {
        let mut path = vec![0usize; orbit_len + CF_BURN];
        range
            .map(|_| {
                g.sample_forward(rng, &mut path);
                let mut x = 0.5;
                let mut total = 0.0;
                for (t, &i) in path.iter().enumerate().rev() {
                    x = 1.0 / (digit[i] + x);
                    if t < orbit_len {
                        total += -2.0 * x.ln();
                    }
                }
                total / orbit_len as f64
            })
            .collect::<Vec<f64>>()
    })
    .concat();
    Ok(MonteCarloEstimate::from_values(&values))
}

fn symbol_lookup(g: &GibbsApprox, system: &SmaleSystem) -> Result<Vec<PairSymbol>> {
    let symbols = g.symbols().to_vec();
    if let Some(s) = symbols.iter().find(|s| !system.has_symbol(**s)) {
        return Err(Error::InvalidArgument(format!(
            "chain symbol {s} is not a symbol of the {} system",
            system.name()
        )));
    }
    Ok(symbols)
}

/// `chi_T = -int log|T'_{eta_0 eta_1 ...}(pi^_2(eta))| dmu` by Monte Carlo over
/// two-sided stationary sequences: the forward part from the chain, the past
/// from the reversed chain.
pub fn lyapunov_fiber(
    g: &GibbsApprox,
    system: &SmaleSystem,
    n_samples: usize,
    past_depth: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if past_depth < 10 || n_samples == 0 {
        return Err(Error::InvalidArgument(
            "fiber Lyapunov exponent needs past_depth >= 10 and samples >= 1".into(),
        ));
    }
    let symbols = symbol_lookup(g, system)?;
    let forward_len = DEFAULT_ENCLOSURE_DEPTH.max(g.state_len());
    let values = par_chunks(n_samples, seed, |rng, range| {
        let mut forward = vec![0usize; forward_len];
        let mut past = vec![0usize; past_depth];
        let mut buffer = vec![symbols[0]; past_depth + forward_len];
        range
            .map(|_| {
                g.sample_forward(rng, &mut forward);
                g.sample_past(rng, g.state_of(&forward), &mut past);
                for (j, &x) in past.iter().enumerate() {
                    buffer[past_depth - 1 - j] = symbols[x];
                }
                for (j, &y) in forward.iter().enumerate() {
                    buffer[past_depth + j] = symbols[y];
                }
                let w = pi2_hat_buffer(system, &buffer, past_depth, DEFAULT_ENCLOSURE_DEPTH)?;
                let map = system
                    .resolve_symbols(&buffer[past_depth..past_depth + DEFAULT_ENCLOSURE_DEPTH]);
                Ok(-map.derivative_mod(w).ln())
            })
            .collect::<Result<Vec<f64>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .concat();
    Ok(MonteCarloEstimate::from_values(&values))
}

/// `chi_T` from the fiber over a fixed forward word: pasts are drawn from the
/// reversed chain conditioned on `forward`, and `-log|T'|` is averaged along
/// the backward orbit `sigma^-1 eta, ..., sigma^-orbit_len eta`.
pub fn lyapunov_fiber_conditional(
    g: &GibbsApprox,
    system: &SmaleSystem,
    forward: &PairWord,
    n_samples: usize,
    orbit_len: usize,
    past_depth: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if past_depth < 10 || n_samples == 0 || orbit_len == 0 {
        return Err(Error::InvalidArgument(
            "conditional fiber exponent needs past_depth >= 10 and positive sizes".into(),
        ));
    }
    let symbols = symbol_lookup(g, system)?;
    let forward_len = DEFAULT_ENCLOSURE_DEPTH.max(g.state_len());
    if forward.len() < forward_len {
        return Err(Error::InvalidArgument(format!(
            "forward word needs at least {forward_len} symbols"
        )));
    }
    let index: Vec<usize> = forward.as_slice()[..forward_len]
        .iter()
        .map(|s| {
            symbols.iter().position(|t| t == s).ok_or_else(|| {
                Error::InvalidArgument(format!("forward symbol {s} is not a chain symbol"))
            })
        })
        .collect::<Result<_>>()?;
    if g.cylinder_mass(&index) == 0.0 {
        return Err(Error::InvalidArgument("forward word has zero mass".into()));
    }
    let start = g.state_of(&index);
    let total_past = orbit_len + past_depth;
    let values = par_chunks(n_samples, seed, |rng, range| {
        let mut past = vec![0usize; total_past];
        let mut buffer = vec![symbols[0]; total_past + forward_len];
        for (j, &y) in index.iter().enumerate() {
            buffer[total_past + j] = symbols[y];
        }
        range
            .map(|_| {
                g.sample_past(rng, start, &mut past);
                for (j, &x) in past.iter().enumerate() {
                    buffer[total_past - 1 - j] = symbols[x];
                }
                let mut sum = 0.0;
                for step in 1..=orbit_len {
                    let p = total_past - step;
                    let w = pi2_hat_buffer(
                        system,
                        &buffer[p - past_depth..],
                        past_depth,
                        DEFAULT_ENCLOSURE_DEPTH,
                    )?;
                    let map = system.resolve_symbols(&buffer[p..p + DEFAULT_ENCLOSURE_DEPTH]);
                    sum -= map.derivative_mod(w).ln();
                }
                Ok(sum / orbit_len as f64)
            })
            .collect::<Result<Vec<f64>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .concat();
    Ok(MonteCarloEstimate::from_values(&values))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub s: f64,
    pub h_step: f64,
    /// `(P(s + h) - P(s - h)) / 2h`.
    pub fd: f64,
    /// Monte Carlo `int log|T'| dmu_{T,s} = -chi_T`.
    pub integral: f64,
    pub integral_std_error: f64,
    /// The same integral of the tabulated potential under the chain.
    pub chain_integral: f64,
}

/// Compares the derivative of `s -> P(s log|T'|)` with `int log|T'| dmu_{T,s}`.
#[allow(clippy::too_many_arguments)]
pub fn pressure_derivative_check(
    system: &Arc<SmaleSystem>,
    s: f64,
    h_step: f64,
    alphabet: &TruncatedAlphabet,
    memory: usize,
    n_samples: usize,
    past_depth: usize,
    seed: u64,
) -> Result<DerivativeCheck> {
    if !(h_step > 0.0) || s - h_step < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need h_step > 0 and s - h_step >= 0, got s = {s}, h = {h_step}"
        )));
    }
    let table = LogDerivativeTable::new(system, alphabet, memory)?;
    let fd = (log_pressure(&table.potential(s + h_step))?
        - log_pressure(&table.potential(s - h_step))?)
        / (2.0 * h_step);
    let g = GibbsApprox::from_table(table.potential(s))?;
    let chi = lyapunov_fiber(&g, system, n_samples, past_depth, seed)?;
    Ok(DerivativeCheck {
        s,
        h_step,
        fd,
        integral: -chi.mean,
        integral_std_error: chi.std_error,
        chain_integral: g.integral(table.table()),
    })
}

/// Entropies and Lyapunov exponents of a Gibbs chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureStats {
    pub h_mu: f64,
    pub h_mu1: f64,
    pub h_mu2: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub chi_t: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl MeasureStats {
    /// Fills in `lambda_i = exp(-chi_i)`.
    pub fn new(h_mu: f64, h_mu1: f64, h_mu2: f64, chi1: f64, chi2: f64, chi_t: f64) -> Self {
        MeasureStats {
            h_mu,
            h_mu1,
            h_mu2,
            chi1,
            chi2,
            chi_t,
            lambda1: (-chi1).exp(),
            lambda2: (-chi2).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsOptions {
    pub marginal_depth: usize,
    pub n_samples: usize,
    pub orbit_len: usize,
    pub past_depth: usize,
    pub seed: u64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            marginal_depth: 8,
            n_samples: 4096,
            orbit_len: 200,
            past_depth: 40,
            seed: 0,
        }
    }
}

/// Assembles `MeasureStats`. The marginal entropies are clipped to `h_mu`,
/// which bounds them from above.
pub fn measure_stats(
    g: &GibbsApprox,
    system: &SmaleSystem,
    options: &StatsOptions,
) -> Result<MeasureStats> {
    let h = entropy(g);
    let h1 = marginal_entropy(g, 1, options.marginal_depth)?.value.min(h);
    let h2 = marginal_entropy(g, 2, options.marginal_depth)?.value.min(h);
    let chi1 = lyapunov_marginal(g, 1, options.n_samples, options.orbit_len, options.seed)?.mean;
    let chi2 = lyapunov_marginal(
        g,
        2,
        options.n_samples,
        options.orbit_len,
        options.seed ^ 0x5eed,
    )?
    .mean;
    let chi_t = lyapunov_fiber(
        g,
        system,
        options.n_samples,
        options.past_depth,
        options.seed ^ 0xf1be,
    )?
    .mean;
    Ok(MeasureStats::new(h, h1, h2, chi1, chi2, chi_t))
}
