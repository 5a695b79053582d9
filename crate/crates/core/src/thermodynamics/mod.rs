//! Potentials, pressure, Gibbs chains, entropies and Lyapunov exponents on
//! truncated alphabets.

mod gibbs;
mod lyapunov;
mod potential;
mod pressure;

pub use gibbs::{
    entropy, gibbs_markov, log_pressure, marginal_entropy, GibbsApprox, GibbsSummary,
    MarginalEntropy,
};
pub use lyapunov::{
    lyapunov_fiber, lyapunov_fiber_conditional, lyapunov_marginal, measure_stats,
    pressure_derivative_check, DerivativeCheck, MeasureStats, StatsOptions,
};
pub use potential::{LogDerivativeTable, Potential, SymbolTable};
pub use pressure::{pressure_cylinder_sum, table_pressure, PressureEstimate};
