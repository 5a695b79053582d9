//! Dimension theory for skew-product Smale endomorphisms over the
//! continued-fraction shift on pairs of digits.
//!
//! The crate is layered: [`coding`] maps symbol words to points, [`smale`]
//! defines the fiber systems, [`thermodynamics`] builds truncated Gibbs
//! measures and their entropies and exponents, [`dimension`] turns those into
//! dimension values, and [`empirics`] checks them against sampled clouds.
//!
//! ```
//! use skewdim::coding::TruncatedAlphabet;
//! use skewdim::dimension::bowen_dimension;
//! use skewdim::smale::SmaleSystem;
//!
//! let system = SmaleSystem::inverse_conjugate();
//! let root = bowen_dimension(&system, &TruncatedAlphabet::new(3)?, 1, 1e-6)?;
//! assert!(root.root > 0.0 && root.root < 2.0);
//! # Ok::<(), skewdim::Error>(())
//! ```

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coding;
pub mod dimension;
pub mod empirics;
pub mod error;
pub mod smale;
pub mod thermodynamics;

mod mc;

pub use error::{Error, Result};
pub use mc::{pairwise_sum, stream_rng, MonteCarloEstimate};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/coding.md")]
    pub struct Coding;
    #[doc = include_str!("../../../book/src/smale.md")]
    pub struct Smale;
    #[doc = include_str!("../../../book/src/thermodynamics.md")]
    pub struct Thermodynamics;
    #[doc = include_str!("../../../book/src/dimension.md")]
    pub struct Dimension;
    #[doc = include_str!("../../../book/src/empirics.md")]
    pub struct Empirics;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
