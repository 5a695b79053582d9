use thiserror::Error;

use crate::coding::DigitWord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside the domain [0, 1) of the continued-fraction branch")]
    Domain { value: f64 },

    #[error("digit must be at least 1, got {0}")]
    InvalidDigit(u64),

    #[error("iterate vanished after {} digits: the input is numerically rational", .digits.len())]
    RationalTermination { digits: DigitWord },

    #[error("enumeration of {requested} words exceeds the cap of {cap}")]
    EnumerationCap { requested: f64, cap: u64 },

    #[error("fiber map image {re} + {im}i escaped the domain by {excess:e}")]
    DomainEscape { re: f64, im: f64, excess: f64 },

    #[error("depth-1 sum {0} is not finite; s lies outside the summable range")]
    SummabilityFailure(f64),

    #[error("transition structure is not primitive: {0}")]
    NonPrimitive(String),

    #[error("no pressure sign change: {0}")]
    BracketFailure(String),

    #[error("Lyapunov exponent {name} = {value} is not positive")]
    DegenerateExponent { name: &'static str, value: f64 },

    #[error("only {usable} usable scales (need at least {needed} holding >= {min_count} points)")]
    InsufficientScales {
        usable: usize,
        needed: usize,
        min_count: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
