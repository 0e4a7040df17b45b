use thiserror::Error;

use crate::params::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability {value} outside {domain}")]
    InvalidProbability { value: f64, domain: &'static str },

    #[error("station count must be >= 1, got {0}")]
    InvalidStationCount(u32),

    #[error("invalid chain shape: {0}")]
    InvalidShape(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(ValidationReport),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: u32, residual: f64 },

    #[error("busy-slot probability is zero; success shares are undefined")]
    ZeroBusyProbability,

    #[error("explicit chain would have {states} states (limit {limit})")]
    ChainTooLarge { states: usize, limit: usize },

    #[error("stationary solve failed: {0}")]
    SingularChain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn check_probability(p: f64, domain: &'static str, upper_open: bool) -> Result<()> {
    let ok = if upper_open {
        (0.0..1.0).contains(&p)
    } else {
        (0.0..=1.0).contains(&p)
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidProbability { value: p, domain })
    }
}
