use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("satellite below the horizon at t = {t} s (elevation {elevation_deg:.3} deg)")]
    BelowHorizon { t: f64, elevation_deg: f64 },

    #[error("pass never reaches elevation {min_elevation_deg:.3} deg (max {max_elevation_deg:.3} deg)")]
    NeverVisible {
        min_elevation_deg: f64,
        max_elevation_deg: f64,
    },

    #[error("simulation window contains no laser fires")]
    EmptyWindow,

    #[error("cannot merge streams with different epochs ({left} vs {right})")]
    EpochMismatch { left: String, right: String },

    #[error("fit needs more than {degree} observations, got {count}")]
    Underdetermined { degree: usize, count: usize },

    #[error("least-squares system is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("t = {t} outside fit domain [{t_min}, {t_max}]")]
    OutOfDomain { t: f64, t_min: f64, t_max: f64 },

    #[error("stream contains no fire/return pairs")]
    NoReturns,

    #[error("stream contains no events")]
    EmptyStream,

    #[error("series too short: need at least {needed} bins, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("mirror chain is empty")]
    EmptyChain,

    #[error("time-tag format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("scenario validation failed: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

pub(crate) fn require_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must lie in (0, 1], got {value}"),
        })
    }
}
