use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its domain (non-positive width, bad grid size, ...).
    #[error("invalid parameter `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    /// A frequency falls outside the validity window of the dispersion series.
    #[error(
        "frequency {omega:.6e} rad/s is outside the dispersion validity window \
         [{lo:.6e}, {hi:.6e}] rad/s"
    )]
    OutOfWindow { omega: f64, lo: f64, hi: f64 },

    #[error("no factorable pump width exists for this geometry (group-slowness product {product:.3e} s^2/m^2 is not negative)")]
    NoFactorableWidth { product: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("filter centered at {center:.6e} rad/s does not overlap the grid")]
    FilterOutsideGrid { center: f64 },

    #[error("delay {delay:.3e} s aliases on an axis with spacing {spacing:.3e} rad/s (limit {limit:.3e} s)")]
    Aliasing { delay: f64, spacing: f64, limit: f64 },

    #[error("low-gain guard violated: gamma*P_peak*L = {gain:.3} >= 0.3; reduce pump power")]
    GainGuard { gain: f64 },

    #[error("CAR is undefined: accidental coincidence rate is zero")]
    UndefinedCar,

    #[error("CAR is not unimodal on the requested range:\n{table}")]
    NotUnimodal { table: String },

    #[error("degenerate observations: {0}")]
    DegenerateObservations(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        name,
        reason: reason.into(),
    }
}
