use crate::kernels::Point3;

/// Errors raised by the numerical pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("coincident points: kernel is singular at r = 0")]
    CoincidentPoints,

    #[error("point ({}, {}, {}) lies outside the domain", .0.x, .0.y, .0.z)]
    OutsideDomain(Point3),

    #[error(
        "point is {distance:.3e} from the boundary, inside the margin {margin:.3e}; \
         use the boundary-asymptotic regime there"
    )]
    MarginViolation { distance: f64, margin: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("no sign change of sup g found for lambda in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("all {starts} ascent starts ran into the margin; increase the margin")]
    AscentDiverged { starts: usize },

    #[error("lambda = {lambda} is not above the critical value (sup g = {sup_g:.3e} <= 0)")]
    NotBubbling { lambda: f64, sup_g: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}
