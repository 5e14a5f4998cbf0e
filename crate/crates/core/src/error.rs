use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pre- and post-selected spin states are orthogonal (|<f|i>| = {overlap:.3e})")]
    OrthogonalSelection { overlap: f64 },

    #[error("invalid spinor or direction: {0}")]
    InvalidState(String),

    #[error("field gradients violate Maxwell's equations (div residual {div:.3e}, curl residual {curl:.3e})")]
    InvalidField { div: f64, curl: f64 },

    #[error("all field gradients are zero")]
    ZeroField,

    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    #[error("wave packet not contained in the grid: {0}")]
    Containment(String),

    #[error("wave field is in the {found} representation, expected {expected}")]
    Representation { expected: &'static str, found: &'static str },

    #[error("complex displacement requested for a field without analytic Gaussian backing")]
    NonGaussianComplexShift,

    #[error("axis error: {0}")]
    Axis(String),

    #[error("post-selection never succeeds (overlap norm {0:.3e})")]
    NullPostSelection(f64),

    #[error("time step too large: interaction phase per step {phase:.3e} exceeds {limit}")]
    Stability { phase: f64, limit: f64 },

    #[error("quadrature forms disagree: direct {direct}, reduced {reduced} (relative {relative:.3e})")]
    Quadrature { direct: String, reduced: String, relative: f64 },

    #[error("interaction time diverges: {0}")]
    DivergentInteraction(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("numerical check failed: {0}")]
    Tolerance(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { key: key.into(), reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
