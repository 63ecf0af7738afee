use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spline: {0}")]
    InvalidSpline(String),

    #[error("point {x} outside domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("basis index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("field line left the tracing box at (R, Z, zeta) = ({:.6}, {:.6}, {:.6})", .at[0], .at[1], .at[2])]
    FieldLineExit { at: [f64; 3] },

    #[error("field has vanishing toroidal component")]
    DegenerateField,

    #[error("no seeds survived to the end plane")]
    NoSurvivingSeeds,

    #[error("coefficient vector has length {got}, space expects {expected}")]
    CoefficientLength { got: usize, expected: usize },

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("matrix is singular or indefinite at pivot {pivot} (value {value:e})")]
    Singular { pivot: usize, value: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("conjugate gradient breakdown at iteration {iteration}: non-positive curvature {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("fourier oracle given a zero mode")]
    ZeroMode,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit needs at least two finite positive points, got {0}")]
    Fit(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
