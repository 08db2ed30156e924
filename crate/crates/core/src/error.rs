use thiserror::Error;

/// Errors raised by the disk, chain and rescaling machinery.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("Jst + J(v) is singular or ill-conditioned (cond ≈ {condition:.3e}) at {point:?}{}", node_suffix(.node))]
    Singular { point: Vec<f64>, condition: f64, node: Option<(f64, f64)> },

    #[error("unknown gallery structure `{0}`")]
    UnknownName(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {0:?} is outside the interpolation range")]
    OutsideInterpolationRange((f64, f64)),

    #[error("point {point:?} is not inside the disk of radius {radius}")]
    OutsideDisk { point: (f64, f64), radius: f64 },

    #[error("disk maps live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fixed-point iteration diverged after {iterations} iterations (last step {last_step:.3e})")]
    Diverged { iterations: usize, last_step: f64 },

    #[error("endpoint matching failed after {steps} quasi-Newton steps (mismatch {mismatch:.3e})")]
    NewtonFailed { steps: usize, mismatch: f64 },

    #[error("no admissible chain found for k ≤ {k_max}")]
    NoChainFound { k_max: usize },

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("composed link {link} has residual {residual:.3e} above {tol:.3e}")]
    NotHolomorphicMap { link: usize, residual: f64, tol: f64 },

    #[error("|f'(0)| = {derivative:.6} is below the requested c = {c:.6}")]
    HypothesisViolated { derivative: f64, c: f64 },

    #[error("f'(0) vanishes; cannot rescale")]
    ZeroDerivative,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

fn node_suffix(node: &Option<(f64, f64)>) -> String {
    match node {
        Some((x, y)) => format!(" (disk node ({x}, {y}))"),
        None => String::new(),
    }
}

impl Error {
    /// Attaches the disk node at which a `Singular` error occurred.
    pub fn at_node(self, z: num_complex::Complex64) -> Self {
        match self {
            Error::Singular { point, condition, .. } => Error::Singular { point, condition, node: Some((z.re, z.im)) },
            other => other,
        }
    }

    /// Errors that come from the numerics rather than from the input.
    pub fn is_solver_error(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::Diverged { .. }
                | Error::NewtonFailed { .. }
                | Error::NoChainFound { .. }
                | Error::InvalidChain(_)
                | Error::NotHolomorphicMap { .. }
                | Error::HypothesisViolated { .. }
                | Error::ZeroDerivative
                | Error::OutsideInterpolationRange(_)
                | Error::OutsideDisk { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Singular { .. } => "Singular",
            Error::UnknownName(_) => "UnknownName",
            Error::InvalidParams(_) => "InvalidParams",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::OutsideInterpolationRange(_) => "OutsideInterpolationRange",
            Error::OutsideDisk { .. } => "OutsideDisk",
            Error::GridMismatch => "GridMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Diverged { .. } => "Diverged",
            Error::NewtonFailed { .. } => "NewtonFailed",
            Error::NoChainFound { .. } => "NoChainFound",
            Error::InvalidChain(_) => "InvalidChain",
            Error::NotHolomorphicMap { .. } => "NotHolomorphicMap",
            Error::HypothesisViolated { .. } => "HypothesisViolated",
            Error::ZeroDerivative => "ZeroDerivative",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
