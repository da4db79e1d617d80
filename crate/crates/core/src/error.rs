use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Every variant maps to a short machine-readable category via [`Error::category`],
/// which the CLI prints as the first token of its one-line failure message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("non-positive gap h = {h:.6e} at x1 = {x1:.6}")]
    NonPositiveGap { x1: f64, h: f64 },

    #[error("background layer under-resolved: layer thickness {layer:.4e} < 3 grid layers ({min:.4e})")]
    BackgroundUnderResolved { layer: f64, min: f64 },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("CFL violation at t = {t:.6}: courant number {courant:.4} exceeds {limit:.4}")]
    Cfl { t: f64, courant: f64, limit: f64 },

    #[error("friction Picard iteration did not converge at t = {t:.6} after {iterations} iterations (last change {residual:.3e})")]
    Picard { t: f64, iterations: usize, residual: f64 },

    #[error("pressure projection did not converge after {iterations} iterations (divergence {residual:.3e})")]
    Projection { iterations: usize, residual: f64 },

    #[error("linear solver failure: {0}")]
    Linear(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations (last Rayleigh quotient {rayleigh:.10e})")]
    Eigen { iterations: usize, rayleigh: f64 },

    #[error("sampling produced only degenerate fields")]
    DegenerateSamples,

    #[error("step failed at t = {t:.6}: {source}")]
    Step {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config: {0}")]
    ConfigMissing(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Geometry(_) | Error::NonPositiveGap { .. } => "geometry",
            Error::BackgroundUnderResolved { .. } => "background",
            Error::Shape { .. } => "shape",
            Error::Parameter { .. } => "parameter",
            Error::Cfl { .. } => "cfl",
            Error::Picard { .. } => "picard",
            Error::Projection { .. } => "projection",
            Error::Linear(_) => "linear",
            Error::Eigen { .. } => "eigen",
            Error::DegenerateSamples => "sampling",
            Error::Step { source, .. } => source.category(),
            Error::Config { .. } | Error::ConfigMissing(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Manifest(_) => "manifest",
            Error::Analysis(_) => "analysis",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
