use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dispersion model failed at omega = {omega} rad/fs: {reason}")]
    Dispersion { omega: f64, reason: String },

    #[error("solver did not converge: step halving changed entries by {change:.3e} (limit {limit:.3e})")]
    NonConvergence { change: f64, limit: f64 },

    #[error("Bogoliubov constraints violated: symmetry defect {symmetry:.3e}, unitarity defect {unitarity:.3e} (limit {limit:.3e})")]
    ConstraintViolation {
        symmetry: f64,
        unitarity: f64,
        limit: f64,
    },

    #[error("could not pair modes in singular-value cluster starting at index {start} (leak {leak:.3e}); try a larger cluster tolerance")]
    ClusterPairing { start: usize, leak: f64 },

    #[error("kernel is not symmetric: relative asymmetry {0:.3e}")]
    AsymmetricKernel(f64),

    #[error("Green functions are already midpoint-compensated")]
    DoubleCompensation,

    #[error("local oscillator is not normalized: norm^2 = {0}")]
    Unnormalized(f64),

    #[error("overlap coefficients do not share a common phase: mode {mode} deviates by {defect:.3e}")]
    PhaseAlignment { mode: usize, defect: f64 },

    #[error("unphysical quadrature variances: {0}")]
    UnphysicalVariances(String),

    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
