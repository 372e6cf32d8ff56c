use num_complex::Complex64;

/// Failures raised anywhere in the numerical pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("Laplace node s = {s} violates Re(s) >= {sigma_min}")]
    NodeBelowAbscissa { s: Complex64, sigma_min: f64 },

    #[error("A(omega) is singular at omega = {omega} for s = {s}")]
    SingularA { omega: f64, s: Complex64 },

    #[error("frequency integral did not converge (estimated relative error {achieved:e})")]
    NonConvergentIntegral { achieved: f64 },

    #[error("matrix is singular at pivot {pivot} for s = {s}")]
    SingularMatrix { s: Complex64, pivot: usize },

    #[error("matrix is ill-conditioned at s = {s} (condition estimate {condition:e})")]
    IllConditioned { s: Complex64, condition: f64 },

    #[error("real block solve requires a real Laplace node, got s = {s}")]
    ComplexNode { s: Complex64 },

    #[error("sampler returned a non-finite value at s = {s}")]
    NonFiniteSample { s: Complex64 },

    #[error("series acceleration did not converge at t = {t} (residual {residual:e})")]
    AccelerationFailed { t: f64, residual: f64 },

    #[error("pole proximity at s = {s}: |denominator| = {denominator:e}")]
    PoleProximity { s: Complex64, denominator: f64 },

    #[error("coupling regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("inversion accuracy failure at t = {t}: {detail}")]
    InversionAccuracy { t: f64, detail: String },

    #[error("degenerate eigenvalue cluster {cluster:?}")]
    DegenerateCluster { cluster: Vec<Complex64> },

    #[error("left/right eigenvector pairing failed for cluster {cluster:?}")]
    PairingAmbiguity { cluster: Vec<Complex64> },

    #[error("eigenvalue {xi} lies within tolerance of -1")]
    Resonance { xi: Complex64 },

    #[error("eigenbasis incomplete: reconstruction residual {residual:e}")]
    IncompleteBasis { residual: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;
