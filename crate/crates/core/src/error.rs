use thiserror::Error;

/// Errors raised by the beam models, solvers and the command line front end.
#[derive(Debug, Error)]
pub enum AclError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error("parameter `{name}` must be positive (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("layer {layer}: wave speeds coincide (zeta+ = zeta- = {zeta}); no resonant construction exists")]
    DegenerateWaveSpeeds { layer: u8, zeta: f64 },

    #[error("invalid resonance ratio {0}: expected a finite ratio >= 1")]
    InvalidRatio(f64),

    #[error("no real piezoelectric coefficient reaches ratio {ratio} for this layer (gamma^2 = {gamma_sq})")]
    NoRealSolution { ratio: f64, gamma_sq: f64 },

    #[error("magnetic model requires `mu` for {0}")]
    MissingMagneticParams(&'static str),

    #[error("configuration is not resonant: {0}")]
    NotResonant(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step matrix is not positive definite (dt = {0})")]
    SingularStepMatrix(f64),

    #[error("dense oracle limited to {limit} dofs, system has {dofs}")]
    TooLargeForDense { dofs: usize, limit: usize },

    #[error("eigensolver failed: {0}")]
    ConvergenceFailure(String),

    #[error("decay fit needs at least {needed} usable samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("energy sample at t = {0} is not positive")]
    NonpositiveEnergy(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AclError> = std::result::Result<T, E>;
