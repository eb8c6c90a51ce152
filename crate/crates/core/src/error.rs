use thiserror::Error;

pub type Result<T> = std::result::Result<T, GqkError>;

#[derive(Debug, Error)]
pub enum GqkError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid packet: {0}")]
    InvalidPacket(String),

    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("empty state list")]
    EmptyStateList,

    #[error("rotation is not a lattice rotation and interpolation was not enabled")]
    NonLatticeRotation,

    #[error("input not lattice compatible: {0}")]
    NonLattice(String),

    #[error("multiplier modulus defect {0:.3e} exceeds 1e-6")]
    MultiplierDefect(f64),

    #[error("multiplier depends on the reference state (spread {0:.3e})")]
    StateDependentMultiplier(f64),

    #[error("non-Hermitian field: {0}")]
    NonHermitian(String),

    #[error("phase field is not differentiable in the boost parameter (step inconsistency {0:.3e})")]
    NonDifferentiable(f64),

    #[error("Krylov propagator failed to converge at step {step} (error estimate {estimate:.3e})")]
    KrylovNonConvergence { step: usize, estimate: f64 },

    #[error("norm drift {drift:.3e} at step {step}: time step unstable")]
    NormDrift { step: usize, drift: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown check id `{0}`")]
    UnknownCheck(String),

    #[error("bad snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
