use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input lengths differ: {masses} masses, {positions} positions, {velocities} velocities")]
    LengthMismatch {
        masses: usize,
        positions: usize,
        velocities: usize,
    },

    #[error("a system needs at least 2 particles, got {0}")]
    TooFewParticles(usize),

    #[error("particle {index} has non-positive mass {mass}")]
    NonPositiveMass { index: usize, mass: f64 },

    #[error("non-finite component in input for particle {0}")]
    NonFinite(usize),

    #[error("particles {i} and {j} are coincident with zero softening")]
    Singularity { i: usize, j: usize },

    #[error("invalid block request: {0}")]
    InvalidBlock(String),

    #[error("required time step fell below dt_min = {dt_min:e} (unsupported close-encounter regime)")]
    TimeStepUnderflow { dt_min: f64 },

    #[error("prediction time {t} lies before particle {index} time {t_part}")]
    TimeReversal { index: usize, t: f64, t_part: f64 },

    #[error("system time {0} is not commensurable with any admissible power-of-two step")]
    IncommensurableTime(f64),

    #[error("system not initialized (particle time steps pending)")]
    NotInitialized,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("zero potential energy: cannot scale a degenerate system to standard units")]
    DegenerateScaling,

    #[error("power-law fit needs at least 3 samples with positive values")]
    BadFitInput,

    #[error("{n} particles exceed the {capacity}-particle memory of profile \"{profile}\"")]
    OverCapacity { profile: String, n: u64, capacity: u64 },

    #[error("snapshot parse error at line {line}: {reason}")]
    SnapshotFormat { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
