use thiserror::Error;

/// Everything that can go wrong while building bases, operators or flows.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode window: {0}")]
    Window(String),

    #[error("N must be even (got {0})")]
    OddParticleNumber(usize),

    #[error("particle number must be at least 2 (got {0})")]
    TooFewParticles(usize),

    #[error("basis dimension {dim} exceeds cap {cap} (N={n}, {modes} modes)")]
    DimensionCap {
        dim: u128,
        cap: usize,
        n: usize,
        modes: usize,
    },

    #[error("mode {0:?} is not in the window")]
    ModeOutsideWindow(Vec<i32>),

    #[error("invalid monomial: {0}")]
    Monomial(String),

    #[error("sector value {0} outside 0..={1}")]
    SectorRange(usize, usize),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("z hits complement spectrum at step {step}: min eigenvalue estimate {min_eig:e}")]
    Singular { step: usize, min_eig: f64 },

    #[error("aggregated first block singular at w={w}: min eigenvalue estimate {min_eig:e}")]
    AggregatedSingular { w: f64, min_eig: f64 },

    #[error("Neumann series diverges at step {step}: spectral radius {radius}")]
    NeumannDivergence { step: usize, radius: f64 },

    #[error("Neumann and direct inverses disagree at step {step}: rel diff {diff:e}")]
    NeumannMismatch { step: usize, diff: f64 },

    #[error("bracket failure on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("division blow-up at index {index}: denominator {denom:e}")]
    Division { index: usize, denom: f64 },

    #[error("divergent geometric factor at level {level}: {factor}")]
    GeometricDivergence { level: usize, factor: f64 },

    #[error("resolvent singularity at position {position}: denominator {denom:e}")]
    ResolventSingular { position: usize, denom: f64 },

    #[error("ill-conditioned chain factor at step {step}: condition {cond:e}")]
    Conditioning { step: usize, cond: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("zero vector")]
    ZeroVector,
}

pub type Result<T> = std::result::Result<T, Error>;
