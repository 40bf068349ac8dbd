use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("zero vector has no causal character")]
    ZeroVector,

    #[error("expected a unit spacelike vector, got |u|^2 = {0}")]
    NotUnitSpacelike(f64),

    #[error("timelike frame is not orthonormal (worst residual {0:.3e})")]
    BadTimelikeFrame(f64),

    #[error("subspace basis is degenerate or not spacelike (pivot norm^2 = {0:.3e})")]
    DegenerateSubspace(f64),

    #[error("coefficient vector must have one entry per boost generator: expected {expected}, got {got}")]
    BadGeneratorCoefficients { expected: usize, got: usize },

    #[error("degenerate induced metric at sample {sample} (min eigenvalue {min_eig:.3e})")]
    DegenerateMetric { sample: usize, min_eig: f64 },

    #[error("acausal pair violation: samples {x} and {y} have separation^2 = {d2:.3e}")]
    AcausalPair { x: usize, y: usize, d2: f64 },

    #[error("surface is not spacelike-convex (margin {margin:.3e}); {context}")]
    NotConvex { margin: f64, context: &'static str },

    #[error("Gauss map is not injective at this grid resolution; refine the grid")]
    GaussMapNotInjective,

    #[error("reconstruction is not a spacelike embedding: {0}")]
    BadReconstruction(Box<Error>),

    #[error("plane search did not converge after {iters} iterations (|grad| = {grad_norm:.3e})")]
    PlaneSearchDiverged { iters: usize, grad_norm: f64 },

    #[error("flow stopped: singular (sup ||h||^2 = {sup_h2:.3e}, extrapolated blow-up time {t_blowup:.6})")]
    SingularStop { sup_h2: f64, t_blowup: f64 },

    #[error("step size underflow after {halvings} halvings (dt = {dt:.3e})")]
    StepUnderflow { halvings: usize, dt: f64 },

    #[error("non-monotone time map: psi crossed zero at tau = {tau}")]
    NonMonotoneTimeMap { tau: f64 },

    #[error("decay fit window contains non-positive values")]
    NonPositiveFitSeries,

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed fixture file {path}: {reason}")]
    BadFixtureFile { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
