use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum ScatterError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid boundary grid: {0}")]
    InvalidGrid(String),

    #[error("particles {first} and {second} are too close: gap {gap:.3e} < required {required:.3e}")]
    Overlap {
        first: usize,
        second: usize,
        gap: f64,
        required: f64,
    },

    #[error("coincident points: {0}")]
    CoincidentPoints(String),

    #[error("target ({x:.6}, {y:.6}) lies inside an excluded zone: {reason}")]
    TargetInForbiddenZone { x: f64, y: f64, reason: String },

    #[error("boundary system is numerically singular (condition estimate {condition:.3e})")]
    NearSingular { condition: f64 },

    #[error("mode {mode} of the disk system is singular")]
    SingularMode { mode: i32 },

    #[error("point source lies inside the circumscribing disk of particle {particle}")]
    SourceInsideDisk { particle: usize },

    #[error("GMRES did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("reference field is identically zero")]
    ZeroReference,

    #[error("infeasible packing: {0}")]
    InfeasiblePacking(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScatterError>;
