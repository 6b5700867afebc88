use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "CFL violation: step displacement {displacement:.4} exceeds {limit:.4} \
         ({courant} cells at spacing {spacing:.4})"
    )]
    Cfl {
        displacement: f64,
        limit: f64,
        courant: f64,
        spacing: f64,
    },

    #[error("control {value} outside tabulated range [-{radius}, {radius}]")]
    ControlOutOfRange { value: f64, radius: f64 },

    #[error("{count} nodes unreachable after {sweeps} sweeps (first: {first:?})")]
    Unreachable {
        count: usize,
        sweeps: usize,
        first: Vec<usize>,
    },

    #[error("no convergence in {iterations} iterations ({what}); last update {amplitude:e}")]
    NonConvergence {
        what: String,
        iterations: usize,
        amplitude: f64,
    },

    #[error("subgradient iteration diverged: coefficient norm {norm:e}")]
    Diverged { norm: f64 },

    #[error("linear program {0}")]
    Lp(String),

    #[error(
        "sandwich violated: lower {lower} / ergodic {ergodic} / upper {upper} (slack {slack}); \
         refine the grid (increase n, n_u or K_modes)"
    )]
    Sandwich {
        lower: f64,
        ergodic: f64,
        upper: f64,
        slack: f64,
    },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("coercivity certificate rejected: {0}")]
    Coercivity(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 check failure, 3 non-convergence, 4 config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Sandwich { .. } | Error::CheckFailed(_) => 2,
            Error::NonConvergence { .. }
            | Error::Unreachable { .. }
            | Error::Diverged { .. }
            | Error::Lp(_) => 3,
            Error::Config(_)
            | Error::Cfl { .. }
            | Error::Json(_)
            | Error::Parse(_)
            | Error::Coercivity(_)
            | Error::InvalidGrid(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. } => 4,
            Error::ControlOutOfRange { .. } => 4,
            Error::Io(_) => 1,
        }
    }
}
