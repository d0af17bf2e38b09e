use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid specification: {0}")]
    Grid(String),

    #[error("wavefunctions live on different grids")]
    GridMismatch,

    #[error("invalid bound-state label (n={n}, l={l}, m={m}): {reason}")]
    Label {
        n: usize,
        l: usize,
        m: i64,
        reason: String,
    },

    #[error("grid capacity exceeded: requested n_max={requested}, grid supports n <= {limit} ({reason})")]
    Capacity {
        requested: usize,
        limit: usize,
        reason: String,
    },

    #[error("numerical health check failed: {0}")]
    NumericalHealth(String),

    #[error("invalid time window: {0}")]
    Window(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
