use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape rejected: {0}")]
    ShapeRejected(String),

    #[error("resolution guard: eps = {eps} is below 3h = {min}; the interface is not resolved")]
    Unresolved { eps: f64, min: f64 },

    #[error("degenerate multiplier: denominator {value:e} is below the guard {guard:e}")]
    Degenerate { value: f64, guard: f64 },

    #[error("stability bound violated: dt = {dt:e} exceeds {bound:e}")]
    Unstable { dt: f64, bound: f64 },

    #[error(
        "volume root solve failed after {iterations} iterations: \
         bracket [{lo:e}, {hi:e}] with residuals [{q_lo:e}, {q_hi:e}]"
    )]
    RootNotConverged {
        iterations: usize,
        lo: f64,
        hi: f64,
        q_lo: f64,
        q_hi: f64,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("oracle: radius {index} is non-positive ({radius})")]
    Extinct { index: usize, radius: f64 },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
