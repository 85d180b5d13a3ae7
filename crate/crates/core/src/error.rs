use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum SblError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time grid must start at 0 and be strictly increasing (violation at index {index})")]
    NonMonotoneTimeGrid { index: usize },

    #[error("bridge refinement requires a uniform time grid")]
    NonUniformTimeGrid,

    #[error("solution blew up at t = {time} in cell {cell}")]
    BlowUp { time: f64, cell: usize },

    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),

    #[error("quadrature failed to converge on [{a}, {b}] (estimated error {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("kernel under-resolved: delta = {delta} but grid spacing is {spacing}")]
    KernelUnderResolved { delta: f64, spacing: f64 },

    #[error("test function must be nonnegative (cell {cell} has value {value})")]
    NegativeTestFunction { cell: usize, value: f64 },

    #[error("need at least {required} scales for a rate fit, got {got}")]
    TooFewScales { required: usize, got: usize },

    #[error("nonpositive value in rate fit: ({scale}, {value})")]
    NonPositiveFitPoint { scale: f64, value: f64 },

    #[error("Monte Carlo estimate '{name}' aborted: {failed} of {total} paths failed")]
    TooManyFailures { name: String, failed: usize, total: usize },

    #[error("degenerate ratio: right-hand side vanishes while left-hand side is {lhs:e} at delta = {delta}")]
    DegenerateRatio { delta: f64, lhs: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SblError>;
