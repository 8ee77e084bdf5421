use thiserror::Error;

/// Errors raised by graph construction, solvers and certifiers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric undefined: graph is disconnected")]
    Disconnected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("exponent out of range: p = {0} (need p > 1)")]
    ExponentOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate reached before giving up.
        best: Vec<f64>,
    },

    #[error("complement empty: the open set is the whole space")]
    ComplementEmpty,

    #[error("whitney parameter {0} is below the minimum 8")]
    LambdaTooSmall(f64),

    #[error("cutoff for ball #{index} violates its constraints: {reason}")]
    InvalidCutoff { index: usize, reason: String },

    #[error("hypothesis failed: {0}")]
    Hypothesis(String),

    #[error("scale function returned a non-positive value {value} at vertex {vertex}, radius {radius}")]
    NonPositiveScale { vertex: usize, radius: f64, value: f64 },

    #[error("the two small balls intersect")]
    BallsIntersect,

    #[error("level {level} is over the memory budget for family {family} (max {max})")]
    OverBudget { family: String, level: usize, max: usize },

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
