use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    /// The projection onto a nonconvex set is not unique at this input.
    #[error("degenerate projection: {0}")]
    DegenerateProjection(String),

    /// A point lies outside the domain of an indicator regularizer, so the
    /// objective is +infinity there.
    #[error("infeasible point for {set}: constraint residual {residual:e}")]
    Infeasible { set: &'static str, residual: f64 },

    /// Arithmetic produced NaN or an overflowed value.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("solution is not unique: {0}")]
    NonUniqueSolution(String),

    #[error("need at least 4 kept correspondences, found {kept}")]
    InsufficientInliers { kept: usize },

    #[error("iteration {k}: {source}")]
    AtIteration {
        k: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, k: u64) -> Error {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                k,
                source: Box::new(e),
            },
        }
    }

    /// True when the error means "objective is +infinity" rather than a
    /// numerical failure.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::Infeasible { .. } => true,
            Error::AtIteration { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }
}
