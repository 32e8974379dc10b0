use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size for {what}: {value}")]
    InvalidSize { what: &'static str, value: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("singular linear system ({context}){}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    SingularSystem {
        context: String,
        step: Option<usize>,
    },

    #[error("sample {index} failed: {source}")]
    SampleFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature too coarse: Gram matrix deviates from identity by {deviation:e}")]
    QuadratureTooCoarse { deviation: f64 },

    #[error("system of size {size} exceeds the configured limit {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("polynomial basis is not orthonormal (Gram deviation {deviation:e})")]
    NonOrthonormalBasis { deviation: f64 },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn singular(context: impl Into<String>) -> Self {
        Error::SingularSystem {
            context: context.into(),
            step: None,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::SingularSystem { context, .. } => Error::SingularSystem {
                context,
                step: Some(step),
            },
            other => other,
        }
    }
}
