use thiserror::Error;

pub type Result<T> = std::result::Result<T, OlpError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OlpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires a single resource, instance has m = {0}")]
    WrongDimension(usize),

    #[error("consumption vector {0:?} is outside the support of the consumption law")]
    UnsupportedConsumption(Vec<f64>),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("solver budget exceeded after {iters} iterations (certified gap {gap:e})")]
    SolverBudgetExceeded { iters: usize, gap: f64 },

    #[error("primal recovery failed: duality gap {gap:e} exceeds tolerance")]
    RecoveryFailed { gap: f64 },

    #[error("growth fit is degenerate: objective is flat around the probe point")]
    DegenerateFit,

    #[error("insufficient data for fit: need at least {needed} points, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<OlpError>,
    },
}

impl OlpError {
    pub fn context(self, context: impl Into<String>) -> Self {
        OlpError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &OlpError {
        match self {
            OlpError::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self.root(),
            OlpError::SolverBudgetExceeded { .. }
                | OlpError::RecoveryFailed { .. }
                | OlpError::DegenerateFit
                | OlpError::InsufficientData { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(OlpError::DimensionMismatch { expected, got })
    }
}
