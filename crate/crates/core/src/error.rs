use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("controller synthesis failed in {which} DARE: {source}")]
    Synthesis {
        which: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("integration fault: non-finite plant state at step {step}")]
    IntegrationFault { step: usize },

    #[error("training fault at episode {episode}, step {step}: {detail}")]
    TrainingFault {
        episode: usize,
        step: usize,
        detail: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
