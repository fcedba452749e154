use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("simulation diverged in sweep {sweep} of protocol `{protocol}`")]
    SimulationDivergence { protocol: String, sweep: usize },

    #[error(
        "training diverged at epoch {epoch}, batch {batch}: loss {loss}, parameter norm {param_norm:.4e}"
    )]
    TrainingDivergence {
        epoch: usize,
        batch: usize,
        loss: f64,
        param_norm: f64,
    },

    #[error("network produced non-finite outputs")]
    NonFiniteOutput,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Short, stable identifier used by the CLI for machine-parsable errors.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Input(_) => "input",
            Error::SimulationDivergence { .. } => "simulation-divergence",
            Error::TrainingDivergence { .. } => "training-divergence",
            Error::NonFiniteOutput => "non-finite-output",
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
