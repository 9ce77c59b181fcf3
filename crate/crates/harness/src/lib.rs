//! Experiment harness: solver runs, learned-policy evaluation, parameter
//! sweeps, significance tests and report export behind the `pfss` command.

pub mod experiment;
pub mod methods;
pub mod report;
pub mod wilcoxon;

use thiserror::Error;

pub use experiment::{run_solve, sweep_machines, sweep_sigma, DatasetSource, ExperimentConfig};
pub use methods::{Method, MethodParams};
pub use report::{Report, ReportRow};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("too few nonzero pairs for the signed-rank test: {found} (need {needed})")]
    TooFewPairs { found: usize, needed: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

impl HarnessError {
    /// Process exit status: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Toml(_) | Self::TooFewPairs { .. } => 1,
            Self::Numeric(_) => 3,
            Self::Data(_) | Self::Io(_) | Self::Csv(_) | Self::Json(_) => 2,
        }
    }
}

impl From<pfss_core::PfssError> for HarnessError {
    fn from(e: pfss_core::PfssError) -> Self {
        use pfss_core::PfssError as E;
        match e {
            E::InvalidParameter(_) | E::ScaleGuard { .. } => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<pfss_core::io::DataError> for HarnessError {
    fn from(e: pfss_core::io::DataError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<pfss_policy::PolicyError> for HarnessError {
    fn from(e: pfss_policy::PolicyError) -> Self {
        use pfss_policy::PolicyError as E;
        match e {
            E::NonFinite { .. } => Self::Numeric(e.to_string()),
            E::Config(_) => Self::Usage(e.to_string()),
            E::Io(io) => Self::Io(io),
            other => Self::Data(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
