//! Learned constructive scheduling policy for permutation flow shops.
//!
//! Jobs become nodes of a sparse nearest-neighbor graph; a gated graph
//! encoder embeds them, and an attention decoder picks the next job from the
//! unscheduled ones. The network is trained by behavior cloning on expert
//! (NEH) decisions with a small reverse-mode differentiation engine, and
//! applies unchanged to any job count with the same machine count.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod model;
pub mod params;
pub mod train;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{Aggregation, Neighborhood, Norm, PolicyConfig, TrainConfig};
pub use eval::{evaluate, evaluate_permutations, EvalReport, EvalRow};
pub use gradcheck::{gradient_check, TensorCheck};
pub use graph::{build_graph, JobGraph};
pub use model::{Activations, Mode, Policy, StepOutput, TraceStep};
pub use params::{parameter_count, PolicyParams};
pub use train::{train, EpochRecord, TrainOutcome, Validation};

#[derive(Error, Debug)]
pub enum PolicyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot build job graph: {0}")]
    Graph(String),
    #[error("machine count mismatch: model expects {expected}, data has {found}")]
    MachineMismatch { expected: usize, found: usize },
    #[error("non-finite values in {stage}")]
    NonFinite { stage: String },
    #[error("corrupt trace: step {step} targets job {job}, which is not selectable")]
    MaskedTarget { step: usize, job: usize },
    #[error("every job is already scheduled")]
    NoSelectableJob,
    #[error("no data: {0}")]
    EmptyData(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] pfss_core::PfssError),
    #[error(transparent)]
    Data(#[from] pfss_core::io::DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PolicyError {
    /// True for failures caused by numerical blow-up rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Self::NonFinite { .. })
    }
}
