use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::PolicyError;

/// How gated neighbor messages are combined at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    Sum,
    Max,
}

/// Normalization applied inside each encoder update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Per-channel statistics over all nodes (or edges) of the minibatch;
    /// running statistics are used at inference.
    Batch,
    /// Per-row statistics over the channels.
    Layer,
    /// Identity.
    None,
}

/// Which jobs a node aggregates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    /// The `k = max(1, floor(rho * n))` nearest other jobs.
    Sparse,
    /// Every other job.
    Dense,
}

/// Architecture of the policy network. All weight shapes depend only on
/// `hidden_dim` and `machines`, so one model serves any job count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub hidden_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub logit_clip: f64,
    pub neighbor_fraction: f64,
    pub aggregation: Aggregation,
    pub norm: Norm,
    pub neighborhood: Neighborhood,
    pub machines: usize,
    /// Divide each instance's features by its largest processing time.
    pub scale_features: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            layers: 3,
            heads: 8,
            logit_clip: 10.0,
            neighbor_fraction: 0.2,
            aggregation: Aggregation::Mean,
            norm: Norm::Batch,
            neighborhood: Neighborhood::Sparse,
            machines: 5,
            scale_features: false,
        }
    }
}

impl PolicyConfig {
    pub fn for_machines(machines: usize) -> Self {
        Self { machines, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |msg: String| Err(PolicyError::Config(msg));
        if self.hidden_dim == 0 || self.heads == 0 || !self.hidden_dim.is_multiple_of(self.heads) {
            return bad(format!("hidden_dim {} must be a positive multiple of heads {}", self.hidden_dim, self.heads));
        }
        if self.layers == 0 {
            return bad("at least one encoder layer is required".into());
        }
        if !(self.neighbor_fraction > 0.0 && self.neighbor_fraction <= 1.0) {
            return bad(format!("neighbor_fraction {} must lie in (0, 1]", self.neighbor_fraction));
        }
        if !(self.logit_clip > 0.0 && self.logit_clip.is_finite()) {
            return bad(format!("logit_clip {} must be positive", self.logit_clip));
        }
        if self.machines == 0 {
            return bad("machines must be positive".into());
        }
        Ok(())
    }
}

/// Optimization settings for behavior cloning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Expert decisions per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Trace file to train on.
    pub traces: Option<PathBuf>,
    /// Held-out instances for the per-epoch validation gap.
    pub validation: Option<PathBuf>,
    /// Write a checkpoint every this many epochs (and after the last one).
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Newline-delimited JSON training log.
    pub log_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 1e-4,
            lr_decay: 0.96,
            epochs: 20,
            seed: 0,
            traces: None,
            validation: None,
            checkpoint_every: None,
            checkpoint_dir: None,
            log_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |msg: String| Err(PolicyError::Config(msg));
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay {} must lie in (0, 1]", self.lr_decay));
        }
        if self.checkpoint_every == Some(0) {
            return bad("checkpoint_every must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PolicyConfig::default().validate().unwrap();
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let c = PolicyConfig { hidden_dim: 12, heads: 8, ..Default::default() };
        assert!(c.validate().is_err());
        assert!(PolicyConfig { layers: 0, ..Default::default() }.validate().is_err());
        assert!(PolicyConfig { neighbor_fraction: 0.0, ..Default::default() }.validate().is_err());
        assert!(PolicyConfig { neighbor_fraction: 1.5, ..Default::default() }.validate().is_err());
        assert!(PolicyConfig { logit_clip: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lr_decay: 1.2, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn serde_names_are_lowercase() {
        let c = PolicyConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"aggregation\":\"mean\"") && s.contains("\"norm\":\"batch\""));
        let back: PolicyConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
