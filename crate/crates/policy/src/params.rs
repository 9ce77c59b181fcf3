//! Parameter tensors, their layout, and initialization.
//!
//! Every weight is stored `input × output`, so a layer computes `x · W` on
//! row-vector activations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Mat;
use crate::config::{Norm, PolicyConfig};

/// Affine parameters of one normalization site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormIdx {
    pub gamma: usize,
    pub beta: usize,
}

/// Tensor indices of one encoder layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerIdx {
    /// Self term of the node update.
    pub b: usize,
    /// Neighbor term of the node update.
    pub c: usize,
    /// Edge self term of the edge update.
    pub d: usize,
    /// Source-node term of the edge update.
    pub e: usize,
    /// Target-node term of the edge update.
    pub f: usize,
    pub node_norm: Option<NormIdx>,
    pub edge_norm: Option<NormIdx>,
}

/// Where each named tensor lives in [`PolicyParams::tensors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub node_embed: usize,
    pub edge_embed: usize,
    pub layers: Vec<LayerIdx>,
    pub att_query: usize,
    pub att_key: usize,
    pub att_value: usize,
    pub att_out: usize,
    pub logit_query: usize,
    pub logit_key: usize,
    pub first_placeholder: usize,
    pub last_placeholder: usize,
}

/// Running per-channel statistics of one batch-normalization site.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], var: vec![1.0; dim] }
    }

    /// Exponential update with `momentum`; `batch_var` is the biased batch
    /// variance over `count` samples and is stored unbiased.
    pub fn update(&mut self, batch_mean: &[f64], batch_var: &[f64], count: usize, momentum: f64) {
        let unbias = if count > 1 { count as f64 / (count - 1) as f64 } else { 1.0 };
        for c in 0..self.mean.len() {
            self.mean[c] = (1.0 - momentum) * self.mean[c] + momentum * batch_mean[c];
            self.var[c] = (1.0 - momentum) * self.var[c] + momentum * batch_var[c] * unbias;
        }
    }
}

/// Running statistics for the node and edge normalizations of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    pub node: RunningStats,
    pub edge: RunningStats,
}

pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub tensors: Vec<Mat>,
    pub names: Vec<String>,
    pub layout: ParamLayout,
    pub stats: Vec<LayerStats>,
}

struct Builder {
    tensors: Vec<Mat>,
    names: Vec<String>,
}

impl Builder {
    fn add(&mut self, name: String, value: Mat) -> usize {
        self.tensors.push(value);
        self.names.push(name);
        self.tensors.len() - 1
    }
}

impl PolicyParams {
    /// Weights uniform in `[-1/sqrt(d), 1/sqrt(d)]`; normalization scale 1 and
    /// shift 0; running statistics mean 0, variance 1.
    pub fn init(config: &PolicyConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.hidden_dim;
        let bound = 1.0 / (d as f64).sqrt();
        let mut uniform = |rows: usize, cols: usize| Mat::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound));
        let mut b = Builder { tensors: Vec::new(), names: Vec::new() };
        let node_embed = b.add("node_embed".into(), uniform(config.machines, d));
        let edge_embed = b.add("edge_embed".into(), uniform(1, d));
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let mut w = |tag: &str| b.add(format!("layer{l}.{tag}"), uniform(d, d));
            let (bi, ci, di, ei, fi) = (w("b"), w("c"), w("d"), w("e"), w("f"));
            let mut norm = |site: &str| {
                (config.norm != Norm::None).then(|| NormIdx {
                    gamma: b.add(format!("layer{l}.{site}_norm.gamma"), Mat::ones((1, d))),
                    beta: b.add(format!("layer{l}.{site}_norm.beta"), Mat::zeros((1, d))),
                })
            };
            let node_norm = norm("node");
            let edge_norm = norm("edge");
            layers.push(LayerIdx { b: bi, c: ci, d: di, e: ei, f: fi, node_norm, edge_norm });
        }
        let att_query = b.add("attention.query".into(), uniform(3 * d, d));
        let att_key = b.add("attention.key".into(), uniform(d, d));
        let att_value = b.add("attention.value".into(), uniform(d, d));
        let att_out = b.add("attention.out".into(), uniform(d, d));
        let logit_query = b.add("logit.query".into(), uniform(d, d));
        let logit_key = b.add("logit.key".into(), uniform(d, d));
        let first_placeholder = b.add("placeholder.first".into(), uniform(1, d));
        let last_placeholder = b.add("placeholder.last".into(), uniform(1, d));
        let layout = ParamLayout {
            node_embed,
            edge_embed,
            layers,
            att_query,
            att_key,
            att_value,
            att_out,
            logit_query,
            logit_key,
            first_placeholder,
            last_placeholder,
        };
        let stats = (0..config.layers).map(|_| LayerStats { node: RunningStats::new(d), edge: RunningStats::new(d) }).collect();
        Self { tensors: b.tensors, names: b.names, layout, stats }
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Mat::len).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Closed-form trainable parameter count.
pub fn parameter_count(config: &PolicyConfig) -> usize {
    let (d, m, l) = (config.hidden_dim, config.machines, config.layers);
    let norm = if config.norm == Norm::None { 0 } else { 4 * d };
    m * d + d + l * (5 * d * d + norm) + 3 * d * d + 3 * d * d + 2 * d * d + 2 * d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_the_config() {
        let cfg = PolicyConfig { hidden_dim: 16, heads: 4, layers: 2, machines: 3, ..Default::default() };
        let p = PolicyParams::init(&cfg, 1);
        let l = &p.layout;
        assert_eq!(p.tensors[l.node_embed].dim(), (3, 16));
        assert_eq!(p.tensors[l.edge_embed].dim(), (1, 16));
        assert_eq!(p.tensors[l.att_query].dim(), (48, 16));
        assert_eq!(p.tensors[l.first_placeholder].dim(), (1, 16));
        assert_eq!(p.layout.layers.len(), 2);
        assert_eq!(p.count(), parameter_count(&cfg));
        let bound = 1.0 / 4.0;
        assert!(p.tensors[l.att_key].iter().all(|v| v.abs() <= bound));
        assert_eq!(p.get("layer1.edge_norm.gamma").unwrap(), &Mat::ones((1, 16)));
        let names: std::collections::HashSet<_> = p.names.iter().collect();
        assert_eq!(names.len(), p.names.len());
    }

    #[test]
    fn default_count() {
        let cfg = PolicyConfig::default();
        // 640 + 128 + 3 * (5 * 16384 + 512) + 6 * 16384 + 2 * 16384 + 256
        assert_eq!(parameter_count(&cfg), 379_392);
        assert_eq!(PolicyParams::init(&cfg, 0).count(), 379_392);
        let plain = PolicyConfig { norm: Norm::None, ..cfg };
        assert_eq!(PolicyParams::init(&plain, 0).count(), 379_392 - 3 * 512);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = PolicyConfig { hidden_dim: 8, heads: 2, layers: 1, machines: 2, ..Default::default() };
        assert_eq!(PolicyParams::init(&cfg, 5), PolicyParams::init(&cfg, 5));
        assert_ne!(PolicyParams::init(&cfg, 5), PolicyParams::init(&cfg, 6));
    }

    #[test]
    fn running_stats_update() {
        let mut s = RunningStats::new(1);
        s.update(&[2.0], &[3.0], 4, 0.1);
        assert!((s.mean[0] - 0.2).abs() < 1e-15);
        assert!((s.var[0] - (0.9 + 0.1 * 4.0)).abs() < 1e-15);
    }
}
