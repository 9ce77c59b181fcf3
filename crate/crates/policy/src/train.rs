//! Behavior cloning: minimize the cross-entropy of expert decisions with
//! Adam, decaying the learning rate once per epoch.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use pfss_core::mdp::TraceSet;
use pfss_core::Instance;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Mat;
use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::config::{PolicyConfig, TrainConfig};
use crate::eval::evaluate;
use crate::graph::JobGraph;
use crate::model::{Mode, Policy, TraceStep};
use crate::PolicyError;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean gap (%) of greedy rollouts versus the expert on held-out data.
    pub val_gap: Option<f64>,
    pub elapsed_s: f64,
}

/// Held-out instances with the expert's makespans.
#[derive(Debug, Clone)]
pub struct Validation {
    pub instances: Vec<Instance>,
    pub expert_makespans: Vec<f64>,
}

impl Validation {
    pub fn from_expert(instances: Vec<Instance>, expert: impl Fn(&Instance) -> pfss_core::Solution) -> Self {
        let expert_makespans = instances.iter().map(|i| expert(i).1).collect();
        Self { instances, expert_makespans }
    }
}

pub struct TrainOutcome {
    pub policy: Policy,
    pub log: Vec<EpochRecord>,
    pub checkpoints: Vec<PathBuf>,
}

/// Adam with bias correction.
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(shapes: &[Mat]) -> Self {
        let zeros: Vec<Mat> = shapes.iter().map(|t| Mat::zeros(t.raw_dim())).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn update(&mut self, params: &mut [Mat], grads: &[Mat], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

/// Mean greedy-rollout gap on the validation set.
pub fn validation_gap(policy: &Policy, validation: &Validation) -> Result<f64, PolicyError> {
    Ok(evaluate(policy, &validation.instances, &validation.expert_makespans)?.mean_gap_pct)
}

/// Trains a freshly initialized policy (seeded by `train.seed`).
pub fn train(
    config: PolicyConfig,
    train: &TrainConfig,
    traces: &TraceSet,
    validation: Option<&Validation>,
) -> Result<TrainOutcome, PolicyError> {
    let policy = Policy::new(config, train.seed)?;
    train_from(policy, train, traces, validation)
}

/// Continues training `policy` on `traces`.
pub fn train_from(
    mut policy: Policy,
    train: &TrainConfig,
    traces: &TraceSet,
    validation: Option<&Validation>,
) -> Result<TrainOutcome, PolicyError> {
    train.validate()?;
    let m = policy.machines();
    if let Some(bad) = traces.instances.iter().chain(validation.into_iter().flat_map(|v| &v.instances)).find(|i| i.machines() != m) {
        return Err(PolicyError::MachineMismatch { expected: m, found: bad.machines() });
    }
    // single-job instances involve no decision
    let usable: Vec<usize> = (0..traces.traces.len()).filter(|&i| traces.traces[i].len() >= 2).collect();
    if usable.is_empty() {
        return Err(PolicyError::EmptyData("no trace has a decision to imitate".into()));
    }
    let graphs: Vec<Option<JobGraph>> = traces
        .traces
        .iter()
        .map(|tr| {
            let inst = &traces.instances[tr.instance_id];
            (tr.len() >= 2).then(|| policy.graph(inst)).transpose()
        })
        .collect::<Result<_, _>>()?;
    let mut log_file = match &train.log_path {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    if let Some(dir) = &train.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0x05ee_d0fb_a7c4);
    let mut adam = Adam::new(&policy.params.tensors);
    let started = Instant::now();
    let mut log = Vec::with_capacity(train.epochs);
    let mut checkpoints = Vec::new();
    let mut order = usable.clone();
    for epoch in 0..train.epochs {
        let lr = train.learning_rate * train.lr_decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        let flat: Vec<(usize, usize)> = order.iter().flat_map(|&i| (0..traces.traces[i].len()).map(move |t| (i, t))).collect();
        let (mut loss_sum, mut loss_count) = (0.0, 0usize);
        for chunk in flat.chunks(train.batch_size) {
            let mut local: Vec<usize> = Vec::new();
            let steps: Vec<TraceStep<'_>> = chunk
                .iter()
                .map(|&(i, t)| {
                    let g = match local.iter().position(|&x| x == i) {
                        Some(p) => p,
                        None => {
                            local.push(i);
                            local.len() - 1
                        }
                    };
                    let actions = &traces.traces[i].actions;
                    TraceStep { graph: g, prefix: &actions[..t], target: actions[t] }
                })
                .collect();
            let refs: Vec<&JobGraph> = local.iter().map(|&i| graphs[i].as_ref().expect("usable trace")).collect();
            let out = policy.bc_loss(&refs, &steps, Mode::Train)?;
            adam.update(&mut policy.params.tensors, &out.grads, lr);
            out.stats.apply(&mut policy.params.stats);
            if !policy.params.all_finite() {
                return Err(PolicyError::NonFinite { stage: format!("parameters after an update in epoch {epoch}") });
            }
            loss_sum += out.loss * steps.len() as f64;
            loss_count += steps.len();
        }
        let val_gap = validation.map(|v| validation_gap(&policy, v)).transpose()?;
        let record = EpochRecord { epoch, train_loss: loss_sum / loss_count as f64, val_gap, elapsed_s: started.elapsed().as_secs_f64() };
        log::info!(
            "epoch {epoch}: loss {:.5} val_gap {} ({:.1}s)",
            record.train_loss,
            val_gap.map_or("-".into(), |g| format!("{g:.3}%")),
            record.elapsed_s
        );
        if let Some(f) = log_file.as_mut() {
            serde_json::to_writer(&mut *f, &record)?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        let last = epoch + 1 == train.epochs;
        if let (Some(dir), Some(every)) = (&train.checkpoint_dir, train.checkpoint_every) {
            if (epoch + 1) % every == 0 || last {
                let path = dir.join(format!("checkpoint-epoch{:03}.pfss", epoch + 1));
                save_checkpoint(&path, &Checkpoint { policy: policy.clone(), epoch: epoch + 1, metrics: Some(record.clone()) })?;
                checkpoints.push(path);
            }
        }
        log.push(record);
    }
    Ok(TrainOutcome { policy, log, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pfss_core::heuristics::neh;

    #[test]
    fn adam_moves_against_the_gradient_by_lr() {
        let mut p = vec![Mat::from_elem((1, 2), 1.0)];
        let mut adam = Adam::new(&p);
        adam.update(&mut p, &[Mat::from_shape_vec((1, 2), vec![0.5, -2.0]).unwrap()], 0.1);
        // the first bias-corrected step is lr * sign(g)
        assert!((p[0][[0, 0]] - 0.9).abs() < 1e-6);
        assert!((p[0][[0, 1]] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn rejects_machine_mismatch_and_empty_data() {
        let insts = vec![Instance::new(3, 4, vec![1.0; 12]).unwrap()];
        let set = TraceSet::record(insts, "neh", neh).unwrap();
        let cfg = PolicyConfig { hidden_dim: 8, heads: 2, layers: 1, machines: 2, ..Default::default() };
        let tc = TrainConfig { epochs: 1, ..Default::default() };
        assert!(matches!(train(cfg.clone(), &tc, &set, None), Err(PolicyError::MachineMismatch { expected: 2, found: 3 })));
        let single = TraceSet::record(vec![Instance::new(2, 1, vec![1.0, 2.0]).unwrap()], "neh", neh).unwrap();
        assert!(matches!(train(cfg, &tc, &single, None), Err(PolicyError::EmptyData(_))));
    }
}
