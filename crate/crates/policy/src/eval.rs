use std::time::Instant;

use pfss_core::schedule::{gap_percent, makespan};
use pfss_core::{Instance, Permutation};
use serde::{Deserialize, Serialize};

use crate::model::Policy;
use crate::PolicyError;

/// Instances decoded together per encoder pass during evaluation.
pub const ROLLOUT_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub instance: usize,
    pub makespan: f64,
    pub expert_makespan: f64,
    pub gap_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_makespan: f64,
    /// Per-instance gaps averaged over instances.
    pub mean_gap_pct: f64,
    /// Wall-clock seconds spent producing the permutations.
    pub time_s: f64,
}

/// Scores given permutations against expert makespans.
pub fn evaluate_permutations(
    instances: &[Instance],
    perms: &[Permutation],
    expert_makespans: &[f64],
) -> Result<EvalReport, PolicyError> {
    if instances.len() != perms.len() || instances.len() != expert_makespans.len() {
        return Err(PolicyError::Config(format!(
            "{} instances, {} permutations, {} expert makespans",
            instances.len(),
            perms.len(),
            expert_makespans.len()
        )));
    }
    if instances.is_empty() {
        return Err(PolicyError::EmptyData("nothing to evaluate".into()));
    }
    let mut rows = Vec::with_capacity(instances.len());
    for (i, ((inst, perm), &expert)) in instances.iter().zip(perms).zip(expert_makespans).enumerate() {
        let span = makespan(inst, perm)?;
        rows.push(EvalRow { instance: i, makespan: span, expert_makespan: expert, gap_pct: gap_percent(span, expert)? });
    }
    let count = rows.len() as f64;
    Ok(EvalReport {
        mean_makespan: rows.iter().map(|r| r.makespan).sum::<f64>() / count,
        mean_gap_pct: rows.iter().map(|r| r.gap_pct).sum::<f64>() / count,
        rows,
        time_s: 0.0,
    })
}

/// Greedy rollouts of `policy` on every instance, scored against the expert.
pub fn evaluate(policy: &Policy, instances: &[Instance], expert_makespans: &[f64]) -> Result<EvalReport, PolicyError> {
    if let Some(bad) = instances.iter().find(|i| i.machines() != policy.machines()) {
        return Err(PolicyError::MachineMismatch { expected: policy.machines(), found: bad.machines() });
    }
    let start = Instant::now();
    let mut perms = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(ROLLOUT_CHUNK) {
        perms.extend(policy.rollout_greedy_batch(chunk)?);
    }
    let time_s = start.elapsed().as_secs_f64();
    let mut report = evaluate_permutations(instances, &perms, expert_makespans)?;
    report.time_s = time_s;
    Ok(report)
}
