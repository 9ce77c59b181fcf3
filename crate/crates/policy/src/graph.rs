//! Sparse job graphs: each job links to its nearest jobs by the Euclidean
//! distance between processing-time columns.

use pfss_core::Instance;

use crate::autodiff::Mat;
use crate::config::{Neighborhood, PolicyConfig};
use crate::PolicyError;

/// Directed neighbor graph over the jobs of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct JobGraph {
    /// Job features, one row per job (length `m`).
    pub features: Mat,
    /// Out-neighbors of each job, nearest first.
    pub neighbors: Vec<Vec<usize>>,
    /// Distances matching `neighbors`.
    pub distances: Vec<Vec<f64>>,
}

impl JobGraph {
    pub fn jobs(&self) -> usize {
        self.neighbors.len()
    }

    pub fn machines(&self) -> usize {
        self.features.ncols()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }
}

/// Number of neighbors per job: `max(1, floor(fraction * n))`, at most `n - 1`.
pub fn neighbor_count(jobs: usize, fraction: f64) -> usize {
    // the small slack keeps products like 0.2 * 20 from flooring to 3
    let k = ((fraction * jobs as f64) + 1e-9).floor() as usize;
    k.max(1).min(jobs.saturating_sub(1))
}

fn job_features(inst: &Instance, scale: bool) -> Mat {
    let (m, n) = (inst.machines(), inst.jobs());
    let mut x = Mat::from_shape_fn((n, m), |(j, i)| inst.time(i, j));
    if scale {
        let max = x.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            x /= max;
        }
    }
    x
}

/// Links every job to its `k` nearest other jobs; distance ties go to the
/// lower job index.
pub fn build_graph(inst: &Instance, fraction: f64) -> Result<JobGraph, PolicyError> {
    build_graph_with(inst, neighbor_count(inst.jobs(), fraction), false)
}

/// Graph construction as configured for a model.
pub fn graph_for(inst: &Instance, config: &PolicyConfig) -> Result<JobGraph, PolicyError> {
    if inst.machines() != config.machines {
        return Err(PolicyError::MachineMismatch { expected: config.machines, found: inst.machines() });
    }
    let k = match config.neighborhood {
        Neighborhood::Sparse => neighbor_count(inst.jobs(), config.neighbor_fraction),
        Neighborhood::Dense => inst.jobs().saturating_sub(1),
    };
    build_graph_with(inst, k, config.scale_features)
}

fn build_graph_with(inst: &Instance, k: usize, scale: bool) -> Result<JobGraph, PolicyError> {
    let n = inst.jobs();
    if n < 2 {
        return Err(PolicyError::Graph(format!("a job graph needs at least 2 jobs, got {n}")));
    }
    let features = job_features(inst, scale);
    let mut neighbors = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for j in 0..n {
        let xj = features.row(j);
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&o| o != j)
            .map(|o| {
                let d2: f64 = xj.iter().zip(features.row(o)).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), o)
            })
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.truncate(k);
        distances.push(cand.iter().map(|c| c.0).collect());
        neighbors.push(cand.into_iter().map(|c| c.1).collect());
    }
    Ok(JobGraph { features, neighbors, distances })
}
