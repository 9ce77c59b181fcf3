//! Processing-time matrices and job orderings.

use serde::{Deserialize, Serialize};

use crate::error::{PfssError, Result};

/// Optional provenance attached to an instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// An `m x n` flow-shop instance: `times[i * n + j]` is the processing time
/// of job `j` on machine `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    machines: usize,
    jobs: usize,
    times: Vec<f64>,
    pub meta: Metadata,
}

impl Instance {
    /// Builds an instance from a row-major `machines x jobs` buffer.
    pub fn new(machines: usize, jobs: usize, times: Vec<f64>) -> Result<Self> {
        if machines == 0 || jobs == 0 {
            return Err(PfssError::InvalidInstance(format!(
                "need at least one machine and one job, got {machines}x{jobs}"
            )));
        }
        if times.len() != machines * jobs {
            return Err(PfssError::InvalidInstance(format!(
                "expected {} entries for {machines}x{jobs}, got {}",
                machines * jobs,
                times.len()
            )));
        }
        if let Some(pos) = times.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(PfssError::InvalidInstance(format!(
                "entry ({}, {}) = {} is not a finite non-negative time",
                pos / jobs,
                pos % jobs,
                times[pos]
            )));
        }
        Ok(Self { machines, jobs, times, meta: Metadata::default() })
    }

    /// Builds an instance from machine rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let machines = rows.len();
        let jobs = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != jobs) {
            return Err(PfssError::InvalidInstance(format!(
                "row {bad} has {} entries, expected {jobs}",
                rows[bad].len()
            )));
        }
        Self::new(machines, jobs, rows.concat())
    }

    pub fn with_meta(mut self, meta: Metadata) -> Self {
        self.meta = meta;
        self
    }

    #[inline]
    pub fn machines(&self) -> usize {
        self.machines
    }

    #[inline]
    pub fn jobs(&self) -> usize {
        self.jobs
    }

    #[inline]
    pub fn time(&self, machine: usize, job: usize) -> f64 {
        self.times[machine * self.jobs + job]
    }

    /// Row-major view of the whole matrix.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn row(&self, machine: usize) -> &[f64] {
        &self.times[machine * self.jobs..(machine + 1) * self.jobs]
    }

    /// The feature column of a job: its processing time on every machine.
    pub fn job_column(&self, job: usize) -> Vec<f64> {
        (0..self.machines).map(|i| self.time(i, job)).collect()
    }

    /// Total processing time of a job over all machines.
    pub fn job_total(&self, job: usize) -> f64 {
        (0..self.machines).map(|i| self.time(i, job)).sum()
    }

    /// Relabels jobs: job `j` of the result is job `order[j]` of `self`.
    pub fn permute_jobs(&self, order: &Permutation) -> Result<Self> {
        order.validate_for(self.jobs)?;
        let mut times = Vec::with_capacity(self.times.len());
        for i in 0..self.machines {
            times.extend(order.iter().map(|j| self.time(i, j)));
        }
        Ok(Self { machines: self.machines, jobs: self.jobs, times, meta: self.meta.clone() })
    }
}

/// An ordering of job indices, `0..n` each exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    /// Validates and wraps an ordering.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &j in &order {
            if j >= n {
                return Err(PfssError::InvalidPermutation(format!(
                    "index {j} out of range for length {n}"
                )));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(PfssError::InvalidPermutation(format!("duplicate index {j}")));
            }
        }
        Ok(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Checks that this ordering is a bijection on `0..jobs`.
    pub fn validate_for(&self, jobs: usize) -> Result<()> {
        if self.0.len() != jobs {
            return Err(PfssError::InvalidPermutation(format!(
                "length {} does not match {jobs} jobs",
                self.0.len()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = PfssError;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

/// Checks a raw ordering against an instance.
pub fn validate_permutation(inst: &Instance, order: &[usize]) -> Result<Permutation> {
    let p = Permutation::new(order.to_vec())?;
    p.validate_for(inst.jobs())?;
    Ok(p)
}
