//! Sequential job selection as a decision process, and expert traces for
//! behavior cloning.
//!
//! A state holds the jobs scheduled so far (in order) and the remaining
//! unscheduled set. Each action appends one unscheduled job. The process
//! carries no reward; makespans are computed afterwards from the final
//! permutation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PfssError, Result};
use crate::heuristics::Solution;
use crate::instance::{Instance, Permutation};
use crate::io::{split_container, DataError, DataResult};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScheduleState {
    scheduled: Vec<usize>,
    unscheduled: Vec<bool>,
}

impl ScheduleState {
    pub fn new(jobs: usize) -> Self {
        Self { scheduled: Vec::with_capacity(jobs), unscheduled: vec![true; jobs] }
    }

    /// Replays `actions` from the empty schedule.
    pub fn from_actions(jobs: usize, actions: &[usize]) -> Result<Self> {
        let mut s = Self::new(jobs);
        for &a in actions {
            s.apply(a)?;
        }
        Ok(s)
    }

    pub fn jobs(&self) -> usize {
        self.unscheduled.len()
    }

    /// Number of jobs scheduled so far.
    pub fn step_index(&self) -> usize {
        self.scheduled.len()
    }

    pub fn scheduled(&self) -> &[usize] {
        &self.scheduled
    }

    pub fn unscheduled(&self) -> impl Iterator<Item = usize> + '_ {
        self.unscheduled.iter().enumerate().filter(|(_, &u)| u).map(|(j, _)| j)
    }

    pub fn is_unscheduled(&self, job: usize) -> bool {
        self.unscheduled.get(job).copied().unwrap_or(false)
    }

    pub fn is_terminal(&self) -> bool {
        self.scheduled.len() == self.unscheduled.len()
    }

    /// `true` exactly on unscheduled jobs.
    pub fn mask(&self) -> &[bool] {
        &self.unscheduled
    }

    /// Returns the successor state after scheduling `action`.
    pub fn step(&self, action: usize) -> Result<Self> {
        let mut next = self.clone();
        next.apply(action)?;
        Ok(next)
    }

    /// In-place variant of [`ScheduleState::step`].
    pub fn apply(&mut self, action: usize) -> Result<()> {
        match self.unscheduled.get_mut(action) {
            None => Err(PfssError::JobOutOfRange { job: action, jobs: self.jobs() }),
            Some(false) => Err(PfssError::MaskedAction(action)),
            Some(slot) => {
                *slot = false;
                self.scheduled.push(action);
                Ok(())
            }
        }
    }

    /// The finished permutation of a terminal state.
    pub fn permutation(&self) -> Option<Permutation> {
        self.is_terminal().then(|| Permutation::new(self.scheduled.clone()).expect("states schedule each job once"))
    }
}

pub fn reset(inst: &Instance) -> ScheduleState {
    ScheduleState::new(inst.jobs())
}

pub fn step(state: &ScheduleState, action: usize) -> Result<ScheduleState> {
    state.step(action)
}

pub fn mask(state: &ScheduleState) -> Vec<bool> {
    state.mask().to_vec()
}

/// The expert's action sequence on one instance. The state before action `t`
/// is the prefix `actions[..t]`, so states are materialized on demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertTrace {
    pub instance_id: usize,
    pub actions: Vec<usize>,
}

impl ExpertTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn state_at(&self, t: usize) -> ScheduleState {
        ScheduleState::from_actions(self.actions.len(), &self.actions[..t]).expect("trace actions form a permutation")
    }

    /// `(state, expert action)` pairs for `t = 0..n`.
    pub fn pairs(&self) -> impl Iterator<Item = (ScheduleState, usize)> + '_ {
        let mut state = ScheduleState::new(self.actions.len());
        self.actions.iter().map(move |&a| {
            let before = state.clone();
            state.apply(a).expect("trace actions form a permutation");
            (before, a)
        })
    }
}

/// Runs `expert` on every instance and records its permutation as actions.
pub fn record_expert_traces<F>(instances: &[Instance], expert: F) -> Result<Vec<ExpertTrace>>
where
    F: Fn(&Instance) -> Solution,
{
    instances
        .iter()
        .enumerate()
        .map(|(id, inst)| {
            let (perm, _) = expert(inst);
            if perm.validate_for(inst.jobs()).is_err() || Permutation::new(perm.as_slice().to_vec()).is_err() {
                return Err(PfssError::InvalidExpert(format!("instance {id}: {:?}", perm.as_slice())));
            }
            Ok(ExpertTrace { instance_id: id, actions: perm.into_vec() })
        })
        .collect()
}

pub const TRACE_MAGIC: &[u8; 8] = b"PFSSTRCE";
pub const TRACE_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceHeader {
    version: u8,
    expert: String,
    count: usize,
    shapes: Vec<(usize, usize)>,
    ids: Vec<usize>,
}

/// Instances paired with their expert traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub expert: String,
    pub instances: Vec<Instance>,
    pub traces: Vec<ExpertTrace>,
}

impl TraceSet {
    pub fn record(instances: Vec<Instance>, expert_name: &str, expert: impl Fn(&Instance) -> Solution) -> Result<Self> {
        let traces = record_expert_traces(&instances, expert)?;
        Ok(Self { expert: expert_name.into(), instances, traces })
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Container: magic `PFSSTRCE`, version byte, u32 header length, JSON
    /// header, then per trace the f64 matrix followed by u32 actions, all
    /// little-endian.
    pub fn encode(&self) -> Vec<u8> {
        let header = TraceHeader {
            version: TRACE_VERSION,
            expert: self.expert.clone(),
            count: self.traces.len(),
            shapes: self.instances.iter().map(|i| (i.machines(), i.jobs())).collect(),
            ids: self.traces.iter().map(|t| t.instance_id).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut buf = Vec::new();
        buf.extend_from_slice(TRACE_MAGIC);
        buf.push(TRACE_VERSION);
        buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&json);
        for (inst, tr) in self.instances.iter().zip(&self.traces) {
            for t in inst.times() {
                buf.extend_from_slice(&t.to_le_bytes());
            }
            for &a in &tr.actions {
                buf.extend_from_slice(&(a as u32).to_le_bytes());
            }
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> DataResult<Self> {
        let (json, body) = split_container(bytes, TRACE_MAGIC, TRACE_VERSION)?;
        let h: TraceHeader = serde_json::from_slice(json)?;
        if h.shapes.len() != h.count || h.ids.len() != h.count {
            return Err(DataError::Corrupt("trace header counts disagree".into()));
        }
        let expected: usize = h.shapes.iter().map(|&(m, n)| m * n * 8 + n * 4).sum();
        if body.len() != expected {
            return Err(DataError::Corrupt(format!("body has {} bytes, expected {expected}", body.len())));
        }
        let mut at = 0;
        let mut instances = Vec::with_capacity(h.count);
        let mut traces = Vec::with_capacity(h.count);
        for (&(m, n), &id) in h.shapes.iter().zip(&h.ids) {
            let times = body[at..at + m * n * 8].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            at += m * n * 8;
            let actions: Vec<usize> =
                body[at..at + n * 4].chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize).collect();
            at += n * 4;
            Permutation::new(actions.clone()).map_err(DataError::Instance)?;
            instances.push(Instance::new(m, n, times)?);
            traces.push(ExpertTrace { instance_id: id, actions });
        }
        Ok(Self { expert: h.expert, instances, traces })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> DataResult<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> DataResult<Self> {
        Self::decode(&fs::read(path)?)
    }
}
