//! Named solution methods and their parameters.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use pfss_core::exact::brute_force;
use pfss_core::heuristics::{iterated_greedy, iterated_local_search, neh, random_search};
use pfss_core::{HeuristicBudget, IgParams, Instance, Permutation};
use pfss_policy::{load_checkpoint, Policy};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// A solver selectable by name: `neh`, `rs`, `ils`, `ig`, `exact`, or
/// `policy:<checkpoint>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Neh,
    /// Exhaustive enumeration, limited to small job counts.
    Exact,
    RandomSearch,
    IteratedLocalSearch,
    IteratedGreedy,
    Policy(PathBuf),
}

impl Method {
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Self::RandomSearch | Self::IteratedLocalSearch | Self::IteratedGreedy)
    }
}

impl FromStr for Method {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("policy:") {
            return Ok(Self::Policy(PathBuf::from(path)));
        }
        match s.to_ascii_lowercase().as_str() {
            "neh" => Ok(Self::Neh),
            "exact" | "brute_force" => Ok(Self::Exact),
            "rs" | "random_search" => Ok(Self::RandomSearch),
            "ils" | "iterated_local_search" => Ok(Self::IteratedLocalSearch),
            "ig" | "iterated_greedy" => Ok(Self::IteratedGreedy),
            other => Err(HarnessError::Usage(format!("unknown method {other:?} (neh, rs, ils, ig, exact, policy:<checkpoint>)"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Neh => f.write_str("neh"),
            Self::Exact => f.write_str("exact"),
            Self::RandomSearch => f.write_str("rs"),
            Self::IteratedLocalSearch => f.write_str("ils"),
            Self::IteratedGreedy => f.write_str("ig"),
            Self::Policy(p) => write!(f, "policy:{}", p.display()),
        }
    }
}

/// Budgets and knobs of the stochastic methods, per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodParams {
    /// Sampled permutations for random search.
    pub rs_iterations: u64,
    /// Perturb-and-descend rounds for iterated local search.
    pub ils_iterations: u64,
    /// Random swaps per perturbation.
    pub ils_strength: usize,
    /// Destruct-and-rebuild rounds for iterated greedy.
    pub ig_iterations: u64,
    pub ig_destruction: usize,
    /// Acceptance temperature; `None` means a tenth of the mean processing time.
    pub ig_temperature: Option<f64>,
    /// Wall-clock seconds per instance; when set, iteration limits are ignored.
    pub max_time: Option<f64>,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            rs_iterations: 10_000,
            ils_iterations: 100,
            ils_strength: 2,
            ig_iterations: 100,
            ig_destruction: 4,
            ig_temperature: None,
            max_time: None,
        }
    }
}

impl MethodParams {
    fn budget(&self, iterations: u64, seed: u64) -> HeuristicBudget {
        match self.max_time {
            Some(t) => HeuristicBudget::time(t, seed),
            None => HeuristicBudget::iterations(iterations, seed),
        }
    }
}

/// A method ready to run: checkpoints are loaded once.
pub enum Solver {
    Heuristic(Method, MethodParams),
    Learned(Box<Policy>),
}

impl Solver {
    pub fn new(method: &Method, params: &MethodParams) -> Result<Self, HarnessError> {
        match method {
            Method::Policy(path) => {
                let ckpt = load_checkpoint(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
                Ok(Self::Learned(Box::new(ckpt.policy)))
            }
            other => Ok(Self::Heuristic(other.clone(), params.clone())),
        }
    }

    /// Solves one instance; `seed` drives the stochastic methods.
    pub fn solve(&self, inst: &Instance, seed: u64) -> Result<(Permutation, f64), HarnessError> {
        match self {
            Self::Learned(policy) => {
                let perm = policy.rollout_greedy(inst)?;
                let span = pfss_core::makespan(inst, &perm)?;
                Ok((perm, span))
            }
            Self::Heuristic(method, p) => Ok(match method {
                Method::Neh => neh(inst),
                Method::Exact => brute_force(inst)?,
                Method::RandomSearch => random_search(inst, &p.budget(p.rs_iterations, seed))?,
                Method::IteratedLocalSearch => iterated_local_search(inst, &p.budget(p.ils_iterations, seed), p.ils_strength)?,
                Method::IteratedGreedy => {
                    let mut ig = IgParams::defaults_for(inst, p.budget(p.ig_iterations, seed));
                    ig.destruction_size = p.ig_destruction.min(inst.jobs().saturating_sub(1)).max(1);
                    if let Some(t) = p.ig_temperature {
                        ig.temperature = t;
                    }
                    if inst.jobs() < 2 {
                        return Ok(neh(inst));
                    }
                    iterated_greedy(inst, &ig)?
                }
                Method::Policy(_) => unreachable!("policies are loaded as Learned"),
            }),
        }
    }
}
