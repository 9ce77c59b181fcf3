//! The mixed-integer model of the permutation flow shop, its LP-format
//! export, and a feasibility checker for candidate solutions.
//!
//! Jobs are numbered `1..=n` in the model with a dummy job `0`; machines are
//! numbered `1..=m`. Variables:
//!
//! * `y_i_j` — start time of job `j` on machine `i`;
//! * `z_j_k` — `1` iff job `j` immediately precedes job `k` (`z_0_k` marks the
//!   first job, `z_j_0` the last);
//! * `Cmax` — the makespan.
//!
//! Constraint families: one predecessor and one successor per node,
//! big-M precedence, makespan bound, machine chain, binary precedence
//! variables and non-negativity.

use std::fmt::Write as _;

use crate::error::{PfssError, Result};
use crate::instance::{Instance, Permutation};
use crate::schedule::completion_times;

/// Default absolute feasibility tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;

/// A model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MipVar {
    /// Start time, 0-based `(machine, job)`.
    Start { machine: usize, job: usize },
    /// Precedence over the extended job set, model numbering (0 = dummy).
    Precedes { from: usize, to: usize },
    Cmax,
}

impl MipVar {
    pub fn name(&self) -> String {
        match *self {
            MipVar::Start { machine, job } => format!("y_{}_{}", machine + 1, job + 1),
            MipVar::Precedes { from, to } => format!("z_{from}_{to}"),
            MipVar::Cmax => "Cmax".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

/// Which family of the formulation a constraint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// Every node of the extended set has one predecessor.
    OnePredecessor,
    /// Every node of the extended set has one successor.
    OneSuccessor,
    /// Big-M precedence between consecutive jobs on a machine.
    Precedence,
    /// Makespan covers the last machine.
    MakespanBound,
    /// A job starts on machine `i + 1` after finishing on machine `i`.
    MachineChain,
    /// Precedence variables are binary.
    Binary,
    /// Start times and the makespan are non-negative.
    NonNegative,
}

/// A linear row `sum(coef * var) <sense> rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub kind: ConstraintKind,
    pub terms: Vec<(f64, MipVar)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// The complete model for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MipModel {
    pub machines: usize,
    pub jobs: usize,
    /// `big_m[i]` is `A_{i+1}`: an upper bound on when machine `i` finishes.
    pub big_m: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl MipModel {
    pub fn build(inst: &Instance) -> Self {
        let (m, n) = (inst.machines(), inst.jobs());
        let mut big_m = Vec::with_capacity(m);
        let mut acc = 0.0;
        for i in 0..m {
            acc += inst.row(i).iter().sum::<f64>();
            big_m.push(acc);
        }

        let mut constraints = Vec::new();
        for k in 0..=n {
            let terms = (0..=n).filter(|&j| j != k).map(|j| (1.0, MipVar::Precedes { from: j, to: k })).collect();
            constraints.push(Constraint {
                name: format!("pred_{k}"),
                kind: ConstraintKind::OnePredecessor,
                terms,
                sense: Sense::Eq,
                rhs: 1.0,
            });
        }
        for j in 0..=n {
            let terms = (0..=n).filter(|&k| k != j).map(|k| (1.0, MipVar::Precedes { from: j, to: k })).collect();
            constraints.push(Constraint {
                name: format!("succ_{j}"),
                kind: ConstraintKind::OneSuccessor,
                terms,
                sense: Sense::Eq,
                rhs: 1.0,
            });
        }
        // y_ij + x_ij <= y_ik + A_i (1 - z_jk)  <=>  y_ij - y_ik + A_i z_jk <= A_i - x_ij
        for i in 0..m {
            for j in 0..n {
                for k in (0..n).filter(|&k| k != j) {
                    constraints.push(Constraint {
                        name: format!("prec_{}_{}_{}", i + 1, j + 1, k + 1),
                        kind: ConstraintKind::Precedence,
                        terms: vec![
                            (1.0, MipVar::Start { machine: i, job: j }),
                            (-1.0, MipVar::Start { machine: i, job: k }),
                            (big_m[i], MipVar::Precedes { from: j + 1, to: k + 1 }),
                        ],
                        sense: Sense::Le,
                        rhs: big_m[i] - inst.time(i, j),
                    });
                }
            }
        }
        for j in 0..n {
            constraints.push(Constraint {
                name: format!("span_{}", j + 1),
                kind: ConstraintKind::MakespanBound,
                terms: vec![(1.0, MipVar::Start { machine: m - 1, job: j }), (-1.0, MipVar::Cmax)],
                sense: Sense::Le,
                rhs: -inst.time(m - 1, j),
            });
        }
        for i in 0..m.saturating_sub(1) {
            for j in 0..n {
                constraints.push(Constraint {
                    name: format!("chain_{}_{}", i + 1, j + 1),
                    kind: ConstraintKind::MachineChain,
                    terms: vec![
                        (1.0, MipVar::Start { machine: i, job: j }),
                        (-1.0, MipVar::Start { machine: i + 1, job: j }),
                    ],
                    sense: Sense::Le,
                    rhs: -inst.time(i, j),
                });
            }
        }
        Self { machines: m, jobs: n, big_m, constraints }
    }

    pub fn binaries(&self) -> Vec<MipVar> {
        let n = self.jobs;
        let mut out = Vec::with_capacity(n * (n + 1));
        for j in 0..=n {
            for k in (0..=n).filter(|&k| k != j) {
                out.push(MipVar::Precedes { from: j, to: k });
            }
        }
        out
    }

    pub fn starts(&self) -> Vec<MipVar> {
        let mut out = Vec::with_capacity(self.machines * self.jobs);
        for i in 0..self.machines {
            for j in 0..self.jobs {
                out.push(MipVar::Start { machine: i, job: j });
            }
        }
        out
    }

    pub fn count(&self, kind: ConstraintKind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }

    /// CPLEX LP text; LF line endings.
    pub fn to_lp(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\\ {title}");
        let _ = writeln!(s, "\\ permutation flow shop: {} machines, {} jobs", self.machines, self.jobs);
        let _ = writeln!(s, "Minimize");
        let _ = writeln!(s, " obj: Cmax");
        let _ = writeln!(s, "Subject To");
        for c in &self.constraints {
            let mut row = format!(" {}:", c.name);
            for (idx, (coef, var)) in c.terms.iter().enumerate() {
                let sign = if *coef < 0.0 { "-" } else if idx == 0 { "" } else { "+" };
                let mag = coef.abs();
                if mag == 1.0 {
                    let _ = write!(row, " {sign} {}", var.name());
                } else {
                    let _ = write!(row, " {sign} {mag} {}", var.name());
                }
            }
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, "{} {op} {}", row.replace(":  ", ": "), c.rhs);
        }
        let _ = writeln!(s, "Bounds");
        for v in self.starts() {
            let _ = writeln!(s, " {} >= 0", v.name());
        }
        let _ = writeln!(s, " Cmax >= 0");
        let _ = writeln!(s, "Binaries");
        for v in self.binaries() {
            let _ = writeln!(s, " {}", v.name());
        }
        let _ = writeln!(s, "End");
        s
    }
}

/// Builds the model and renders it in LP format.
pub fn emit_mip(inst: &Instance) -> String {
    let title = inst.meta.name.clone().unwrap_or_else(|| "pfss".into());
    MipModel::build(inst).to_lp(&title)
}

/// A candidate assignment of the model's variables.
///
/// `start` is `machines x jobs` (0-based); `precedes` is `(n+1) x (n+1)` in
/// model numbering, row = predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub start: Vec<Vec<f64>>,
    pub precedes: Vec<Vec<f64>>,
    pub cmax: f64,
}

impl MipSolution {
    fn value(&self, var: MipVar) -> f64 {
        match var {
            MipVar::Start { machine, job } => self.start[machine][job],
            MipVar::Precedes { from, to } => self.precedes[from][to],
            MipVar::Cmax => self.cmax,
        }
    }
}

/// The semi-active schedule of `perm` written in model variables.
pub fn embed_permutation(inst: &Instance, perm: &Permutation) -> Result<MipSolution> {
    let c = completion_times(inst, perm)?;
    let (m, n) = (inst.machines(), inst.jobs());
    let mut start = vec![vec![0.0; n]; m];
    for (t, job) in perm.iter().enumerate() {
        for (i, row) in start.iter_mut().enumerate() {
            row[job] = c.get(i, t) - inst.time(i, job);
        }
    }
    let mut precedes = vec![vec![0.0; n + 1]; n + 1];
    let mut prev = 0;
    for job in perm.iter() {
        precedes[prev][job + 1] = 1.0;
        prev = job + 1;
    }
    precedes[prev][0] = 1.0;
    Ok(MipSolution { start, precedes, cmax: c.makespan() })
}

/// A constraint that a candidate solution breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub name: String,
    pub excess: f64,
}

/// Every constraint of the model violated by more than `tol`.
pub fn mip_violations(inst: &Instance, sol: &MipSolution, tol: f64) -> Result<Vec<Violation>> {
    let (m, n) = (inst.machines(), inst.jobs());
    if sol.start.len() != m || sol.start.iter().any(|r| r.len() != n) {
        return Err(PfssError::ShapeMismatch(format!("start times must be {m}x{n}")));
    }
    if sol.precedes.len() != n + 1 || sol.precedes.iter().any(|r| r.len() != n + 1) {
        return Err(PfssError::ShapeMismatch(format!("precedence matrix must be {0}x{0}", n + 1)));
    }
    let model = MipModel::build(inst);
    let mut out = Vec::new();
    for c in &model.constraints {
        let lhs: f64 = c.terms.iter().map(|&(coef, v)| coef * sol.value(v)).sum();
        let excess = match c.sense {
            Sense::Le => lhs - c.rhs,
            Sense::Eq => (lhs - c.rhs).abs(),
        };
        if excess > tol || !excess.is_finite() {
            out.push(Violation { kind: c.kind, name: c.name.clone(), excess });
        }
    }
    for j in 0..=n {
        for k in 0..=n {
            let z = sol.precedes[j][k];
            let off = if j == k { z.abs() } else { z.abs().min((z - 1.0).abs()) };
            if off > tol || !z.is_finite() {
                out.push(Violation { kind: ConstraintKind::Binary, name: format!("z_{j}_{k}"), excess: off });
            }
        }
    }
    for v in model.starts().into_iter().chain([MipVar::Cmax]) {
        let x = sol.value(v);
        if x < -tol || !x.is_finite() {
            out.push(Violation { kind: ConstraintKind::NonNegative, name: v.name(), excess: -x });
        }
    }
    Ok(out)
}

/// True iff every constraint holds within `tol`.
pub fn check_mip_solution(inst: &Instance, sol: &MipSolution, tol: f64) -> Result<bool> {
    Ok(mip_violations(inst, sol, tol)?.is_empty())
}

/// Reads the permutation encoded by a precedence matrix by following
/// successors from the dummy job.
pub fn permutation_from_precedence(precedes: &[Vec<f64>]) -> Result<Permutation> {
    let n = precedes.len().saturating_sub(1);
    let mut order = Vec::with_capacity(n);
    let mut at = 0;
    for _ in 0..n {
        let next = (1..=n)
            .find(|&k| precedes[at][k] > 0.5)
            .ok_or_else(|| PfssError::InvalidPermutation(format!("node {at} has no successor")))?;
        order.push(next - 1);
        at = next;
    }
    Permutation::new(order)
}
