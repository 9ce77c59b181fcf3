//! Constructive and improvement heuristics: NEH (the expert), random search,
//! insertion local search, iterated local search and iterated greedy.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PfssError, Result};
use crate::instance::{Instance, Permutation};
use crate::schedule::{makespan_unchecked, strictly_less, InsertionEvaluator};

/// Stopping rule and seed for the stochastic solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicBudget {
    pub max_iterations: Option<u64>,
    /// Wall-clock limit in seconds.
    pub max_time: Option<f64>,
    pub rng_seed: u64,
}

impl HeuristicBudget {
    pub fn iterations(max_iterations: u64, rng_seed: u64) -> Self {
        Self { max_iterations: Some(max_iterations), max_time: None, rng_seed }
    }

    pub fn time(seconds: f64, rng_seed: u64) -> Self {
        Self { max_iterations: None, max_time: Some(seconds), rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations.is_none() && self.max_time.is_none() {
            return Err(PfssError::InvalidParameter(
                "budget needs max_iterations or max_time".into(),
            ));
        }
        if let Some(t) = self.max_time {
            if !(t.is_finite() && t >= 0.0) {
                return Err(PfssError::InvalidParameter(format!("max_time {t} is not a valid duration")));
            }
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed)
    }

    fn clock(&self) -> Clock {
        Clock {
            start: Instant::now(),
            limit: self.max_time.map(Duration::from_secs_f64),
            max_iterations: self.max_iterations,
        }
    }
}

struct Clock {
    start: Instant,
    limit: Option<Duration>,
    max_iterations: Option<u64>,
}

impl Clock {
    fn exhausted(&self, iterations_done: u64) -> bool {
        if let Some(max) = self.max_iterations {
            if iterations_done >= max {
                return true;
            }
        }
        matches!(self.limit, Some(limit) if self.start.elapsed() >= limit)
    }

    fn out_of_time(&self) -> bool {
        matches!(self.limit, Some(limit) if self.start.elapsed() >= limit)
    }
}

/// Parameters of iterated greedy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgParams {
    pub destruction_size: usize,
    pub temperature: f64,
    pub budget: HeuristicBudget,
}

impl IgParams {
    /// Four removed jobs and a constant temperature of one tenth of the mean
    /// processing time.
    pub fn defaults_for(inst: &Instance, budget: HeuristicBudget) -> Self {
        let mean = inst.times().iter().sum::<f64>() / inst.times().len() as f64;
        Self { destruction_size: 4, temperature: mean / 10.0, budget }
    }

    pub fn validate(&self, jobs: usize) -> Result<()> {
        if self.destruction_size == 0 || self.destruction_size >= jobs {
            return Err(PfssError::InvalidParameter(format!(
                "destruction size {} must be in [1, {jobs})",
                self.destruction_size
            )));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(PfssError::InvalidParameter(format!(
                "temperature {} must be a non-negative real",
                self.temperature
            )));
        }
        self.budget.validate()
    }
}

/// A solver result: the permutation and its makespan.
pub type Solution = (Permutation, f64);

/// One NEH insertion: the partial sequence before inserting `job`, and the
/// chosen position with its partial makespan.
#[derive(Debug, Clone, PartialEq)]
pub struct NehStep {
    pub partial: Vec<usize>,
    pub job: usize,
    pub position: usize,
    pub partial_makespan: f64,
}

/// Jobs by nonincreasing total processing time, lower index first on ties.
pub fn neh_priority_order(inst: &Instance) -> Vec<usize> {
    let totals: Vec<f64> = (0..inst.jobs()).map(|j| inst.job_total(j)).collect();
    let mut order: Vec<usize> = (0..inst.jobs()).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
    order
}

/// Nawaz-Enscore-Ham construction with deterministic tie-breaking.
pub fn neh(inst: &Instance) -> Solution {
    let (perm, span, _) = neh_run(inst, false);
    (perm, span)
}

/// NEH that also reports every insertion decision.
pub fn neh_detailed(inst: &Instance) -> (Permutation, f64, Vec<NehStep>) {
    neh_run(inst, true)
}

fn neh_run(inst: &Instance, record: bool) -> (Permutation, f64, Vec<NehStep>) {
    let order = neh_priority_order(inst);
    let mut ev = InsertionEvaluator::new();
    let mut seq = Vec::with_capacity(order.len());
    let mut steps = Vec::new();
    for &job in &order {
        let (pos, cost) = ev.best_insertion(inst, &seq, job);
        if record {
            steps.push(NehStep { partial: seq.clone(), job, position: pos, partial_makespan: cost });
        }
        seq.insert(pos, job);
    }
    // report the direct recurrence, not the head/tail sum
    let span = makespan_unchecked(inst, &seq);
    (Permutation::new(seq).expect("NEH builds a bijection"), span, steps)
}

/// Best of uniformly sampled permutations.
pub fn random_search(inst: &Instance, budget: &HeuristicBudget) -> Result<Solution> {
    budget.validate()?;
    if budget.max_iterations == Some(0) && budget.max_time.is_none() {
        return Err(PfssError::InvalidParameter("random search needs at least one sample".into()));
    }
    let mut rng = budget.rng();
    let clock = budget.clock();
    let mut order: Vec<usize> = (0..inst.jobs()).collect();
    let mut best = (order.clone(), f64::INFINITY);
    let mut samples = 0u64;
    // at least one sample even under a zero time limit
    while samples == 0 || !clock.exhausted(samples) {
        order.shuffle(&mut rng);
        let span = makespan_unchecked(inst, &order);
        if span < best.1 {
            best = (order.clone(), span);
        }
        samples += 1;
    }
    Ok((Permutation::new(best.0).expect("shuffle keeps a bijection"), best.1))
}

/// First-improvement insertion local search. Each job in turn is removed and
/// reinserted at its best position; the move is kept only if it strictly
/// lowers the makespan. Stops at a local optimum, or when the budget's
/// iteration count (full passes) or time limit runs out.
pub fn local_search_insert(
    inst: &Instance,
    start: &Permutation,
    budget: &HeuristicBudget,
) -> Result<Solution> {
    start.validate_for(inst.jobs())?;
    let clock = budget.clock();
    let mut ev = InsertionEvaluator::new();
    let mut seq = start.as_slice().to_vec();
    let span = improve_by_insertion(inst, &mut seq, &mut ev, &clock, budget.max_iterations);
    Ok((Permutation::new(seq).expect("insertion keeps a bijection"), span))
}

fn improve_by_insertion(
    inst: &Instance,
    seq: &mut Vec<usize>,
    ev: &mut InsertionEvaluator,
    clock: &Clock,
    max_passes: Option<u64>,
) -> f64 {
    let n = seq.len();
    let mut span = makespan_unchecked(inst, seq);
    if n < 2 {
        return span;
    }
    let mut passes = 0u64;
    let mut improved = true;
    while improved {
        if max_passes.is_some_and(|max| passes >= max) || clock.out_of_time() {
            break;
        }
        improved = false;
        for job in 0..n {
            let from = seq.iter().position(|&j| j == job).expect("job present");
            seq.remove(from);
            let (pos, cost) = ev.best_insertion(inst, seq, job);
            if strictly_less(cost, span) {
                seq.insert(pos, job);
                span = cost;
                improved = true;
            } else {
                seq.insert(from, job);
            }
        }
        passes += 1;
    }
    makespan_unchecked(inst, seq)
}

/// Iterated local search from a seeded random permutation: perturb the
/// incumbent with `perturbation_strength` random swaps, descend with
/// insertion local search, keep the result if it is better.
pub fn iterated_local_search(
    inst: &Instance,
    budget: &HeuristicBudget,
    perturbation_strength: usize,
) -> Result<Solution> {
    budget.validate()?;
    let n = inst.jobs();
    let mut rng = budget.rng();
    let clock = budget.clock();
    let mut ev = InsertionEvaluator::new();
    let mut current: Vec<usize> = (0..n).collect();
    current.shuffle(&mut rng);
    let mut span = improve_by_insertion(inst, &mut current, &mut ev, &clock, None);
    let mut iterations = 0u64;
    while !clock.exhausted(iterations) {
        let mut candidate = current.clone();
        if n >= 2 {
            for _ in 0..perturbation_strength {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                candidate.swap(a, b);
            }
        }
        let cand_span = improve_by_insertion(inst, &mut candidate, &mut ev, &clock, None);
        if strictly_less(cand_span, span) {
            current = candidate;
            span = cand_span;
        }
        iterations += 1;
    }
    Ok((Permutation::new(current).expect("swaps keep a bijection"), span))
}

/// Iterated greedy from the NEH solution: remove `destruction_size` random
/// jobs, reinsert each greedily, descend with insertion local search, then
/// accept with a constant-temperature annealing rule. Best-so-far returned.
pub fn iterated_greedy(inst: &Instance, params: &IgParams) -> Result<Solution> {
    params.validate(inst.jobs())?;
    let budget = &params.budget;
    let mut rng = budget.rng();
    let clock = budget.clock();
    let mut ev = InsertionEvaluator::new();

    let (start, start_span) = neh(inst);
    let mut current = start.into_vec();
    let mut span = start_span;
    let mut best = (current.clone(), span);
    let mut iterations = 0u64;
    while !clock.exhausted(iterations) {
        let mut partial = current.clone();
        let mut removed = Vec::with_capacity(params.destruction_size);
        for _ in 0..params.destruction_size {
            let at = rng.random_range(0..partial.len());
            removed.push(partial.remove(at));
        }
        for job in removed {
            let (pos, _) = ev.best_insertion(inst, &partial, job);
            partial.insert(pos, job);
        }
        let cand_span = improve_by_insertion(inst, &mut partial, &mut ev, &clock, None);
        if strictly_less(cand_span, span) {
            current = partial;
            span = cand_span;
            if strictly_less(span, best.1) {
                best = (current.clone(), span);
            }
        } else if params.temperature > 0.0 {
            let accept = (-(cand_span - span) / params.temperature).exp();
            if rng.random::<f64>() < accept {
                current = partial;
                span = cand_span;
            }
        }
        iterations += 1;
    }
    Ok((Permutation::new(best.0).expect("reinsertion keeps a bijection"), best.1))
}
