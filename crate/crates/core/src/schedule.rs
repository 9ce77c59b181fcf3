//! Gantt semantics of the permutation flow shop.
//!
//! Job `perm[t]` is processed on machine `i` after it leaves machine `i - 1`
//! and after job `perm[t - 1]` leaves machine `i`, without preemption:
//!
//! ```text
//! C[i][t] = max(C[i-1][t], C[i][t-1]) + x[i][perm[t]]
//! ```

use crate::error::{PfssError, Result};
use crate::instance::{Instance, Permutation};

/// Completion times aligned to a permutation: `get(i, t)` is when the `t`-th
/// scheduled job leaves machine `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionMatrix {
    machines: usize,
    jobs: usize,
    data: Vec<f64>,
}

impl CompletionMatrix {
    pub fn get(&self, machine: usize, position: usize) -> f64 {
        self.data[machine * self.jobs + position]
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn makespan(&self) -> f64 {
        self.get(self.machines - 1, self.jobs - 1)
    }

    /// Completion times of the last scheduled job on every machine.
    pub fn last_column(&self) -> Vec<f64> {
        (0..self.machines).map(|i| self.get(i, self.jobs - 1)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.jobs).map(<[f64]>::to_vec).collect()
    }
}

/// Full completion matrix of `perm` on `inst`.
pub fn completion_times(inst: &Instance, perm: &Permutation) -> Result<CompletionMatrix> {
    perm.validate_for(inst.jobs())?;
    let (m, n) = (inst.machines(), inst.jobs());
    let mut data = vec![0.0; m * n];
    for (t, job) in perm.iter().enumerate() {
        for i in 0..m {
            let above: f64 = if i > 0 { data[(i - 1) * n + t] } else { 0.0 };
            let left = if t > 0 { data[i * n + t - 1] } else { 0.0 };
            data[i * n + t] = above.max(left) + inst.time(i, job);
        }
    }
    Ok(CompletionMatrix { machines: m, jobs: n, data })
}

/// Makespan of `perm`, using a rolling machine front.
pub fn makespan(inst: &Instance, perm: &Permutation) -> Result<f64> {
    perm.validate_for(inst.jobs())?;
    Ok(makespan_unchecked(inst, perm.as_slice()))
}

/// Makespan of a (possibly partial) sequence of distinct, in-range job indices.
pub fn makespan_unchecked(inst: &Instance, seq: &[usize]) -> f64 {
    let mut front = vec![0.0; inst.machines()];
    for &job in seq {
        advance_in_place(inst, &mut front, job);
    }
    front.last().copied().unwrap_or(0.0)
}

/// Machine-completion front after appending `job` behind `front`.
pub fn front_advance(inst: &Instance, front: &[f64], job: usize) -> Result<Vec<f64>> {
    if job >= inst.jobs() {
        return Err(PfssError::JobOutOfRange { job, jobs: inst.jobs() });
    }
    if front.len() != inst.machines() {
        return Err(PfssError::FrontLength { got: front.len(), expected: inst.machines() });
    }
    let mut next = front.to_vec();
    advance_in_place(inst, &mut next, job);
    Ok(next)
}

#[inline]
pub(crate) fn advance_in_place(inst: &Instance, front: &mut [f64], job: usize) {
    let mut prev = 0.0_f64;
    for (i, slot) in front.iter_mut().enumerate() {
        prev = prev.max(*slot) + inst.time(i, job);
        *slot = prev;
    }
}

/// Percentage by which `value` exceeds `expert_value`; negative when the
/// method beats the expert.
pub fn gap_percent(value: f64, expert_value: f64) -> Result<f64> {
    if !(expert_value > 0.0) {
        return Err(PfssError::UndefinedGap(expert_value));
    }
    Ok(100.0 * (value - expert_value) / expert_value)
}

/// Per-instance gaps averaged over a set (macro average).
pub fn mean_gap_percent(values: &[f64], expert_values: &[f64]) -> Result<f64> {
    if values.len() != expert_values.len() {
        return Err(PfssError::ShapeMismatch(format!(
            "{} values against {} expert values",
            values.len(),
            expert_values.len()
        )));
    }
    if values.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (&v, &e) in values.iter().zip(expert_values) {
        total += gap_percent(v, e)?;
    }
    Ok(total / values.len() as f64)
}

/// Scratch space for evaluating every insertion position of one job into a
/// partial sequence in `O(m * len)` using head and tail matrices.
#[derive(Debug, Default)]
pub struct InsertionEvaluator {
    heads: Vec<f64>,
    tails: Vec<f64>,
    costs: Vec<f64>,
}

impl InsertionEvaluator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Partial makespan of inserting `job` at each position `0..=seq.len()`.
    pub fn insertion_costs(&mut self, inst: &Instance, seq: &[usize], job: usize) -> &[f64] {
        let m = inst.machines();
        let k = seq.len();
        let w = k + 1;
        self.heads.clear();
        self.heads.resize(m * w, 0.0);
        self.tails.clear();
        self.tails.resize(m * w, 0.0);
        // heads[i][t + 1]: completion of seq[t] on machine i (column 0 is the empty prefix)
        for (t, &s) in seq.iter().enumerate() {
            for i in 0..m {
                let above = if i > 0 { self.heads[(i - 1) * w + t + 1] } else { 0.0 };
                let left = self.heads[i * w + t];
                self.heads[i * w + t + 1] = above.max(left) + inst.time(i, s);
            }
        }
        // tails[i][t]: time from the start of seq[t] on machine i to the end (column k is empty)
        for t in (0..k).rev() {
            let s = seq[t];
            for i in (0..m).rev() {
                let below = if i + 1 < m { self.tails[(i + 1) * w + t] } else { 0.0 };
                let right = self.tails[i * w + t + 1];
                self.tails[i * w + t] = below.max(right) + inst.time(i, s);
            }
        }
        self.costs.clear();
        for pos in 0..=k {
            let mut f = 0.0_f64;
            let mut best = 0.0_f64;
            for i in 0..m {
                f = f.max(self.heads[i * w + pos]) + inst.time(i, job);
                best = best.max(f + self.tails[i * w + pos]);
            }
            self.costs.push(best);
        }
        &self.costs
    }

    /// Best insertion position and its partial makespan. Among tied positions
    /// the latest one wins, so jobs inserted earlier keep their relative lead.
    pub fn best_insertion(&mut self, inst: &Instance, seq: &[usize], job: usize) -> (usize, f64) {
        let costs = self.insertion_costs(inst, seq, job);
        argmin_last(costs)
    }
}

/// Relative tolerance under which two makespans count as tied.
pub const TIE_EPS: f64 = 1e-12;

/// True when `a` is better than `b` by more than rounding noise.
#[inline]
pub fn strictly_less(a: f64, b: f64) -> bool {
    a < b - TIE_EPS * b.abs().max(1.0)
}

/// Index of the last minimum, with ties judged by [`TIE_EPS`].
pub(crate) fn argmin_last(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if !strictly_less(best.1, v) {
            best = (i, v.min(best.1));
        }
    }
    (best.0, values[best.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    // Independent cell-by-cell oracle: a literal spreadsheet fill where the
    // cell is computed from explicit start times rather than a running max.
    fn oracle_completion(rows: &[Vec<f64>], order: &[usize]) -> Vec<Vec<f64>> {
        let m = rows.len();
        let n = order.len();
        let mut c = vec![vec![0.0; n]; m];
        for i in 0..m {
            for t in 0..n {
                let machine_free = if t == 0 { 0.0 } else { c[i][t - 1] };
                let job_ready = if i == 0 { 0.0 } else { c[i - 1][t] };
                let start = if machine_free > job_ready { machine_free } else { job_ready };
                c[i][t] = start + rows[i][order[t]];
            }
        }
        c
    }

    fn frozen_3x4() -> Vec<Vec<f64>> {
        vec![
            vec![3.7, 0.4, 5.1, 2.2],
            vec![1.9, 6.3, 0.0, 4.8],
            vec![2.5, 1.1, 3.3, 0.6],
        ]
    }

    #[test]
    fn single_machine_sums() {
        let inst = Instance::from_rows(&[vec![2.0, 3.0, 4.0]]).unwrap();
        let c = completion_times(&inst, &perm(&[2, 0, 1])).unwrap();
        assert_eq!(c.rows(), vec![vec![4.0, 6.0, 9.0]]);
        assert_eq!(c.makespan(), 9.0);
    }

    #[test]
    fn single_job_chain() {
        let inst = Instance::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let c = completion_times(&inst, &perm(&[0])).unwrap();
        assert_eq!(c.rows(), vec![vec![1.0], vec![3.0], vec![6.0]]);
        assert_eq!(makespan(&inst, &perm(&[0])).unwrap(), 6.0);
    }

    #[test]
    fn frozen_3x4_matches_spreadsheet_oracle() {
        let rows = frozen_3x4();
        let inst = Instance::from_rows(&rows).unwrap();
        let order = [2, 0, 3, 1];
        let c = completion_times(&inst, &perm(&order)).unwrap();
        // frozen from the oracle
        let expected = vec![
            vec![5.1, 8.8, 11.0, 11.4],
            vec![5.1, 10.7, 15.8, 22.1],
            vec![8.4, 13.2, 16.4, 23.2],
        ];
        let oracle = oracle_completion(&rows, &order);
        for i in 0..3 {
            for t in 0..4 {
                assert!((oracle[i][t] - expected[i][t]).abs() < 1e-12);
                assert_eq!(c.get(i, t), oracle[i][t]);
            }
        }
    }

    #[test]
    fn zero_matrix_has_zero_makespan() {
        let inst = Instance::new(3, 5, vec![0.0; 15]).unwrap();
        assert_eq!(makespan(&inst, &perm(&[4, 2, 0, 1, 3])).unwrap(), 0.0);
    }

    #[test]
    fn single_machine_makespan_is_total() {
        let inst = Instance::from_rows(&[vec![1.5, 2.0, 0.25, 4.0]]).unwrap();
        for order in [[0, 1, 2, 3], [3, 2, 1, 0], [1, 3, 0, 2]] {
            assert_eq!(makespan(&inst, &perm(&order)).unwrap(), 7.75);
        }
    }

    #[test]
    fn every_permutation_of_frozen_4x3_matches_oracle() {
        let rows = vec![vec![4.0, 1.0, 3.0, 2.0], vec![2.0, 5.0, 1.0, 3.0], vec![3.0, 2.0, 4.0, 1.0]];
        let inst = Instance::from_rows(&rows).unwrap();
        let mut count = 0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let order = [a, b, c, d];
                        if Permutation::new(order.to_vec()).is_err() {
                            continue;
                        }
                        count += 1;
                        let oracle = oracle_completion(&rows, &order)[2][3];
                        assert_eq!(makespan(&inst, &perm(&order)).unwrap(), oracle);
                    }
                }
            }
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn front_advance_examples() {
        let inst = Instance::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(front_advance(&inst, &[0.0; 3], 0).unwrap(), vec![1.0, 3.0, 6.0]);
        assert_eq!(front_advance(&inst, &[5.0; 3], 1).unwrap(), vec![5.0, 5.0, 5.0]);
        assert!(matches!(front_advance(&inst, &[0.0; 3], 2), Err(PfssError::JobOutOfRange { .. })));
        assert!(matches!(front_advance(&inst, &[0.0; 2], 0), Err(PfssError::FrontLength { .. })));
    }

    #[test]
    fn front_fold_matches_last_column_on_frozen_5x6() {
        let rows = vec![
            vec![2.3, 0.7, 4.1, 1.9, 3.3, 0.2],
            vec![1.1, 3.8, 0.5, 2.6, 0.9, 4.4],
            vec![0.0, 2.2, 3.1, 1.4, 2.7, 1.6],
            vec![3.9, 1.3, 0.8, 2.0, 4.6, 2.9],
            vec![1.7, 2.4, 3.6, 0.3, 1.2, 3.0],
        ];
        let inst = Instance::from_rows(&rows).unwrap();
        let order = [4, 1, 5, 0, 3, 2];
        let front = order.iter().fold(vec![0.0; 5], |f, &j| front_advance(&inst, &f, j).unwrap());
        let oracle = oracle_completion(&rows, &order);
        let last: Vec<f64> = oracle.iter().map(|r| r[5]).collect();
        assert_eq!(front, last);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap_percent(170.1, 170.1).unwrap(), 0.0);
        assert!((gap_percent(172.9, 170.1).unwrap() - 1.646_090_534_979_4).abs() < 1e-9);
        assert_eq!(gap_percent(100.0, 200.0).unwrap(), -50.0);
        assert!(matches!(gap_percent(1.0, 0.0), Err(PfssError::UndefinedGap(_))));
    }

    #[test]
    fn mean_gap_is_per_instance_average() {
        // gap of means would be 100 * (30 - 20) / 20 = 50
        let g = mean_gap_percent(&[10.0, 50.0], &[10.0, 30.0]).unwrap();
        assert!((g - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_permutation_is_rejected() {
        let inst = Instance::new(2, 3, vec![1.0; 6]).unwrap();
        assert!(makespan(&inst, &perm(&[0, 1])).is_err());
        assert!(completion_times(&inst, &Permutation::identity(4)).is_err());
    }

    #[test]
    fn insertion_costs_match_direct_evaluation() {
        let rows = vec![
            vec![2.3, 0.7, 4.1, 1.9, 3.3, 0.2],
            vec![1.1, 3.8, 0.5, 2.6, 0.9, 4.4],
            vec![0.0, 2.2, 3.1, 1.4, 2.7, 1.6],
        ];
        let inst = Instance::from_rows(&rows).unwrap();
        let seq = [3, 0, 5, 1];
        let mut ev = InsertionEvaluator::new();
        let costs = ev.insertion_costs(&inst, &seq, 2).to_vec();
        assert_eq!(costs.len(), 5);
        for (pos, cost) in costs.iter().enumerate() {
            let mut s = seq.to_vec();
            s.insert(pos, 2);
            assert!((makespan_unchecked(&inst, &s) - cost).abs() < 1e-12);
        }
        assert_eq!(ev.insertion_costs(&inst, &[], 4), &[makespan_unchecked(&inst, &[4])]);
    }
}
