//! Exhaustive enumeration for tiny instances.

use crate::error::{PfssError, Result};
use crate::heuristics::Solution;
use crate::instance::{Instance, Permutation};
use crate::schedule::advance_in_place;

/// Largest job count accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Optimal permutation by enumerating all `n!` orders in lexicographic
/// order; the lexicographically smallest argmin wins ties.
pub fn brute_force(inst: &Instance) -> Result<Solution> {
    let n = inst.jobs();
    if n > BRUTE_FORCE_LIMIT {
        return Err(PfssError::ScaleGuard { n, limit: BRUTE_FORCE_LIMIT });
    }
    let m = inst.machines();
    let mut search = Search {
        inst,
        fronts: vec![0.0; m * (n + 1)],
        prefix: Vec::with_capacity(n),
        used: vec![false; n],
        best: None,
    };
    search.descend();
    let (order, span) = search.best.expect("at least one permutation");
    Ok((Permutation::new(order).expect("enumeration yields bijections"), span))
}

struct Search<'a> {
    inst: &'a Instance,
    // fronts[depth * m ..][..m] is the machine front after `depth` jobs
    fronts: Vec<f64>,
    prefix: Vec<usize>,
    used: Vec<bool>,
    best: Option<(Vec<usize>, f64)>,
}

impl Search<'_> {
    fn descend(&mut self) {
        let n = self.inst.jobs();
        let m = self.inst.machines();
        let depth = self.prefix.len();
        if depth == n {
            let span = self.fronts[depth * m + m - 1];
            if self.best.as_ref().is_none_or(|(_, b)| span < *b) {
                self.best = Some((self.prefix.clone(), span));
            }
            return;
        }
        for job in 0..n {
            if self.used[job] {
                continue;
            }
            let (head, tail) = self.fronts.split_at_mut((depth + 1) * m);
            let next = &mut tail[..m];
            next.copy_from_slice(&head[depth * m..]);
            advance_in_place(self.inst, next, job);
            self.used[job] = true;
            self.prefix.push(job);
            self.descend();
            self.prefix.pop();
            self.used[job] = false;
        }
    }
}
