//! Classical baselines: chronological backtracking and random selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{binomial, ItemSet};
use crate::problem::{enumerate_solutions, sat_item, Problem, ProblemKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BacktrackStats {
    /// Every set generated and tested, including the root and pruned nogoods.
    pub nodes_visited: u64,
    /// Tested sets that were consistent.
    pub consistent_nodes: u64,
    pub found_solution: bool,
    pub solution: Option<ItemSet>,
}

/// Depth-first search from the empty set, adding items in increasing index
/// order and stopping at the first good set at the solution level.
///
/// Only items that still leave room to reach the solution level are tried.
pub fn backtrack_cost(p: &Problem) -> BacktrackStats {
    let order: Vec<usize> = (1..=p.n_items()).collect();
    backtrack_cost_ordered(p, &order).expect("natural order is a permutation")
}

/// [`backtrack_cost`] with items tried in the sequence `order`, a permutation
/// of `1..=N`.
pub fn backtrack_cost_ordered(p: &Problem, order: &[usize]) -> Result<BacktrackStats> {
    let n = p.n_items();
    let mut seen = vec![false; n + 1];
    if order.len() != n
        || !order
            .iter()
            .all(|&x| x >= 1 && x <= n && !std::mem::replace(&mut seen[x], true))
    {
        return Err(Error::InvalidParameters(format!(
            "item order must be a permutation of 1..={n}"
        )));
    }

    struct Search<'a> {
        p: &'a Problem,
        order: &'a [usize],
        nodes: u64,
        consistent: u64,
    }

    impl Search<'_> {
        fn test(&mut self, s: ItemSet) -> bool {
            self.nodes += 1;
            let good = !self.p.is_nogood(s);
            if good {
                self.consistent += 1;
            }
            good
        }

        /// `next` is the first position in the order still open to extension.
        fn extend(&mut self, current: ItemSet, next: usize) -> Option<ItemSet> {
            let depth = current.len();
            if depth == self.p.solution_level() {
                return Some(current);
            }
            let last = self.p.n_items() + depth - self.p.solution_level();
            for pos in next..=last {
                let candidate = current.with(self.order[pos]);
                if self.test(candidate) {
                    if let Some(found) = self.extend(candidate, pos + 1) {
                        return Some(found);
                    }
                }
            }
            None
        }
    }

    let mut search = Search {
        p,
        order,
        nodes: 0,
        consistent: 0,
    };
    let solution = if search.test(ItemSet::EMPTY) {
        search.extend(ItemSet::EMPTY, 0)
    } else {
        None
    };
    Ok(BacktrackStats {
        nodes_visited: search.nodes,
        consistent_nodes: search.consistent,
        found_solution: solution.is_some(),
        solution,
    })
}

/// A uniformly random item order for [`backtrack_cost_ordered`].
pub fn shuffled_order(n_items: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n_items).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Chance that a uniformly random complete set is a solution.
pub fn random_selection_p(p: &Problem) -> f64 {
    let complete = binomial(p.n_items() as u64, p.solution_level() as i64)
        .expect("lattice level sizes fit in u64");
    enumerate_solutions(p).len() as f64 / complete as f64
}

/// Chance that a uniformly random complete assignment satisfies a 3SAT instance.
pub fn random_assignment_p(p: &Problem) -> Result<f64> {
    let (vars, _) = match (p.kind(), p.sat_params()) {
        (ProblemKind::Sat3, Some(params)) => params,
        _ => {
            return Err(Error::InvalidParameters(
                "random assignment baseline needs a 3SAT problem".into(),
            ))
        }
    };
    let total = 1u64 << vars;
    let satisfying = (0..total)
        .filter(|&bits| {
            let assignment = (1..=vars).fold(ItemSet::EMPTY, |s, v| {
                s.with(sat_item(v, bits & (1 << (v - 1)) != 0))
            });
            !p.is_nogood(assignment)
        })
        .count();
    Ok(satisfying as f64 / total as f64)
}
