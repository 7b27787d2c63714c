//! Problem instances as nogood sets in the subset lattice.
//!
//! Two generated families are supported: unstructured problems (random binary
//! nogoods that avoid a prespecified solution) and random 3SAT, where item
//! `2v − 1` means "variable `v` is true" and item `2v` means "false".

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical;
use crate::error::{Error, Result};
use crate::lattice::{binomial, choose, level_masks, ItemSet, MAX_ITEMS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Unstructured,
    Sat3,
    /// Hand-built instances, e.g. small worked examples.
    Custom,
}

/// A search problem: find a good set at the solution level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemFile", into = "ProblemFile")]
pub struct Problem {
    kind: ProblemKind,
    n_items: usize,
    solution_level: usize,
    start_level: usize,
    nogoods: Vec<ItemSet>,
    /// Variable and clause counts of a 3SAT instance.
    sat: Option<(usize, usize)>,
    seed: Option<u64>,
}

/// On-disk layout of a [`Problem`].
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ProblemFile {
    kind: ProblemKind,
    #[serde(rename = "N")]
    n_items: usize,
    #[serde(rename = "L")]
    solution_level: usize,
    #[serde(rename = "K")]
    start_level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<usize>,
    nogoods: Vec<ItemSet>,
}

impl TryFrom<ProblemFile> for Problem {
    type Error = Error;

    fn try_from(f: ProblemFile) -> Result<Self> {
        let sat = match (f.kind, f.n, f.c) {
            (ProblemKind::Sat3, Some(n), Some(c)) => Some((n, c)),
            (ProblemKind::Sat3, _, _) => {
                return Err(Error::InvalidProblem(
                    "sat3 problems need `n` and `c`".into(),
                ))
            }
            _ => None,
        };
        let mut p = Problem::new(
            f.kind,
            f.n_items,
            f.solution_level,
            f.start_level,
            f.nogoods,
        )?;
        p.sat = sat;
        p.seed = f.seed;
        Ok(p)
    }
}

impl From<Problem> for ProblemFile {
    fn from(p: Problem) -> Self {
        ProblemFile {
            kind: p.kind,
            n_items: p.n_items,
            solution_level: p.solution_level,
            start_level: p.start_level,
            seed: p.seed,
            n: p.sat.map(|s| s.0),
            c: p.sat.map(|s| s.1),
            nogoods: p.nogoods,
        }
    }
}

impl Problem {
    /// Validates and builds a problem. Nogoods are deduplicated and stored in
    /// (level, rank) order.
    pub fn new(
        kind: ProblemKind,
        n_items: usize,
        solution_level: usize,
        start_level: usize,
        nogoods: impl IntoIterator<Item = ItemSet>,
    ) -> Result<Self> {
        if n_items == 0 || n_items > MAX_ITEMS {
            return Err(Error::InvalidProblem(format!(
                "item count {n_items} outside 1..={MAX_ITEMS}"
            )));
        }
        if solution_level > n_items.div_ceil(2) {
            return Err(Error::InvalidProblem(format!(
                "solution level {solution_level} exceeds ceil(N/2) = {}",
                n_items.div_ceil(2)
            )));
        }
        if start_level > solution_level {
            return Err(Error::InvalidProblem(format!(
                "start level {start_level} above solution level {solution_level}"
            )));
        }
        let mut nogoods: Vec<ItemSet> = nogoods.into_iter().collect();
        for ng in &nogoods {
            if !ng.fits(n_items) {
                return Err(Error::InvalidProblem(format!(
                    "nogood {ng} has items beyond {n_items}"
                )));
            }
            if ng.is_empty() || ng.len() > solution_level {
                return Err(Error::InvalidProblem(format!(
                    "nogood {ng} must have size in 1..={solution_level}"
                )));
            }
        }
        nogoods.sort_by_key(|s| (s.len(), s.bits()));
        nogoods.dedup();
        Ok(Problem {
            kind,
            n_items,
            solution_level,
            start_level,
            nogoods,
            sat: None,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_start_level(mut self, start_level: usize) -> Result<Self> {
        if start_level > self.solution_level {
            return Err(Error::InvalidProblem(format!(
                "start level {start_level} above solution level {}",
                self.solution_level
            )));
        }
        self.start_level = start_level;
        Ok(self)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// Item count `N`.
    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Level `L` of complete sets.
    pub fn solution_level(&self) -> usize {
        self.solution_level
    }

    /// Level `K` the search starts from.
    pub fn start_level(&self) -> usize {
        self.start_level
    }

    /// The directly specified nogoods (including the necessary ones for 3SAT).
    pub fn nogoods(&self) -> &[ItemSet] {
        &self.nogoods
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `(variables, clauses)` for 3SAT instances.
    pub fn sat_params(&self) -> Option<(usize, usize)> {
        self.sat
    }

    /// True iff some specified nogood is contained in `s`.
    #[inline]
    pub fn is_nogood(&self, s: ItemSet) -> bool {
        let bits = s.bits();
        self.nogoods.iter().any(|ng| ng.bits() & bits == ng.bits())
    }

    /// Nogood flags for every set of a level, in rank order.
    pub fn nogood_flags(&self, level: usize) -> Vec<bool> {
        level_masks(self.n_items, level)
            .map(|m| self.is_nogood(ItemSet::from_bits(m)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Nogood count for constraint density `beta`, rounding half up.
pub fn nogood_count(n_items: usize, beta: f64) -> usize {
    (beta * n_items as f64 + 0.5).floor() as usize
}

/// Random binary nogoods with the prespecified solution `{1..N/2}`.
pub fn generate_unstructured(n_items: usize, beta: f64, seed: u64) -> Result<Problem> {
    if n_items < 4 || !n_items.is_multiple_of(2) || n_items > MAX_ITEMS {
        return Err(Error::InvalidParameters(format!(
            "unstructured problems need an even N in 4..={MAX_ITEMS}, got {n_items}"
        )));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameters(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    let level = n_items / 2;
    let solution = ItemSet::from_bits((1u32 << level) - 1);
    let mut eligible: Vec<ItemSet> = level_masks(n_items, 2)
        .map(ItemSet::from_bits)
        .filter(|pair| !pair.is_subset_of(solution))
        .collect();
    let m = nogood_count(n_items, beta);
    if m > eligible.len() {
        return Err(Error::InvalidParameters(format!(
            "beta {beta} asks for {m} nogoods but only {} pairs avoid the solution",
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = eligible.partial_shuffle(&mut rng, m);
    let nogoods = chosen.to_vec();
    Ok(Problem::new(ProblemKind::Unstructured, n_items, level, 2, nogoods)?.with_seed(seed))
}

/// Item meaning "variable `var` (1-based) takes `value`".
pub fn sat_item(var: usize, value: bool) -> usize {
    if value {
        2 * var - 1
    } else {
        2 * var
    }
}

/// The size-3 nogood violating a clause, given as signed 1-based literals
/// (`-v` for a negated variable).
pub fn clause_nogood(literals: [i32; 3]) -> Result<ItemSet> {
    let vars: Vec<usize> = literals.iter().map(|l| l.unsigned_abs() as usize).collect();
    if vars.contains(&0) || vars[0] == vars[1] || vars[0] == vars[2] || vars[1] == vars[2] {
        return Err(Error::InvalidParameters(format!(
            "clause {literals:?} needs three distinct nonzero variables"
        )));
    }
    // A positive literal is falsified by the false value, and vice versa.
    ItemSet::from_items(
        literals
            .iter()
            .map(|&l| sat_item(l.unsigned_abs() as usize, l < 0)),
    )
}

/// Necessary nogoods `{2v − 1, 2v}` for `v = 1..=vars`.
pub fn necessary_nogoods(vars: usize) -> impl Iterator<Item = ItemSet> {
    (1..=vars).map(|v| ItemSet::from_bits(0b11 << (2 * (v - 1))))
}

fn max_clauses(vars: usize) -> usize {
    choose(vars, 3) * 8
}

/// Random 3SAT with `clauses` distinct clauses over `vars` variables.
///
/// Returns [`Error::Insoluble`] when the sampled formula has no satisfying
/// assignment; callers move on to another seed.
pub fn generate_3sat(vars: usize, clauses: usize, seed: u64) -> Result<Problem> {
    if vars < 3 || 2 * vars > MAX_ITEMS {
        return Err(Error::InvalidParameters(format!(
            "3SAT needs 3 <= n <= {}, got {vars}",
            MAX_ITEMS / 2
        )));
    }
    if clauses > max_clauses(vars) {
        return Err(Error::InvalidParameters(format!(
            "{clauses} clauses requested but only {} distinct clauses exist over {vars} variables",
            max_clauses(vars)
        )));
    }
    let mut candidates: Vec<ItemSet> = Vec::with_capacity(max_clauses(vars));
    for v3 in 3..=vars {
        for v2 in 2..v3 {
            for v1 in 1..v2 {
                for signs in 0..8u32 {
                    let vars3 = [v1, v2, v3];
                    let items = vars3
                        .iter()
                        .enumerate()
                        .map(|(b, &v)| sat_item(v, signs & (1 << b) != 0));
                    candidates.push(ItemSet::from_items(items)?);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = candidates.partial_shuffle(&mut rng, clauses);
    let nogoods = necessary_nogoods(vars).chain(chosen.iter().copied());
    let mut p = Problem::new(ProblemKind::Sat3, 2 * vars, vars, 3, nogoods)?.with_seed(seed);
    p.sat = Some((vars, clauses));
    if !classical::backtrack_cost(&p).found_solution {
        return Err(Error::Insoluble {
            n: vars,
            c: clauses,
            seed,
        });
    }
    Ok(p)
}

/// Tries seeds `seed, next(seed), …` until a soluble instance is found;
/// returns the instance and the number of rejected draws.
pub fn generate_3sat_soluble(
    vars: usize,
    clauses: usize,
    seed: u64,
    max_attempts: usize,
    mut next_seed: impl FnMut(u64, usize) -> u64,
) -> Result<(Problem, usize)> {
    for attempt in 0..max_attempts {
        let s = if attempt == 0 {
            seed
        } else {
            next_seed(seed, attempt)
        };
        match generate_3sat(vars, clauses, s) {
            Ok(p) => return Ok((p, attempt)),
            Err(Error::Insoluble { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidParameters(format!(
        "no soluble 3SAT instance with n={vars}, c={clauses} in {max_attempts} attempts"
    )))
}

/// All good sets at the solution level, in rank order.
pub fn enumerate_solutions(p: &Problem) -> Vec<ItemSet> {
    fn extend(p: &Problem, current: ItemSet, out: &mut Vec<ItemSet>) {
        let depth = current.len();
        if depth == p.solution_level {
            out.push(current);
            return;
        }
        let first = current.max_item().unwrap_or(0) + 1;
        let last = p.n_items + 1 + depth - p.solution_level;
        for item in first..=last {
            let next = current.with(item);
            if !p.is_nogood(next) {
                extend(p, next, out);
            }
        }
    }
    let mut out = Vec::new();
    if !p.is_nogood(ItemSet::EMPTY) {
        extend(p, ItemSet::EMPTY, &mut out);
    }
    out.sort_by_key(|s| s.bits());
    out
}

/// Phase-transition estimates for the unstructured ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoryReport {
    /// Probability that a given complete set is a solution.
    pub rho_l: f64,
    pub expected_solutions: f64,
    pub beta_crit: f64,
    pub beta_poly: f64,
}

fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.ln() - (1.0 - x) * (1.0 - x).ln()
    }
}

/// Density at which the expected solution count crosses one, for `L = N/b`.
pub fn beta_crit(b: f64) -> f64 {
    binary_entropy(1.0 / b) / -(1.0 - 1.0 / (b * b)).ln()
}

/// Density up to which expected goods increase at every level.
pub fn beta_poly(b: f64) -> f64 {
    (b * b - 1.0) / (2.0 * b) * (b - 1.0).ln()
}

/// Probability that a fixed `L`-set avoids `m` random pairs drawn without
/// replacement, `C(C(N,2) − C(L,2), m) / C(C(N,2), m)`.
pub fn solution_probability(n_items: usize, level: usize, m: usize) -> Result<f64> {
    let total = binomial(n_items as u64, 2)?;
    let inside = binomial(level as u64, 2)?;
    if m as u64 > total {
        return Err(Error::InvalidParameters(format!(
            "{m} nogoods exceed the {total} pairs over {n_items} items"
        )));
    }
    let allowed = total - inside;
    if m as u64 > allowed {
        return Ok(0.0);
    }
    Ok((0..m as u64).fold(1.0, |acc, t| {
        acc * (allowed - t) as f64 / (total - t) as f64
    }))
}

pub fn theory(n_items: usize, level: usize, m: usize, b: f64) -> Result<TheoryReport> {
    if level > n_items {
        return Err(Error::InvalidParameters(format!(
            "level {level} exceeds N = {n_items}"
        )));
    }
    if b.is_nan() || b <= 1.0 {
        return Err(Error::InvalidParameters(format!(
            "b must exceed 1, got {b}"
        )));
    }
    let rho_l = solution_probability(n_items, level, m)?;
    Ok(TheoryReport {
        rho_l,
        expected_solutions: binomial(n_items as u64, level as i64)? as f64 * rho_l,
        beta_crit: beta_crit(b),
        beta_poly: beta_poly(b),
    })
}
