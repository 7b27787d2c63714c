//! Diagnostic run of the nonunitary superset map.
//!
//! Every set passes its amplitude unchanged to each of its supersets at the
//! next level, and nogoods pick up a random phase first. Nothing is
//! normalized; the point is to compare how amplitude grows on goods and
//! nogoods.

use num_complex::Complex64;
use serde::Serialize;

use super::propagate::sum_over_subsets;
use super::{apply_phase, LevelState, PhasePolicy, PhaseSource};
use crate::error::{Error, Result};
use crate::lattice::level_mask_vec;
use crate::problem::Problem;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdealLevelStats {
    pub level: usize,
    pub goods: usize,
    pub nogoods: usize,
    pub mean_good_magnitude: f64,
    pub max_good_magnitude: f64,
    pub min_good_magnitude: f64,
    /// Mean `|ψ|` over nogood sets.
    pub mean_nogood_magnitude: f64,
    pub rms_nogood_magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdealMapReport {
    pub seed: u64,
    pub levels: Vec<IdealLevelStats>,
}

fn level_stats(p: &Problem, state: &LevelState<Complex64>) -> IdealLevelStats {
    let flags = p.nogood_flags(state.level);
    let mut goods = Vec::new();
    let mut bad = Vec::new();
    for (x, nogood) in state.amplitudes.iter().zip(flags) {
        if nogood {
            bad.push(x.norm());
        } else {
            goods.push(x.norm());
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    IdealLevelStats {
        level: state.level,
        goods: goods.len(),
        nogoods: bad.len(),
        mean_good_magnitude: mean(&goods),
        max_good_magnitude: goods.iter().copied().fold(0.0, f64::max),
        min_good_magnitude: goods.iter().copied().fold(f64::INFINITY, f64::min),
        mean_nogood_magnitude: mean(&bad),
        rms_nogood_magnitude: if bad.is_empty() {
            0.0
        } else {
            (bad.iter().map(|x| x * x).sum::<f64>() / bad.len() as f64).sqrt()
        },
    }
}

/// Runs the superset map from amplitude 1 on the empty set up to `top_level`.
pub fn run_ideal_map(p: &Problem, top_level: usize, seed: u64) -> Result<IdealMapReport> {
    let n = p.n_items();
    if top_level > n {
        return Err(Error::InvalidParameters(format!(
            "top level {top_level} exceeds the item count {n}"
        )));
    }
    let mut source = PhaseSource::new(PhasePolicy::Random, seed);
    let mut state = LevelState {
        n,
        level: 0,
        amplitudes: vec![Complex64::new(1.0, 0.0)],
    };
    let mut levels = vec![level_stats(p, &state)];
    while state.level < top_level {
        apply_phase(&mut state, p, &mut source)?;
        let masks = level_mask_vec(n, state.level + 1);
        state = LevelState {
            n,
            level: state.level + 1,
            amplitudes: sum_over_subsets(&masks, &state.amplitudes),
        };
        levels.push(level_stats(p, &state));
    }
    Ok(IdealMapReport { seed, levels })
}
