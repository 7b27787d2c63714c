//! Exact simulation of the lattice search.
//!
//! Only the amplitudes of the active level are stored. A trial starts with
//! equal amplitude on the good sets of level `K`, then for each level up to
//! `L − 1` multiplies nogood amplitudes by a phase and maps to the next level
//! with the overlap-structured orthonormal map. The probability of measuring a
//! solution is the squared amplitude left on solution sets at level `L`.

mod ideal;
mod propagate;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ideal::{run_ideal_map, IdealLevelStats, IdealMapReport};
pub use propagate::{binomial_moments, Propagator, AUTO_DIRECT_PAIR_LIMIT};

use crate::amplitude::Amplitude;
use crate::coeffs::{cached_coefficients, MapCoefficients};
use crate::error::{Error, Result};
use crate::lattice::{level_size, rank_of_bits};
use crate::problem::{enumerate_solutions, Problem};

/// Norm drift beyond which a run is reported as a numerical failure.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Amplitudes of every set at one lattice level, in rank order.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelState<T = Complex64> {
    pub n: usize,
    pub level: usize,
    pub amplitudes: Vec<T>,
}

impl<T: Amplitude> LevelState<T> {
    pub fn zeros(n: usize, level: usize) -> Self {
        LevelState {
            n,
            level,
            amplitudes: vec![T::ZERO; level_size(n, level)],
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn to_complex(&self) -> LevelState<Complex64> {
        LevelState {
            n: self.n,
            level: self.level,
            amplitudes: self.amplitudes.iter().map(|x| x.to_complex()).collect(),
        }
    }

    /// Total squared amplitude on sets that are good for `p`.
    pub fn goods_probability(&self, p: &Problem) -> f64 {
        p.nogood_flags(self.level)
            .iter()
            .zip(&self.amplitudes)
            .filter(|(nogood, _)| !**nogood)
            .map(|(_, x)| x.norm_sqr())
            .sum()
    }
}

/// How nogood amplitudes are rephased before each map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhasePolicy {
    /// Multiply by −1.
    Invert,
    /// Multiply by `e^{iθ}`, θ uniform on `[0, 2π)`, drawn per set and level.
    Random,
    /// Multiply by `e^{iθ}` for a fixed θ.
    Fixed(f64),
}

impl PhasePolicy {
    /// True when every factor is exactly real, so the real-only path applies.
    pub fn is_real(self) -> bool {
        match self {
            PhasePolicy::Invert => true,
            PhasePolicy::Random => false,
            PhasePolicy::Fixed(theta) => theta == 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhasePolicy::Invert => "invert",
            PhasePolicy::Random => "random",
            PhasePolicy::Fixed(_) => "fixed",
        }
    }
}

impl std::str::FromStr for PhasePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "invert" => Ok(PhasePolicy::Invert),
            "random" => Ok(PhasePolicy::Random),
            other => match other.strip_prefix("fixed:") {
                Some(theta) => theta
                    .parse()
                    .map(PhasePolicy::Fixed)
                    .map_err(|_| Error::InvalidParameters(format!("bad phase angle in {other:?}"))),
                None => Err(Error::InvalidParameters(format!(
                    "unknown phase policy {other:?} (expected invert, random or fixed:<theta>)"
                ))),
            },
        }
    }
}

/// A phase policy bound to a seeded stream.
///
/// Random phases for level `j` come from ChaCha stream `j` of the trial seed,
/// consumed in rank order of the nogood sets, so a level's draws do not
/// depend on how many were taken at earlier levels.
#[derive(Clone, Debug)]
pub struct PhaseSource {
    policy: PhasePolicy,
    rng: ChaCha8Rng,
}

impl PhaseSource {
    pub fn new(policy: PhasePolicy, seed: u64) -> Self {
        PhaseSource {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn policy(&self) -> PhasePolicy {
        self.policy
    }

    fn start_level(&mut self, level: usize) {
        self.rng.set_stream(level as u64);
        self.rng.set_word_pos(0);
    }

    fn next_factor(&mut self) -> Complex64 {
        match self.policy {
            PhasePolicy::Invert => Complex64::new(-1.0, 0.0),
            PhasePolicy::Fixed(0.0) => Complex64::new(1.0, 0.0),
            PhasePolicy::Fixed(theta) if theta == PI => Complex64::new(-1.0, 0.0),
            PhasePolicy::Fixed(theta) => Complex64::from_polar(1.0, theta),
            PhasePolicy::Random => Complex64::from_polar(1.0, self.rng.random::<f64>() * TAU),
        }
    }
}

/// Equal amplitude on the good sets at the start level.
pub fn initial_state<T: Amplitude>(p: &Problem) -> Result<LevelState<T>> {
    let level = p.start_level();
    let flags = p.nogood_flags(level);
    let goods = flags.iter().filter(|nogood| !**nogood).count();
    if goods == 0 {
        return Err(Error::NoGoodsAtStart { level });
    }
    let amp = T::from_real(1.0 / (goods as f64).sqrt());
    Ok(LevelState {
        n: p.n_items(),
        level,
        amplitudes: flags
            .into_iter()
            .map(|nogood| if nogood { T::ZERO } else { amp })
            .collect(),
    })
}

/// Multiplies the amplitude of every nogood set at the state's level by the
/// policy's phase factor.
pub fn apply_phase<T: Amplitude>(
    state: &mut LevelState<T>,
    p: &Problem,
    source: &mut PhaseSource,
) -> Result<()> {
    if T::REAL && !source.policy.is_real() {
        return Err(Error::InvalidParameters(format!(
            "phase policy {:?} needs complex amplitudes",
            source.policy
        )));
    }
    source.start_level(state.level);
    for (x, nogood) in state.amplitudes.iter_mut().zip(p.nogood_flags(state.level)) {
        if nogood {
            *x = x.rotate(source.next_factor());
        }
    }
    Ok(())
}

/// Maps a level-`i` state to level `i + 1`.
pub fn propagate<T: Amplitude>(state: &LevelState<T>, coeffs: &MapCoefficients) -> LevelState<T> {
    propagate_with(state, coeffs, Propagator::Direct)
}

pub fn propagate_with<T: Amplitude>(
    state: &LevelState<T>,
    coeffs: &MapCoefficients,
    propagator: Propagator,
) -> LevelState<T> {
    assert_eq!(coeffs.n, state.n, "coefficients for a different item count");
    assert_eq!(
        coeffs.level, state.level,
        "coefficients for a different level"
    );
    let amplitudes = match propagator.resolve(state.n, state.level) {
        Propagator::Moments => {
            propagate::propagate_moments(state.n, state.level, &state.amplitudes, &coeffs.a)
        }
        _ => propagate::propagate_direct(state.n, state.level, &state.amplitudes, &coeffs.a),
    };
    LevelState {
        n: state.n,
        level: state.level + 1,
        amplitudes,
    }
}

/// Outcome of one run of the search on one problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    /// Probability of measuring a solution at the end of the run.
    pub p_soln: f64,
    pub start_level: usize,
    /// Squared amplitude on good sets on arrival at each level `K..=L`.
    pub goods_prob_by_level: Vec<f64>,
    /// `|1 − Σ|ψ|²|` at the solution level.
    pub norm_residual: f64,
}

impl TrialResult {
    pub fn goods_prob_at(&self, level: usize) -> Option<f64> {
        level
            .checked_sub(self.start_level)
            .and_then(|j| self.goods_prob_by_level.get(j).copied())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialOptions {
    pub propagator: Propagator,
    /// Use complex amplitudes even when the policy is real.
    pub force_complex: bool,
}

/// Runs the search from level `K` to `L`, calling `observe` with the state on
/// arrival at every level.
pub fn evolve<T: Amplitude>(
    p: &Problem,
    policy: PhasePolicy,
    seed: u64,
    propagator: Propagator,
    mut observe: impl FnMut(&LevelState<T>),
) -> Result<LevelState<T>> {
    let mut source = PhaseSource::new(policy, seed);
    let mut state = initial_state::<T>(p)?;
    observe(&state);
    while state.level < p.solution_level() {
        apply_phase(&mut state, p, &mut source)?;
        let coeffs = cached_coefficients(p.n_items(), state.level)?;
        state = propagate_with(&state, &coeffs, propagator);
        let norm = state.norm();
        if (1.0 - norm).abs() > NORM_DRIFT_LIMIT {
            return Err(Error::NormDrift {
                level: state.level,
                norm,
            });
        }
        observe(&state);
    }
    Ok(state)
}

fn run_on<T: Amplitude>(
    p: &Problem,
    policy: PhasePolicy,
    seed: u64,
    propagator: Propagator,
) -> Result<TrialResult> {
    let mut goods = Vec::with_capacity(p.solution_level() + 1 - p.start_level());
    let last = evolve::<T>(p, policy, seed, propagator, |s| {
        goods.push(s.goods_probability(p))
    })?;
    let p_soln = enumerate_solutions(p)
        .into_iter()
        .map(|s| last.amplitudes[rank_of_bits(s.bits())].norm_sqr())
        .sum();
    Ok(TrialResult {
        seed,
        p_soln,
        start_level: p.start_level(),
        goods_prob_by_level: goods,
        norm_residual: (1.0 - last.norm()).abs(),
    })
}

pub fn run_trial(p: &Problem, policy: PhasePolicy, seed: u64) -> Result<TrialResult> {
    run_trial_with(p, policy, seed, TrialOptions::default())
}

pub fn run_trial_with(
    p: &Problem,
    policy: PhasePolicy,
    seed: u64,
    options: TrialOptions,
) -> Result<TrialResult> {
    if policy.is_real() && !options.force_complex {
        run_on::<f64>(p, policy, seed, options.propagator)
    } else {
        run_on::<Complex64>(p, policy, seed, options.propagator)
    }
}
