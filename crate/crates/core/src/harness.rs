//! Batch experiments over problem ensembles.
//!
//! A sweep walks a grid of (size, parameter) points, generates `samples`
//! instances per point, runs the search on each and aggregates the expected
//! number of repetitions `T = 1/p_soln` and the related baselines. Instance
//! and trial seeds are derived by hashing, so any row can be regenerated on
//! its own and the output does not depend on scheduling.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{
    backtrack_cost, backtrack_cost_ordered, random_assignment_p, random_selection_p, shuffled_order,
};
use crate::error::{Error, Result};
use crate::problem::{generate_3sat_soluble, generate_unstructured, nogood_count, Problem};
use crate::simulator::{run_trial, PhasePolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Unstructured,
    Sat3,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Unstructured => "unstructured",
            Family::Sat3 => "sat3",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub family: Family,
    /// `N` for unstructured problems, variable count `n` for 3SAT.
    pub sizes: Vec<usize>,
    /// `β = m/N` for unstructured problems, `c/n` for 3SAT.
    pub params: Vec<f64>,
    pub samples: usize,
    /// Trials averaged per instance under the random policy.
    pub trials: usize,
    pub policy: PhasePolicy,
    pub base_seed: u64,
    /// Smallest `p_soln` used when forming `T`; lower values are clipped and flagged.
    pub p_floor: f64,
    /// Rejected draws allowed per 3SAT instance before giving up.
    pub max_attempts: usize,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Drop unstructured grid points that ask for more nogoods than there are
    /// pairs outside the solution, instead of failing.
    pub skip_infeasible: bool,
}

pub const DEFAULT_P_FLOOR: f64 = 1e-12;
pub const DEFAULT_TRIALS: usize = 10;

const ORDER_STREAM: u64 = 0x006f_7264_6572;

pub fn default_betas() -> Vec<f64> {
    (0..=24).map(|j| j as f64 * 0.25).collect()
}

pub fn default_ratios() -> Vec<f64> {
    (0..=16).map(|j| j as f64 * 0.5).collect()
}

pub fn default_sizes() -> Vec<usize> {
    vec![6, 8, 10, 12, 14, 16]
}

impl SweepConfig {
    pub fn new(family: Family, sizes: Vec<usize>, params: Vec<f64>) -> Self {
        SweepConfig {
            family,
            sizes,
            params,
            samples: 100,
            trials: DEFAULT_TRIALS,
            policy: PhasePolicy::Invert,
            base_seed: 0,
            p_floor: DEFAULT_P_FLOOR,
            max_attempts: 10_000,
            workers: 0,
            skip_infeasible: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameters(
                "samples must be at least 1".into(),
            ));
        }
        if self.sizes.is_empty() || self.params.is_empty() {
            return Err(Error::InvalidParameters(
                "sweep grids must be nonempty".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameters("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Trials actually run per instance; deterministic policies need one.
    pub fn effective_trials(&self) -> usize {
        if self.policy == PhasePolicy::Random {
            self.trials
        } else {
            1
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines seed material into a new seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6a09_e667_f3bc_c909, |h, &p| mix64(h ^ mix64(p)))
}

pub fn instance_seed(base: u64, family: Family, size: usize, param: f64, instance: usize) -> u64 {
    derive_seed(&[
        base,
        family as u64,
        size as u64,
        param.to_bits(),
        instance as u64,
    ])
}

pub fn trial_seed(instance_seed: u64, trial: usize) -> u64 {
    derive_seed(&[instance_seed, trial as u64])
}

/// Whether an unstructured instance at (`n_items`, `beta`) can be generated.
pub fn unstructured_feasible(n_items: usize, beta: f64) -> bool {
    let level = n_items / 2;
    let pairs = n_items * n_items.saturating_sub(1) / 2 - level * level.saturating_sub(1) / 2;
    nogood_count(n_items, beta) <= pairs
}

/// Clause count for a clause/variable ratio, rounding half up.
pub fn clause_count(vars: usize, ratio: f64) -> usize {
    (ratio * vars as f64 + 0.5).floor() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub family: Family,
    pub size: usize,
    pub param: f64,
    pub policy: String,
    pub instance: usize,
    pub seed: u64,
    pub n_items: usize,
    pub nogoods: usize,
    /// Draws rejected as insoluble before this instance (3SAT only).
    pub rejected: usize,
    pub trials: usize,
    pub p_soln: f64,
    pub t: f64,
    pub clipped: bool,
    pub max_norm_residual: f64,
    pub random_selection_p: f64,
    pub random_assignment_p: Option<f64>,
    pub backtrack_nodes: u64,
    pub backtrack_consistent_nodes: u64,
    /// Goods probability on arrival at each level, averaged over trials.
    pub goods_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointStats {
    pub family: Family,
    pub size: usize,
    pub param: f64,
    pub policy: String,
    pub samples: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// Mean over instances of `T = 1/p_soln`.
    pub mean_t: f64,
    pub mean_p: f64,
    pub std_t: Option<f64>,
    pub stderr_t: Option<f64>,
    pub mean_random_selection_p: f64,
    /// `mean_p / mean_random_selection_p`.
    pub ratio_selection: f64,
    pub mean_random_assignment_p: Option<f64>,
    pub ratio_assignment: Option<f64>,
    pub mean_backtrack_nodes: f64,
    pub mean_backtrack_consistent_nodes: f64,
    pub clipped: usize,
    pub rejected: usize,
    pub goods_trace: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepOutput {
    pub points: Vec<PointStats>,
    pub instances: Vec<InstanceRecord>,
}

fn generate(cfg: &SweepConfig, size: usize, param: f64, seed: u64) -> Result<(Problem, usize)> {
    match cfg.family {
        Family::Unstructured => Ok((generate_unstructured(size, param, seed)?, 0)),
        Family::Sat3 => generate_3sat_soluble(
            size,
            clause_count(size, param),
            seed,
            cfg.max_attempts,
            |s, a| derive_seed(&[s, a as u64]),
        ),
    }
}

/// Generates and evaluates one instance of a grid point.
pub fn run_instance(
    cfg: &SweepConfig,
    size: usize,
    param: f64,
    instance: usize,
) -> Result<InstanceRecord> {
    let seed = instance_seed(cfg.base_seed, cfg.family, size, param, instance);
    let (problem, rejected) = generate(cfg, size, param, seed)?;
    let trials = cfg.effective_trials();
    let mut p_sum = 0.0;
    let mut residual: f64 = 0.0;
    let mut trace: Vec<f64> = Vec::new();
    for t in 0..trials {
        let r = run_trial(&problem, cfg.policy, trial_seed(seed, t))?;
        p_sum += r.p_soln;
        residual = residual.max(r.norm_residual);
        if trace.is_empty() {
            trace = vec![0.0; r.goods_prob_by_level.len()];
        }
        for (acc, g) in trace.iter_mut().zip(&r.goods_prob_by_level) {
            *acc += g;
        }
    }
    let p_soln = p_sum / trials as f64;
    trace.iter_mut().for_each(|g| *g /= trials as f64);
    let clipped = p_soln < cfg.p_floor;
    // The planted solution {1..L} is the first branch in natural order, so
    // unstructured instances are searched in a random item order.
    let bt = match cfg.family {
        Family::Unstructured => backtrack_cost_ordered(
            &problem,
            &shuffled_order(problem.n_items(), derive_seed(&[seed, ORDER_STREAM])),
        )?,
        Family::Sat3 => backtrack_cost(&problem),
    };
    Ok(InstanceRecord {
        family: cfg.family,
        size,
        param,
        policy: cfg.policy.name().to_string(),
        instance,
        seed: problem.seed().unwrap_or(seed),
        n_items: problem.n_items(),
        nogoods: problem.nogoods().len(),
        rejected,
        trials,
        p_soln,
        t: 1.0 / p_soln.max(cfg.p_floor),
        clipped,
        max_norm_residual: residual,
        random_selection_p: random_selection_p(&problem),
        random_assignment_p: match cfg.family {
            Family::Sat3 => Some(random_assignment_p(&problem)?),
            Family::Unstructured => None,
        },
        backtrack_nodes: bt.nodes_visited,
        backtrack_consistent_nodes: bt.consistent_nodes,
        goods_trace: trace,
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    s / c as f64
}

/// Aggregates the instances of one grid point.
pub fn aggregate(cfg: &SweepConfig, records: &[InstanceRecord]) -> PointStats {
    let first = &records[0];
    let samples = records.len();
    let mean_t = mean(records.iter().map(|r| r.t));
    let std_t = (samples > 1).then(|| {
        let ss: f64 = records.iter().map(|r| (r.t - mean_t).powi(2)).sum();
        (ss / (samples - 1) as f64).sqrt()
    });
    let mean_p = mean(records.iter().map(|r| r.p_soln));
    let mean_sel = mean(records.iter().map(|r| r.random_selection_p));
    let mean_assign = records
        .iter()
        .map(|r| r.random_assignment_p)
        .collect::<Option<Vec<f64>>>()
        .map(|v| mean(v.into_iter()));
    let depth = records
        .iter()
        .map(|r| r.goods_trace.len())
        .min()
        .unwrap_or(0);
    let goods_trace = (0..depth)
        .map(|j| mean(records.iter().map(|r| r.goods_trace[j])))
        .collect();
    PointStats {
        family: first.family,
        size: first.size,
        param: first.param,
        policy: first.policy.clone(),
        samples,
        trials: first.trials,
        base_seed: cfg.base_seed,
        mean_t,
        mean_p,
        std_t,
        stderr_t: std_t.map(|s| s / (samples as f64).sqrt()),
        mean_random_selection_p: mean_sel,
        ratio_selection: mean_p / mean_sel,
        mean_random_assignment_p: mean_assign,
        ratio_assignment: mean_assign.map(|a| mean_p / a),
        mean_backtrack_nodes: mean(records.iter().map(|r| r.backtrack_nodes as f64)),
        mean_backtrack_consistent_nodes: mean(
            records.iter().map(|r| r.backtrack_consistent_nodes as f64),
        ),
        clipped: records.iter().filter(|r| r.clipped).count(),
        rejected: records.iter().map(|r| r.rejected).sum(),
        goods_trace,
    }
}

fn in_pool<R: Send>(workers: usize, job: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameters(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

/// Runs every (size, parameter, instance) of the grid. Points are ordered by
/// size, then parameter; instances by index within each point.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let grid: Vec<(usize, f64)> = cfg
        .sizes
        .iter()
        .flat_map(|&s| cfg.params.iter().map(move |&p| (s, p)))
        .filter(|&(s, p)| {
            !(cfg.skip_infeasible && cfg.family == Family::Unstructured)
                || unstructured_feasible(s, p)
        })
        .collect();
    if grid.is_empty() {
        return Err(Error::InvalidParameters("no feasible grid points".into()));
    }
    let jobs: Vec<(usize, f64, usize)> = grid
        .iter()
        .flat_map(|&(s, p)| (0..cfg.samples).map(move |j| (s, p, j)))
        .collect();
    let results: Vec<Result<InstanceRecord>> = in_pool(cfg.workers, || {
        jobs.par_iter()
            .map(|&(s, p, j)| {
                run_instance(cfg, s, p, j).map_err(|e| {
                    e.context(format!(
                        "{} size={s} param={p} instance={j}",
                        cfg.family.name()
                    ))
                })
            })
            .collect()
    })?;
    let instances = results.into_iter().collect::<Result<Vec<_>>>()?;
    let points = instances
        .chunks(cfg.samples)
        .map(|chunk| aggregate(cfg, chunk))
        .collect();
    Ok(SweepOutput { points, instances })
}

fn require(cfg: &SweepConfig, family: Family) -> Result<()> {
    if cfg.family != family {
        return Err(Error::InvalidParameters(format!(
            "this sweep needs the {} family",
            family.name()
        )));
    }
    Ok(())
}

/// ⟨T⟩ against β for each `N`.
pub fn sweep_beta(cfg: &SweepConfig) -> Result<SweepOutput> {
    require(cfg, Family::Unstructured)?;
    run_sweep(cfg)
}

/// Scaling with `N` at fixed β, including the enhancement over random selection.
pub fn sweep_size(cfg: &SweepConfig) -> Result<SweepOutput> {
    require(cfg, Family::Unstructured)?;
    for &n in &cfg.sizes {
        if n % 2 != 0 {
            return Err(Error::InvalidParameters(format!(
                "size sweep needs even N, got {n}"
            )));
        }
    }
    run_sweep(cfg)
}

/// ⟨T⟩ and baselines against `c/n` for soluble random 3SAT.
pub fn sweep_3sat(cfg: &SweepConfig) -> Result<SweepOutput> {
    require(cfg, Family::Sat3)?;
    run_sweep(cfg)
}

/// Spread of `T` against β, one block of rows per policy.
pub fn variance_curve(cfg: &SweepConfig, policies: &[PhasePolicy]) -> Result<Vec<PointStats>> {
    require(cfg, Family::Unstructured)?;
    let mut rows = Vec::new();
    for &policy in policies {
        let cfg = SweepConfig {
            policy,
            ..cfg.clone()
        };
        rows.extend(run_sweep(&cfg)?.points);
    }
    Ok(rows)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn fmt_trace(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Serialize)]
struct PointRow<'a> {
    family: &'a str,
    size: usize,
    param: f64,
    policy: &'a str,
    samples: usize,
    trials: usize,
    base_seed: u64,
    mean_t: f64,
    mean_p: f64,
    std_t: String,
    stderr_t: String,
    mean_random_selection_p: f64,
    ratio_selection: f64,
    mean_random_assignment_p: String,
    ratio_assignment: String,
    mean_backtrack_nodes: f64,
    mean_backtrack_consistent_nodes: f64,
    clipped: usize,
    rejected: usize,
    goods_trace: String,
}

#[derive(Serialize)]
struct InstanceRow<'a> {
    family: &'a str,
    size: usize,
    param: f64,
    policy: &'a str,
    instance: usize,
    seed: u64,
    n_items: usize,
    nogoods: usize,
    rejected: usize,
    trials: usize,
    p_soln: f64,
    t: f64,
    clipped: bool,
    max_norm_residual: f64,
    random_selection_p: f64,
    random_assignment_p: String,
    backtrack_nodes: u64,
    backtrack_consistent_nodes: u64,
    goods_trace: String,
}

/// Writes aggregate rows as CSV with a header; optional values are empty
/// fields and the goods trace is `;`-separated.
pub fn write_points_csv<W: Write>(points: &[PointStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(PointRow {
            family: p.family.name(),
            size: p.size,
            param: p.param,
            policy: &p.policy,
            samples: p.samples,
            trials: p.trials,
            base_seed: p.base_seed,
            mean_t: p.mean_t,
            mean_p: p.mean_p,
            std_t: fmt_opt(p.std_t),
            stderr_t: fmt_opt(p.stderr_t),
            mean_random_selection_p: p.mean_random_selection_p,
            ratio_selection: p.ratio_selection,
            mean_random_assignment_p: fmt_opt(p.mean_random_assignment_p),
            ratio_assignment: fmt_opt(p.ratio_assignment),
            mean_backtrack_nodes: p.mean_backtrack_nodes,
            mean_backtrack_consistent_nodes: p.mean_backtrack_consistent_nodes,
            clipped: p.clipped,
            rejected: p.rejected,
            goods_trace: fmt_trace(&p.goods_trace),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_instances_csv<W: Write>(instances: &[InstanceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in instances {
        w.serialize(InstanceRow {
            family: r.family.name(),
            size: r.size,
            param: r.param,
            policy: &r.policy,
            instance: r.instance,
            seed: r.seed,
            n_items: r.n_items,
            nogoods: r.nogoods,
            rejected: r.rejected,
            trials: r.trials,
            p_soln: r.p_soln,
            t: r.t,
            clipped: r.clipped,
            max_norm_residual: r.max_norm_residual,
            random_selection_p: r.random_selection_p,
            random_assignment_p: fmt_opt(r.random_assignment_p),
            backtrack_nodes: r.backtrack_nodes,
            backtrack_consistent_nodes: r.backtrack_consistent_nodes,
            goods_trace: fmt_trace(&r.goods_trace),
        })?;
    }
    w.flush()?;
    Ok(())
}
