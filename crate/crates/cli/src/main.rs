use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qlattice::classical::{backtrack_cost, backtrack_cost_ordered, shuffled_order};
use qlattice::coeffs::solve_coefficients;
use qlattice::harness::{
    self, default_betas, default_ratios, default_sizes, derive_seed, Family, SweepConfig,
    SweepOutput,
};
use qlattice::problem::{
    generate_3sat_soluble, generate_unstructured, nogood_count, theory, Problem,
};
use qlattice::simulator::{run_trial, PhasePolicy};

#[derive(Parser)]
#[command(
    name = "qlattice",
    version,
    about = "Exact simulation of quantum search over the lattice of sets"
)]
struct Cli {
    /// Base seed for generation and trials.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Unstructured,
    Sat3,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficients of the level map and their equation residuals.
    Coeffs {
        #[arg(long = "n")]
        n_items: usize,
        #[arg(long)]
        level: usize,
    },
    /// Generate a problem file.
    Gen(GenArgs),
    /// Run trials of the search on one problem.
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        /// invert, random or fixed:<theta>.
        #[arg(long, default_value = "invert")]
        policy: PhasePolicy,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Add the goods probability on arrival at each level.
        #[arg(long)]
        trace_levels: bool,
    },
    /// Cost of chronological backtracking on one problem.
    Backtrack {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Try items in a random order drawn from --seed instead of 1..N.
        #[arg(long)]
        shuffle_order: bool,
    },
    /// Mean repetitions against constraint density.
    SweepBeta {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
    },
    /// Success probability against problem size.
    SweepSize {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        betas: Vec<f64>,
    },
    /// Mean repetitions for soluble random 3SAT against clauses per variable.
    #[command(name = "sweep-3sat")]
    Sweep3sat {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Spread of the repetitions against constraint density, per policy.
    Variance {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_value = "invert,random")]
        policies: Vec<PhasePolicy>,
    },
    /// Phase-transition estimates for the unstructured ensemble.
    Theory {
        #[arg(long = "n")]
        n_items: usize,
        /// Solution level; N/2 when absent.
        #[arg(long)]
        level: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Item count of an unstructured problem.
    #[arg(long = "n")]
    n_items: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Variable count of a 3SAT problem.
    #[arg(long)]
    vars: Option<usize>,
    #[arg(long)]
    clauses: Option<usize>,
    /// Insoluble 3SAT draws allowed before giving up.
    #[arg(long, default_value_t = 10_000)]
    max_attempts: usize,
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem file written by `gen`.
    #[arg(long, conflicts_with = "kind")]
    problem: Option<PathBuf>,
    /// Generate the problem inline instead of reading a file.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long = "n")]
    n_items: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    vars: Option<usize>,
    #[arg(long)]
    clauses: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// N for unstructured sweeps, variable count for 3SAT.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Trials averaged per instance under the random policy.
    #[arg(long, default_value_t = harness::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value = "invert")]
    policy: PhasePolicy,
    #[arg(long, default_value_t = harness::DEFAULT_P_FLOOR)]
    p_floor: f64,
    #[arg(long, default_value_t = 10_000)]
    max_attempts: usize,
    /// Skip grid points with more nogoods than available pairs.
    #[arg(long)]
    skip_infeasible: bool,
    /// Also write one row per instance to this file.
    #[arg(long)]
    instances: Option<PathBuf>,
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_rows<T: Serialize>(cli: &Cli, rows: &[T]) -> Result<()> {
    let mut out = open_output(cli.out.as_ref())?;
    match cli.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn generate(
    kind: Kind,
    n_items: Option<usize>,
    beta: Option<f64>,
    vars: Option<usize>,
    clauses: Option<usize>,
    seed: u64,
    max_attempts: usize,
) -> Result<Problem> {
    match kind {
        Kind::Unstructured => {
            let (Some(n), Some(beta)) = (n_items, beta) else {
                bail!("unstructured problems need --n and --beta");
            };
            Ok(generate_unstructured(n, beta, seed)?)
        }
        Kind::Sat3 => {
            let (Some(vars), Some(clauses)) = (vars, clauses) else {
                bail!("3SAT problems need --vars and --clauses");
            };
            let (p, rejected) =
                generate_3sat_soluble(vars, clauses, seed, max_attempts, |s, a| {
                    derive_seed(&[s, a as u64])
                })?;
            if rejected > 0 {
                eprintln!("rejected {rejected} insoluble draws");
            }
            Ok(p)
        }
    }
}

fn load_problem(args: &ProblemArgs, seed: u64) -> Result<Problem> {
    match (&args.problem, args.kind) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            Problem::from_json(&text)
                .with_context(|| format!("invalid problem file {}", path.display()))
        }
        (None, Some(kind)) => generate(
            kind,
            args.n_items,
            args.beta,
            args.vars,
            args.clauses,
            seed,
            10_000,
        ),
        (None, None) => bail!("give --problem FILE or --kind with generation flags"),
    }
}

fn sweep_config(
    cli: &Cli,
    args: &SweepArgs,
    family: Family,
    sizes: Vec<usize>,
    params: Vec<f64>,
) -> SweepConfig {
    SweepConfig {
        samples: args.samples,
        trials: args.trials,
        policy: args.policy,
        base_seed: cli.seed,
        p_floor: args.p_floor,
        max_attempts: args.max_attempts,
        workers: cli.workers,
        skip_infeasible: args.skip_infeasible,
        ..SweepConfig::new(family, args.sizes.clone().unwrap_or(sizes), params)
    }
}

#[derive(Serialize)]
struct SweepReport<'a> {
    family: &'static str,
    policy: &'a str,
    samples: usize,
    trials: usize,
    base_seed: u64,
    #[serde(flatten)]
    output: &'a SweepOutput,
}

fn write_sweep(cli: &Cli, args: &SweepArgs, cfg: &SweepConfig, output: &SweepOutput) -> Result<()> {
    let mut out = open_output(cli.out.as_ref())?;
    match cli.format {
        Format::Csv => harness::write_points_csv(&output.points, &mut out)?,
        Format::Json => {
            let report = SweepReport {
                family: cfg.family.name(),
                policy: cfg.policy.name(),
                samples: cfg.samples,
                trials: cfg.effective_trials(),
                base_seed: cfg.base_seed,
                output,
            };
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    if let Some(path) = &args.instances {
        let file =
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        harness::write_instances_csv(&output.instances, BufWriter::new(file))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CoeffRow {
    #[serde(rename = "N")]
    n: usize,
    i: usize,
    k: usize,
    a_k: f64,
    residual_max: f64,
}

#[derive(Serialize)]
struct BacktrackRow {
    nodes_visited: u64,
    consistent_nodes: u64,
    found_solution: bool,
    solution: String,
}

#[derive(Serialize)]
struct TheoryRow {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    level: usize,
    beta: f64,
    m: usize,
    rho_l: f64,
    expected_solutions: f64,
    beta_crit: f64,
    beta_poly: f64,
}

#[derive(Serialize)]
struct TrialRow {
    seed: u64,
    trial: usize,
    p_soln: f64,
    norm_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    goods_prob_by_level: Option<Vec<f64>>,
}

fn simulate(
    cli: &Cli,
    problem: &ProblemArgs,
    policy: PhasePolicy,
    trials: usize,
    trace: bool,
) -> Result<()> {
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let p = load_problem(problem, cli.seed)?;
    let rows = (0..trials)
        .map(|t| {
            let seed = cli.seed.wrapping_add(t as u64);
            let r = run_trial(&p, policy, seed)?;
            Ok(TrialRow {
                seed,
                trial: t,
                p_soln: r.p_soln,
                norm_residual: r.norm_residual,
                goods_prob_by_level: trace.then_some(r.goods_prob_by_level),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if cli.format == Format::Json {
        return write_rows(cli, &rows);
    }
    // Trace columns are named by level, so the header is built by hand.
    let mut out = open_output(cli.out.as_ref())?;
    let mut w = csv::Writer::from_writer(&mut out);
    let mut header: Vec<String> = ["seed", "trial", "p_soln", "norm_residual"]
        .map(String::from)
        .to_vec();
    if trace {
        header.extend((p.start_level()..=p.solution_level()).map(|l| format!("goods_l{l}")));
    }
    w.write_record(&header)?;
    for row in &rows {
        let mut record = vec![
            row.seed.to_string(),
            row.trial.to_string(),
            format!("{:?}", row.p_soln),
            format!("{:?}", row.norm_residual),
        ];
        if let Some(trace) = &row.goods_prob_by_level {
            record.extend(trace.iter().map(|g| format!("{g:?}")));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Coeffs { n_items, level } => {
            let c = solve_coefficients(*n_items, *level)?;
            let rows: Vec<CoeffRow> =
                c.a.iter()
                    .enumerate()
                    .map(|(k, &a_k)| CoeffRow {
                        n: c.n,
                        i: c.level,
                        k,
                        a_k,
                        residual_max: c.max_residual,
                    })
                    .collect();
            write_rows(cli, &rows)
        }
        Command::Gen(args) => {
            let p = generate(
                args.kind,
                args.n_items,
                args.beta,
                args.vars,
                args.clauses,
                cli.seed,
                args.max_attempts,
            )?;
            let mut out = open_output(cli.out.as_ref())?;
            writeln!(out, "{}", p.to_json()?)?;
            out.flush()?;
            Ok(())
        }
        Command::Simulate {
            problem,
            policy,
            trials,
            trace_levels,
        } => simulate(cli, problem, *policy, *trials, *trace_levels),
        Command::Backtrack {
            problem,
            shuffle_order,
        } => {
            let p = load_problem(problem, cli.seed)?;
            let stats = if *shuffle_order {
                backtrack_cost_ordered(&p, &shuffled_order(p.n_items(), cli.seed))?
            } else {
                backtrack_cost(&p)
            };
            write_rows(
                cli,
                &[BacktrackRow {
                    nodes_visited: stats.nodes_visited,
                    consistent_nodes: stats.consistent_nodes,
                    found_solution: stats.found_solution,
                    solution: stats.solution.map(|s| s.to_string()).unwrap_or_default(),
                }],
            )
        }
        Command::SweepBeta { sweep, betas } => {
            let mut cfg = sweep_config(
                cli,
                sweep,
                Family::Unstructured,
                vec![10],
                betas.clone().unwrap_or_else(default_betas),
            );
            cfg.skip_infeasible |= betas.is_none();
            let output = harness::sweep_beta(&cfg)?;
            write_sweep(cli, sweep, &cfg, &output)
        }
        Command::SweepSize { sweep, betas } => {
            let cfg = sweep_config(
                cli,
                sweep,
                Family::Unstructured,
                default_sizes(),
                betas.clone(),
            );
            let output = harness::sweep_size(&cfg)?;
            write_sweep(cli, sweep, &cfg, &output)
        }
        Command::Sweep3sat { sweep, ratios } => {
            let cfg = sweep_config(
                cli,
                sweep,
                Family::Sat3,
                vec![5],
                ratios.clone().unwrap_or_else(default_ratios),
            );
            let output = harness::sweep_3sat(&cfg)?;
            write_sweep(cli, sweep, &cfg, &output)
        }
        Command::Variance {
            sweep,
            betas,
            policies,
        } => {
            let mut cfg = sweep_config(
                cli,
                sweep,
                Family::Unstructured,
                vec![10],
                betas.clone().unwrap_or_else(default_betas),
            );
            cfg.skip_infeasible |= betas.is_none();
            let points = harness::variance_curve(&cfg, policies)?;
            let output = SweepOutput {
                points,
                instances: Vec::new(),
            };
            write_sweep(cli, sweep, &cfg, &output)
        }
        Command::Theory {
            n_items,
            level,
            betas,
        } => {
            let level = level.unwrap_or(n_items / 2);
            if level == 0 {
                bail!("solution level must be positive");
            }
            let b = *n_items as f64 / level as f64;
            let rows = betas
                .clone()
                .unwrap_or_else(default_betas)
                .into_iter()
                .map(|beta| {
                    let m = nogood_count(*n_items, beta);
                    let t = theory(*n_items, level, m, b)?;
                    Ok(TheoryRow {
                        n: *n_items,
                        level,
                        beta,
                        m,
                        rho_l: t.rho_l,
                        expected_solutions: t.expected_solutions,
                        beta_crit: t.beta_crit,
                        beta_poly: t.beta_poly,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_rows(cli, &rows)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
