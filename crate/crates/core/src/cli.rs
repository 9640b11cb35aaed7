//! `dcaf` command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use crate::allocation::{evaluate, ActionRule, ActionSpace, AllocationProblem, GainMatrix};
use crate::config::{Config, SimPolicy, SourceKind};
use crate::experiments::{per_action_aggregates, AggregateScope};
use crate::gain::{fit_linear, LinearEstimator};
use crate::logio::{
    emit_figure_data, gain_matrix, generate_records, read_logs, read_report, training_records,
    write_logs, AssignmentRow, FigureData, LogRecord, ReportKind, ReportTable,
};
use crate::oracle::{brute_force_mckp, OracleConfig};
use crate::sim::{compare_policies, run_simulation, totals};
use crate::solver::{default_interval, lambda_sweep, linear_grid, sample_pool, solve_lambda};

#[derive(Debug, Parser)]
#[command(name = "dcaf", version, about = "Per-request computation allocation under a budget")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// -v for info, -vv for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic request log.
    Gen(GenArgs),
    /// Solve for the multiplier that spends the budget on a request log.
    Solve(SolveArgs),
    /// Total gain and cost over a grid of multipliers.
    Sweep(SweepArgs),
    /// Assign actions to every logged request.
    Allocate(AllocateArgs),
    /// Run the serving simulator.
    Simulate(SimulateArgs),
    /// Summarize the reports in a results directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub requests: Option<usize>,
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub costs: Option<Vec<f64>>,
    /// Also fit a linear estimator on the logged actions.
    #[arg(long)]
    pub fit_estimator: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SourceArg {
    Synthetic,
    Pool,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Request log (JSON lines).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub costs: Option<Vec<f64>>,
    #[arg(long)]
    pub budget: Option<f64>,
    /// Budget as a fraction of the all-max-action cost.
    #[arg(long, conflicts_with = "budget")]
    pub budget_fraction: Option<f64>,
    /// Predict rows lacking `per_action_gains` with this estimator.
    #[arg(long)]
    pub estimator: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Use this multiplier instead of solving for the budget.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_power: Option<f64>,
    /// Compare with the exact optimum (small inputs only).
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub policy: Option<SimPolicy>,
    #[arg(long)]
    pub ticks: Option<u64>,
    #[arg(long)]
    pub base_rate: Option<f64>,
    #[arg(long)]
    pub spike_tick: Option<u64>,
    #[arg(long)]
    pub spike_multiplier: Option<f64>,
    #[arg(long)]
    pub no_spike: bool,
    #[arg(long)]
    pub no_controller: bool,
    #[arg(long)]
    pub baseline_action: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Defaults to `--out`.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(config, &cli.out, a),
        Command::Solve(a) => cmd_solve(config, &cli.out, a),
        Command::Sweep(a) => cmd_sweep(config, &cli.out, a),
        Command::Allocate(a) => cmd_allocate(config, &cli.out, a),
        Command::Simulate(a) => cmd_simulate(config, &cli.out, a),
        Command::Report(a) => cmd_report(a.dir.as_deref().unwrap_or(&cli.out)),
    }
}

fn out_path(out: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out.join(name))
}

fn cmd_gen(mut config: Config, out: &Path, a: GenArgs) -> Result<()> {
    if let Some(n) = a.requests {
        config.dataset.requests = n;
    }
    if let Some(s) = a.source {
        config.gain.source = match s {
            SourceArg::Synthetic => SourceKind::Synthetic,
            SourceArg::Pool => SourceKind::Pool,
        };
    }
    if let Some(s) = a.sigma {
        config.gain.sigma = s;
    }
    if let Some(alpha) = a.alpha {
        config.gain.alpha = alpha;
    }
    if a.costs.is_some() {
        config.actions.costs = a.costs;
    }
    let spec = config.dataset_spec()?;
    let (records, summary) = generate_records(&spec)?;
    let path = out_path(out, "dataset.jsonl")?;
    write_logs(&records, &path)?;
    println!(
        "wrote {} records to {} (mean value {:.4}, assumption violations {})",
        summary.records,
        path.display(),
        summary.mean_value,
        summary.assumption_violations
    );
    if a.fit_estimator {
        let train = training_records(&records);
        let est = fit_linear(&train, spec.actions.len(), config.dataset.regularization)?;
        let est_path = out_path(out, "estimator.txt")?;
        fs::write(&est_path, est.to_text())?;
        println!("wrote estimator fitted on {} records to {}", train.len(), est_path.display());
    }
    Ok(())
}

struct LoadedProblem {
    records: Vec<LogRecord>,
    problem: AllocationProblem<GainMatrix>,
}

fn load_problem(config: &mut Config, p: &ProblemArgs) -> Result<LoadedProblem> {
    if p.costs.is_some() {
        config.actions.costs = p.costs.clone();
    }
    let actions = config.action_space()?;
    let records = read_logs(&p.input).with_context(|| format!("reading {}", p.input.display()))?;
    if records.is_empty() {
        bail!("{} holds no records", p.input.display());
    }
    let estimator = match &p.estimator {
        Some(path) => Some(
            LinearEstimator::from_text(&fs::read_to_string(path)?)
                .with_context(|| format!("reading {}", path.display()))?,
        ),
        None => None,
    };
    let gains = gain_matrix(&records, &actions, estimator.as_ref())?;
    let budget = resolve_budget(config, p, &actions, gains.len());
    let problem = AllocationProblem::new(actions, gains, budget)?;
    Ok(LoadedProblem { records, problem })
}

fn resolve_budget(config: &Config, p: &ProblemArgs, actions: &ActionSpace, n: usize) -> f64 {
    if let Some(b) = p.budget {
        return b;
    }
    match (p.budget_fraction, config.solver.budget) {
        (None, Some(b)) => b,
        (fraction, _) => fraction.unwrap_or(config.solver.budget_fraction) * n as f64 * actions.max_cost(),
    }
}

fn cmd_solve(mut config: Config, out: &Path, a: SolveArgs) -> Result<()> {
    if let Some(n) = a.pool_size {
        config.solver.pool_size = n;
    }
    if let Some(e) = a.epsilon {
        config.solver.epsilon = e;
    }
    let loaded = load_problem(&mut config, &a.problem)?;
    let problem = if config.solver.pool_size == 0 {
        loaded.problem
    } else {
        // the budget stays per pool; resample rows only
        let rows: Vec<&[f64]> = loaded.problem.gains().rows().collect();
        let pool = sample_pool(&rows, config.solver.pool_size, config.seed)?;
        let gains = GainMatrix::from_rows(loaded.problem.actions().len(), &pool)?;
        AllocationProblem::new(loaded.problem.actions().clone(), gains, loaded.problem.budget())?
    };
    let r = solve_lambda(&problem, &config.solver.solver_config())?;
    let path = out_path(out, "solve.csv")?;
    emit_figure_data(&FigureData::Solve(&r), ReportKind::Solve, &path)?;
    println!("lambda*   {}", r.lambda_star);
    println!("cost      {} (budget {}, gap {})", r.achieved_cost, r.budget, r.gap);
    println!("gain      {}", r.achieved_gain);
    println!("served    {} of {}", r.served_count, problem.num_requests());
    println!("converged {} after {} iterations ({:?})", r.converged, r.iterations, r.regime);
    Ok(())
}

fn cmd_sweep(mut config: Config, out: &Path, a: SweepArgs) -> Result<()> {
    let loaded = load_problem(&mut config, &a.problem)?;
    let p = &loaded.problem;
    let lo = a.lambda_min.unwrap_or(config.sweep.lambda_min);
    let hi = match a.lambda_max.or(config.sweep.lambda_max) {
        Some(hi) => hi,
        None => default_interval(p.gains(), p.actions()).1,
    };
    let points = a.points.unwrap_or(config.sweep.points);
    let sweep = lambda_sweep(p, &linear_grid(lo, hi, points))?;
    let path = out_path(out, "fig3.csv")?;
    let rows = emit_figure_data(&FigureData::Fig3(&sweep), ReportKind::Fig3, &path)?;
    println!("wrote {rows} sweep points over [{lo}, {hi}] to {}", path.display());
    Ok(())
}

fn cmd_allocate(mut config: Config, out: &Path, a: AllocateArgs) -> Result<()> {
    let loaded = load_problem(&mut config, &a.problem)?;
    let p = &loaded.problem;
    let lambda = match a.lambda {
        Some(l) => l,
        None => solve_lambda(p, &config.solver.solver_config())?.lambda_star,
    };
    if !(lambda.is_finite() && lambda >= 0.0) {
        bail!("lambda must be finite and >= 0, got {lambda}");
    }
    let assignment = p.assign(&ActionRule::new(lambda).with_max_power(a.max_power));
    let summary = evaluate(&assignment, p)?;
    let rows: Vec<AssignmentRow> = loaded
        .records
        .iter()
        .zip(&assignment.choices)
        .enumerate()
        .map(|(i, (r, c))| AssignmentRow {
            request_id: r.request_id.clone(),
            action: *c,
            cost: c.map_or(0.0, |j| p.actions().cost(j)),
            gain: c.map_or(0.0, |j| p.gains().row(i)[j]),
        })
        .collect();
    emit_figure_data(&FigureData::Assignment(&rows), ReportKind::Assignment, &out_path(out, "assignment.csv")?)?;
    let aggs = per_action_aggregates(p, AggregateScope::Served(&assignment))?;
    emit_figure_data(&FigureData::Fig5(&aggs), ReportKind::Fig5, &out_path(out, "fig5.csv")?)?;
    println!("lambda    {lambda}");
    println!("served    {} of {}", summary.served_count, p.num_requests());
    println!("cost      {} (budget {})", summary.total_cost, p.budget());
    println!("gain      {}", summary.total_gain);
    if a.oracle {
        let (_, best) = brute_force_mckp(p, OracleConfig::default())?;
        if summary.total_cost > p.budget() {
            println!("optimum   {} (cost {}; this assignment exceeds the budget)", best.total_gain, best.total_cost);
        } else {
            let gap = if best.total_gain > 0.0 {
                (best.total_gain - summary.total_gain) / best.total_gain
            } else {
                0.0
            };
            println!("optimum   {} (cost {}, relative gap {gap})", best.total_gain, best.total_cost);
        }
    }
    Ok(())
}

fn cmd_simulate(mut config: Config, out: &Path, a: SimulateArgs) -> Result<()> {
    let s = &mut config.sim;
    if let Some(p) = a.policy {
        s.policy = p;
    }
    if let Some(t) = a.ticks {
        s.ticks = t;
    }
    if let Some(r) = a.base_rate {
        s.base_rate = r;
    }
    if let Some(t) = a.spike_tick {
        s.spike_tick = Some(t);
    }
    if a.no_spike {
        s.spike_tick = None;
    }
    if let Some(m) = a.spike_multiplier {
        s.spike_multiplier = m;
    }
    if a.no_controller {
        s.controller = false;
    }
    if let Some(j) = a.baseline_action {
        s.baseline_action = j;
    }
    if let Some(sigma) = a.sigma {
        config.gain.sigma = sigma;
    }
    let sim = config.sim_config()?;
    let fig6 = out_path(out, "fig6.csv")?;
    match config.sim.policy {
        SimPolicy::Compare => {
            let c = compare_policies(&sim, config.sim.baseline_action, config.sim.offline_sample)?;
            let streams = [("dcaf", c.dcaf.as_slice()), ("baseline", c.baseline.as_slice())];
            emit_figure_data(&FigureData::Fig6(&streams), ReportKind::Fig6, &fig6)?;
            emit_figure_data(&FigureData::Fig4(&c.offline_curves), ReportKind::Fig4, &out_path(out, "fig4.csv")?)?;
            let summary = serde_json::json!({
                "dcaf": c.dcaf_totals,
                "baseline": c.baseline_totals,
                "offline": c.offline,
            });
            fs::write(out_path(out, "summary.json")?, serde_json::to_string_pretty(&summary)? + "\n")?;
            for (name, t) in [("dcaf", c.dcaf_totals), ("baseline", c.baseline_totals)] {
                println!(
                    "{name:<9} arrivals {} failed {} cost {} gain {} mean fail rate {:.6}",
                    t.arrivals, t.failed, t.total_cost, t.total_gain, t.mean_fail_rate
                );
            }
            if let Some(o) = c.offline {
                println!(
                    "offline   cost saving at equal gain {:.4}, gain lift at equal cost {:.4}",
                    o.cost_saving, o.gain_lift
                );
            }
        }
        policy => {
            let ticks = run_simulation(&sim)?;
            let name = if policy == SimPolicy::Dcaf { "dcaf" } else { "baseline" };
            emit_figure_data(&FigureData::Fig6(&[(name, ticks.as_slice())]), ReportKind::Fig6, &fig6)?;
            let t = totals(&ticks);
            println!(
                "{name:<9} arrivals {} failed {} cost {} gain {} mean fail rate {:.6}",
                t.arrivals, t.failed, t.total_cost, t.total_gain, t.mean_fail_rate
            );
        }
    }
    info!("wrote {}", fig6.display());
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut text = String::new();
    for path in entries {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                let table = read_report(&path).with_context(|| format!("reading {}", path.display()))?;
                writeln!(text, "{name:<16} {}", describe(&table)?)?;
            }
            Some("jsonl") => {
                let records = read_logs(&path).with_context(|| format!("reading {}", path.display()))?;
                writeln!(text, "{name:<16} {} log records", records.len())?;
            }
            _ => {}
        }
    }
    if text.is_empty() {
        bail!("no reports in {}", dir.display());
    }
    print!("{text}");
    Ok(())
}

fn describe(t: &ReportTable) -> Result<String> {
    let sum = |c: &str| -> Result<f64> { Ok(t.floats(c)?.iter().fold(0.0, |a, x| a + x)) };
    Ok(match t.kind {
        ReportKind::Fig3 => {
            let l = t.floats("lambda")?;
            let g = t.floats("total_gain")?;
            format!(
                "lambda sweep: {} points, lambda {}..{}, gain {}..{}",
                l.len(),
                l.first().unwrap_or(&0.0),
                l.last().unwrap_or(&0.0),
                g.last().unwrap_or(&0.0),
                g.first().unwrap_or(&0.0)
            )
        }
        ReportKind::Fig4 => format!("cost-gain curves: {} points", t.rows.len()),
        ReportKind::Fig5 => {
            let r = t.floats("gain_per_cost")?;
            let monotone = r.windows(2).all(|w| w[1] <= w[0]);
            format!("per-action totals: {} actions, gain per cost non-increasing: {monotone}", r.len())
        }
        ReportKind::Fig6 => {
            let c = t.column("policy").expect("fixed schema");
            let fr = t.floats("fail_rate")?;
            let mut policies: Vec<&str> = t.rows.iter().map(|r| r[c].as_str()).collect();
            policies.dedup();
            let parts: Vec<String> = policies
                .iter()
                .map(|p| {
                    let rates: Vec<f64> =
                        t.rows.iter().zip(&fr).filter(|(r, _)| r[c] == *p).map(|(_, f)| *f).collect();
                    let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
                    let max = rates.iter().cloned().fold(0.0, f64::max);
                    format!("{p}: {} ticks, mean fail rate {mean:.4}, max {max:.4}", rates.len())
                })
                .collect();
            parts.join("; ")
        }
        ReportKind::Solve => match t.rows.first() {
            Some(r) => format!("lambda* {} cost {} gain {} converged {}", r[1], r[2], r[3], r[9]),
            None => "empty solve report".into(),
        },
        ReportKind::Assignment => format!(
            "{} requests, cost {}, gain {}",
            t.rows.len(),
            sum("cost")?,
            sum("gain")?
        ),
    })
}
