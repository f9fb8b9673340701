//! `gbai`: validate instances, analyze ground truth, run identification
//! policies, sweep experiments, aggregate results, and render figures.
//!
//! Exit codes: 0 on success, 2 on any input or validation error, 3 when the
//! results being reported include budget-capped runs (they are still
//! written).

mod plot;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use grouped_bai::harness::{
    aggregate, read_records_csv, read_summary_csv, run_experiment, write_records_csv,
    write_summary_csv, Experiment, ExperimentConfig, SummaryDocument, SummaryRow,
};
use grouped_bai::instance::{analyze, lower_bound, ProblemInstance, RewardFamily};
use grouped_bai::policy::DEFAULT_BUDGET_CAP;
use grouped_bai::trace::JsonlSink;
use grouped_bai::{AnalysisReport, Environment, NullSink, Policy, RunReport};

#[derive(Parser)]
#[command(
    name = "gbai",
    version,
    about = "Constrained best-arm identification in grouped bandits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file and print its dimensions.
    Validate {
        /// Instance file (JSON).
        instance: PathBuf,
    },
    /// Print ground-truth analytics: feasible set, best arm, gaps, hardness
    /// index, termination budget, and the sample-complexity lower bound.
    Analyze {
        /// Instance file (JSON).
        instance: PathBuf,
        /// Confidence parameter in (0, 1).
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Emit the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Execute one policy run on an instance.
    Run {
        /// Instance file (JSON).
        instance: PathBuf,
        /// Identification policy: css-lucb, grouped-elim, or feas-then-bai.
        #[arg(long, default_value = "css-lucb", value_parser = parse_policy)]
        policy: Policy,
        /// Confidence parameter in (0, 1).
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// RNG seed, decimal or 0x-prefixed hex.
        #[arg(long, default_value = "0", value_parser = parse_seed)]
        seed: u64,
        /// Hard cap on total pulls; hitting it stops the run with a flagged
        /// best guess.
        #[arg(long, default_value_t = DEFAULT_BUDGET_CAP)]
        budget_cap: u64,
        /// Override the beta-reward concentration (beta instances only).
        #[arg(long)]
        kappa: Option<f64>,
        /// Write the per-round trace as JSON lines to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Emit the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run an experiment sweep from a config file; write records.csv,
    /// summary.csv, and summary.json to the output directory.
    Sweep {
        /// Experiment configuration file (JSON).
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the configured replication count.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the configured base seed, decimal or 0x-prefixed hex.
        #[arg(long, value_parser = parse_seed)]
        seed: Option<u64>,
        /// Override the configured confidence parameter.
        #[arg(long)]
        delta: Option<f64>,
        /// Override the configured budget cap.
        #[arg(long)]
        budget_cap: Option<u64>,
        /// Override the beta-reward concentration.
        #[arg(long)]
        kappa: Option<f64>,
        /// Restrict to these policies (repeatable).
        #[arg(long, value_parser = parse_policy)]
        policy: Vec<Policy>,
    },
    /// Re-aggregate a records.csv into summary form.
    Report {
        /// Records file written by `sweep`.
        records: PathBuf,
        /// Optional directory for summary.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the summary as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Render a summary.csv into per-experiment SVG charts plus the exact
    /// plotted points as CSV.
    Plot {
        /// Summary file written by `sweep` or `report`.
        summary: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_policy(text: &str) -> Result<Policy, String> {
    Policy::from_name(text).ok_or_else(|| {
        format!("unknown policy {text:?}: expected css-lucb, grouped-elim, or feas-then-bai")
    })
}

fn parse_seed(text: &str) -> Result<u64, String> {
    let trimmed = text.trim();
    let parsed = match trimmed
        .strip_prefix("0x")
        .or_else(|| trimmed.strip_prefix("0X"))
    {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => trimmed.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {text:?}: {e}"))
}

enum Outcome {
    Clean,
    /// Results were produced but include budget-capped runs.
    BudgetCapped,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::BudgetCapped) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Validate { instance } => cmd_validate(&instance),
        Command::Analyze {
            instance,
            delta,
            json,
        } => cmd_analyze(&instance, delta, json),
        Command::Run {
            instance,
            policy,
            delta,
            seed,
            budget_cap,
            kappa,
            trace,
            json,
        } => cmd_run(
            &instance,
            policy,
            delta,
            seed,
            budget_cap,
            kappa,
            trace.as_deref(),
            json,
        ),
        Command::Sweep {
            config,
            out,
            reps,
            seed,
            delta,
            budget_cap,
            kappa,
            policy,
        } => cmd_sweep(&config, &out, reps, seed, delta, budget_cap, kappa, &policy),
        Command::Report { records, out, json } => cmd_report(&records, out.as_deref(), json),
        Command::Plot { summary, out } => cmd_plot(&summary, &out),
    }
}

fn load_instance(path: &Path) -> Result<ProblemInstance> {
    ProblemInstance::from_path(path).with_context(|| format!("instance {}", path.display()))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        bail!("delta is {delta}, must lie strictly between 0 and 1");
    }
    Ok(())
}

/// Applies a `--kappa` override, rejecting it for reward families without a
/// concentration knob.
fn apply_kappa(inst: ProblemInstance, kappa: Option<f64>) -> Result<ProblemInstance> {
    let Some(kappa) = kappa else {
        return Ok(inst);
    };
    if !(kappa.is_finite() && kappa > 0.0) {
        bail!("kappa is {kappa}, must be a positive finite number");
    }
    match inst.reward_family() {
        RewardFamily::Beta { .. } => Ok(inst.with_concentration(kappa)),
        RewardFamily::Bernoulli => bail!("--kappa applies only to beta-reward instances"),
    }
}

fn cmd_validate(path: &Path) -> Result<Outcome> {
    let inst = load_instance(path)?;
    println!(
        "valid instance: {} arms x {} attributes, threshold {}, {} rewards",
        inst.n_arms(),
        inst.n_attrs(),
        inst.threshold(),
        inst.reward_family().name()
    );
    Ok(Outcome::Clean)
}

fn opt_text<T: std::fmt::Display>(value: Option<T>) -> String {
    value.map_or_else(|| "none".to_owned(), |v| v.to_string())
}

fn index_list(indices: &[usize]) -> String {
    if indices.is_empty() {
        "none".to_owned()
    } else {
        indices
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn cmd_analyze(path: &Path, delta: f64, json: bool) -> Result<Outcome> {
    check_delta(delta)?;
    let inst = load_instance(path)?;
    let truth = analyze(&inst);
    // The only remaining error source is infinite hardness, which the
    // report renders as absent bound fields.
    let bound = lower_bound(&inst, &truth, delta).ok();
    let report = AnalysisReport::build(&inst, &truth, bound.as_ref(), delta);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(Outcome::Clean);
    }
    println!(
        "instance: {} arms x {} attributes, threshold {}, {} rewards",
        report.n_arms, report.n_attrs, report.threshold, report.reward_family
    );
    println!("delta: {}", report.delta);
    println!(
        "feasible arms: {} (feasibility flag {})",
        index_list(&report.feasible),
        u8::from(report.feasibility_flag)
    );
    println!("best arm: {}", opt_text(report.best_arm));
    println!(
        "arm means: [{}]",
        report
            .arm_means
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!(
        "suboptimal arms: {}; risky arms: {}; second best: {}",
        index_list(&report.suboptimal),
        index_list(&report.risky),
        opt_text(report.second_best)
    );
    println!("separator: {}", opt_text(report.separator));
    match report.hardness {
        Some(h) => println!("hardness index: {h}"),
        None => println!("hardness index: infinite (best arm sits on the threshold)"),
    }
    println!(
        "termination budget: {} pulls",
        opt_text(report.termination_budget)
    );
    match &report.lower_bound {
        Some(lb) => println!(
            "lower bound: {} samples (constant {}; c1 {}, c2 {}, c3 {}){}",
            lb.samples,
            lb.constant,
            opt_text(lb.c1),
            opt_text(lb.c2),
            opt_text(lb.c3),
            if lb.heuristic {
                " [heuristic: non-bernoulli rewards]"
            } else {
                ""
            }
        ),
        None => println!("lower bound: undefined (infinite hardness)"),
    }
    Ok(Outcome::Clean)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    path: &Path,
    policy: Policy,
    delta: f64,
    seed: u64,
    budget_cap: u64,
    kappa: Option<f64>,
    trace: Option<&Path>,
    json: bool,
) -> Result<Outcome> {
    check_delta(delta)?;
    let inst = apply_kappa(load_instance(path)?, kappa)?;
    let truth = analyze(&inst);
    let mut env = Environment::new(&inst, seed);
    let result = match trace {
        Some(trace_path) => {
            let file = fs::File::create(trace_path)
                .with_context(|| format!("cannot write {}", trace_path.display()))?;
            let mut sink = JsonlSink::new(BufWriter::new(file));
            let result = policy.run(
                inst.n_arms(),
                inst.n_attrs(),
                inst.threshold(),
                delta,
                &mut env,
                budget_cap,
                &mut sink,
            )?;
            sink.finish()
                .with_context(|| format!("cannot write {}", trace_path.display()))?;
            result
        }
        None => policy.run(
            inst.n_arms(),
            inst.n_attrs(),
            inst.threshold(),
            delta,
            &mut env,
            budget_cap,
            &mut NullSink,
        )?,
    };
    let report = RunReport::build(policy, seed, delta, budget_cap, &result, &truth);
    let outcome = if report.stopped_by_budget {
        Outcome::BudgetCapped
    } else {
        Outcome::Clean
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(outcome);
    }
    println!(
        "policy {}, seed {}, delta {}",
        report.policy, report.seed, report.delta
    );
    println!(
        "declared feasible: {}; output arm: {}; matches ground truth: {}",
        report.feasibility_flag,
        opt_text(report.output_arm),
        report.correct
    );
    println!(
        "{} pulls over {} rounds{}",
        report.total_pulls,
        report.rounds,
        if report.stopped_by_budget {
            " (stopped by budget cap)"
        } else {
            ""
        }
    );
    Ok(outcome)
}

fn write_summary_files(dir: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_summary_csv(&dir.join("summary.csv"), rows)?;
    let doc = SummaryDocument::new(rows.to_vec());
    let json_path = dir.join("summary.json");
    fs::write(&json_path, serde_json::to_string_pretty(&doc)? + "\n")
        .with_context(|| format!("cannot write {}", json_path.display()))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    config_path: &Path,
    out: &Path,
    reps: Option<usize>,
    seed: Option<u64>,
    delta: Option<f64>,
    budget_cap: Option<u64>,
    kappa: Option<f64>,
    policies: &[Policy],
) -> Result<Outcome> {
    let mut config = ExperimentConfig::from_path(config_path)
        .with_context(|| format!("config {}", config_path.display()))?;
    if let Some(reps) = reps {
        config.replications = reps;
    }
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    if let Some(delta) = delta {
        config.delta = delta;
    }
    if let Some(cap) = budget_cap {
        config.budget_cap = cap;
    }
    if let Some(kappa) = kappa {
        config.concentration = Some(kappa);
    }
    if !policies.is_empty() {
        config.policies = policies.to_vec();
    }
    let config = config.normalized()?;
    let records = run_experiment(&config)?;
    let rows = aggregate(&records);
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_records_csv(&out.join("records.csv"), &records)?;
    write_summary_files(out, &rows)?;
    let capped = records
        .iter()
        .filter(|r| r.result.stopped_by_budget)
        .count();
    println!(
        "{}: {} runs over {} sweep values -> {}, {} summary rows{}",
        config.experiment.name(),
        records.len(),
        config.sweep_values.len(),
        out.join("records.csv").display(),
        rows.len(),
        if capped > 0 {
            format!(" ({capped} budget-capped runs)")
        } else {
            String::new()
        }
    );
    Ok(if capped > 0 {
        Outcome::BudgetCapped
    } else {
        Outcome::Clean
    })
}

fn cmd_report(records_path: &Path, out: Option<&Path>, json: bool) -> Result<Outcome> {
    let records = read_records_csv(records_path)
        .with_context(|| format!("records {}", records_path.display()))?;
    if records.is_empty() {
        bail!("{} contains no runs", records_path.display());
    }
    let rows = aggregate(&records);
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_summary_files(dir, &rows)?;
    }
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&SummaryDocument::new(rows.clone()))?
        );
    } else {
        println!(
            "{:<10} {:>12} {:<14} {:>6} {:>14} {:>12} {:>10} {:>7}",
            "experiment",
            "sweep_value",
            "policy",
            "reps",
            "mean_pulls",
            "stderr",
            "error_rate",
            "capped"
        );
        for row in &rows {
            println!(
                "{:<10} {:>12} {:<14} {:>6} {:>14.2} {:>12.2} {:>10.4} {:>7}",
                row.experiment.name(),
                row.sweep_value,
                row.policy.name(),
                row.replications,
                row.mean_pulls,
                row.stderr_pulls,
                row.error_rate,
                row.capped_runs
            );
        }
    }
    let capped = rows.iter().any(|r| r.capped_runs > 0);
    Ok(if capped {
        Outcome::BudgetCapped
    } else {
        Outcome::Clean
    })
}

fn cmd_plot(summary_path: &Path, out: &Path) -> Result<Outcome> {
    let rows = read_summary_csv(summary_path)
        .with_context(|| format!("summary {}", summary_path.display()))?;
    if rows.is_empty() {
        bail!("{} contains no summary rows", summary_path.display());
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;

    let mut experiments: Vec<Experiment> = Vec::new();
    for row in &rows {
        if !experiments.contains(&row.experiment) {
            experiments.push(row.experiment);
        }
    }
    for experiment in experiments {
        let subset: Vec<&SummaryRow> = rows.iter().filter(|r| r.experiment == experiment).collect();
        let x_of = |row: &SummaryRow| {
            if experiment.plots_against_hardness() {
                row.hardness
            } else {
                row.sweep_value
            }
        };
        let mut series = Vec::new();
        for policy in Policy::ALL {
            let mut points: Vec<plot::PlotPoint> = subset
                .iter()
                .filter(|r| r.policy == policy)
                .map(|r| plot::PlotPoint {
                    x: x_of(r),
                    y: r.mean_pulls,
                    stderr: r.stderr_pulls,
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            points.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite plot coordinates"));
            series.push(plot::Series {
                name: policy.name().to_owned(),
                points,
            });
        }
        let x_label = match experiment {
            Experiment::VaryN => "number of arms (N)",
            Experiment::VaryM => "number of attributes (M)",
            _ => "hardness index",
        };
        let svg = plot::render_svg(
            experiment.name(),
            x_label,
            "mean pulls (with standard error)",
            &series,
        );
        let svg_path = out.join(format!("plot_{}.svg", experiment.name()));
        fs::write(&svg_path, svg)
            .with_context(|| format!("cannot write {}", svg_path.display()))?;
        let points_path = out.join(format!("plot_{}.csv", experiment.name()));
        plot::write_points_csv(&points_path, experiment.name(), &series)?;
        println!("{} + {}", svg_path.display(), points_path.display());
    }
    Ok(Outcome::Clean)
}
