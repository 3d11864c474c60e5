//! Command-line front end: run experiments, verify convergence results, scan
//! the non-convex example, estimate constants, and plot trajectories.
//!
//! Exit codes: 0 success (including hypothesis-violated checks), 1 a check
//! whose hypotheses hold failed, 2 usage or configuration error, 3 a run
//! diverged.

mod config;
mod plot;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use maml_ode::diagnostics::{
    alpha_bound_biphasic_flow, alpha_bound_maml_flow, alpha_bound_strong_convexity,
    estimate_constants_raw, meta_curvature_scan, Region,
};
use maml_ode::flow::{bi_maml_field, integrate_with_config, maml_ode_field};
use maml_ode::losses::counterexample_pool;
use maml_ode::optimizers::{run_bi_maml, run_fo_maml, run_gd_f, run_maml};
use maml_ode::task_model::{Termination, Trajectory};
use maml_ode::verify::{any_true_failure, run_checks, VerifySpec};

use config::Config;
use report::{write_trajectory_csv, AlgoSummary};

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: i32,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<maml_ode::Error> for CliError {
    fn from(e: maml_ode::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

#[derive(Parser)]
#[command(
    name = "maml-ode",
    version,
    about = "Meta-learning training dynamics: runs, verification, and plots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithms; write one trajectory CSV per algorithm
    /// plus a summary record.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir; default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verification suite; write a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate smoothness constants and the step-size bounds.
    Constants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scan the meta-loss curvature of the built-in non-convex example pool.
    Counterexample {
        #[arg(long, default_value_t = 0.4)]
        alpha: f64,
        #[arg(long, default_value_t = -3.0)]
        grid_min: f64,
        #[arg(long, default_value_t = 3.0)]
        grid_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Render trajectory CSVs as SVG line charts.
    Plot {
        /// Trajectory CSV files (shared schema).
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Column(s) to chart, e.g. F_val or gradF_norm; repeatable.
        #[arg(long, default_value = "gradF_norm")]
        column: Vec<String>,
        /// Logarithmic y axis.
        #[arg(long)]
        log_y: bool,
        #[arg(long, default_value = "out/plot.svg")]
        out: PathBuf,
    },
    /// Emit the result-to-code map document.
    TheoryMap {
        #[arg(long, default_value = "docs/theory_map.md")]
        out: PathBuf,
        /// Verification report to take statuses from.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, out, seed } => cmd_run(&config, out, seed),
        Command::Verify { config, out, seed } => cmd_verify(&config, out, seed),
        Command::Constants { config, seed } => cmd_constants(&config, seed),
        Command::Counterexample {
            alpha,
            grid_min,
            grid_max,
            step,
            out,
        } => cmd_counterexample(alpha, grid_min, grid_max, step, &out),
        Command::Plot {
            csv,
            column,
            log_y,
            out,
        } => cmd_plot(&csv, &column, log_y, &out),
        Command::TheoryMap { out, report } => cmd_theory_map(&out, report.as_deref()),
    }
}

fn ensure_out_dir(config: &Config, cli_out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = cli_out
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_run(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<i32, CliError> {
    let config = Config::load(config_path)?;
    if config.algorithms.is_empty() {
        return Err(CliError::usage("config lists no algorithms"));
    }
    let seed = config.seed_with(seed);
    let out_dir = ensure_out_dir(&config, out)?;
    let (pool, warnings) = config.build_pool(seed)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let w0 = config.build_w0(pool.dim(), seed)?;
    let mcfg = config.maml_config();

    let mut summaries = Vec::new();
    let mut diverged = false;
    for algorithm in &config.algorithms {
        let local = pool.fork_counters();
        let traj: Trajectory = match algorithm.as_str() {
            "gd_f" => run_gd_f(&local, &mcfg, &w0)?,
            "maml" => run_maml(&local, &mcfg, &w0)?,
            "fo_maml" => run_fo_maml(&local, &mcfg, &w0)?,
            "bi_maml" => run_bi_maml(&local, &mcfg, &w0)?,
            "maml_ode" => {
                let field = maml_ode_field(&local, mcfg.alpha)?;
                integrate_with_config(&field, &w0, &mcfg)?
            }
            "bi_maml_ode" => {
                let field = bi_maml_field(&local, mcfg.alpha, mcfg.eps0)?;
                integrate_with_config(&field, &w0, &mcfg)?
            }
            other => return Err(CliError::usage(format!("unknown algorithm `{other}`"))),
        };
        let run_id = format!("{algorithm}-{seed}");
        let csv_path = out_dir.join(format!("{algorithm}.csv"));
        write_trajectory_csv(&csv_path, &run_id, algorithm, &traj)?;
        let summary = AlgoSummary::from_trajectory(algorithm, &traj);
        println!(
            "{algorithm}: {} after {} iters (t = {}), terminal ||gradF|| = {:e}, hess = {}, grad = {} -> {}",
            summary.termination,
            summary.iters,
            summary.t_final,
            summary.terminal_grad_f_norm,
            summary.hess_evals,
            summary.grad_evals,
            csv_path.display()
        );
        if traj.termination == Termination::Diverged {
            diverged = true;
        }
        summaries.push(summary);
    }

    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summaries)
        .map_err(|e| CliError::usage(format!("cannot serialize summary: {e}")))?;
    std::fs::write(&summary_path, json + "\n")
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", summary_path.display())))?;
    println!("summary -> {}", summary_path.display());

    Ok(if diverged { 3 } else { 0 })
}

fn cmd_verify(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<i32, CliError> {
    let config = Config::load(config_path)?;
    let seed = config.seed_with(seed);
    let out_dir = ensure_out_dir(&config, out)?;
    let (pool, warnings) = config.build_pool(seed)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let w0 = config.build_w0(pool.dim(), seed)?;
    let flow = config.flow.unwrap_or_default();
    let mut spec = VerifySpec::new(
        config.maml.alpha,
        config.maml.beta,
        config.maml.eps,
        config.maml.eps0,
        w0,
    );
    spec.checks = config.checks.clone().unwrap_or_default();
    spec.flow_beta = flow.beta;
    spec.flow_window = flow.window;
    if let Some(p) = config.probes {
        spec.probes = p;
    }

    let results = run_checks(&pool, &spec)?;
    for r in &results {
        let status = serde_json::to_string(&r.status).unwrap_or_default();
        println!(
            "{:<28} {:<22} margin {:>12.4e}  {}",
            r.check,
            status.trim_matches('"'),
            r.margin,
            r.details
        );
    }
    let report = out_dir.join("verify_report.json");
    let json = serde_json::to_string_pretty(&results)
        .map_err(|e| CliError::usage(format!("cannot serialize report: {e}")))?;
    std::fs::write(&report, json + "\n")
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", report.display())))?;
    println!("report -> {}", report.display());

    Ok(if any_true_failure(&results) { 1 } else { 0 })
}

fn cmd_constants(config_path: &Path, seed: Option<u64>) -> Result<i32, CliError> {
    let config = Config::load(config_path)?;
    let seed = config.seed_with(seed);
    let (pool, warnings) = config.build_pool(seed)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let w0 = config.build_w0(pool.dim(), seed)?;
    let half_width = config.region_half_width.unwrap_or(3.0);
    let region = Region::cube(&w0, half_width)?;
    let probes = config.probes.unwrap_or(4096);
    let c = estimate_constants_raw(&pool, &region, probes)?;

    println!("region: cube around w0, half-width {half_width}");
    println!("L     = {}", c.l);
    println!("mu    = {}", c.mu);
    println!("kappa = {}", c.kappa);
    println!("sigma = {}", c.sigma);
    match c.f_star {
        Some(f) => println!("f*    = {f}"),
        None => println!("f*    = unavailable"),
    }
    println!("exact = {}", c.exact);
    if c.mu <= 0.0 {
        println!("pool not strongly convex on region (mu <= 0); step-size bounds undefined");
        return Ok(1);
    }
    let k = (1.0 + (c.l / c.mu).sqrt()) * c.sigma + 0.01 * (1.0 + c.sigma);
    println!(
        "alpha bound (meta-flow convergence)   = {}",
        alpha_bound_maml_flow(&c)
    );
    println!(
        "alpha bound (biphasic, eps0 = {})   = {}",
        config.maml.eps0,
        alpha_bound_biphasic_flow(&c, config.maml.eps0)
    );
    println!(
        "alpha bound (curvature window, K = {k:.4}) = {}",
        alpha_bound_strong_convexity(&c, k)
    );
    Ok(0)
}

fn cmd_counterexample(
    alpha: f64,
    grid_min: f64,
    grid_max: f64,
    step: f64,
    out: &Path,
) -> Result<i32, CliError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(CliError::usage(format!(
            "step must be positive (got {step})"
        )));
    }
    if !(grid_min.is_finite() && grid_max.is_finite() && grid_min < grid_max) {
        return Err(CliError::usage(format!(
            "need grid_min < grid_max (got [{grid_min}, {grid_max}])"
        )));
    }
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out.display())))?;
    let pool = counterexample_pool();
    let scan = meta_curvature_scan(&pool, alpha, grid_min, grid_max, step)?;

    let csv_path = out.join("counterexample_hess.csv");
    let mut body = String::from("w,d2F\n");
    for (w, h) in &scan.rows {
        body.push_str(&format!("{w},{h}\n"));
    }
    std::fs::write(&csv_path, body)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", csv_path.display())))?;

    println!(
        "min F'' = {} at w = {} (alpha = {alpha}, grid [{grid_min}, {grid_max}] step {step})",
        scan.min_hess, scan.argmin_hess
    );
    println!(
        "F' sign-change intervals: {} found{}",
        scan.grad_zero_intervals.len(),
        if scan.grad_zero_intervals.is_empty() {
            String::new()
        } else {
            let shown: Vec<String> = scan
                .grad_zero_intervals
                .iter()
                .take(8)
                .map(|(a, b)| format!("[{a:.4}, {b:.4}]"))
                .collect();
            format!(", first: {}", shown.join(" "))
        }
    );
    println!(
        "F' slope sign changes: {} ({})",
        scan.grad_slope_sign_changes,
        if scan.min_hess < 0.0 {
            "meta-loss non-convex on the grid"
        } else {
            "no negative curvature found"
        }
    );
    println!("curvature table -> {}", csv_path.display());
    Ok(0)
}

fn cmd_plot(
    csvs: &[PathBuf],
    columns: &[String],
    log_y: bool,
    out: &Path,
) -> Result<i32, CliError> {
    let tables: Vec<report::TrajectoryTable> = csvs
        .iter()
        .map(|p| report::read_trajectory_csv(p))
        .collect::<Result<_, _>>()?;
    let mut charts = Vec::new();
    for column in columns {
        let mut series = Vec::new();
        for table in &tables {
            series.push(plot::Series {
                label: table.label.clone(),
                xs: table.column("iter")?,
                ys: table.column(column)?,
            });
        }
        charts.push(plot::Chart {
            column: column.clone(),
            series,
        });
    }
    let svg = plot::render(&charts, log_y)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(out, svg)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
    println!("chart -> {}", out.display());
    Ok(0)
}

fn cmd_theory_map(out: &Path, report: Option<&Path>) -> Result<i32, CliError> {
    let mut statuses = BTreeMap::new();
    if let Some(report_path) = report {
        let text = std::fs::read_to_string(report_path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", report_path.display())))?;
        let entries: Vec<serde_json::Value> = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid report: {e}")))?;
        for entry in entries {
            if let (Some(check), Some(status)) = (
                entry.get("check").and_then(|v| v.as_str()),
                entry.get("status").and_then(|v| v.as_str()),
            ) {
                statuses.insert(check.to_string(), status.to_string());
            }
        }
    }
    let doc = maml_ode::docs_map::emit_theory_map(&statuses)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(out, doc)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
    println!("map -> {}", out.display());
    Ok(0)
}
