//! Trajectory CSV files and the run summary record.
//!
//! The trajectory schema is fixed: see [`TRAJECTORY_HEADER`]. Floats are
//! written with shortest round-trip formatting, lines end with LF, and two
//! runs of the same config and seed produce identical files except for the
//! wall-clock column.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use maml_ode::task_model::Trajectory;

use crate::CliError;

/// The exact, versioned header of every trajectory CSV.
pub const TRAJECTORY_HEADER: &str =
    "run_id,algorithm,iter,t,phase,F_val,gradF_norm,gradf_norm,hess_evals_cum,grad_evals_cum,wall_ns";

/// Writes one trajectory to `path` under the fixed schema.
pub fn write_trajectory_csv(
    path: &Path,
    run_id: &str,
    algorithm: &str,
    traj: &Trajectory,
) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for s in &traj.samples {
            writeln!(
                out,
                "{run_id},{algorithm},{},{},{},{},{},{},{},{},{}",
                s.iter,
                s.t,
                s.phase.as_str(),
                s.maml_loss,
                s.maml_grad_norm,
                s.expected_grad_norm,
                s.hess_evals_cum,
                s.grad_evals_cum,
                s.wall_ns
            )?;
        }
        Ok(())
    };
    write(&mut out).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// One summary record per executed algorithm.
#[derive(Debug, Clone, Serialize)]
pub struct AlgoSummary {
    pub algorithm: String,
    #[serde(rename = "terminal_gradF_norm")]
    pub terminal_grad_f_norm: f64,
    pub iters: usize,
    pub t_final: f64,
    pub hess_evals: u64,
    pub grad_evals: u64,
    pub wall_ns: u64,
    pub termination: String,
}

impl AlgoSummary {
    pub fn from_trajectory(algorithm: &str, traj: &Trajectory) -> Self {
        let last = traj.last();
        AlgoSummary {
            algorithm: algorithm.to_string(),
            terminal_grad_f_norm: last.maml_grad_norm,
            iters: last.iter,
            t_final: last.t,
            hess_evals: last.hess_evals_cum,
            grad_evals: last.grad_evals_cum,
            wall_ns: last.wall_ns,
            termination: traj.termination.as_str().to_string(),
        }
    }
}

/// A parsed trajectory CSV: the shared header plus one numeric column store.
pub struct TrajectoryTable {
    pub columns: Vec<String>,
    /// Row-major cells; textual columns (`run_id`, `algorithm`, `phase`) are
    /// kept as NaN placeholders.
    pub rows: Vec<Vec<f64>>,
    pub label: String,
}

const TEXT_COLUMNS: [&str; 3] = ["run_id", "algorithm", "phase"];

/// Reads a trajectory CSV, insisting on the exact schema.
pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryTable, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::usage(format!("{} is empty", path.display())))?;
    if header != TRAJECTORY_HEADER {
        return Err(CliError::usage(format!(
            "{} does not match the trajectory schema (header `{header}`)",
            path.display()
        )));
    }
    let columns: Vec<String> = header.split(',').map(|c| c.to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(CliError::usage(format!(
                "{} row {}: expected {} fields, got {}",
                path.display(),
                i + 2,
                columns.len(),
                cells.len()
            )));
        }
        let mut row = Vec::with_capacity(columns.len());
        for (cell, col) in cells.iter().zip(&columns) {
            if TEXT_COLUMNS.contains(&col.as_str()) {
                row.push(f64::NAN);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    CliError::usage(format!(
                        "{} row {}: unparsable numeric cell `{cell}` in column `{col}`",
                        path.display(),
                        i + 2
                    ))
                })?;
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::usage(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| path.display().to_string());
    Ok(TrajectoryTable {
        columns,
        rows,
        label,
    })
}

impl TrajectoryTable {
    pub fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let idx = self.columns.iter().position(|c| c == name).ok_or_else(|| {
            CliError::usage(format!("column `{name}` absent from {}", self.label))
        })?;
        if TEXT_COLUMNS.contains(&name) {
            return Err(CliError::usage(format!("column `{name}` is not numeric")));
        }
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}
