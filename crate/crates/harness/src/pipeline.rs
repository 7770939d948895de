//! End-to-end commands: run or sweep a configuration and write its outputs.

use std::path::{Path, PathBuf};

use tddlab_core::metrics::{SweepTable, Window};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::output::{read_curve, read_table, write_curve, write_table, write_text};
use crate::runner::{run_grid, run_sweep, with_workers, SweepOutcome};
use crate::svg::{curve_axes, curve_series, emit_svg, sensitivity_axes, sensitivity_series};

/// Paths written for one sweep or run.
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

fn best_table(outcome: &SweepOutcome) -> SweepTable {
    let mut rows = Vec::new();
    for cell in outcome.best_cells() {
        rows.extend(
            outcome
                .table
                .rows
                .iter()
                .filter(|r| {
                    r.window == outcome.window
                        && r.algorithm == cell.point.algorithm
                        && r.alpha == cell.point.alpha
                        && r.kappa == cell.point.kappa
                        && r.zeta == cell.point.zeta
                })
                .cloned(),
        );
    }
    SweepTable { rows }
}

fn write_outputs(outcome: &SweepOutcome, dir: &Path, table_name: &str, with_sensitivity: bool) -> Result<Written> {
    let mut w = Written::default();
    let table_path = dir.join(table_name);
    write_table(&outcome.table, &table_path)?;
    w.files.push(table_path);
    let best_path = dir.join("best.csv");
    write_table(&best_table(outcome), &best_path)?;
    w.files.push(best_path);

    let mut curves = Vec::new();
    for cell in outcome.best_cells() {
        let path = dir.join("curves").join(format!("{}.csv", cell.point.algorithm.label()));
        write_curve(&cell.summary.mean, &cell.summary.stderr, &path)?;
        curves.push(read_curve(&path)?);
        w.files.push(path);
    }
    if !curves.is_empty() {
        let path = dir.join("curves.svg");
        let title = format!("{}: RMS error over episodes (best α per algorithm)", outcome.task);
        emit_svg(&curve_series(&curves), &path, &curve_axes(&title))?;
        w.files.push(path);
    }
    if with_sensitivity && !outcome.table.rows.is_empty() {
        let path = dir.join("sensitivity.svg");
        emit_svg(
            &sensitivity_series(&outcome.table, outcome.window),
            &path,
            &sensitivity_axes(&outcome.table, outcome.window),
        )?;
        w.files.push(path);
    }
    if !outcome.failures.is_empty() {
        let path = dir.join("failures.txt");
        let text: String = outcome
            .failures
            .iter()
            .map(|(p, msg)| format!("{} alpha={} kappa={} zeta={}: {msg}\n", p.algorithm, p.alpha, p.kappa, p.zeta))
            .collect();
        write_text(&path, &text)?;
        w.files.push(path);
    }
    Ok(w)
}

/// Runs the full grid on `workers` threads and writes `sweep.csv`,
/// `best.csv`, the best curves and both charts under the output directory.
pub fn sweep(cfg: &ExperimentConfig, workers: usize) -> Result<(SweepOutcome, Written)> {
    let outcome = with_workers(workers, || run_sweep(cfg))??;
    let written = write_outputs(&outcome, &cfg.out, "sweep.csv", true)?;
    Ok((outcome, written))
}

/// Runs only the first grid point of each algorithm.
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<(SweepOutcome, Written)> {
    let points = cfg.first_points();
    let outcome = with_workers(workers, || run_grid(cfg, &points))??;
    let written = write_outputs(&outcome, &cfg.out, "run.csv", false)?;
    Ok((outcome, written))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Sensitivity,
    Curves,
}

/// Renders a sweep table (sensitivity) or curve files (curves) to SVG.
pub fn plot(inputs: &[PathBuf], kind: PlotKind, window: Window, out: &Path) -> Result<()> {
    if inputs.is_empty() {
        return Err(HarnessError::config("no input CSV given"));
    }
    match kind {
        PlotKind::Sensitivity => {
            let mut table = SweepTable::default();
            for p in inputs {
                table.rows.extend(read_table(p)?.rows);
            }
            let series = sensitivity_series(&table, window);
            if series.is_empty() {
                return Err(HarnessError::config(format!("no rows for window {window}")));
            }
            emit_svg(&series, out, &sensitivity_axes(&table, window))
        }
        PlotKind::Curves => {
            let curves = inputs.iter().map(|p| read_curve(p)).collect::<Result<Vec<_>>>()?;
            emit_svg(&curve_series(&curves), out, &curve_axes("RMS error over episodes"))
        }
    }
}
