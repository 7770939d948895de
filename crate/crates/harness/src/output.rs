//! CSV tables and learning curves.
//!
//! Floats are written with 17 significant digits so a reload reproduces the
//! exact `f64` values.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use tddlab_core::learners::Algorithm;
use tddlab_core::metrics::{SweepRow, SweepTable, Window};

use crate::error::{HarnessError, Result};

pub const TABLE_HEADER: [&str; 9] = [
    "task",
    "algorithm",
    "alpha",
    "kappa",
    "zeta",
    "seed_count",
    "criterion",
    "criterion_stderr",
    "window",
];

pub const CURVE_HEADER: [&str; 3] = ["episode", "mean_rms", "stderr"];

/// Scientific notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => HarnessError::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        HarnessError::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

pub fn create_file(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    File::create(path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create_file(path)?;
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(create_file(path)?))
}

pub fn write_table(table: &SweepTable, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TABLE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in &table.rows {
        w.write_record([
            r.task.clone(),
            r.algorithm.label().to_string(),
            format_float(r.alpha),
            format_float(r.kappa),
            format_float(r.zeta),
            r.seed_count.to_string(),
            format_float(r.criterion),
            format_float(r.criterion_stderr),
            r.window.label().to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let got = r.headers().map_err(|e| csv_err(path, e))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(HarnessError::Csv {
            path: path.to_path_buf(),
            message: format!("expected header {}", header.join(",")),
        });
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| HarnessError::Csv {
        path: path.to_path_buf(),
        message: format!("record {line}: bad {name} {value:?}"),
    })
}

pub fn read_table(path: &Path) -> Result<SweepTable> {
    let mut r = reader(path, &TABLE_HEADER)?;
    let mut table = SweepTable::default();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 1;
        let algorithm = Algorithm::from_label(&rec[1]).ok_or_else(|| HarnessError::Csv {
            path: path.to_path_buf(),
            message: format!("record {line}: unknown algorithm {:?}", &rec[1]),
        })?;
        let window = Window::from_label(&rec[8]).ok_or_else(|| HarnessError::Csv {
            path: path.to_path_buf(),
            message: format!("record {line}: unknown window {:?}", &rec[8]),
        })?;
        table.rows.push(SweepRow {
            task: rec[0].to_string(),
            algorithm,
            alpha: field(path, line, "alpha", &rec[2])?,
            kappa: field(path, line, "kappa", &rec[3])?,
            zeta: field(path, line, "zeta", &rec[4])?,
            seed_count: field(path, line, "seed_count", &rec[5])?,
            criterion: field(path, line, "criterion", &rec[6])?,
            criterion_stderr: field(path, line, "criterion_stderr", &rec[7])?,
            window,
        });
    }
    Ok(table)
}

/// A learning curve: mean RMS error and its standard error per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

pub fn write_curve(mean: &[f64], stderr: &[f64], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CURVE_HEADER).map_err(|e| csv_err(path, e))?;
    for (i, (m, s)) in mean.iter().zip(stderr).enumerate() {
        w.write_record([(i + 1).to_string(), format_float(*m), format_float(*s)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a curve file; the label is the file stem.
pub fn read_curve(path: &Path) -> Result<Curve> {
    let mut r = reader(path, &CURVE_HEADER)?;
    let mut mean = Vec::new();
    let mut stderr = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 1;
        let episode: usize = field(path, line, "episode", &rec[0])?;
        if episode != line {
            return Err(HarnessError::Csv {
                path: path.to_path_buf(),
                message: format!("record {line}: episode {episode} out of order"),
            });
        }
        mean.push(field(path, line, "mean_rms", &rec[1])?);
        stderr.push(field(path, line, "stderr", &rec[2])?);
    }
    Ok(Curve {
        label: path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        mean,
        stderr,
    })
}
