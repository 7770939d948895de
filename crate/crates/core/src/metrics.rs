//! RMS value error and aggregation of runs into sweep tables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{true_values, EnvSpec};
use crate::learners::{AlgoConfig, Algorithm};
use crate::numerics::{check_len, dot_unchecked, NumericsError};
use crate::Scalar;

/// RMS values that are non-finite or above this are recorded as this value
/// and mark the run as diverged.
pub const DIVERGENCE_SENTINEL: f64 = 1e6;

/// Number of trailing episodes averaged by [`Window::Final100`].
pub const FINAL_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no records to summarize")]
    Empty,
    #[error("record {index} has {got} episodes, expected {expected}")]
    LengthMismatch { index: usize, expected: usize, got: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `sqrt(Σ_s d_s (v_s − truth_s)²)`.
pub fn weighted_rms<T: Scalar>(values: &[T], truth: &[T], d: &[T]) -> Result<T, NumericsError> {
    check_len(values.len(), truth.len())?;
    check_len(values.len(), d.len())?;
    let sq: Vec<T> = values.iter().zip(truth).map(|(&v, &t)| (v - t) * (v - t)).collect();
    Ok(dot_unchecked(d, &sq).sqrt())
}

/// RMS error of `X w` against the task's true values under weighting `d`.
pub fn rms_error<T: Scalar>(env: &EnvSpec<T>, w: &[T], d: &[T]) -> Result<T, MetricsError> {
    let v = env.features.mul_vec(w)?;
    Ok(weighted_rms(&v, &true_values(env), d)?)
}

/// Replaces non-finite or oversized errors with [`DIVERGENCE_SENTINEL`].
/// The flag is true when the value was replaced.
pub fn cap_rms(x: f64) -> (f64, bool) {
    if x.is_finite() && x <= DIVERGENCE_SENTINEL {
        (x, false)
    } else {
        (DIVERGENCE_SENTINEL, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Window {
    #[serde(rename = "final_100")]
    Final100,
    #[serde(rename = "all_episodes")]
    AllEpisodes,
}

impl Window {
    pub const ALL: [Window; 2] = [Window::Final100, Window::AllEpisodes];

    pub fn label(self) -> &'static str {
        match self {
            Window::Final100 => "final_100",
            Window::AllEpisodes => "all_episodes",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.label() == s)
    }

    /// The slice of `series` this window averages over.
    pub fn select(self, series: &[f64]) -> &[f64] {
        match self {
            Window::Final100 => &series[series.len().saturating_sub(FINAL_WINDOW)..],
            Window::AllEpisodes => series,
        }
    }

    pub fn mean(self, series: &[f64]) -> f64 {
        let s = self.select(series);
        if s.is_empty() {
            return f64::NAN;
        }
        s.iter().sum::<f64>() / s.len() as f64
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One learner run: RMS error after every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub algorithm: Algorithm,
    pub config: AlgoConfig<f64>,
    pub seed: u64,
    pub rms_series: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub window: Window,
    pub criterion: f64,
    pub criterion_stderr: f64,
    pub divergence_rate: f64,
}

/// Pointwise mean and standard error across runs, plus the window criterion:
/// the mean over runs of each run's window average.
pub fn summarize(records: &[RunRecord], window: Window) -> Result<Summary, MetricsError> {
    let first = records.first().ok_or(MetricsError::Empty)?;
    let len = first.rms_series.len();
    for (index, r) in records.iter().enumerate() {
        if r.rms_series.len() != len {
            return Err(MetricsError::LengthMismatch {
                index,
                expected: len,
                got: r.rms_series.len(),
            });
        }
    }
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    let mut column = vec![0.0; records.len()];
    for t in 0..len {
        for (dst, r) in column.iter_mut().zip(records) {
            *dst = r.rms_series[t];
        }
        let (m, se) = crate::numerics::mean_and_stderr(&column)?;
        mean.push(m);
        stderr.push(se);
    }
    let per_run: Vec<f64> = records.iter().map(|r| window.mean(&r.rms_series)).collect();
    let (criterion, criterion_stderr) = crate::numerics::mean_and_stderr(&per_run)?;
    let diverged = records.iter().filter(|r| r.diverged).count();
    Ok(Summary {
        runs: records.len(),
        mean,
        stderr,
        window,
        criterion,
        criterion_stderr,
        divergence_rate: diverged as f64 / records.len() as f64,
    })
}

/// One row of a sweep table: a grid cell aggregated over seeds under one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub task: String,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub seed_count: usize,
    pub criterion: f64,
    pub criterion_stderr: f64,
    pub window: Window,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Lowest-criterion row for `algorithm` under `window`; ties go to the
    /// smaller α, then to the earlier row.
    pub fn best(&self, algorithm: Algorithm, window: Window) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.algorithm == algorithm && r.window == window)
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if (b.criterion, b.alpha) <= (r.criterion, r.alpha) => Some(b),
                _ => Some(r),
            })
    }

    pub fn algorithms(&self) -> Vec<Algorithm> {
        let mut out: Vec<Algorithm> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.algorithm) {
                out.push(r.algorithm);
            }
        }
        out
    }
}
