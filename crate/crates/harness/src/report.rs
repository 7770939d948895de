//! JSON report of the exact oracle quantities for one task.

use std::path::Path;

use serde::Serialize;
use tddlab_core::envs::{eval_weighting, make_env, EnvSpec, Weighting};
use tddlab_core::learners::StepSchedule;
use tddlab_core::metrics::rms_error;
use tddlab_core::numerics::DenseMatrix;
use tddlab_core::oracle::{
    epsilon_sequence, expected_matrices, fixed_point_of, fixed_point_residual, matrix_diagnostics, msbe, mspbe_of,
    particular_fixed_point, schedule_diagnostics, MatrixDiagnostics, ScheduleDiagnostics,
};

use crate::error::{HarnessError, Result};
use crate::output::write_text;

/// Terms of the step-size sequence checked by the schedule diagnostics.
pub const SCHEDULE_TERMS: u64 = 1_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct FixedPoint {
    /// `true` when `A` is nonsingular and `w` is the unique solution.
    pub unique: bool,
    pub w: Vec<f64>,
    pub rank: usize,
    pub values: Vec<f64>,
    pub residual_inf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonSample {
    pub n: u64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub task: String,
    pub n_states: usize,
    pub feature_dim: usize,
    pub gamma: f64,
    pub weighting: Weighting,
    pub d: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub diagnostics: MatrixDiagnostics,
    pub fixed_point: Option<FixedPoint>,
    pub fixed_point_error: Option<String>,
    pub w0: Vec<f64>,
    pub mspbe_w0: Option<f64>,
    pub mspbe_error: Option<String>,
    pub msbe_w0: f64,
    pub rms_w0: f64,
    pub schedule: StepSchedule<f64>,
    pub schedule_diagnostics: ScheduleDiagnostics,
    pub epsilon: Vec<EpsilonSample>,
}

fn rows(m: &DenseMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn oracle_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::config(e.to_string())
}

pub fn oracle_report(env: &EnvSpec<f64>, weighting: Weighting, schedule: StepSchedule<f64>) -> Result<OracleReport> {
    env.validate().map_err(oracle_err)?;
    let d = eval_weighting(env, weighting).map_err(oracle_err)?;
    let e = expected_matrices(env, &d).map_err(oracle_err)?;
    let diagnostics = matrix_diagnostics(&e);
    let (fixed_point, fixed_point_error) = match fixed_point_of(&e) {
        Ok(w) => (Some((w, diagnostics.a_rank, true)), None),
        Err(unique_err) => match particular_fixed_point(&e) {
            Ok((w, rank)) => (Some((w, rank, false)), Some(unique_err.to_string())),
            Err(err) => (None, Some(format!("{unique_err}; {err}"))),
        },
    };
    let fixed_point = match fixed_point {
        Some((w, rank, unique)) => Some(FixedPoint {
            unique,
            rank,
            values: env.features.mul_vec(&w).map_err(oracle_err)?,
            residual_inf: fixed_point_residual(&e, &w).map_err(oracle_err)?,
            w,
        }),
        None => None,
    };
    let w0 = env.initial_weights.clone();
    let (mspbe_w0, mspbe_error) = match mspbe_of(&e, &w0) {
        Ok(j) => (Some(j), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let eps = epsilon_sequence(&schedule, SCHEDULE_TERMS);
    let epsilon = (0..=6)
        .map(|k| 10u64.pow(k))
        .map(|n| EpsilonSample {
            n,
            epsilon: eps[(n - 1) as usize],
        })
        .collect();
    Ok(OracleReport {
        task: env.task.label(),
        n_states: env.n_states,
        feature_dim: env.feature_dim(),
        gamma: env.gamma,
        weighting,
        a: rows(&e.a),
        b: e.b.clone(),
        c: rows(&e.c),
        diagnostics,
        fixed_point,
        fixed_point_error,
        mspbe_w0,
        mspbe_error,
        msbe_w0: msbe(env, &w0, &d).map_err(oracle_err)?,
        rms_w0: rms_error(env, &w0, &d).map_err(oracle_err)?,
        w0,
        schedule,
        schedule_diagnostics: schedule_diagnostics(&schedule, SCHEDULE_TERMS),
        epsilon,
        d,
    })
}

/// Reads an environment from its JSON form and checks its invariants.
pub fn read_env_json(path: &Path) -> Result<EnvSpec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let env: EnvSpec<f64> = serde_json::from_str(&text)
        .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    env.validate()
        .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    // True values come from the task tag, so its shape must match the tables.
    let reference = make_env::<f64>(env.task).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    if reference.n_states != env.n_states || reference.feature_dim() != env.feature_dim() {
        return Err(HarnessError::config(format!(
            "{}: task {} has {} states and {} features, tables have {} and {}",
            path.display(),
            env.task.label(),
            reference.n_states,
            reference.feature_dim(),
            env.n_states,
            env.feature_dim()
        )));
    }
    Ok(env)
}

pub fn write_env_json(env: &EnvSpec<f64>, path: &Path) -> Result<()> {
    write_text(path, &to_json(env)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<S: Serialize>(value: &S) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::config(e.to_string()))?;
    text.push('\n');
    Ok(text)
}
