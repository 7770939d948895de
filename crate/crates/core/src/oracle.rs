//! Exact expectations of the linear TD system and quantities derived from them.
//!
//! With `d` a distribution over non-terminal states and transitions drawn from
//! the target policy,
//!
//! * `A = E[x(x − γx')ᵀ]`, `b = E[r x]`, `C = E[x xᵀ]`
//! * the TD fixed point solves `A w = b`
//! * `MSPBE(w) = (b − A w)ᵀ C⁻¹ (b − A w)`
//!
//! Everything is computed by exact enumeration of the transition tables.

use serde::Serialize;
use thiserror::Error;

use crate::envs::EnvSpec;
use crate::learners::StepSchedule;
use crate::numerics::{
    dot_unchecked, max_abs, rank, solve_consistent, solve_linear, DenseMatrix, NumericsError,
};
use crate::Scalar;

const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("state distribution: {0}")]
    Distribution(String),
    #[error("no unique TD fixed point: A is singular (rank {rank} of {dim})")]
    NoUniqueFixedPoint { rank: usize, dim: usize },
    #[error("C is singular (rank {rank} of {dim}); MSPBE undefined")]
    SingularC { rank: usize, dim: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationSet<T> {
    pub a: DenseMatrix<T>,
    pub b: Vec<T>,
    pub c: DenseMatrix<T>,
    pub d: Vec<T>,
}

impl<T: Scalar> ExpectationSet<T> {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `b − A w`, the expected TD update direction `E[δx]`.
    pub fn residual(&self, w: &[T]) -> Result<Vec<T>, NumericsError> {
        let aw = self.a.mul_vec(w)?;
        Ok(self.b.iter().zip(&aw).map(|(&b, &v)| b - v).collect())
    }
}

fn check_distribution<T: Scalar>(env: &EnvSpec<T>, d: &[T]) -> Result<(), OracleError> {
    if d.len() != env.n_states {
        return Err(OracleError::Distribution(format!(
            "expected {} entries, got {}",
            env.n_states,
            d.len()
        )));
    }
    let mut total = 0.0;
    for (s, &ds) in d.iter().enumerate() {
        let v = ds.as_f64();
        if !v.is_finite() || v < 0.0 {
            return Err(OracleError::Distribution(format!("d[{s}] = {v} is not a probability")));
        }
        if env.terminal[s] && v != 0.0 {
            return Err(OracleError::Distribution(format!("terminal state {s} has weight {v}")));
        }
        total += v;
    }
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(OracleError::Distribution(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Exact `A`, `b`, `C` under target-policy dynamics and state weighting `d`.
pub fn expected_matrices<T: Scalar>(env: &EnvSpec<T>, d: &[T]) -> Result<ExpectationSet<T>, OracleError> {
    check_distribution(env, d)?;
    let p = env.feature_dim();
    let mut a = DenseMatrix::zeros(p, p);
    let mut b = vec![T::zero(); p];
    let mut c = DenseMatrix::zeros(p, p);
    let mut diff = vec![T::zero(); p];
    for s in 0..env.n_states {
        let ds = d[s];
        if ds == T::zero() {
            continue;
        }
        let x = env.features.row(s);
        c.add_outer(ds, x, x)?;
        for (act, outcomes) in env.transitions[s].iter().enumerate() {
            let pa = env.target[s][act];
            if pa == T::zero() {
                continue;
            }
            for o in outcomes {
                let weight = ds * pa * o.probability;
                let x_next = env.features.row(o.next_state);
                for ((dst, &xi), &xn) in diff.iter_mut().zip(x).zip(x_next) {
                    *dst = xi - env.gamma * xn;
                }
                a.add_outer(weight, x, &diff)?;
                for (bi, &xi) in b.iter_mut().zip(x) {
                    *bi += weight * o.reward * xi;
                }
            }
        }
    }
    Ok(ExpectationSet {
        a,
        b,
        c,
        d: d.to_vec(),
    })
}

/// The unique solution of `A w = b`.
pub fn td_fixed_point<T: Scalar>(env: &EnvSpec<T>, d: &[T]) -> Result<Vec<T>, OracleError> {
    let e = expected_matrices(env, d)?;
    fixed_point_of(&e)
}

pub fn fixed_point_of<T: Scalar>(e: &ExpectationSet<T>) -> Result<Vec<T>, OracleError> {
    solve_linear(&e.a, &e.b).map_err(|err| match err {
        NumericsError::Singular { .. } => OracleError::NoUniqueFixedPoint {
            rank: rank(&e.a),
            dim: e.dim(),
        },
        other => other.into(),
    })
}

/// Some solution of `A w = b` when `A` is singular but the system is
/// consistent, together with the rank of `A`.
pub fn particular_fixed_point<T: Scalar>(e: &ExpectationSet<T>) -> Result<(Vec<T>, usize), OracleError> {
    Ok(solve_consistent(&e.a, &e.b)?)
}

fn c_inverse_times<T: Scalar>(e: &ExpectationSet<T>, v: &[T]) -> Result<Vec<T>, OracleError> {
    solve_linear(&e.c, v).map_err(|err| match err {
        NumericsError::Singular { .. } => OracleError::SingularC {
            rank: rank(&e.c),
            dim: e.dim(),
        },
        other => other.into(),
    })
}

pub fn mspbe_of<T: Scalar>(e: &ExpectationSet<T>, w: &[T]) -> Result<T, OracleError> {
    let r = e.residual(w)?;
    let y = c_inverse_times(e, &r)?;
    Ok(dot_unchecked(&r, &y).max(T::zero()))
}

pub fn mspbe<T: Scalar>(env: &EnvSpec<T>, w: &[T], d: &[T]) -> Result<T, OracleError> {
    mspbe_of(&expected_matrices(env, d)?, w)
}

/// Gradient of the MSPBE, `−2 Aᵀ C⁻¹ (b − A w)`.
pub fn mspbe_gradient_of<T: Scalar>(e: &ExpectationSet<T>, w: &[T]) -> Result<Vec<T>, OracleError> {
    let r = e.residual(w)?;
    let y = c_inverse_times(e, &r)?;
    let g = e.a.transpose().mul_vec(&y)?;
    Ok(g.into_iter().map(|v| T::lit(-2.0) * v).collect())
}

pub fn mspbe_gradient<T: Scalar>(env: &EnvSpec<T>, w: &[T], d: &[T]) -> Result<Vec<T>, OracleError> {
    mspbe_gradient_of(&expected_matrices(env, d)?, w)
}

/// Mean-squared Bellman error `‖V_w − B V_w‖²_d` under the target policy.
pub fn msbe<T: Scalar>(env: &EnvSpec<T>, w: &[T], d: &[T]) -> Result<T, OracleError> {
    check_distribution(env, d)?;
    let v = env.features.mul_vec(w)?;
    let mut total = T::zero();
    for s in 0..env.n_states {
        if d[s] == T::zero() {
            continue;
        }
        let mut backup = T::zero();
        for (act, outcomes) in env.transitions[s].iter().enumerate() {
            let pa = env.target[s][act];
            for o in outcomes {
                backup += pa * o.probability * (o.reward + env.gamma * v[o.next_state]);
            }
        }
        let err = v[s] - backup;
        total += d[s] * err * err;
    }
    Ok(total)
}

/// `ε_1..=ε_{n_max}` from `ε_n = α_n (1 + ε_{n−1})`, `ε_0 = 0`.
pub fn epsilon_sequence<T: Scalar>(s: &StepSchedule<T>, n_max: u64) -> Vec<T> {
    let mut out = Vec::with_capacity(n_max as usize);
    let mut eps = T::zero();
    for n in 1..=n_max {
        eps = s.alpha(n) * (T::one() + eps);
        out.push(eps);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixDiagnostics {
    pub dim: usize,
    pub a_rank: usize,
    pub a_nonsingular: bool,
    pub c_rank: usize,
    pub c_nonsingular: bool,
    pub c_symmetric: bool,
}

pub fn matrix_diagnostics<T: Scalar>(e: &ExpectationSet<T>) -> MatrixDiagnostics {
    let dim = e.dim();
    let a_rank = rank(&e.a);
    let c_rank = rank(&e.c);
    MatrixDiagnostics {
        dim,
        a_rank,
        a_nonsingular: a_rank == dim,
        c_rank,
        c_nonsingular: c_rank == dim,
        c_symmetric: e.c.is_symmetric(T::lit(1e-12)),
    }
}

/// Step-size conditions checked over a finite prefix: `α_n ∈ (0, 1)`,
/// `Σα_n` growing without bound and `Σα_n²` levelling off.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleDiagnostics {
    pub terms: u64,
    pub alpha_in_unit_interval: bool,
    pub non_increasing: bool,
    pub sum_alpha_tenth: f64,
    pub sum_alpha: f64,
    pub sum_alpha_sq_tenth: f64,
    pub sum_alpha_sq: f64,
}

pub fn schedule_diagnostics<T: Scalar>(s: &StepSchedule<T>, terms: u64) -> ScheduleDiagnostics {
    let tenth = (terms / 10).max(1);
    let mut in_unit = true;
    let mut non_increasing = true;
    let mut prev = f64::INFINITY;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let (mut sum_tenth, mut sum_sq_tenth) = (0.0, 0.0);
    for n in 1..=terms {
        let a = s.alpha(n).as_f64();
        in_unit &= a > 0.0 && a < 1.0;
        non_increasing &= a <= prev;
        prev = a;
        sum += a;
        sum_sq += a * a;
        if n == tenth {
            sum_tenth = sum;
            sum_sq_tenth = sum_sq;
        }
    }
    ScheduleDiagnostics {
        terms,
        alpha_in_unit_interval: in_unit,
        non_increasing,
        sum_alpha_tenth: sum_tenth,
        sum_alpha: sum,
        sum_alpha_sq_tenth: sum_sq_tenth,
        sum_alpha_sq: sum_sq,
    }
}

/// `‖A w − b‖∞`.
pub fn fixed_point_residual<T: Scalar>(e: &ExpectationSet<T>, w: &[T]) -> Result<T, OracleError> {
    Ok(max_abs(&e.residual(w)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{eval_weighting, make_env, true_values, BairdPolicy, Representation, Task, Weighting};

    fn rw(m: usize) -> EnvSpec<f64> {
        make_env(Task::RandomWalk {
            states: m,
            representation: Representation::Tabular,
        })
        .unwrap()
    }

    fn uniform(env: &EnvSpec<f64>) -> Vec<f64> {
        eval_weighting(env, Weighting::Uniform).unwrap()
    }

    #[test]
    fn tabular_c_is_diagonal() {
        let env = rw(3);
        let e = expected_matrices(&env, &uniform(&env)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((e.c[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tabular_fixed_point_is_exact() {
        for m in [3, 10, 20] {
            let env = rw(m);
            let w = td_fixed_point(&env, &uniform(&env)).unwrap();
            for (k, wk) in w.iter().enumerate() {
                assert!((wk - (k + 1) as f64 / (m + 1) as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn baird_a_is_singular_but_consistent() {
        for policy in [BairdPolicy::Derived, BairdPolicy::Classic] {
            let env = make_env::<f64>(Task::Baird { states: 7, policy }).unwrap();
            let d = uniform(&env);
            let e = expected_matrices(&env, &d).unwrap();
            let diag = matrix_diagnostics(&e);
            assert!(!diag.a_nonsingular);
            assert!(!diag.c_nonsingular);
            assert!(matches!(
                td_fixed_point(&env, &d),
                Err(OracleError::NoUniqueFixedPoint { .. })
            ));
            assert!(matches!(mspbe_of(&e, &env.initial_weights), Err(OracleError::SingularC { .. })));
            let (w, _) = particular_fixed_point(&e).unwrap();
            let v = env.features.mul_vec(&w).unwrap();
            assert!(max_abs(&v) < 1e-8);
        }
    }

    #[test]
    fn tabular_mspbe_equals_msbe() {
        let env = rw(5);
        let d = uniform(&env);
        let w = [0.3, -0.1, 0.9, 0.2, 0.4];
        let j = mspbe(&env, &w, &d).unwrap();
        let be = msbe(&env, &w, &d).unwrap();
        assert!((j - be).abs() < 1e-14, "{j} vs {be}");
    }

    #[test]
    fn fixed_point_has_zero_mspbe() {
        let env = rw(10);
        let d = uniform(&env);
        let e = expected_matrices(&env, &d).unwrap();
        let w = fixed_point_of(&e).unwrap();
        assert!(mspbe_of(&e, &w).unwrap() <= 1e-12);
        assert_eq!(true_values(&env)[1..11].len(), w.len());
    }

    #[test]
    fn epsilon_examples() {
        let eps = epsilon_sequence(&StepSchedule::<f64>::constant(0.5), 200);
        assert!((eps[199] - 1.0).abs() < 1e-9);
        let eps = epsilon_sequence(&StepSchedule::constant(0.0), 10);
        assert!(eps.iter().all(|&e| e == 0.0));
        let eps = epsilon_sequence(&StepSchedule::tapered(0.1, 1000.0), 1_000_000);
        assert!(*eps.last().unwrap() < 0.01);
    }

    #[test]
    fn schedule_diagnostics_flag_constant_steps() {
        let t = schedule_diagnostics(&StepSchedule::tapered(0.1, 1000.0), 100_000);
        assert!(t.alpha_in_unit_interval && t.non_increasing);
        assert!(t.sum_alpha > t.sum_alpha_tenth);
        let c = schedule_diagnostics(&StepSchedule::constant(1.5), 10);
        assert!(!c.alpha_in_unit_interval);
    }

    #[test]
    fn bad_distribution_rejected() {
        let env = rw(3);
        assert!(matches!(
            expected_matrices(&env, &[0.0, 0.5, 0.5, 0.5, 0.0]),
            Err(OracleError::Distribution(_))
        ));
        assert!(matches!(
            expected_matrices(&env, &[0.1, 0.3, 0.3, 0.3, 0.0]),
            Err(OracleError::Distribution(_))
        ));
        assert!(expected_matrices(&env, &[0.0; 3]).is_err());
    }
}
