//! Per-transition update rules for linear TD-family learners.
//!
//! All rules share the TD error `δ = r + γ·x'ᵀw − xᵀw` and an auxiliary
//! vector `η` that tracks `E[xxᵀ]⁻¹E[δx]`:
//!
//! * **TD**: `w ← w + αρδx`
//! * **GTD2**: `η ← η + βρ(δ − xᵀη)x`, `w ← w − αρ(γx' − x)(xᵀη)`
//! * **TDC**: same `η`, `w ← w + αρ(δx − γx'(xᵀη))`
//! * **TDRC**: TDC with `η ← η + α[ρ(δ − xᵀη)x − β_rc·η]`
//! * **Gradient-DD**: GTD2 with one shared step size plus the second-order
//!   difference term `−κα(xᵀw − xᵀw_prev)x` pulling the value estimate
//!   towards the previous step's.
//!
//! `ρ` is the importance ratio when importance weighting is on, else 1, and
//! `β = ζα`. The κ term does not depend on the sampled action, so it is never
//! reweighted.

use serde::{Deserialize, Serialize};

use crate::envs::Transition;
use crate::numerics::{dot_unchecked, DenseMatrix, NumericsError};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Tapered,
}

/// Step-size sequence `α_n`, `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule<T> {
    pub kind: ScheduleKind,
    pub alpha0: T,
    /// The `h` in `α_n = α(h+1)/(h+n)`; unused for constant schedules.
    pub horizon: T,
}

impl<T: Scalar> StepSchedule<T> {
    pub fn constant(alpha0: T) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            alpha0,
            horizon: T::one(),
        }
    }

    pub fn tapered(alpha0: T, horizon: T) -> Self {
        Self {
            kind: ScheduleKind::Tapered,
            alpha0,
            horizon,
        }
    }

    #[inline]
    pub fn alpha(&self, n: u64) -> T {
        schedule_alpha(self, n)
    }
}

#[inline]
pub fn schedule_alpha<T: Scalar>(s: &StepSchedule<T>, n: u64) -> T {
    match s.kind {
        ScheduleKind::Constant => s.alpha0,
        ScheduleKind::Tapered => {
            let n = T::from_u64(n).expect("step index fits scalar");
            s.alpha0 * (s.horizon + T::one()) / (s.horizon + n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "TD")]
    Td,
    #[serde(rename = "GTD2")]
    Gtd2,
    #[serde(rename = "TDC")]
    Tdc,
    #[serde(rename = "TDRC")]
    Tdrc,
    #[serde(rename = "GradientDD")]
    GradientDd,
    /// Gradient-DD evaluated through the combined `(η, w)` recursion.
    #[serde(rename = "GradientDD_Combined")]
    GradientDdCombined,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Td,
        Algorithm::Gtd2,
        Algorithm::Tdc,
        Algorithm::Tdrc,
        Algorithm::GradientDd,
        Algorithm::GradientDdCombined,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Td => "TD",
            Algorithm::Gtd2 => "GTD2",
            Algorithm::Tdc => "TDC",
            Algorithm::Tdrc => "TDRC",
            Algorithm::GradientDd => "GradientDD",
            Algorithm::GradientDdCombined => "GradientDD_Combined",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
    }

    pub fn uses_kappa(self) -> bool {
        matches!(self, Algorithm::GradientDd | Algorithm::GradientDdCombined)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig<T> {
    pub algorithm: Algorithm,
    /// Gradient-DD regularization weight, `κ ≥ 0`.
    pub kappa: T,
    /// Ratio of the auxiliary to the main step size, `β_n = ζα_n`.
    pub zeta: T,
    /// TDRC's decay on `η`.
    pub tdrc_beta: T,
    pub schedule: StepSchedule<T>,
    pub use_importance_weighting: bool,
}

impl<T: Scalar> AlgoConfig<T> {
    /// Defaults: `κ = 1`, `ζ = 1`, TDRC `β = 1`, importance weighting on.
    pub fn new(algorithm: Algorithm, schedule: StepSchedule<T>) -> Self {
        Self {
            algorithm,
            kappa: T::one(),
            zeta: T::one(),
            tdrc_beta: T::one(),
            schedule,
            use_importance_weighting: true,
        }
    }

    pub fn with_kappa(mut self, kappa: T) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_zeta(mut self, zeta: T) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn with_tdrc_beta(mut self, beta: T) -> Self {
        self.tdrc_beta = beta;
        self
    }

    #[inline]
    fn rho(&self, t: &Transition<'_, T>) -> T {
        if self.use_importance_weighting {
            t.rho
        } else {
            T::one()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState<T> {
    pub w: Vec<T>,
    pub eta: Vec<T>,
    pub w_prev: Vec<T>,
    /// Index of the next step, starting at 1.
    pub n: u64,
    /// Sticky flag set once any parameter is non-finite.
    pub diverged: bool,
}

impl<T: Scalar> LearnerState<T> {
    /// `η₀ = 0` and `w_prev = w₀`.
    pub fn new(w0: Vec<T>) -> Self {
        let p = w0.len();
        Self {
            w_prev: w0.clone(),
            w: w0,
            eta: vec![T::zero(); p],
            n: 1,
            diverged: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    fn finish(&mut self) {
        self.n += 1;
        if self.w.iter().chain(&self.eta).any(|v| !v.is_finite()) {
            self.diverged = true;
        }
    }
}

#[inline]
pub fn td_error<T: Scalar>(state: &LearnerState<T>, t: &Transition<'_, T>, gamma: T) -> T {
    t.reward + gamma * dot_unchecked(t.x_next, &state.w) - dot_unchecked(t.x, &state.w)
}

/// Applies the configured algorithm's update for one transition.
pub fn step<T: Scalar>(
    state: &mut LearnerState<T>,
    t: &Transition<'_, T>,
    gamma: T,
    cfg: &AlgoConfig<T>,
) {
    if state.diverged {
        return;
    }
    match cfg.algorithm {
        Algorithm::Td => td_step(state, t, gamma, cfg),
        Algorithm::Gtd2 => gtd2_step(state, t, gamma, cfg),
        Algorithm::Tdc => tdc_step(state, t, gamma, cfg),
        Algorithm::Tdrc => tdrc_step(state, t, gamma, cfg),
        Algorithm::GradientDd => gdd_step(state, t, gamma, cfg),
        Algorithm::GradientDdCombined => gdd_combined_step(state, t, gamma, cfg),
    }
}

/// `η ← η + coef·x`.
#[inline]
fn add_scaled<T: Scalar>(v: &mut [T], coef: T, x: &[T]) {
    for (vi, &xi) in v.iter_mut().zip(x) {
        *vi += coef * xi;
    }
}

pub fn td_step<T: Scalar>(state: &mut LearnerState<T>, t: &Transition<'_, T>, gamma: T, cfg: &AlgoConfig<T>) {
    let alpha = cfg.schedule.alpha(state.n);
    let delta = td_error(state, t, gamma);
    state.w_prev.copy_from_slice(&state.w);
    add_scaled(&mut state.w, alpha * cfg.rho(t) * delta, t.x);
    state.finish();
}

pub fn gtd2_step<T: Scalar>(state: &mut LearnerState<T>, t: &Transition<'_, T>, gamma: T, cfg: &AlgoConfig<T>) {
    let alpha = cfg.schedule.alpha(state.n);
    let beta = cfg.zeta * alpha;
    let rho = cfg.rho(t);
    let delta = td_error(state, t, gamma);
    let x_eta = dot_unchecked(t.x, &state.eta);

    add_scaled(&mut state.eta, beta * rho * (delta - x_eta), t.x);
    state.w_prev.copy_from_slice(&state.w);
    let c = alpha * rho * x_eta;
    for ((wi, &xi), &xni) in state.w.iter_mut().zip(t.x).zip(t.x_next) {
        *wi -= c * (gamma * xni - xi);
    }
    state.finish();
}

pub fn gdd_step<T: Scalar>(state: &mut LearnerState<T>, t: &Transition<'_, T>, gamma: T, cfg: &AlgoConfig<T>) {
    let alpha = cfg.schedule.alpha(state.n);
    let beta = cfg.zeta * alpha;
    let rho = cfg.rho(t);
    let delta = td_error(state, t, gamma);
    let x_eta = dot_unchecked(t.x, &state.eta);
    let value_shift = dot_unchecked(t.x, &state.w) - dot_unchecked(t.x, &state.w_prev);

    add_scaled(&mut state.eta, beta * rho * (delta - x_eta), t.x);

    // New weights go into the w_prev buffer, then the buffers swap.
    let k = cfg.kappa * alpha * value_shift;
    let c = alpha * rho * x_eta;
    let skip_kappa = cfg.kappa == T::zero();
    for (((next, &wi), &xi), &xni) in state.w_prev.iter_mut().zip(&state.w).zip(t.x).zip(t.x_next) {
        let base = if skip_kappa { wi } else { wi - k * xi };
        *next = base - c * (gamma * xni - xi);
    }
    std::mem::swap(&mut state.w, &mut state.w_prev);
    state.finish();
}

/// Gradient-DD through the stacked recursion on `ρ = (η, w)`:
/// `ρ' = ρ − κα H(ρ − ρ_prev) + α(Gρ + g)` with
/// `G = [[−ζρ xxᵀ, −ζρ x(x − γx')ᵀ], [ρ(x − γx')xᵀ, 0]]`,
/// `H = diag(0, xxᵀ)` and `g = (ζρ r x, 0)`.
///
/// Builds the `2p × 2p` matrices explicitly; used to cross-check [`gdd_step`].
pub fn gdd_combined_step<T: Scalar>(
    state: &mut LearnerState<T>,
    t: &Transition<'_, T>,
    gamma: T,
    cfg: &AlgoConfig<T>,
) {
    let p = state.dim();
    let alpha = cfg.schedule.alpha(state.n);
    let rho = cfg.rho(t);
    let top = cfg.zeta * rho;
    let diff: Vec<T> = t.x.iter().zip(t.x_next).map(|(&x, &xn)| x - gamma * xn).collect();

    let (g_mat, h_mat) = combined_matrices(t.x, &diff, top, rho);
    let mut g_vec = vec![T::zero(); 2 * p];
    for (gi, &xi) in g_vec.iter_mut().zip(t.x) {
        *gi = top * t.reward * xi;
    }

    let stacked: Vec<T> = state.eta.iter().chain(&state.w).copied().collect();
    // H has a zero η block, so the previous η never enters.
    let delta_prev: Vec<T> = std::iter::repeat_n(T::zero(), p)
        .chain(state.w.iter().zip(&state.w_prev).map(|(&a, &b)| a - b))
        .collect();
    let drift = g_mat.mul_vec(&stacked).expect("2p-square matrix");
    let damping = h_mat.mul_vec(&delta_prev).expect("2p-square matrix");

    let next: Vec<T> = (0..2 * p)
        .map(|i| stacked[i] - cfg.kappa * alpha * damping[i] + alpha * (drift[i] + g_vec[i]))
        .collect();
    state.w_prev.copy_from_slice(&state.w);
    state.eta.copy_from_slice(&next[..p]);
    state.w.copy_from_slice(&next[p..]);
    state.finish();
}

fn combined_matrices<T: Scalar>(x: &[T], diff: &[T], top: T, rho: T) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let p = x.len();
    let mut g = DenseMatrix::zeros(2 * p, 2 * p);
    let mut h = DenseMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        for j in 0..p {
            g[(i, j)] = -top * x[i] * x[j];
            g[(i, p + j)] = -top * x[i] * diff[j];
            g[(p + i, j)] = rho * diff[i] * x[j];
            h[(p + i, p + j)] = x[i] * x[j];
        }
    }
    (g, h)
}

/// The TDC/TDRC weight update `w ← w + αρ(δx − γx'(xᵀη))`.
#[inline]
fn corrected_td_update<T: Scalar>(w: &mut [T], t: &Transition<'_, T>, gamma: T, alpha_rho: T, delta: T, x_eta: T) {
    for ((wi, &xi), &xni) in w.iter_mut().zip(t.x).zip(t.x_next) {
        *wi += alpha_rho * (delta * xi - gamma * xni * x_eta);
    }
}

pub fn tdc_step<T: Scalar>(state: &mut LearnerState<T>, t: &Transition<'_, T>, gamma: T, cfg: &AlgoConfig<T>) {
    let alpha = cfg.schedule.alpha(state.n);
    let beta = cfg.zeta * alpha;
    let rho = cfg.rho(t);
    let delta = td_error(state, t, gamma);
    let x_eta = dot_unchecked(t.x, &state.eta);

    add_scaled(&mut state.eta, beta * rho * (delta - x_eta), t.x);
    state.w_prev.copy_from_slice(&state.w);
    corrected_td_update(&mut state.w, t, gamma, alpha * rho, delta, x_eta);
    state.finish();
}

pub fn tdrc_step<T: Scalar>(state: &mut LearnerState<T>, t: &Transition<'_, T>, gamma: T, cfg: &AlgoConfig<T>) {
    let alpha = cfg.schedule.alpha(state.n);
    let rho = cfg.rho(t);
    let delta = td_error(state, t, gamma);
    let x_eta = dot_unchecked(t.x, &state.eta);

    let c = alpha * rho * (delta - x_eta);
    if cfg.tdrc_beta == T::zero() {
        add_scaled(&mut state.eta, c, t.x);
    } else {
        let decay = alpha * cfg.tdrc_beta;
        for (e, &xi) in state.eta.iter_mut().zip(t.x) {
            let old = *e;
            *e = old + c * xi - decay * old;
        }
    }
    state.w_prev.copy_from_slice(&state.w);
    corrected_td_update(&mut state.w, t, gamma, alpha * rho, delta, x_eta);
    state.finish();
}

/// `V = X w` for every state.
pub fn predict_values<T: Scalar>(w: &[T], features: &DenseMatrix<T>) -> Result<Vec<T>, NumericsError> {
    features.mul_vec(w)
}
