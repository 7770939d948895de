//! Benchmark MDPs: the random walk, the Boyan chain and Baird's star.
//!
//! Each task is described exactly by an [`EnvSpec`]: per-state action tables,
//! behavior and target policies, a feature matrix and the discount. States
//! include the absorbing terminals; terminal rows of the feature matrix are
//! zero, so the bootstrap target on absorption is the reward alone.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{solve_linear, DenseMatrix, NumericsError};
use crate::Scalar;

const PROB_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, EnvError> {
    Err(EnvError::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representation {
    Tabular,
    /// `features`-dimensional spikes with linear interpolation between them.
    Interpolated { features: usize },
}

/// Which behavior/target pair drives Baird's star.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BairdPolicy {
    /// Normalized policies whose ratios are `(N−1)/N` for dashed and `N` for solid.
    #[default]
    Derived,
    /// Behavior `((N−1)/N, 1/N)`, target always solid: ratios `0` and `N`.
    Classic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    RandomWalk {
        states: usize,
        representation: Representation,
    },
    Boyan {
        features: usize,
    },
    Baird {
        states: usize,
        #[serde(default)]
        policy: BairdPolicy,
    },
}

impl Task {
    /// Short stable label, e.g. `random_walk_10_tabular` or `boyan_20`.
    pub fn label(&self) -> String {
        match self {
            Task::RandomWalk {
                states,
                representation: Representation::Tabular,
            } => format!("random_walk_{states}_tabular"),
            Task::RandomWalk {
                states,
                representation: Representation::Interpolated { features },
            } => format!("random_walk_{states}_linear{features}"),
            Task::Boyan { features } => format!("boyan_{features}"),
            Task::Baird {
                states,
                policy: BairdPolicy::Derived,
            } => format!("baird_{states}"),
            Task::Baird {
                states,
                policy: BairdPolicy::Classic,
            } => format!("baird_{states}_classic"),
        }
    }
}

/// One possible result of taking an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T> {
    pub next_state: usize,
    pub probability: T,
    pub reward: T,
}

/// Exact description of a finite MDP under a behavior/target policy pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec<T> {
    pub task: Task,
    pub n_states: usize,
    pub terminal: Vec<bool>,
    /// `transitions[state][action]` lists the outcomes of that action.
    pub transitions: Vec<Vec<Vec<Outcome<T>>>>,
    /// `behavior[state][action]`; empty for terminal states.
    pub behavior: Vec<Vec<T>>,
    pub target: Vec<Vec<T>>,
    /// `n_states × p`; terminal rows are zero.
    pub features: DenseMatrix<T>,
    pub gamma: T,
    pub start: Vec<T>,
    pub initial_weights: Vec<T>,
    /// Continuing tasks are sampled one transition per episode.
    pub continuing: bool,
}

/// One sampled step. Feature slices borrow from the environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<'a, T> {
    pub x: &'a [T],
    pub reward: T,
    pub x_next: &'a [T],
    pub rho: T,
    pub is_terminal_next: bool,
    pub state_index: usize,
    pub next_state_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode<'a, T> {
    pub transitions: Vec<Transition<'a, T>>,
}

impl<'a, T> Episode<'a, T> {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Transition<'a, T>> {
        self.transitions.iter()
    }
}

/// State weighting used by the RMS error and the oracle's projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    AnalyticVisit,
}

pub fn make_env<T: Scalar>(task: Task) -> Result<EnvSpec<T>, EnvError> {
    let env = match task {
        Task::RandomWalk {
            states,
            representation,
        } => random_walk(states, representation)?,
        Task::Boyan { features } => boyan(features)?,
        Task::Baird { states, policy } => baird(states, policy)?,
    };
    env.validate()?;
    Ok(env)
}

fn random_walk<T: Scalar>(m: usize, repr: Representation) -> Result<EnvSpec<T>, EnvError> {
    if m < 2 {
        return config_err(format!("random walk needs at least 2 states, got {m}"));
    }
    let n = m + 2;
    let half = T::lit(0.5);
    let mut terminal = vec![false; n];
    terminal[0] = true;
    terminal[m + 1] = true;

    let mut transitions = vec![Vec::new(); n];
    let mut policy = vec![Vec::new(); n];
    for s in 1..=m {
        let step = |next: usize| {
            vec![Outcome {
                next_state: next,
                probability: T::one(),
                reward: if next == m + 1 { T::one() } else { T::zero() },
            }]
        };
        transitions[s] = vec![step(s - 1), step(s + 1)];
        policy[s] = vec![half, half];
    }

    let features = match repr {
        Representation::Tabular => {
            let mut x = DenseMatrix::zeros(n, m);
            for s in 1..=m {
                x[(s, s - 1)] = T::one();
            }
            x
        }
        Representation::Interpolated { features: p } => {
            if p < 2 || p > m {
                return config_err(format!(
                    "interpolated random walk needs 2 <= p <= m, got p={p}, m={m}"
                ));
            }
            // Spikes spread so the last one lands at or beyond S_m.
            let spacing = m.div_ceil(p - 1);
            let mut x = DenseMatrix::zeros(n, p);
            for s in 1..=m {
                interpolate_row(x.row_mut(s), s - 1, spacing);
            }
            x
        }
    };
    let p = features.cols();

    let mut start = vec![T::zero(); n];
    start[m.div_ceil(2)] = T::one();

    Ok(EnvSpec {
        task: Task::RandomWalk {
            states: m,
            representation: repr,
        },
        n_states: n,
        terminal,
        transitions,
        behavior: policy.clone(),
        target: policy,
        features,
        gamma: T::one(),
        start,
        initial_weights: vec![half; p],
        continuing: false,
    })
}

/// Writes the interpolated feature row for chain position `pos` (0-based)
/// with a one-hot spike every `spacing` positions.
fn interpolate_row<T: Scalar>(row: &mut [T], pos: usize, spacing: usize) {
    let j = pos / spacing;
    let r = pos % spacing;
    let frac = T::lit(r as f64 / spacing as f64);
    row[j] = T::one() - frac;
    if r > 0 {
        row[j + 1] = frac;
    }
}

fn boyan<T: Scalar>(p: usize) -> Result<EnvSpec<T>, EnvError> {
    if p < 2 {
        return config_err(format!("Boyan chain needs p >= 2, got {p}"));
    }
    let n = 4 * p - 3;
    let last = n - 1;
    let half = T::lit(0.5);
    let mut terminal = vec![false; n];
    terminal[last] = true;

    let mut transitions = vec![Vec::new(); n];
    let mut policy = vec![Vec::new(); n];
    for s in 0..last {
        if s + 1 == last {
            transitions[s] = vec![vec![Outcome {
                next_state: last,
                probability: T::one(),
                reward: T::lit(-0.2),
            }]];
            policy[s] = vec![T::one()];
        } else {
            let jump = |k: usize| {
                vec![Outcome {
                    next_state: s + k,
                    probability: T::one(),
                    reward: T::lit(-0.3),
                }]
            };
            transitions[s] = vec![jump(1), jump(2)];
            policy[s] = vec![half, half];
        }
    }

    let mut features = DenseMatrix::zeros(n, p);
    for s in 0..last {
        interpolate_row(features.row_mut(s), s, 4);
    }

    let mut start = vec![T::zero(); n];
    start[0] = T::one();

    Ok(EnvSpec {
        task: Task::Boyan { features: p },
        n_states: n,
        terminal,
        transitions,
        behavior: policy.clone(),
        target: policy,
        features,
        gamma: T::one(),
        start,
        initial_weights: vec![T::zero(); p],
        continuing: false,
    })
}

/// Weights `(−4(p−1), −4(p−2), …, 0)/5` that represent the Boyan chain's values.
pub fn boyan_optimal_weights<T: Scalar>(p: usize) -> Vec<T> {
    (0..p)
        .map(|j| T::lit(-4.0 * (p - 1 - j) as f64 / 5.0))
        .collect()
}

fn baird<T: Scalar>(n: usize, variant: BairdPolicy) -> Result<EnvSpec<T>, EnvError> {
    if n < 2 {
        return config_err(format!("Baird's star needs N >= 2, got {n}"));
    }
    let nf = n as f64;
    let p = n + 1;
    let dashed_share = T::lit(1.0 / (nf - 1.0));
    let dashed: Vec<Outcome<T>> = (0..n - 1)
        .map(|s| Outcome {
            next_state: s,
            probability: dashed_share,
            reward: T::zero(),
        })
        .collect();
    let solid = vec![Outcome {
        next_state: n - 1,
        probability: T::one(),
        reward: T::zero(),
    }];

    // (dashed, solid) probabilities.
    let (behavior, target) = match variant {
        BairdPolicy::Derived => {
            let denom = nf * nf - nf + 1.0;
            let b_dashed = nf * (nf - 1.0) / denom;
            let pi_dashed = (nf - 1.0) * (nf - 1.0) / denom;
            (
                [b_dashed, 1.0 / denom],
                [pi_dashed, nf / denom],
            )
        }
        BairdPolicy::Classic => ([(nf - 1.0) / nf, 1.0 / nf], [0.0, 1.0]),
    };

    let mut features = DenseMatrix::zeros(n, p);
    for s in 0..n - 1 {
        features[(s, s)] = T::lit(2.0);
        features[(s, n)] = T::one();
    }
    features[(n - 1, n - 1)] = T::one();
    features[(n - 1, n)] = T::lit(2.0);

    let mut initial_weights = vec![T::one(); p];
    initial_weights[n - 1] = T::lit(10.0);

    Ok(EnvSpec {
        task: Task::Baird {
            states: n,
            policy: variant,
        },
        n_states: n,
        terminal: vec![false; n],
        transitions: vec![vec![dashed, solid]; n],
        behavior: vec![behavior.iter().map(|&v| T::lit(v)).collect(); n],
        target: vec![target.iter().map(|&v| T::lit(v)).collect(); n],
        features,
        gamma: T::lit(0.99),
        start: vec![T::lit(1.0 / nf); n],
        initial_weights,
        continuing: true,
    })
}

impl<T: Scalar> EnvSpec<T> {
    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn is_on_policy(&self) -> bool {
        self.behavior == self.target
    }

    /// Checks the structural invariants; run after construction or deserialization.
    pub fn validate(&self) -> Result<(), EnvError> {
        let n = self.n_states;
        let tol = T::lit(PROB_TOLERANCE);
        if self.terminal.len() != n
            || self.transitions.len() != n
            || self.behavior.len() != n
            || self.target.len() != n
            || self.start.len() != n
            || self.features.rows() != n
        {
            return config_err("per-state tables must all have n_states entries");
        }
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return config_err(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.initial_weights.len() != self.feature_dim() {
            return config_err("initial weights do not match the feature dimension");
        }
        if self.features.as_slice().iter().any(|v| !v.is_finite()) {
            return config_err("feature matrix has non-finite entries");
        }
        let sums_to_one = |xs: &[T]| (xs.iter().copied().sum::<T>() - T::one()).abs() <= tol;
        if !sums_to_one(&self.start) {
            return config_err("start distribution does not sum to 1");
        }
        for s in 0..n {
            let actions = &self.transitions[s];
            if self.terminal[s] {
                if !actions.is_empty() {
                    return config_err(format!("terminal state {s} has actions"));
                }
                if self.features.row(s).iter().any(|v| *v != T::zero()) {
                    return config_err(format!("terminal state {s} has nonzero features"));
                }
                continue;
            }
            if actions.is_empty() {
                return config_err(format!("non-terminal state {s} has no actions"));
            }
            for (name, pol) in [("behavior", &self.behavior[s]), ("target", &self.target[s])] {
                if pol.len() != actions.len() || !sums_to_one(pol) || pol.iter().any(|p| *p < T::zero()) {
                    return config_err(format!("{name} policy of state {s} is not a distribution"));
                }
            }
            for (a, outcomes) in actions.iter().enumerate() {
                let probs: Vec<T> = outcomes.iter().map(|o| o.probability).collect();
                if !sums_to_one(&probs) || outcomes.iter().any(|o| o.next_state >= n) {
                    return config_err(format!("transition row ({s}, {a}) is not a distribution"));
                }
                if self.target[s][a] > T::zero() && self.behavior[s][a] == T::zero() {
                    return config_err(format!("target action ({s}, {a}) has no behavior support"));
                }
            }
        }
        Ok(())
    }

    /// Importance ratio `π(a|s)/b(a|s)` of action `a` in state `s`.
    #[inline]
    pub fn rho(&self, state: usize, action: usize) -> T {
        self.target[state][action] / self.behavior[state][action]
    }
}

/// Draws an index from a discrete distribution given as scalars.
fn draw<T: Scalar, R: Rng + ?Sized>(rng: &mut R, probs: impl IntoIterator<Item = T>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        let p = p.as_f64();
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples one episode under the behavior policy from the start distribution.
pub fn sample_episode<'a, T: Scalar, R: Rng + ?Sized>(
    env: &'a EnvSpec<T>,
    rng: &mut R,
    max_steps: usize,
) -> Episode<'a, T> {
    let mut transitions = Vec::new();
    sample_episode_into(env, rng, max_steps, &mut transitions);
    Episode { transitions }
}

/// Like [`sample_episode`], reusing `buf` to avoid reallocating per episode.
pub fn sample_episode_into<'a, T: Scalar, R: Rng + ?Sized>(
    env: &'a EnvSpec<T>,
    rng: &mut R,
    max_steps: usize,
    buf: &mut Vec<Transition<'a, T>>,
) {
    let start = draw(rng, env.start.iter().copied());
    rollout(env, start, rng, max_steps, buf);
}

/// Samples an episode starting in `start` rather than the start distribution.
pub fn sample_episode_from<'a, T: Scalar, R: Rng + ?Sized>(
    env: &'a EnvSpec<T>,
    start: usize,
    rng: &mut R,
    max_steps: usize,
) -> Episode<'a, T> {
    let mut transitions = Vec::new();
    rollout(env, start, rng, max_steps, &mut transitions);
    Episode { transitions }
}

fn rollout<'a, T: Scalar, R: Rng + ?Sized>(
    env: &'a EnvSpec<T>,
    start: usize,
    rng: &mut R,
    max_steps: usize,
    buf: &mut Vec<Transition<'a, T>>,
) {
    buf.clear();
    let limit = if env.continuing { 1 } else { max_steps.max(1) };
    let mut s = start;
    while buf.len() < limit && !env.terminal[s] {
        let a = draw(rng, env.behavior[s].iter().copied());
        let outcomes = &env.transitions[s][a];
        let o = &outcomes[draw(rng, outcomes.iter().map(|o| o.probability))];
        let next = o.next_state;
        buf.push(Transition {
            x: env.features.row(s),
            reward: o.reward,
            x_next: env.features.row(next),
            rho: env.rho(s, a),
            is_terminal_next: env.terminal[next],
            state_index: s,
            next_state_index: next,
        });
        s = next;
    }
}

/// Analytic target-policy state values.
pub fn true_values<T: Scalar>(env: &EnvSpec<T>) -> Vec<T> {
    match env.task {
        Task::RandomWalk { states: m, .. } => (0..env.n_states)
            .map(|s| {
                if env.terminal[s] {
                    T::zero()
                } else {
                    T::lit(s as f64 / (m + 1) as f64)
                }
            })
            .collect(),
        Task::Boyan { features } => env
            .features
            .mul_vec(&boyan_optimal_weights(features))
            .expect("Boyan features have p columns"),
        Task::Baird { .. } => vec![T::zero(); env.n_states],
    }
}

/// Per-state weighting `d_s`; zero on terminal states.
pub fn eval_weighting<T: Scalar>(env: &EnvSpec<T>, mode: Weighting) -> Result<Vec<T>, EnvError> {
    let live: Vec<usize> = (0..env.n_states).filter(|&s| !env.terminal[s]).collect();
    match mode {
        Weighting::Uniform => {
            let share = T::lit(1.0 / live.len() as f64);
            Ok((0..env.n_states)
                .map(|s| if env.terminal[s] { T::zero() } else { share })
                .collect())
        }
        Weighting::AnalyticVisit => {
            if env.continuing {
                return config_err("analytic visit weighting needs an episodic task; use uniform");
            }
            // Expected visit counts v solve v = start + Qᵀ v over live states.
            let k = live.len();
            let mut pos = vec![usize::MAX; env.n_states];
            for (i, &s) in live.iter().enumerate() {
                pos[s] = i;
            }
            let mut m = DenseMatrix::identity(k);
            for (i, &s) in live.iter().enumerate() {
                for (a, outcomes) in env.transitions[s].iter().enumerate() {
                    let pa = env.behavior[s][a];
                    for o in outcomes {
                        if !env.terminal[o.next_state] {
                            m[(pos[o.next_state], i)] -= pa * o.probability;
                        }
                    }
                }
            }
            let rhs: Vec<T> = live.iter().map(|&s| env.start[s]).collect();
            let visits = solve_linear(&m, &rhs)?;
            let total: T = visits.iter().copied().sum();
            let mut d = vec![T::zero(); env.n_states];
            for (i, &s) in live.iter().enumerate() {
                d[s] = visits[i] / total;
            }
            Ok(d)
        }
    }
}
