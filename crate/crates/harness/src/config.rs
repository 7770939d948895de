//! Flat key/value experiment configuration.
//!
//! ```toml
//! name = "randomwalk_tabular_10"
//! task = "random_walk"
//! states = 10
//! representation = "tabular"
//! algorithms = ["TD", "GTD2", "GradientDD"]
//! alpha_log10 = [-3.0, -2.75, -2.5]
//! schedule = "tapered"
//! episodes = 20000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tddlab_core::envs::{make_env, BairdPolicy, EnvSpec, Representation, Task, Weighting};
use tddlab_core::learners::{AlgoConfig, Algorithm, ScheduleKind, StepSchedule};
use tddlab_core::metrics::{Window, FINAL_WINDOW};

use crate::error::{HarnessError, Result};

pub const DEFAULT_RUNS: usize = 50;
pub const DEFAULT_HORIZON: f64 = 1000.0;
pub const DEFAULT_MAX_STEPS: usize = 100_000;

/// File format as written by users; every key is a scalar or an array.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    task: String,
    states: Option<usize>,
    features: Option<usize>,
    representation: Option<String>,
    baird_policy: Option<String>,
    algorithms: Vec<String>,
    alphas: Option<Vec<f64>>,
    alpha_log10: Option<Vec<f64>>,
    kappas: Option<Vec<f64>>,
    zetas: Option<Vec<f64>>,
    gdd_zetas: Option<Vec<f64>>,
    tdrc_beta: Option<f64>,
    schedule: Option<String>,
    horizon: Option<f64>,
    episodes: Option<usize>,
    runs: Option<usize>,
    seed: Option<u64>,
    weighting: Option<String>,
    window: Option<String>,
    importance_weighting: Option<bool>,
    max_steps: Option<usize>,
    transitions_per_episode: Option<usize>,
    out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    pub algorithms: Vec<Algorithm>,
    pub alphas: Vec<f64>,
    /// Gradient-DD κ grid.
    pub kappas: Vec<f64>,
    /// GTD2 and TDC ζ grid.
    pub zetas: Vec<f64>,
    /// Gradient-DD ζ grid (1 keeps a single shared step size).
    pub gdd_zetas: Vec<f64>,
    pub tdrc_beta: f64,
    pub schedule: ScheduleKind,
    pub horizon: f64,
    pub episodes: usize,
    pub runs: usize,
    pub seed: u64,
    pub weighting: Weighting,
    pub window: Window,
    pub importance_weighting: bool,
    pub max_steps: usize,
    /// Continuing tasks only: transitions between RMS records.
    pub transitions_per_episode: usize,
    pub out: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A grid point for one algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub kappa: f64,
    pub zeta: f64,
}

fn parse_choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            HarnessError::config(format!("{key} = {value:?}; expected one of {names:?}"))
        })
}

fn require(key: &str, v: Option<usize>) -> Result<usize> {
    v.ok_or_else(|| HarnessError::config(format!("missing key `{key}`")))
}

fn build_task(raw: &RawConfig) -> Result<Task> {
    match raw.task.as_str() {
        "random_walk" => {
            let states = require("states", raw.states)?;
            let representation = match raw.representation.as_deref().unwrap_or("tabular") {
                "tabular" => Representation::Tabular,
                "interpolated" => Representation::Interpolated {
                    features: require("features", raw.features)?,
                },
                other => {
                    return Err(HarnessError::config(format!(
                        "representation = {other:?}; expected \"tabular\" or \"interpolated\""
                    )))
                }
            };
            Ok(Task::RandomWalk {
                states,
                representation,
            })
        }
        "boyan" => Ok(Task::Boyan {
            features: require("features", raw.features)?,
        }),
        "baird" => {
            let policy = parse_choice(
                "baird_policy",
                raw.baird_policy.as_deref().unwrap_or("derived"),
                &[("derived", BairdPolicy::Derived), ("classic", BairdPolicy::Classic)],
            )?;
            Ok(Task::Baird {
                states: require("states", raw.states)?,
                policy,
            })
        }
        other => Err(HarnessError::config(format!(
            "task = {other:?}; expected \"random_walk\", \"boyan\" or \"baird\""
        ))),
    }
}

fn default_episodes(task: &Task) -> usize {
    match task {
        Task::RandomWalk { .. } => 20_000,
        Task::Boyan { .. } => 2_000,
        Task::Baird { .. } => 5_000,
    }
}

fn check_grid(key: &str, grid: &[f64], allow_zero: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(HarnessError::config(format!("`{key}` must not be empty")));
    }
    for &v in grid {
        let ok = v.is_finite() && if allow_zero { v >= 0.0 } else { v > 0.0 };
        if !ok {
            let bound = if allow_zero { "≥ 0" } else { "> 0" };
            return Err(HarnessError::config(format!("`{key}` entry {v} must be finite and {bound}")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        Self::from_raw(raw, overrides)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let located = |msg: String| HarnessError::config(format!("{}: {msg}", path.display()));
        let mut raw: RawConfig = toml::from_str(&text).map_err(|e| located(e.to_string()))?;
        if raw.name.is_none() {
            raw.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Self::from_raw(raw, overrides).map_err(|e| match e {
            HarnessError::Config(msg) => located(msg),
            other => other,
        })
    }

    fn from_raw(raw: RawConfig, overrides: &Overrides) -> Result<Self> {
        let task = build_task(&raw)?;
        let algorithms = raw
            .algorithms
            .iter()
            .map(|s| {
                Algorithm::from_label(s)
                    .ok_or_else(|| HarnessError::config(format!("unknown algorithm {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if algorithms.is_empty() {
            return Err(HarnessError::config("`algorithms` must not be empty"));
        }
        let alphas = match (raw.alphas, raw.alpha_log10) {
            (Some(a), None) => a,
            (None, Some(e)) => e.iter().map(|x| 10f64.powf(*x)).collect(),
            (Some(_), Some(_)) => return Err(HarnessError::config("give `alphas` or `alpha_log10`, not both")),
            (None, None) => return Err(HarnessError::config("missing `alphas` or `alpha_log10`")),
        };
        let schedule = parse_choice(
            "schedule",
            raw.schedule.as_deref().unwrap_or("tapered"),
            &[("tapered", ScheduleKind::Tapered), ("constant", ScheduleKind::Constant)],
        )?;
        let weighting = parse_choice(
            "weighting",
            raw.weighting.as_deref().unwrap_or("uniform"),
            &[("uniform", Weighting::Uniform), ("analytic_visit", Weighting::AnalyticVisit)],
        )?;
        let window_label = raw.window.as_deref().unwrap_or("final_100");
        let window = Window::from_label(window_label).ok_or_else(|| {
            HarnessError::config(format!("window = {window_label:?}; expected \"final_100\" or \"all_episodes\""))
        })?;
        let name = raw.name.unwrap_or_default();
        let out = overrides
            .out
            .clone()
            .or_else(|| raw.out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results").join(if name.is_empty() { "run" } else { &name }));
        let cfg = Self {
            name,
            episodes: raw.episodes.unwrap_or_else(|| default_episodes(&task)),
            task,
            algorithms,
            alphas,
            kappas: raw.kappas.unwrap_or_else(|| vec![1.0]),
            zetas: raw.zetas.unwrap_or_else(|| vec![1.0]),
            gdd_zetas: raw.gdd_zetas.unwrap_or_else(|| vec![1.0]),
            tdrc_beta: raw.tdrc_beta.unwrap_or(1.0),
            schedule,
            horizon: raw.horizon.unwrap_or(DEFAULT_HORIZON),
            runs: overrides.runs.or(raw.runs).unwrap_or(DEFAULT_RUNS),
            seed: overrides.seed.or(raw.seed).unwrap_or(0),
            weighting,
            window,
            importance_weighting: raw.importance_weighting.unwrap_or(true),
            max_steps: raw.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
            transitions_per_episode: raw.transitions_per_episode.unwrap_or(1),
            out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_grid("alphas", &self.alphas, false)?;
        check_grid("kappas", &self.kappas, true)?;
        check_grid("zetas", &self.zetas, false)?;
        check_grid("gdd_zetas", &self.gdd_zetas, false)?;
        if !(self.tdrc_beta.is_finite() && self.tdrc_beta >= 0.0) {
            return Err(HarnessError::config("`tdrc_beta` must be finite and ≥ 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(HarnessError::config("`horizon` must be finite and > 0"));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::config("`algorithms` must not be empty"));
        }
        if self.episodes == 0 || self.runs == 0 || self.max_steps == 0 || self.transitions_per_episode == 0 {
            return Err(HarnessError::config(
                "`episodes`, `runs`, `max_steps` and `transitions_per_episode` must be positive",
            ));
        }
        if self.window == Window::Final100 && self.episodes < FINAL_WINDOW {
            return Err(HarnessError::config(format!(
                "window final_100 needs at least {FINAL_WINDOW} episodes, got {}",
                self.episodes
            )));
        }
        self.environment()?;
        Ok(())
    }

    /// Builds the task environment, surfacing size errors as config errors.
    pub fn environment(&self) -> Result<EnvSpec<f64>> {
        let env = make_env::<f64>(self.task).map_err(|e| HarnessError::config(e.to_string()))?;
        if self.weighting == Weighting::AnalyticVisit && env.continuing {
            return Err(HarnessError::config(
                "weighting analytic_visit needs an episodic task; use uniform",
            ));
        }
        if self.transitions_per_episode != 1 && !env.continuing {
            return Err(HarnessError::config(
                "`transitions_per_episode` applies to continuing tasks only",
            ));
        }
        Ok(env)
    }

    pub fn step_schedule(&self, alpha: f64) -> StepSchedule<f64> {
        match self.schedule {
            ScheduleKind::Constant => StepSchedule::constant(alpha),
            ScheduleKind::Tapered => StepSchedule::tapered(alpha, self.horizon),
        }
    }

    /// Every grid point in configuration order: algorithm, then α, then κ, then ζ.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            let (kappas, zetas): (&[f64], &[f64]) = match algorithm {
                Algorithm::Td | Algorithm::Tdrc => (&[0.0], &[1.0]),
                Algorithm::Gtd2 | Algorithm::Tdc => (&[0.0], &self.zetas),
                Algorithm::GradientDd | Algorithm::GradientDdCombined => (&self.kappas, &self.gdd_zetas),
            };
            for &alpha in &self.alphas {
                for &kappa in kappas {
                    for &zeta in zetas {
                        out.push(GridPoint {
                            algorithm,
                            alpha,
                            kappa,
                            zeta,
                        });
                    }
                }
            }
        }
        out
    }

    /// The first grid point of each algorithm, used by single runs.
    pub fn first_points(&self) -> Vec<GridPoint> {
        let grid = self.grid();
        self.algorithms
            .iter()
            .filter_map(|a| grid.iter().find(|g| g.algorithm == *a).copied())
            .collect()
    }

    pub fn algo_config(&self, point: &GridPoint) -> AlgoConfig<f64> {
        let mut cfg = AlgoConfig::new(point.algorithm, self.step_schedule(point.alpha))
            .with_kappa(point.kappa)
            .with_zeta(point.zeta)
            .with_tdrc_beta(self.tdrc_beta);
        cfg.use_importance_weighting = self.importance_weighting;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
task = "random_walk"
states = 10
algorithms = ["TD", "GTD2", "GradientDD"]
alphas = [0.1, 0.01]
zetas = [0.25, 1.0]
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL, &Overrides::default()).unwrap();
        assert_eq!(cfg.episodes, 20_000);
        assert_eq!(cfg.runs, DEFAULT_RUNS);
        assert_eq!(cfg.schedule, ScheduleKind::Tapered);
        assert_eq!(cfg.window, Window::Final100);
        assert_eq!(cfg.kappas, vec![1.0]);
        // TD: 2 α; GTD2: 2 α × 2 ζ; GDD: 2 α × 1 κ × 1 ζ.
        assert_eq!(cfg.grid().len(), 2 + 4 + 2);
    }

    #[test]
    fn file_stem_names_unnamed_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("walk.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = ExperimentConfig::load(&path, &Overrides::default()).unwrap();
        assert_eq!(cfg.name, "walk");
        assert_eq!(cfg.out, PathBuf::from("results/walk"));
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            runs: Some(3),
            seed: Some(9),
            out: Some(PathBuf::from("/tmp/x")),
        };
        let cfg = ExperimentConfig::from_toml_str(MINIMAL, &o).unwrap();
        assert_eq!((cfg.runs, cfg.seed), (3, 9));
        assert_eq!(cfg.out, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn alpha_exponents() {
        let text = MINIMAL.replace("alphas = [0.1, 0.01]", "alpha_log10 = [-3.0, -0.25, 0.0]");
        let cfg = ExperimentConfig::from_toml_str(&text, &Overrides::default()).unwrap();
        assert!((cfg.alphas[0] - 1e-3).abs() < 1e-18);
        assert!((cfg.alphas[1] - 10f64.powf(-0.25)).abs() < 1e-16);
        assert_eq!(cfg.alphas[2], 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            MINIMAL.replace("states = 10", "states = 1"),
            MINIMAL.replace("\"TD\"", "\"SARSA\""),
            MINIMAL.replace("alphas = [0.1, 0.01]", "alphas = []"),
            MINIMAL.replace("alphas = [0.1, 0.01]", "alphas = [-1.0]"),
            format!("{MINIMAL}\nepisodes = 50\n"),
            format!("{MINIMAL}\nunknown_key = 1\n"),
            format!("{MINIMAL}\n[section]\nx = 1\n"),
            format!("{MINIMAL}\ntransitions_per_episode = 5\n"),
            "task = \"baird\"\nstates = 7\nalgorithms = [\"TD\"]\nalphas = [0.1]\ntransitions_per_episode = 0\n"
                .to_string(),
            "task = \"baird\"\nstates = 7\nalgorithms = [\"TD\"]\nalphas = [0.1]\nweighting = \"analytic_visit\"\n"
                .to_string(),
        ];
        for text in bad {
            let err = ExperimentConfig::from_toml_str(&text, &Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn algo_config_carries_grid_point() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL, &Overrides::default()).unwrap();
        let p = cfg.grid()[3];
        assert_eq!(p.algorithm, Algorithm::Gtd2);
        let a = cfg.algo_config(&p);
        assert_eq!(a.zeta, p.zeta);
        assert_eq!(a.schedule.alpha(1), p.alpha);
    }
}
