//! Single runs and seed-parallel sweeps.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tddlab_core::envs::{eval_weighting, sample_episode_into, true_values, EnvSpec};
use tddlab_core::learners::{predict_values, step, AlgoConfig, Algorithm, LearnerState};
use tddlab_core::metrics::{cap_rms, summarize, weighted_rms, RunRecord, Summary, SweepRow, SweepTable, Window};

use crate::config::{ExperimentConfig, GridPoint};
use crate::error::{HarnessError, Result};

/// Everything a run needs about the task, computed once per sweep.
#[derive(Debug, Clone)]
pub struct TaskContext {
    pub env: EnvSpec<f64>,
    pub d: Vec<f64>,
    pub truth: Vec<f64>,
    pub max_steps: usize,
    /// Sampled episodes per recorded episode; above 1 only for continuing tasks.
    pub transitions_per_episode: usize,
}

impl TaskContext {
    pub fn new(env: EnvSpec<f64>, d: Vec<f64>, max_steps: usize) -> Self {
        let truth = true_values(&env);
        Self {
            env,
            d,
            truth,
            max_steps,
            transitions_per_episode: 1,
        }
    }

    pub fn with_transitions_per_episode(mut self, k: usize) -> Self {
        self.transitions_per_episode = k;
        self
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let env = cfg.environment()?;
        let d = eval_weighting(&env, cfg.weighting).map_err(|e| HarnessError::config(e.to_string()))?;
        Ok(Self::new(env, d, cfg.max_steps).with_transitions_per_episode(cfg.transitions_per_episode))
    }

    pub fn rms(&self, w: &[f64]) -> f64 {
        let v = predict_values(w, &self.env.features).expect("weights match feature dimension");
        weighted_rms(&v, &self.truth, &self.d).expect("per-state vectors match")
    }
}

fn check_algo_config(cfg: &AlgoConfig<f64>) -> Result<()> {
    let s = &cfg.schedule;
    let bad = |what: &str| Err(HarnessError::config(format!("{}: {what}", cfg.algorithm)));
    if !(s.alpha0.is_finite() && s.alpha0 > 0.0) {
        return bad("α must be finite and > 0");
    }
    if !(s.horizon.is_finite() && s.horizon > 0.0) {
        return bad("horizon must be finite and > 0");
    }
    if !(cfg.kappa.is_finite() && cfg.kappa >= 0.0) {
        return bad("κ must be finite and ≥ 0");
    }
    if !(cfg.zeta.is_finite() && cfg.zeta > 0.0) {
        return bad("ζ must be finite and > 0");
    }
    if !(cfg.tdrc_beta.is_finite() && cfg.tdrc_beta >= 0.0) {
        return bad("TDRC β must be finite and ≥ 0");
    }
    Ok(())
}

/// Runs one learner for `episodes` episodes, recording the RMS error after
/// each. The result depends only on the arguments.
pub fn run_single(ctx: &TaskContext, cfg: &AlgoConfig<f64>, episodes: usize, seed: u64) -> Result<RunRecord> {
    check_algo_config(cfg)?;
    let env = &ctx.env;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = LearnerState::new(env.initial_weights.clone());
    let mut buf = Vec::new();
    let mut series = Vec::with_capacity(episodes);
    let mut capped = false;
    for _ in 0..episodes {
        for _ in 0..ctx.transitions_per_episode {
            if state.diverged {
                break;
            }
            sample_episode_into(env, &mut rng, ctx.max_steps, &mut buf);
            for t in &buf {
                step(&mut state, t, env.gamma, cfg);
            }
        }
        let (rms, hit) = if state.diverged {
            cap_rms(f64::INFINITY)
        } else {
            cap_rms(ctx.rms(&state.w))
        };
        capped |= hit;
        series.push(rms);
    }
    Ok(RunRecord {
        task: env.task.label(),
        algorithm: cfg.algorithm,
        config: *cfg,
        seed,
        rms_series: series,
        diverged: state.diverged || capped,
    })
}

/// Seed for one run of one grid cell: a hash of the base seed, the algorithm,
/// the grid values and the run index, so cells never share streams and
/// adding grid points leaves existing cells unchanged.
pub fn cell_seed(base: u64, point: &GridPoint, run: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(point.algorithm.label().as_bytes());
    h.update([0u8]);
    h.update(point.alpha.to_bits().to_le_bytes());
    h.update(point.kappa.to_bits().to_le_bytes());
    h.update(point.zeta.to_bits().to_le_bytes());
    h.update((run as u64).to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Aggregated results for one grid cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub point: GridPoint,
    /// Summary under the tuning window; its curves are window independent.
    pub summary: Summary,
    /// `(criterion, stderr)` per window in [`Window::ALL`] order.
    pub criteria: [(f64, f64); 2],
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub task: String,
    pub window: Window,
    pub cells: Vec<CellResult>,
    pub table: SweepTable,
    /// Cells that could not be run, with the reason.
    pub failures: Vec<(GridPoint, String)>,
}

impl SweepOutcome {
    /// Best cell per algorithm under the tuning window, in configuration order.
    pub fn best_cells(&self) -> Vec<&CellResult> {
        self.table
            .algorithms()
            .into_iter()
            .filter_map(|a| self.best_cell(a))
            .collect()
    }

    pub fn best_cell(&self, algorithm: Algorithm) -> Option<&CellResult> {
        let row = self.table.best(algorithm, self.window)?;
        self.cells.iter().find(|c| {
            c.point.algorithm == algorithm
                && c.point.alpha == row.alpha
                && c.point.kappa == row.kappa
                && c.point.zeta == row.zeta
        })
    }
}

fn run_cell(ctx: &TaskContext, cfg: &ExperimentConfig, point: &GridPoint) -> Result<CellResult> {
    let algo = cfg.algo_config(point);
    let records = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_single(ctx, &algo, cfg.episodes, cell_seed(cfg.seed, point, run)))
        .collect::<Result<Vec<_>>>()?;
    let cell_error = |e: tddlab_core::metrics::MetricsError| HarnessError::Cell {
        cell: format!("{} α={} κ={} ζ={}", point.algorithm, point.alpha, point.kappa, point.zeta),
        message: e.to_string(),
    };
    let summary = summarize(&records, cfg.window).map_err(cell_error)?;
    let mut criteria = [(0.0, 0.0); 2];
    for (slot, window) in criteria.iter_mut().zip(Window::ALL) {
        *slot = if window == cfg.window {
            (summary.criterion, summary.criterion_stderr)
        } else {
            let per_run: Vec<f64> = records.iter().map(|r| window.mean(&r.rms_series)).collect();
            tddlab_core::numerics::mean_and_stderr(&per_run).map_err(|e| cell_error(e.into()))?
        };
    }
    Ok(CellResult {
        point: *point,
        summary,
        criteria,
    })
}

/// Runs every grid cell of `cfg` on the current rayon pool.
///
/// Cells and runs are collected in index order, so the outcome is identical
/// for any pool size.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    run_grid(cfg, &cfg.grid())
}

/// Like [`run_sweep`] over an explicit list of grid points.
pub fn run_grid(cfg: &ExperimentConfig, grid: &[GridPoint]) -> Result<SweepOutcome> {
    let ctx = TaskContext::from_config(cfg)?;
    let results: Vec<Result<CellResult>> = grid.par_iter().map(|p| run_cell(&ctx, cfg, p)).collect();
    let mut cells = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (point, r) in grid.iter().zip(results) {
        match r {
            Ok(c) => cells.push(c),
            Err(e) => failures.push((*point, e.to_string())),
        }
    }
    let task = ctx.env.task.label();
    let mut table = SweepTable::default();
    for c in &cells {
        for (window, &(criterion, criterion_stderr)) in Window::ALL.iter().zip(&c.criteria) {
            table.rows.push(SweepRow {
                task: task.clone(),
                algorithm: c.point.algorithm,
                alpha: c.point.alpha,
                kappa: c.point.kappa,
                zeta: c.point.zeta,
                seed_count: c.summary.runs,
                criterion,
                criterion_stderr,
                window: *window,
            });
        }
    }
    Ok(SweepOutcome {
        task,
        window: cfg.window,
        cells,
        table,
        failures,
    })
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;
    use tddlab_core::envs::{make_env, Representation, Task, Weighting};
    use tddlab_core::learners::StepSchedule;

    fn rw_ctx() -> TaskContext {
        let env = make_env(Task::RandomWalk {
            states: 10,
            representation: Representation::Tabular,
        })
        .unwrap();
        let d = eval_weighting(&env, Weighting::Uniform).unwrap();
        TaskContext::new(env, d, 100_000)
    }

    #[test]
    fn single_run_is_reproducible() {
        let ctx = rw_ctx();
        let cfg = AlgoConfig::new(Algorithm::Td, StepSchedule::tapered(0.1, 1000.0));
        let a = run_single(&ctx, &cfg, 500, 0).unwrap();
        let b = run_single(&ctx, &cfg, 500, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rms_series.len(), 500);
        assert!(a.rms_series.iter().all(|&v| v >= 0.0));
        assert_ne!(a, run_single(&ctx, &cfg, 500, 1).unwrap());
    }

    #[test]
    fn gdd_without_kappa_reproduces_gtd2_run() {
        let ctx = rw_ctx();
        let s = StepSchedule::tapered(0.1, 1000.0);
        let gdd = AlgoConfig::new(Algorithm::GradientDd, s).with_kappa(0.0);
        let gtd2 = AlgoConfig::new(Algorithm::Gtd2, s).with_zeta(1.0);
        let a = run_single(&ctx, &gdd, 300, 5).unwrap();
        let b = run_single(&ctx, &gtd2, 300, 5).unwrap();
        assert_eq!(a.rms_series, b.rms_series);
    }

    #[test]
    fn invalid_config_rejected() {
        let ctx = rw_ctx();
        let cfg = AlgoConfig::new(Algorithm::Td, StepSchedule::constant(-0.1));
        assert_eq!(run_single(&ctx, &cfg, 1, 0).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn seeds_depend_on_every_component() {
        let p = GridPoint {
            algorithm: Algorithm::Td,
            alpha: 0.1,
            kappa: 0.0,
            zeta: 1.0,
        };
        let base = cell_seed(0, &p, 0);
        assert_ne!(base, cell_seed(1, &p, 0));
        assert_ne!(base, cell_seed(0, &p, 1));
        assert_ne!(base, cell_seed(0, &GridPoint { alpha: 0.2, ..p }, 0));
        assert_ne!(
            base,
            cell_seed(
                0,
                &GridPoint {
                    algorithm: Algorithm::Gtd2,
                    ..p
                },
                0
            )
        );
    }

    #[test]
    fn one_cell_one_seed_table() {
        let text = "task = \"random_walk\"\nstates = 5\nalgorithms = [\"TD\"]\nalphas = [0.1]\nruns = 1\nepisodes = 200\n";
        let cfg = ExperimentConfig::from_toml_str(text, &Overrides::default()).unwrap();
        let out = run_sweep(&cfg).unwrap();
        let rows: Vec<_> = out.table.rows.iter().filter(|r| r.window == Window::Final100).collect();
        assert_eq!(rows.len(), 1);
        let ctx = TaskContext::from_config(&cfg).unwrap();
        let rec = run_single(&ctx, &cfg.algo_config(&cfg.grid()[0]), 200, cell_seed(0, &cfg.grid()[0], 0)).unwrap();
        assert_eq!(rows[0].criterion, Window::Final100.mean(&rec.rms_series));
        assert_eq!(rows[0].criterion_stderr, 0.0);
    }

    #[test]
    fn adding_grid_points_keeps_existing_cells() {
        let base = "task = \"random_walk\"\nstates = 5\nalgorithms = [\"TD\"]\nruns = 2\nepisodes = 150\n";
        let small = ExperimentConfig::from_toml_str(&format!("{base}alphas = [0.1]\n"), &Overrides::default()).unwrap();
        let large =
            ExperimentConfig::from_toml_str(&format!("{base}alphas = [0.05, 0.1]\n"), &Overrides::default()).unwrap();
        let a = run_sweep(&small).unwrap();
        let b = run_sweep(&large).unwrap();
        assert_eq!(a.cells[0].summary.mean, b.cells[1].summary.mean);
    }

    #[test]
    fn longer_episodes_thin_the_record() {
        let env = make_env(Task::Baird {
            states: 7,
            policy: tddlab_core::envs::BairdPolicy::Classic,
        })
        .unwrap();
        let d = eval_weighting(&env, Weighting::Uniform).unwrap();
        let one = TaskContext::new(env, d, 1);
        let three = one.clone().with_transitions_per_episode(3);
        let cfg = AlgoConfig::new(Algorithm::GradientDd, StepSchedule::constant(0.01)).with_kappa(1.0);
        let fine = run_single(&one, &cfg, 300, 4).unwrap();
        let coarse = run_single(&three, &cfg, 100, 4).unwrap();
        let every_third: Vec<f64> = fine.rms_series.iter().skip(2).step_by(3).copied().collect();
        assert_eq!(coarse.rms_series, every_third);
    }
}
