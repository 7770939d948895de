use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tddlab_core::envs::Weighting;
use tddlab_core::learners::StepSchedule;
use tddlab_core::metrics::Window;
use tddlab_harness::pipeline::{self, PlotKind, Written};
use tddlab_harness::report::{oracle_report, read_env_json, to_json, write_env_json};
use tddlab_harness::{ExperimentConfig, HarnessError, Overrides, Result, SweepOutcome};

/// Linear TD policy-evaluation experiments.
#[derive(Debug, Parser)]
#[command(name = "tddlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the first grid point of each algorithm.
    Run(RunArgs),
    /// Run the full grid and select the best step size per algorithm.
    Sweep(RunArgs),
    /// Print the exact expectations, fixed point and diagnostics as JSON.
    Oracle(OracleArgs),
    /// Render a sweep table or curve files to SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment config.
    config: PathBuf,
    /// Runs per grid cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// TOML experiment config, or an environment JSON file (`.json`).
    input: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the environment as JSON.
    #[arg(long)]
    env_out: Option<PathBuf>,
    /// Step size for the schedule diagnostics [default: first config α, or 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Taper horizon [default: config horizon, or 1000].
    #[arg(long)]
    horizon: Option<f64>,
    /// Use a constant schedule [default: config schedule, or tapered].
    #[arg(long)]
    constant: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Sensitivity,
    Curves,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WindowArg {
    #[value(name = "final_100")]
    Final100,
    #[value(name = "all_episodes")]
    AllEpisodes,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Sweep table CSV (sensitivity) or one CSV per curve (curves).
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Output SVG [default: the first input with an .svg extension].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table window plotted by the sensitivity chart.
    #[arg(long, value_enum, default_value = "final_100")]
    window: WindowArg,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let overrides = Overrides {
        runs: args.runs,
        seed: args.seed,
        out: args.out.clone(),
    };
    ExperimentConfig::load(&args.config, &overrides)
}

fn report_outcome(outcome: &SweepOutcome, written: &Written) {
    for cell in outcome.best_cells() {
        let p = &cell.point;
        println!(
            "{} best alpha={} kappa={} zeta={} {}={:.6} (stderr {:.6}, diverged {:.0}%)",
            p.algorithm,
            p.alpha,
            p.kappa,
            p.zeta,
            outcome.window,
            cell.summary.criterion,
            cell.summary.criterion_stderr,
            100.0 * cell.summary.divergence_rate
        );
    }
    for (p, msg) in &outcome.failures {
        eprintln!("cell failed: {} alpha={}: {msg}", p.algorithm, p.alpha);
    }
    for f in &written.files {
        println!("wrote {}", f.display());
    }
}

fn run(args: &RunArgs, full: bool) -> Result<()> {
    let cfg = load(args)?;
    let workers = args.workers.unwrap_or_else(default_workers);
    let (outcome, written) = if full {
        pipeline::sweep(&cfg, workers)?
    } else {
        pipeline::run(&cfg, workers)?
    };
    report_outcome(&outcome, &written);
    Ok(())
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let (env, weighting, alpha, horizon, constant) = if is_json(&args.input) {
        (read_env_json(&args.input)?, Weighting::Uniform, 1.0, 1000.0, false)
    } else {
        let cfg = ExperimentConfig::load(&args.input, &Overrides::default())?;
        let constant = cfg.schedule == tddlab_core::learners::ScheduleKind::Constant;
        (cfg.environment()?, cfg.weighting, cfg.alphas[0], cfg.horizon, constant)
    };
    let alpha = args.alpha.unwrap_or(alpha);
    let horizon = args.horizon.unwrap_or(horizon);
    if !(alpha.is_finite() && alpha > 0.0 && horizon.is_finite() && horizon > 0.0) {
        return Err(HarnessError::config("--alpha and --horizon must be finite and > 0"));
    }
    let schedule = if constant || args.constant {
        StepSchedule::constant(alpha)
    } else {
        StepSchedule::tapered(alpha, horizon)
    };
    if let Some(path) = &args.env_out {
        write_env_json(&env, path)?;
    }
    let text = to_json(&oracle_report(&env, weighting, schedule)?)?;
    match &args.out {
        Some(path) => tddlab_harness::output::write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn plot(args: &PlotArgs) -> Result<()> {
    let kind = match args.kind {
        Kind::Sensitivity => PlotKind::Sensitivity,
        Kind::Curves => PlotKind::Curves,
    };
    let window = match args.window {
        WindowArg::Final100 => Window::Final100,
        WindowArg::AllEpisodes => Window::AllEpisodes,
    };
    let out = args.out.clone().unwrap_or_else(|| args.csv[0].with_extension("svg"));
    pipeline::plot(&args.csv, kind, window, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a, false),
        Command::Sweep(a) => run(a, true),
        Command::Oracle(a) => oracle(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
