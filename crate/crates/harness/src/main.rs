//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 configuration error, 3 simulation failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aquaplan_harness::campaign;
use aquaplan_harness::config::{ConfigError, ExperimentConfig, PlannerKind};
use aquaplan_harness::plots;

#[derive(Parser)]
#[command(
    name = "aquaplan",
    about = "UAV river-survey path planning benchmark: flow-field guidance with receding-horizon optimization over drifting surface-shadow obstacles",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Configuration file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Run count override.
    #[arg(long)]
    runs: Option<usize>,
    /// Planner override: pid | ifds | ifds_mpc.
    #[arg(long)]
    planner: Option<String>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One closed-loop run; writes step/metrics/plot artifacts.
    Simulate(CommonOpts),
    /// Paired-seed comparison of all three planners.
    Montecarlo(CommonOpts),
    /// Prediction-horizon sweep (cost and step time per N).
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated horizon lengths.
        #[arg(long, default_value = "5,10,20,30")]
        horizons: String,
    },
    /// Altitude-adjustment ablation on a narrow-corridor preset.
    AblateDfaa(CommonOpts),
    /// Success rate under observation noise.
    Robustness {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated noise standard deviations (m).
        #[arg(long, default_value = "0,1,3")]
        sigmas: String,
    },
    /// Regenerate plot files for an existing run directory.
    Plots(CommonOpts),
}

fn build_config(opts: &CommonOpts) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = opts.runs {
        cfg.runs = runs;
    }
    if let Some(p) = &opts.planner {
        cfg.planner = PlannerKind::parse(p)?;
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SIM: u8 = 3;

fn fail(code: u8, err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn parse_numbers<T: std::str::FromStr>(list: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    list.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| format!("'{s}': {e}")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(opts) => {
            let cfg = match build_config(&opts) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match campaign::simulate_to_dir(&cfg, cfg.seed) {
                Ok((run, dir)) => {
                    println!(
                        "run: success={} reached_goal={} collided={} path={:.1} m smoothness={:.3} min_gamma={:.3} coverage={:.0} m^2",
                        run.metrics.success,
                        run.metrics.reached_goal,
                        run.metrics.collided,
                        run.metrics.path_length,
                        run.metrics.smoothness,
                        run.metrics.min_gamma,
                        run.metrics.cumulative_coverage,
                    );
                    println!("artifacts: {}", dir.display());
                    if run.metrics.success {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_SIM)
                    }
                }
                Err(e) => fail(EXIT_SIM, e),
            }
        }
        Command::Montecarlo(opts) => {
            let cfg = match build_config(&opts) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let planners = [PlannerKind::Pid, PlannerKind::IfdsOnly, PlannerKind::IfdsMpc];
            match campaign::monte_carlo(&cfg, &planners, cfg.runs, Some(&cfg.out_dir)) {
                Ok(summary) => {
                    for s in &summary.per_planner {
                        println!(
                            "{:9} success {:5.1}% | path {:7.1} m | smoothness {:6.2} | min_gamma {:5.2} | coverage {:8.0} m^2",
                            s.planner.name(),
                            s.success_rate_pct,
                            s.mean_path_length_success,
                            s.mean_smoothness_success,
                            s.mean_min_gamma_success,
                            s.mean_coverage_all,
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_SIM, e),
            }
        }
        Command::Sweep { common, horizons } => {
            let cfg = match build_config(&common) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let ns: Vec<usize> = match parse_numbers(&horizons) {
                Ok(v) => v,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if ns.iter().any(|n| *n == 0) {
                return fail(EXIT_CONFIG, "horizons must be >= 1");
            }
            match campaign::sweep_horizon(&cfg, &ns, Some(&cfg.out_dir)) {
                Ok(rows) => {
                    println!("N,mean_cost,mean_step_ms");
                    for (n, c, ms) in rows {
                        println!("{n},{c:.3},{ms:.3}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_SIM, e),
            }
        }
        Command::AblateDfaa(opts) => {
            let mut cfg = match build_config(&opts) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if opts.config.is_none() {
                cfg.scenario = aquaplan_core::environment::ScenarioPreset::Narrow;
            }
            match campaign::ablate_dfaa(&cfg, Some(&cfg.out_dir)) {
                Ok(result) => {
                    let min_alt = |runs: &[aquaplan_harness::sim::RunOutput]| {
                        runs.iter()
                            .map(|r| r.metrics.min_altitude)
                            .fold(f64::INFINITY, f64::min)
                    };
                    println!(
                        "dfaa on (eta={}): min altitude {:.1} m; dfaa off: min altitude {:.1} m",
                        result.eta_on,
                        min_alt(&result.with_dfaa),
                        min_alt(&result.without),
                    );
                    ExitCode::SUCCESS
                }
                Err(campaign::CampaignError::Core(
                    e @ aquaplan_core::Error::AblationPresetRequired,
                )) => fail(EXIT_CONFIG, e),
                Err(e) => fail(EXIT_SIM, e),
            }
        }
        Command::Robustness { common, sigmas } => {
            let cfg = match build_config(&common) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let sig: Vec<f64> = match parse_numbers(&sigmas) {
                Ok(v) => v,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if sig.iter().any(|s| *s < 0.0) {
                return fail(EXIT_CONFIG, "sigmas must be >= 0");
            }
            match campaign::robustness(&cfg, &sig, Some(&cfg.out_dir)) {
                Ok(rows) => {
                    println!("sigma_m,success_rate_pct");
                    for (s, r) in rows {
                        println!("{s},{r:.1}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_SIM, e),
            }
        }
        Command::Plots(opts) => {
            let dir = match &opts.out {
                Some(d) => d.clone(),
                None => return fail(EXIT_CONFIG, "plots requires --out <run directory>"),
            };
            match plots::emit_plots(&dir) {
                Ok(files) => {
                    for (name, _) in files {
                        println!("wrote {}", dir.join(name).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_SIM, e),
            }
        }
    }
}
