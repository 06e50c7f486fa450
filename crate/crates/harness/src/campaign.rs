//! Campaign orchestration: Monte Carlo comparisons, horizon sweeps, the
//! altitude-adjustment ablation and noise robustness.
//!
//! All planners in one campaign see identical scenario realizations per run
//! index (paired seeds); runs execute in parallel and reduce in seed order.

use std::fmt::Write as _;
use std::path::Path;

use aquaplan_core::metrics::RunMetrics;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ExperimentConfig, PlannerKind};
use crate::manifest::{unique_dir, write_artifact, write_manifest};
use crate::sim::{run_single, RunOutput, SimError};
use crate::{io, plots};

#[derive(Error, Debug)]
pub enum CampaignError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Core(#[from] aquaplan_core::Error),
    #[error(transparent)]
    Plot(#[from] crate::plots::PlotError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One run's ledger line inside a campaign.
#[derive(Debug, Clone)]
pub struct RunRecordRow {
    pub planner: PlannerKind,
    pub run_index: usize,
    pub seed: u64,
    pub metrics: RunMetrics<f64>,
    pub executed_cost: f64,
    pub emergency_steps: usize,
}

/// Aggregate statistics for one planner over the campaign. Means over
/// successful and failed runs are reported separately.
#[derive(Debug, Clone)]
pub struct PlannerSummary {
    pub planner: PlannerKind,
    pub runs: usize,
    pub successes: usize,
    pub success_rate_pct: f64,
    pub mean_path_length_success: f64,
    pub mean_path_length_failed: f64,
    pub mean_smoothness_success: f64,
    pub mean_smoothness_failed: f64,
    pub mean_min_gamma_success: f64,
    pub mean_coverage_all: f64,
    pub mean_coverage_success: f64,
    pub mean_coverage_ratio: f64,
    pub mean_step_ms: f64,
}

#[derive(Debug, Clone)]
pub struct CampaignSummary {
    pub per_planner: Vec<PlannerSummary>,
    pub rows: Vec<RunRecordRow>,
}

impl CampaignSummary {
    pub fn for_planner(&self, p: PlannerKind) -> Option<&PlannerSummary> {
        self.per_planner.iter().find(|s| s.planner == p)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn summarize(planner: PlannerKind, rows: &[RunRecordRow]) -> PlannerSummary {
    let mine: Vec<&RunRecordRow> = rows.iter().filter(|r| r.planner == planner).collect();
    let ok: Vec<&&RunRecordRow> = mine.iter().filter(|r| r.metrics.success).collect();
    let bad: Vec<&&RunRecordRow> = mine.iter().filter(|r| !r.metrics.success).collect();
    PlannerSummary {
        planner,
        runs: mine.len(),
        successes: ok.len(),
        success_rate_pct: 100.0 * ok.len() as f64 / mine.len().max(1) as f64,
        mean_path_length_success: mean(ok.iter().map(|r| r.metrics.path_length)),
        mean_path_length_failed: mean(bad.iter().map(|r| r.metrics.path_length)),
        mean_smoothness_success: mean(ok.iter().map(|r| r.metrics.smoothness)),
        mean_smoothness_failed: mean(bad.iter().map(|r| r.metrics.smoothness)),
        mean_min_gamma_success: mean(ok.iter().map(|r| r.metrics.min_gamma)),
        mean_coverage_all: mean(mine.iter().map(|r| r.metrics.cumulative_coverage)),
        mean_coverage_success: mean(ok.iter().map(|r| r.metrics.cumulative_coverage)),
        mean_coverage_ratio: mean(mine.iter().map(|r| r.metrics.mean_coverage_ratio)),
        mean_step_ms: mean(mine.iter().map(|r| r.metrics.mean_step_ms)),
    }
}

pub fn summary_csv(summary: &CampaignSummary) -> String {
    let mut out = String::from(
        "planner,runs,successes,success_rate_pct,mean_path_length_success,\
         mean_path_length_failed,mean_smoothness_success,mean_smoothness_failed,\
         mean_min_gamma_success,mean_coverage_all,mean_coverage_success,\
         mean_coverage_ratio,mean_step_ms\n",
    );
    for s in &summary.per_planner {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            s.planner.name(),
            s.runs,
            s.successes,
            s.success_rate_pct,
            s.mean_path_length_success,
            s.mean_path_length_failed,
            s.mean_smoothness_success,
            s.mean_smoothness_failed,
            s.mean_min_gamma_success,
            s.mean_coverage_all,
            s.mean_coverage_success,
            s.mean_coverage_ratio,
            s.mean_step_ms,
        );
    }
    out
}

/// Run every planner over paired seeds `base..base+n`. With `out` set, the
/// campaign directory receives per-run step CSVs, the metrics table, the
/// summary and a manifest.
pub fn monte_carlo(
    cfg: &ExperimentConfig,
    planners: &[PlannerKind],
    n_runs: usize,
    out: Option<&Path>,
) -> Result<CampaignSummary, CampaignError> {
    let mut unique: Vec<PlannerKind> = Vec::new();
    for p in planners {
        if unique.contains(p) {
            eprintln!("warning: duplicate planner '{}' ignored", p.name());
        } else {
            unique.push(*p);
        }
    }

    let jobs: Vec<(PlannerKind, usize)> = unique
        .iter()
        .flat_map(|p| (0..n_runs).map(move |i| (*p, i)))
        .collect();
    let outputs: Vec<(PlannerKind, usize, u64, RunOutput)> = jobs
        .par_iter()
        .map(|(planner, i)| {
            let mut run_cfg = cfg.clone();
            run_cfg.planner = *planner;
            let seed = cfg.seed.wrapping_add(*i as u64);
            let out = run_single(&run_cfg, seed)?;
            Ok::<_, CampaignError>((*planner, *i, seed, out))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows: Vec<RunRecordRow> = outputs
        .iter()
        .map(|(planner, i, seed, out)| RunRecordRow {
            planner: *planner,
            run_index: *i,
            seed: *seed,
            metrics: out.metrics.clone(),
            executed_cost: out.executed_cost,
            emergency_steps: out.emergency_steps,
        })
        .collect();
    rows.sort_by_key(|r| (r.planner.name(), r.run_index));

    let per_planner = unique.iter().map(|p| summarize(*p, &rows)).collect();
    let summary = CampaignSummary { per_planner, rows };

    if let Some(base) = out {
        let dir = unique_dir(base, "montecarlo")?;
        let mut artifacts = Vec::new();
        for (planner, i, seed, run) in &outputs {
            let name = format!("steps/{}_{:03}.csv", planner.name(), i);
            artifacts.push(write_artifact(&dir, &name, &io::step_csv(&run.records))?);
            let vname = format!("v_series/{}_{:03}.csv", planner.name(), i);
            artifacts.push(write_artifact(&dir, &vname, &io::v_series_csv(&run.v_series, cfg.dt))?);
            let _ = seed;
        }
        let metric_rows: Vec<(String, u64, RunMetrics<f64>)> = summary
            .rows
            .iter()
            .map(|r| (r.planner.name().to_string(), r.seed, r.metrics.clone()))
            .collect();
        artifacts.push(write_artifact(&dir, "metrics.csv", &io::metrics_csv(&metric_rows))?);
        artifacts.push(write_artifact(&dir, "summary.csv", &summary_csv(&summary))?);
        write_manifest(&dir, &cfg.render(), cfg.seed, &artifacts)?;
    }
    Ok(summary)
}

/// Executed-path cost and step timing across horizon lengths (paired seeds).
pub fn sweep_horizon(
    cfg: &ExperimentConfig,
    horizons: &[usize],
    out: Option<&Path>,
) -> Result<Vec<(usize, f64, f64)>, CampaignError> {
    let mut results = Vec::new();
    for &n in horizons {
        let mut sweep_cfg = cfg.clone();
        sweep_cfg.planner = PlannerKind::IfdsMpc;
        sweep_cfg.horizon = n;
        sweep_cfg.timing = true;
        let per_run: Vec<(f64, f64)> = (0..cfg.runs)
            .into_par_iter()
            .map(|i| {
                let run = run_single(&sweep_cfg, cfg.seed.wrapping_add(i as u64))?;
                Ok::<_, CampaignError>((run.executed_cost, run.metrics.mean_step_ms))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mean_cost = mean(per_run.iter().map(|r| r.0));
        let mean_ms = mean(per_run.iter().map(|r| r.1));
        results.push((n, mean_cost, mean_ms));
    }
    if let Some(base) = out {
        let dir = unique_dir(base, "sweep")?;
        let mut csv = String::from("N,mean_cost,mean_step_ms\n");
        for (n, c, ms) in &results {
            let _ = writeln!(csv, "{n},{c},{ms:.3}");
        }
        let artifacts = vec![write_artifact(&dir, "sweep.csv", &csv)?];
        write_manifest(&dir, &cfg.render(), cfg.seed, &artifacts)?;
    }
    Ok(results)
}

/// Paired-arm ablation of the descent mechanism.
pub struct AblationResult {
    pub with_dfaa: Vec<RunOutput>,
    pub without: Vec<RunOutput>,
    pub eta_on: f64,
}

/// The preset must contain a reach where the observable width stays under the
/// threshold for at least 10 s of flight at cruise speed.
fn has_narrow_reach(cfg: &ExperimentConfig) -> Result<bool, CampaignError> {
    let env: aquaplan_core::environment::Environment<f64> =
        aquaplan_core::environment::build_environment(cfg.scenario, cfg.seed)?;
    let length = env.scenario.centerline_length();
    let need = 10.0 * cfg.v0; // meters of contiguous narrow reach
    let mut run = 0.0;
    let mut s = 0.0;
    while s < length {
        let (p, _) = env.scenario.at_arc_length(s);
        let probe = aquaplan_core::geometry::Vec3::new(p.x, p.y, 100.0);
        let w = aquaplan_core::ifds::effective_width(&probe, 0.0, &env.scenario, &env.shadows);
        if w < cfg.tau {
            run += 5.0;
            if run >= need {
                return Ok(true);
            }
        } else {
            run = 0.0;
        }
        s += 5.0;
    }
    Ok(false)
}

/// Run the descent-gain-on and descent-gain-off arms over paired seeds.
pub fn ablate_dfaa(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<AblationResult, CampaignError> {
    if !has_narrow_reach(cfg)? {
        return Err(CampaignError::Core(
            aquaplan_core::Error::AblationPresetRequired,
        ));
    }
    let eta_on = if cfg.eta > 0.0 { cfg.eta } else { 0.6 };
    let mut cfg_on = cfg.clone();
    cfg_on.eta = eta_on;
    cfg_on.grid_eta = vec![eta_on];
    let mut cfg_off = cfg.clone();
    cfg_off.eta = 0.0;
    cfg_off.grid_eta = vec![0.0];

    let arm = |c: &ExperimentConfig| -> Result<Vec<RunOutput>, CampaignError> {
        (0..cfg.runs)
            .into_par_iter()
            .map(|i| Ok(run_single(c, cfg.seed.wrapping_add(i as u64))?))
            .collect()
    };
    let with_dfaa = arm(&cfg_on)?;
    let without = arm(&cfg_off)?;

    if let Some(base) = out {
        let dir = unique_dir(base, "ablate_dfaa")?;
        let mut artifacts = Vec::new();
        let mut csv = String::from("arm,run,min_altitude_m,gsd_min_m_px,mean_w_eff_m\n");
        for (arm_name, runs) in [("dfaa_on", &with_dfaa), ("dfaa_off", &without)] {
            for (i, run) in runs.iter().enumerate() {
                let mean_w = mean(run.records.iter().map(|r| r.w_eff));
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    arm_name, i, run.metrics.min_altitude, run.metrics.gsd_min, mean_w
                );
                let name = format!("series/{arm_name}_{i:03}.csv");
                let mut series = String::from("t,z,w_eff,gsd\n");
                for r in &run.records {
                    let _ = writeln!(series, "{},{},{},{}", r.t, r.position.z, r.w_eff, r.gsd);
                }
                artifacts.push(write_artifact(&dir, &name, &series)?);
            }
        }
        artifacts.push(write_artifact(&dir, "ablation.csv", &csv)?);
        write_manifest(&dir, &cfg.render(), cfg.seed, &artifacts)?;
    }
    Ok(AblationResult {
        with_dfaa,
        without,
        eta_on,
    })
}

/// Collision-free success rate as observation noise grows.
pub fn robustness(
    cfg: &ExperimentConfig,
    sigmas: &[f64],
    out: Option<&Path>,
) -> Result<Vec<(f64, f64)>, CampaignError> {
    let mut results = Vec::new();
    for &sigma in sigmas {
        let mut noisy = cfg.clone();
        noisy.noise_sigma = sigma;
        let successes: Vec<bool> = (0..cfg.runs)
            .into_par_iter()
            .map(|i| {
                let run = run_single(&noisy, cfg.seed.wrapping_add(i as u64))?;
                Ok::<_, CampaignError>(run.metrics.success)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rate = 100.0 * successes.iter().filter(|s| **s).count() as f64
            / successes.len().max(1) as f64;
        results.push((sigma, rate));
    }
    if let Some(base) = out {
        let dir = unique_dir(base, "robustness")?;
        let mut csv = String::from("sigma_m,success_rate_pct\n");
        for (s, r) in &results {
            let _ = writeln!(csv, "{s},{r}");
        }
        let artifacts = vec![write_artifact(&dir, "robustness.csv", &csv)?];
        write_manifest(&dir, &cfg.render(), cfg.seed, &artifacts)?;
    }
    Ok(results)
}

/// Single-run artifact bundle used by the `simulate` subcommand.
pub fn simulate_to_dir(cfg: &ExperimentConfig, seed: u64) -> Result<(RunOutput, std::path::PathBuf), CampaignError> {
    let run = run_single(cfg, seed)?;
    let dir = unique_dir(&cfg.out_dir, &format!("simulate_{}", cfg.planner.name()))?;
    let mut artifacts = Vec::new();
    artifacts.push(write_artifact(&dir, "steps.csv", &io::step_csv(&run.records))?);
    let row = (cfg.planner.name().to_string(), seed, run.metrics.clone());
    artifacts.push(write_artifact(&dir, "metrics.csv", &io::metrics_csv(&[row]))?);
    artifacts.push(write_artifact(&dir, "v_series.csv", &io::v_series_csv(&run.v_series, cfg.dt))?);
    artifacts.push(write_artifact(&dir, "shadows_t0.csv", &io::shadow_csv(&run.initial_snapshot))?);
    let plot_artifacts = plots::emit_plots(&dir)?;
    artifacts.extend(plot_artifacts);
    write_manifest(&dir, &cfg.render(), seed, &artifacts)?;
    Ok((run, dir))
}
