//! Closed-loop single-run simulation: perception, planning, logging.

use std::time::Instant;

use aquaplan_core::baselines::{ifds_only_step, PidGains, PidPlanner};
use aquaplan_core::environment::{
    build_environment, fit_ellipsoids, Environment, FitConfig, Perception, PerceptionConfig,
    ShadowSample,
};
use aquaplan_core::geometry::min_gamma;
use aquaplan_core::ifds::{IfdsParams, KinematicLimits, UavState};
use aquaplan_core::metrics::{
    summarize_run, CameraModel, CoverageAccumulator, LyapunovMonitor, RunMetrics, StepRecord,
};
use aquaplan_core::mpc::{optimize_step, MpcConfig, PlannerContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::{ExperimentConfig, PlannerKind};

#[derive(Error, Debug)]
pub enum SimError {
    #[error("core error: {0}")]
    Core(#[from] aquaplan_core::Error),
    #[error("planner produced no guidance: {0}")]
    Guidance(String),
}

/// Everything one run produces.
pub struct RunOutput {
    pub metrics: RunMetrics<f64>,
    /// Composite cost of the executed path (horizon-independent).
    pub executed_cost: f64,
    pub records: Vec<StepRecord<f64>>,
    /// Deviation-energy series of the convergence monitor, one per step.
    pub v_series: Vec<f64>,
    /// Steps on which the all-infeasible emergency fallback fired.
    pub emergency_steps: usize,
    /// Set when the run ended because guidance failed (left the domain).
    pub aborted: Option<String>,
    /// Shadow snapshot at t = 0 (exportable).
    pub initial_snapshot: ShadowSample<f64>,
}

pub fn limits_of(cfg: &ExperimentConfig) -> KinematicLimits<f64> {
    KinematicLimits::new(
        cfg.omega_max,
        (cfg.theta_min, cfg.theta_max),
        (cfg.h_min, cfg.h_max),
        cfg.v0,
        cfg.dt,
    )
    .expect("validated config")
}

pub fn camera_of(cfg: &ExperimentConfig) -> CameraModel<f64> {
    CameraModel {
        fov: cfg.camera_fov_deg.to_radians(),
        gsd_slope: cfg.camera_gsd_slope,
    }
}

fn fixed_params(cfg: &ExperimentConfig) -> IfdsParams<f64> {
    IfdsParams {
        rho: cfg.rho,
        sigma_n: cfg.sigma_n,
        eta: cfg.eta,
        tau: cfg.tau,
    }
}

/// Mix a salt into a seed without disturbing the scenario stream.
fn salted(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ salt
}

enum Planner {
    Pid(Box<PidPlanner<f64>>),
    IfdsOnly(IfdsParams<f64>),
    Mpc(Box<MpcConfig<f64>>),
}

/// Deterministic closed-loop simulation of one mission.
///
/// The planner only ever sees the perception pipeline's obstacle estimates;
/// ground truth enters the log exclusively through the safety metrics.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput, SimError> {
    let env: Environment<f64> = build_environment(cfg.scenario, seed)?;
    let limits = limits_of(cfg);
    let camera = camera_of(cfg);
    let mission = env.mission;
    let cruise = mission.cruise_altitude;

    let fit_cfg = FitConfig {
        cell_size: cfg.fit_cell,
        k_sigma: cfg.fit_k_sigma,
        inflation: cfg.inflation,
        plane: env.plane,
    };
    let mut perception = Perception::new(PerceptionConfig {
        inflation: cfg.inflation,
        ..PerceptionConfig::default()
    });
    let mut noise_rng = ChaCha8Rng::seed_from_u64(salted(seed, 0x0B5E_55ED));
    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).expect("sigma >= 0"))
    } else {
        None
    };

    let mut observe = |perception: &mut Perception<f64>,
                       rng: &mut ChaCha8Rng,
                       t: f64,
                       dt_since: f64|
     -> Result<(), SimError> {
        let sample = env.sample_shadow(t)?;
        let fits = fit_ellipsoids(&sample, cfg.fit_max_count, &fit_cfg);
        let mut observations: Vec<_> = fits.iter().map(Perception::observation_of).collect();
        if let Some(n) = &noise {
            for (center, _) in observations.iter_mut() {
                center.x += n.sample(rng);
                center.y += n.sample(rng);
                center.z += n.sample(rng);
            }
        }
        perception.step(&observations, dt_since);
        Ok(())
    };

    let initial_snapshot = env.sample_shadow(0.0)?;
    observe(&mut perception, &mut noise_rng, 0.0, 0.0)?;

    let mut planner = match cfg.planner {
        PlannerKind::Pid => {
            let gains = PidGains {
                kp: cfg.pid_kp,
                ki: cfg.pid_ki,
                kd: cfg.pid_kd,
                kp_alt: cfg.pid_kp_alt,
                kd_alt: cfg.pid_kd_alt,
                integral_clamp: cfg.pid_integral_clamp,
            };
            let mut pid = PidPlanner::new(gains, cruise);
            pid.warning_gamma = cfg.pid_warning_gamma;
            Planner::Pid(Box::new(pid))
        }
        PlannerKind::IfdsOnly => Planner::IfdsOnly(fixed_params(cfg)),
        PlannerKind::IfdsMpc => Planner::Mpc(Box::new(
            MpcConfig::new(
                cfg.horizon,
                cfg.lambda,
                (cfg.mu1, cfg.mu2),
                cfg.gamma_safe,
                cfg.candidate_grid(),
            )
            .map_err(aquaplan_core::Error::from)?,
        )),
    };

    let straight = mission.start.distance(&mission.goal);
    let budget = ((cfg.budget_factor * straight / cfg.v0) / cfg.dt).ceil() as usize;

    let mut state = UavState::new(
        mission.start,
        env.scenario
            .centerline_query(&mission.start)
            .tangent
            .heading(),
        0.0,
    );
    let mut coverage = CoverageAccumulator::default();
    let mut monitor = LyapunovMonitor::new(
        aquaplan_core::Vec3F64::new(mission.goal.x, mission.goal.y, 0.0),
        0.0,
        cruise,
    );
    let mut records: Vec<StepRecord<f64>> = Vec::with_capacity(budget.min(4096));
    let mut emergency_steps = 0usize;
    let mut aborted = None;
    let mut executed_cost = 0.0f64;

    'steps: for step in 0..budget {
        let t = step as f64 * cfg.dt;
        if step > 0 && step % cfg.perception_every == 0 {
            observe(
                &mut perception,
                &mut noise_rng,
                t,
                cfg.perception_every as f64 * cfg.dt,
            )?;
        }
        let obstacles = perception.current_obstacles(&env.plane);
        let tracks = perception.track_states();

        let started = Instant::now();
        let (next, guidance, chosen, cost, failed) = match &mut planner {
            Planner::Pid(pid) => {
                // the reactive baseline works off the raw fitted boundary,
                // without the planner-grade safety inflation
                let raw = perception.current_obstacles_with(&env.plane, 1.0);
                let (next, _overridden) = pid.step(&state, &env.scenario, &raw, &limits);
                let w_eff =
                    aquaplan_core::ifds::effective_width(&state.position, t, &env.scenario, &env.shadows);
                (
                    next,
                    aquaplan_core::ifds::GuidanceOutput {
                        velocity: aquaplan_core::Vec3F64::from_angles(next.heading, next.pitch)
                            .scaled(cfg.v0),
                        dfaa_active: false,
                        w_eff,
                    },
                    None,
                    None,
                    false,
                )
            }
            Planner::IfdsOnly(params) => {
                match ifds_only_step(
                    &state,
                    t,
                    &env.scenario,
                    &env.shadows,
                    &obstacles,
                    params,
                    &limits,
                    cruise,
                ) {
                    Ok((next, out)) => (next, out, None, None, false),
                    Err(e) => {
                        // leaving the planning domain ends the mission
                        aborted = Some(e.to_string());
                        break 'steps;
                    }
                }
            }
            Planner::Mpc(mpc_cfg) => {
                let ctx = PlannerContext {
                    scenario: &env.scenario,
                    shadows: &env.shadows,
                    tracks: &tracks,
                    plane: &env.plane,
                    inflation: cfg.inflation,
                    limits: &limits,
                    cruise_altitude: cruise,
                };
                let d = optimize_step(&state, mpc_cfg, &ctx, t);
                (d.next, d.guidance, d.chosen, Some(d.cost), d.failed)
            }
        };
        let elapsed_ms = if cfg.timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        if failed {
            emergency_steps += 1;
        }

        // the virtual obstacle only exists over water: a shadow region can
        // corrupt observations only where there is water to observe
        let g_truth = if env.scenario.in_channel(state.position.x, state.position.y) {
            let truth = env.truth_obstacles(t)?;
            match min_gamma(&state.position, &truth) {
                Ok((g, _)) => g,
                Err(_) => f64::INFINITY,
            }
        } else {
            f64::INFINITY
        };
        let (area, ratio) = coverage.step(
            &state.position,
            state.heading,
            t,
            &env.scenario,
            &env.shadows,
            &camera,
            &limits,
        );
        let planned_g = match min_gamma(&state.position, &obstacles) {
            Ok((g, _)) => g,
            Err(_) => f64::INFINITY,
        };
        // executed-path composite cost: the same three terms as the planning
        // objective, evaluated on the committed step (horizon-independent,
        // with the barrier saturated so one bad step cannot poison a mean)
        if let Ok(ref_dir) = aquaplan_core::environment::reference_field(&env.scenario, &state.position) {
            let v = &guidance.velocity;
            let cos = (ref_dir.dot(v) / v.norm().max(1e-12)).clamp(-1.0, 1.0);
            let e_track = 1.0 - cos;
            let e_obs = aquaplan_core::mpc::penalty(planned_g, cfg.gamma_safe).min(100.0);
            let e_smooth = records.last().map_or(0.0, |prev: &StepRecord<f64>| {
                cfg.mu1 * aquaplan_core::scalar::angle_diff(state.heading, prev.heading).abs()
                    + cfg.mu2 * aquaplan_core::scalar::angle_diff(state.pitch, prev.pitch).abs()
            });
            executed_cost +=
                cfg.lambda[0] * e_track + cfg.lambda[1] * e_obs + cfg.lambda[2] * e_smooth;
        }
        monitor.record(&state.position);
        records.push(StepRecord {
            t,
            position: state.position,
            heading: state.heading,
            pitch: state.pitch,
            chosen_candidate: chosen,
            tracking_cost: cost.map_or(f64::NAN, |c| c.tracking),
            obstacle_cost: cost.map_or(f64::NAN, |c| c.obstacle),
            smoothness_cost: cost.map_or(f64::NAN, |c| c.smoothness),
            total_cost: cost.map_or(f64::NAN, |c| c.total),
            w_eff: guidance.w_eff,
            dfaa_active: guidance.dfaa_active,
            min_gamma: g_truth,
            planned_min_gamma: planned_g,
            coverage_area: area,
            coverage_ratio: ratio,
            gsd: camera.gsd(state.position.z),
            step_compute_ms: elapsed_ms,
        });

        if g_truth <= 1.0 {
            break; // collision against the true field ends the run
        }
        let dx = state.position.x - mission.goal.x;
        let dy = state.position.y - mission.goal.y;
        if (dx * dx + dy * dy).sqrt() <= mission.goal_radius {
            break;
        }
        if !env.scenario.bounds.contains(&next.position) {
            aborted = Some("left the mission domain".into());
            break;
        }
        state = next;
    }

    if records.is_empty() {
        // aborted before the first full step: log the start state so the
        // summary still has one row
        records.push(StepRecord {
            t: 0.0,
            position: state.position,
            heading: state.heading,
            pitch: state.pitch,
            chosen_candidate: None,
            tracking_cost: f64::NAN,
            obstacle_cost: f64::NAN,
            smoothness_cost: f64::NAN,
            total_cost: f64::NAN,
            w_eff: 0.0,
            dfaa_active: false,
            min_gamma: f64::INFINITY,
            planned_min_gamma: f64::INFINITY,
            coverage_area: 0.0,
            coverage_ratio: 0.0,
            gsd: camera.gsd(state.position.z),
            step_compute_ms: 0.0,
        });
    }
    let metrics = summarize_run(
        &records,
        &mission,
        coverage.cumulative_area(),
        cfg.dt,
        budget,
    );
    Ok(RunOutput {
        metrics,
        executed_cost,
        records,
        v_series: monitor.series,
        emergency_steps,
        aborted,
        initial_snapshot,
    })
}
