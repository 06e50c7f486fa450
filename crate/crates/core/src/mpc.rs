//! Receding-horizon optimization over guidance parameter candidates.
//!
//! Every cycle each candidate parameter set is rolled out against the
//! predicted obstacle states, infeasible rollouts are discarded (infinite
//! cost), the cheapest candidate wins and exactly one control step is
//! committed before the window rolls forward.

use rayon::prelude::*;

use crate::environment::{
    predict_obstacles, ObstaclePlane, ObstacleTrackState, PredictedShadows, RiverScenario,
    ShadowQuery,
};
use crate::error::{Error, Result};
use crate::geometry::{gamma, gamma_gradient, min_gamma, SuperEllipsoidObstacle, Vec3};
use crate::ifds::{
    clamp_direction, total_guidance, GuidanceOutput, IfdsParams, KinematicLimits, Trajectory,
    UavState,
};
use crate::scalar::{angle_diff, Real};

/// Receding-horizon settings and the candidate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig<R> {
    /// Prediction horizon length N (steps).
    pub horizon: usize,
    /// Cost weights (tracking, obstacle, smoothness); must sum to 1.
    pub lambda: [R; 3],
    /// Smoothness sub-weights for heading and pitch changes.
    pub mu1: R,
    pub mu2: R,
    /// Field threshold below which the obstacle penalty activates.
    pub gamma_safe: R,
    pub candidate_grid: Vec<IfdsParams<R>>,
}

impl<R: Real> MpcConfig<R> {
    pub fn new(
        horizon: usize,
        lambda: [R; 3],
        mu: (R, R),
        gamma_safe: R,
        candidate_grid: Vec<IfdsParams<R>>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        let sum = lambda[0] + lambda[1] + lambda[2];
        if (sum - R::one()).abs() > R::of(1e-9) {
            return Err(Error::InvalidParameter(
                "cost weights must sum to 1".into(),
            ));
        }
        if mu.0 < R::zero() || mu.1 < R::zero() {
            return Err(Error::InvalidParameter(
                "smoothness sub-weights must be >= 0".into(),
            ));
        }
        if gamma_safe <= R::one() {
            return Err(Error::InvalidParameter("gamma_safe must exceed 1".into()));
        }
        if candidate_grid.is_empty() {
            return Err(Error::InvalidParameter("empty candidate grid".into()));
        }
        Ok(Self {
            horizon,
            lambda,
            mu1: mu.0,
            mu2: mu.1,
            gamma_safe,
            candidate_grid,
        })
    }

    /// 27-candidate Cartesian grid over (rho, sigma_n, eta).
    pub fn default_grid(tau: R) -> Vec<IfdsParams<R>> {
        let mut grid = Vec::with_capacity(27);
        for rho in [1.0, 1.5, 2.5] {
            for sigma_n in [1.0, 1.5, 2.5] {
                for eta in [0.0, 0.3, 0.6] {
                    grid.push(IfdsParams {
                        rho: R::of(rho),
                        sigma_n: R::of(sigma_n),
                        eta: R::of(eta),
                        tau,
                    });
                }
            }
        }
        grid
    }
}

/// Per-window cost decomposition; the obstacle term may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown<R> {
    pub tracking: R,
    pub obstacle: R,
    pub smoothness: R,
    pub total: R,
}

impl<R: Real> CostBreakdown<R> {
    pub fn compose(tracking: R, obstacle: R, smoothness: R, lambda: &[R; 3]) -> Self {
        Self {
            tracking,
            obstacle,
            smoothness,
            total: lambda[0] * tracking + lambda[1] * obstacle + lambda[2] * smoothness,
        }
    }

    pub fn infeasible() -> Self {
        Self {
            tracking: R::infinity(),
            obstacle: R::infinity(),
            smoothness: R::infinity(),
            total: R::infinity(),
        }
    }
}

/// Everything the planner needs to see of the world at one decision point.
pub struct PlannerContext<'a, R: Real> {
    pub scenario: &'a RiverScenario<R>,
    /// Live shadow view used for the committed (current-time) step.
    pub shadows: &'a dyn ShadowQuery<R>,
    pub tracks: &'a [ObstacleTrackState<R>],
    pub plane: &'a ObstaclePlane<R>,
    /// Inflation applied to emitted obstacle geometry.
    pub inflation: R,
    pub limits: &'a KinematicLimits<R>,
    /// Preferred observation altitude for the vertical restore term.
    pub cruise_altitude: R,
}

impl<'a, R: Real> PlannerContext<'a, R> {
    /// Obstacle geometry per horizon step: index 0 is the current estimate,
    /// index k is the k-step-ahead prediction.
    pub fn obstacle_steps(&self, horizon: usize) -> Vec<Vec<SuperEllipsoidObstacle<R>>> {
        let current: Vec<_> = self
            .tracks
            .iter()
            .filter_map(|t| crate::environment::track_obstacle(t, self.plane, self.inflation))
            .collect();
        let mut steps = Vec::with_capacity(horizon + 1);
        steps.push(current);
        steps.extend(predict_obstacles(
            self.tracks,
            horizon,
            self.limits.dt,
            self.plane,
            self.inflation,
        ));
        steps
    }
}

/// One candidate rollout: trajectory plus the velocity pairs the tracking
/// cost compares.
#[derive(Debug, Clone)]
pub struct Rollout<R> {
    pub trajectory: Trajectory<R>,
    pub nominal: Vec<Vec3<R>>,
    pub modulated: Vec<Vec3<R>>,
    /// Guidance output of the first step (the step that would be committed).
    pub first: Option<GuidanceOutput<R>>,
    /// False when guidance errored mid-rollout.
    pub ok: bool,
}

/// Integrate the guidance law for `horizon` steps against the per-step
/// obstacle predictions. Step 0 sees the live shadow field; later steps see
/// only predicted obstacle cross-sections.
pub fn rollout<R: Real>(
    state: &UavState<R>,
    candidate: &IfdsParams<R>,
    cfg: &MpcConfig<R>,
    ctx: &PlannerContext<'_, R>,
    obstacle_steps: &[Vec<SuperEllipsoidObstacle<R>>],
    t: R,
) -> Rollout<R> {
    let n = cfg.horizon;
    let mut traj = Trajectory {
        points: Vec::with_capacity(n + 1),
        headings: Vec::with_capacity(n + 1),
        pitches: Vec::with_capacity(n + 1),
    };
    traj.points.push(state.position);
    traj.headings.push(state.heading);
    traj.pitches.push(state.pitch);
    let mut nominal = Vec::with_capacity(n);
    let mut modulated = Vec::with_capacity(n);
    let mut first = None;
    let mut current = *state;
    for i in 0..n {
        let step_obstacles = &obstacle_steps[i.min(obstacle_steps.len() - 1)];
        let t_i = t + ctx.limits.dt * R::of_usize(i);
        let out = if i == 0 {
            total_guidance(
                &current,
                t_i,
                ctx.scenario,
                &ctx.shadows,
                step_obstacles,
                candidate,
                ctx.limits,
                ctx.cruise_altitude,
            )
        } else {
            let predicted = PredictedShadows {
                obstacles: step_obstacles,
            };
            total_guidance(
                &current,
                t_i,
                ctx.scenario,
                &predicted,
                step_obstacles,
                candidate,
                ctx.limits,
                ctx.cruise_altitude,
            )
        };
        let out = match out {
            Ok(o) => o,
            Err(_) => {
                return Rollout {
                    trajectory: traj,
                    nominal,
                    modulated,
                    first,
                    ok: false,
                }
            }
        };
        if i == 0 {
            first = Some(out);
        }
        let nom = match crate::environment::reference_field(ctx.scenario, &current.position) {
            Ok(d) => d.scaled(ctx.limits.v0),
            Err(_) => {
                return Rollout {
                    trajectory: traj,
                    nominal,
                    modulated,
                    first,
                    ok: false,
                }
            }
        };
        nominal.push(nom);
        modulated.push(out.velocity);
        current = current.advanced(&out.velocity, ctx.limits.dt);
        traj.points.push(current.position);
        traj.headings.push(current.heading);
        traj.pitches.push(current.pitch);
    }
    Rollout {
        trajectory: traj,
        nominal,
        modulated,
        first,
        ok: true,
    }
}

/// Sum of (1 - cos angle) between expected and modulated velocities.
pub fn tracking_cost<R: Real>(nominal: &[Vec3<R>], modulated: &[Vec3<R>]) -> Result<R> {
    if nominal.is_empty() || nominal.len() != modulated.len() {
        return Err(Error::InvalidParameter(
            "velocity lists must be equal-length and non-empty".into(),
        ));
    }
    let mut acc = R::zero();
    for (u, v) in nominal.iter().zip(modulated) {
        let nu = u.norm();
        let nv = v.norm();
        if nu <= R::of(1e-12) || nv <= R::of(1e-12) {
            return Err(Error::UndefinedAngle);
        }
        let cos = (u.dot(v) / (nu * nv)).max(-R::one()).min(R::one());
        acc += R::one() - cos;
    }
    Ok(acc)
}

/// Piecewise barrier on the obstacle field value.
#[inline]
pub fn penalty<R: Real>(g: R, gamma_safe: R) -> R {
    if g > gamma_safe {
        R::zero()
    } else if g <= R::one() {
        R::infinity()
    } else {
        R::one() / (g - R::one())
    }
}

/// Window obstacle penalty: every point against every obstacle of its
/// time-aligned prediction step.
pub fn obstacle_penalty<R: Real>(
    traj: &Trajectory<R>,
    obstacle_steps: &[Vec<SuperEllipsoidObstacle<R>>],
    gamma_safe: R,
) -> R {
    let mut acc = R::zero();
    for (i, p) in traj.points.iter().enumerate() {
        let step = &obstacle_steps[i.min(obstacle_steps.len() - 1)];
        for obs in step {
            acc += penalty(gamma(p, obs), gamma_safe);
            if acc.is_infinite() {
                return acc;
            }
        }
    }
    acc
}

/// Accumulated absolute heading and pitch changes along the window.
pub fn smoothness_cost<R: Real>(traj: &Trajectory<R>, mu1: R, mu2: R) -> R {
    let mut acc = R::zero();
    for i in 1..traj.len() {
        let dpsi = angle_diff(traj.headings[i], traj.headings[i - 1]).abs();
        let dtheta = angle_diff(traj.pitches[i], traj.pitches[i - 1]).abs();
        acc += mu1 * dpsi + mu2 * dtheta;
    }
    acc
}

/// All four hard constraints: turn rate, flight-path angle, altitude band and
/// strict obstacle clearance per time-aligned step.
pub fn feasibility<R: Real>(
    traj: &Trajectory<R>,
    limits: &KinematicLimits<R>,
    obstacle_steps: &[Vec<SuperEllipsoidObstacle<R>>],
) -> bool {
    if !traj.kinematics_ok(limits) {
        return false;
    }
    for (i, p) in traj.points.iter().enumerate() {
        let step = &obstacle_steps[i.min(obstacle_steps.len() - 1)];
        if !crate::geometry::is_feasible(p, step) {
            return false;
        }
    }
    true
}

/// Outcome of one optimization cycle.
#[derive(Debug, Clone)]
pub struct StepDecision<R> {
    pub next: UavState<R>,
    /// Index into the candidate grid; `None` when the emergency fallback ran.
    pub chosen: Option<usize>,
    pub params: IfdsParams<R>,
    pub cost: CostBreakdown<R>,
    /// Guidance output of the committed step.
    pub guidance: GuidanceOutput<R>,
    /// True when every candidate was infeasible.
    pub failed: bool,
}

/// Evaluate the whole candidate grid, commit the first step of the argmin
/// rollout (ties break to the lowest index) and report the decision.
///
/// Candidates evaluate independently (in parallel) against immutable
/// snapshots; the index-ordered reduction keeps the result deterministic.
pub fn optimize_step<R: Real>(
    state: &UavState<R>,
    cfg: &MpcConfig<R>,
    ctx: &PlannerContext<'_, R>,
    t: R,
) -> StepDecision<R> {
    let obstacle_steps = ctx.obstacle_steps(cfg.horizon);
    let evals: Vec<(CostBreakdown<R>, Rollout<R>)> = cfg
        .candidate_grid
        .par_iter()
        .map(|candidate| {
            let roll = rollout(state, candidate, cfg, ctx, &obstacle_steps, t);
            let cost = if !roll.ok || !feasibility(&roll.trajectory, ctx.limits, &obstacle_steps) {
                CostBreakdown::infeasible()
            } else {
                let tracking = match tracking_cost(&roll.nominal, &roll.modulated) {
                    Ok(c) => c,
                    Err(_) => return (CostBreakdown::infeasible(), roll),
                };
                let obstacle = obstacle_penalty(&roll.trajectory, &obstacle_steps, cfg.gamma_safe);
                let smoothness = smoothness_cost(&roll.trajectory, cfg.mu1, cfg.mu2);
                if obstacle.is_infinite() {
                    CostBreakdown::infeasible()
                } else {
                    CostBreakdown::compose(tracking, obstacle, smoothness, &cfg.lambda)
                }
            };
            (cost, roll)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (cost, _)) in evals.iter().enumerate() {
        if cost.total.is_finite() && best.map_or(true, |b| cost.total < evals[b].0.total) {
            best = Some(i);
        }
    }

    match best {
        Some(i) => {
            let (cost, roll) = &evals[i];
            let guidance = roll.first.expect("feasible rollout has a first step");
            StepDecision {
                next: state.advanced(&guidance.velocity, ctx.limits.dt),
                chosen: Some(i),
                params: cfg.candidate_grid[i],
                cost: *cost,
                guidance,
                failed: false,
            }
        }
        None => emergency_step(state, ctx, &obstacle_steps, cfg),
    }
}

/// All candidates infeasible: command a maximum-rate climbing turn away from
/// the nearest obstacle gradient for one step and flag the failure.
fn emergency_step<R: Real>(
    state: &UavState<R>,
    ctx: &PlannerContext<'_, R>,
    obstacle_steps: &[Vec<SuperEllipsoidObstacle<R>>],
    cfg: &MpcConfig<R>,
) -> StepDecision<R> {
    let limits = ctx.limits;
    let away_heading = match min_gamma(&state.position, &obstacle_steps[0]) {
        Ok((_, idx)) => {
            let g = gamma_gradient(&state.position, &obstacle_steps[0][idx]);
            if g.horizontal_norm() > R::of(1e-9) {
                g.heading()
            } else {
                state.heading
            }
        }
        Err(_) => state.heading,
    };
    let (psi, theta) = clamp_direction(away_heading, limits.theta_max, state, limits);
    let velocity = Vec3::from_angles(psi, theta).scaled(limits.v0);
    StepDecision {
        next: state.advanced(&velocity, limits.dt),
        chosen: None,
        params: cfg.candidate_grid[0],
        cost: CostBreakdown::infeasible(),
        guidance: GuidanceOutput {
            velocity,
            dfaa_active: false,
            w_eff: R::zero(),
        },
        failed: true,
    }
}
