//! Comparison planners: pure PID lateral tracking with reactive avoidance,
//! and the flow-field law with one fixed parameter set (no horizon search).

use crate::environment::{RiverScenario, ShadowQuery};
use crate::error::Result;
use crate::geometry::{gamma_gradient, min_gamma, SuperEllipsoidObstacle, Vec3};
use crate::ifds::{
    clamp_direction, total_guidance, GuidanceOutput, IfdsParams, KinematicLimits, UavState,
};
use crate::scalar::Real;

/// PID gains for lateral tracking and altitude hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains<R> {
    /// Cross-track loop (rad per m, rad per m*s, rad per m/s).
    pub kp: R,
    pub ki: R,
    pub kd: R,
    /// Altitude-hold loop.
    pub kp_alt: R,
    pub kd_alt: R,
    /// Anti-windup clamp on the integrated cross-track error (m*s).
    pub integral_clamp: R,
}

impl<R: Real> Default for PidGains<R> {
    fn default() -> Self {
        // tuned once against the straight-channel step response and frozen
        Self {
            kp: R::of(0.035),
            ki: R::of(1e-3),
            kd: R::of(0.02),
            kp_alt: R::of(0.02),
            kd_alt: R::of(0.05),
            integral_clamp: R::of(200.0),
        }
    }
}

/// Reactive steering override issued near an obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidanceOverride<R> {
    /// Commanded escape heading (along the outward obstacle gradient).
    pub heading: R,
    /// Speed multiplier while the override is active.
    pub speed_scale: R,
}

/// Rule-based warning-range reaction: full-rate turn away from the obstacle
/// plus a 30% speed cut. No override outside the warning band; the command is
/// intentionally discontinuous at the boundary.
pub fn simple_avoidance<R: Real>(
    state: &UavState<R>,
    obstacles: &[SuperEllipsoidObstacle<R>],
    warning_gamma: R,
) -> Option<AvoidanceOverride<R>> {
    let (g, idx) = min_gamma(&state.position, obstacles).ok()?;
    if g >= warning_gamma {
        return None;
    }
    let grad = gamma_gradient(&state.position, &obstacles[idx]);
    let heading = if grad.horizontal_norm() > R::of(1e-9) {
        grad.heading()
    } else {
        state.heading
    };
    Some(AvoidanceOverride {
        heading,
        speed_scale: R::of(0.7),
    })
}

/// Pure PID lateral tracker at fixed cruise altitude.
///
/// Owns the integrator state; one instance per closed-loop run.
#[derive(Debug, Clone)]
pub struct PidPlanner<R> {
    pub gains: PidGains<R>,
    pub cruise_altitude: R,
    /// Field value below which the reactive override kicks in.
    pub warning_gamma: R,
    integral: R,
    prev_error: Option<R>,
}

impl<R: Real> PidPlanner<R> {
    pub fn new(gains: PidGains<R>, cruise_altitude: R) -> Self {
        Self {
            gains,
            cruise_altitude,
            warning_gamma: R::of(1.3),
            integral: R::zero(),
            prev_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral = R::zero();
        self.prev_error = None;
    }

    /// One control step: lateral PID to the centerline, altitude held, speed
    /// V0; the avoidance override (when `obstacles` is non-empty and close)
    /// preempts the tracking command.
    pub fn step(
        &mut self,
        state: &UavState<R>,
        scenario: &RiverScenario<R>,
        obstacles: &[SuperEllipsoidObstacle<R>],
        limits: &KinematicLimits<R>,
    ) -> (UavState<R>, bool) {
        let q = scenario.centerline_query(&state.position);
        let e = q.cross_track;
        self.integral = (self.integral + e * limits.dt)
            .max(-self.gains.integral_clamp)
            .min(self.gains.integral_clamp);
        let de = match self.prev_error {
            Some(prev) => (e - prev) / limits.dt,
            None => R::zero(),
        };
        self.prev_error = Some(e);

        let lateral = self.gains.kp * e + self.gains.ki * self.integral + self.gains.kd * de;
        let third_pi = R::PI() / R::of(3.0);
        let mut psi_cmd = q.tangent.heading() - lateral.max(-third_pi).min(third_pi);
        let mut speed = limits.v0;

        let mut overridden = false;
        if let Some(o) = simple_avoidance(state, obstacles, self.warning_gamma) {
            psi_cmd = o.heading;
            speed = limits.v0 * o.speed_scale;
            overridden = true;
        }

        // altitude hold at cruise; zero deviation means zero pitch command
        let dz = self.cruise_altitude - state.position.z;
        let vz = limits.v0 * state.pitch.sin();
        let theta_cmd = self.gains.kp_alt * dz - self.gains.kd_alt * vz;

        let (psi, theta) = clamp_direction(psi_cmd, theta_cmd, state, limits);
        let velocity = Vec3::from_angles(psi, theta).scaled(speed);
        (
            UavState {
                position: state.position + velocity.scaled(limits.dt),
                heading: psi,
                pitch: theta,
            },
            overridden,
        )
    }
}

/// Flow-field planner with one frozen parameter set: the guidance law against
/// the current obstacle snapshot, no candidate search, no horizon prediction.
#[allow(clippy::too_many_arguments)]
pub fn ifds_only_step<R: Real>(
    state: &UavState<R>,
    t: R,
    scenario: &RiverScenario<R>,
    shadows: &impl ShadowQuery<R>,
    obstacles: &[SuperEllipsoidObstacle<R>],
    fixed_params: &IfdsParams<R>,
    limits: &KinematicLimits<R>,
    cruise_altitude: R,
) -> Result<(UavState<R>, GuidanceOutput<R>)> {
    let out = total_guidance(
        state,
        t,
        scenario,
        shadows,
        obstacles,
        fixed_params,
        limits,
        cruise_altitude,
    )?;
    Ok((state.advanced(&out.velocity, limits.dt), out))
}
