//! Flow-field guidance: initial path generation, velocity-field modulation
//! around obstacles and the adaptive-altitude branch.
//!
//! The modulation matrix bends a nominal velocity field tangentially along
//! obstacle boundaries the way a stream bends around a stone; the altitude
//! branch trades height for ground resolution when the observable corridor
//! under the vehicle gets narrow.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::environment::{RiverScenario, ShadowQuery};
use crate::error::{Error, Result};
use crate::geometry::{gamma, gamma_gradient, min_gamma, Mat3, SuperEllipsoidObstacle, Vec3};
use crate::scalar::{angle_diff, Real};

/// Obstacles beyond this field value do not modulate the flow.
pub const FAR_FIELD_GAMMA: f64 = 1e4;
/// Transect sampling resolution for the observable-width scan (m).
const WIDTH_RESOLUTION: f64 = 1.0;
/// Relative slack on the turn-rate feasibility comparison.
const RATE_EPS: f64 = 1e-9;
/// Gain of the restore-toward-cruise vertical term (1/s), active only while
/// the observable width is above threshold.
const ALTITUDE_RESTORE_GAIN: f64 = 0.2;

/// Vehicle maneuverability envelope and control cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicLimits<R> {
    /// Max turn rate (rad/s).
    pub omega_max: R,
    /// Flight-path angle band (rad).
    pub theta_min: R,
    pub theta_max: R,
    /// Altitude band (m).
    pub h_min: R,
    pub h_max: R,
    /// Cruise speed (m/s).
    pub v0: R,
    /// Control period (s).
    pub dt: R,
}

impl<R: Real> KinematicLimits<R> {
    pub fn new(omega_max: R, theta: (R, R), altitude: (R, R), v0: R, dt: R) -> Result<Self> {
        if omega_max <= R::zero() || v0 <= R::zero() || dt <= R::zero() {
            return Err(Error::InvalidParameter(
                "omega_max, v0 and dt must be positive".into(),
            ));
        }
        if theta.0 >= theta.1 || altitude.0 >= altitude.1 {
            return Err(Error::InvalidParameter(
                "theta and altitude bands must be non-empty".into(),
            ));
        }
        Ok(Self {
            omega_max,
            theta_min: theta.0,
            theta_max: theta.1,
            h_min: altitude.0,
            h_max: altitude.1,
            v0,
            dt,
        })
    }

    /// Max heading change per control step (rad).
    #[inline]
    pub fn max_heading_step(&self) -> R {
        self.omega_max * self.dt
    }
}

/// Kinematic flight state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState<R> {
    pub position: Vec3<R>,
    pub heading: R,
    pub pitch: R,
}

impl<R: Real> UavState<R> {
    pub fn new(position: Vec3<R>, heading: R, pitch: R) -> Self {
        Self {
            position,
            heading,
            pitch,
        }
    }

    /// Advance one control step along `velocity`.
    pub fn advanced(&self, velocity: &Vec3<R>, dt: R) -> Self {
        Self {
            position: self.position + velocity.scaled(dt),
            heading: velocity.heading(),
            pitch: velocity.pitch(),
        }
    }
}

/// Discrete path with per-point commanded heading and flight-path angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R> {
    pub points: Vec<Vec3<R>>,
    pub headings: Vec<R>,
    pub pitches: Vec<R>,
}

impl<R: Real> Trajectory<R> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Check every point and consecutive pair against the maneuver envelope.
    pub fn kinematics_ok(&self, limits: &KinematicLimits<R>) -> bool {
        if self.points.len() < 2 {
            return false;
        }
        let max_step = limits.max_heading_step() * (R::one() + R::of(RATE_EPS));
        let angle_eps = R::of(1e-9);
        for i in 0..self.points.len() {
            let theta = self.pitches[i];
            let z = self.points[i].z;
            if theta < limits.theta_min - angle_eps || theta > limits.theta_max + angle_eps {
                return false;
            }
            if z < limits.h_min - R::of(1e-9) || z > limits.h_max + R::of(1e-9) {
                return false;
            }
            if i > 0 {
                let dpsi = angle_diff(self.headings[i], self.headings[i - 1]).abs();
                if dpsi > max_step {
                    return false;
                }
            }
        }
        true
    }

    pub fn path_length(&self) -> R {
        let mut acc = R::zero();
        for w in self.points.windows(2) {
            acc += w[1].distance(&w[0]);
        }
        acc
    }
}

/// Tunable guidance parameters searched by the receding-horizon layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfdsParams<R> {
    /// Repulsion coefficient (> 0); also shapes the tangential gain decay.
    pub rho: R,
    /// Normal weight exponent (> 0).
    pub sigma_n: R,
    /// Descent guidance gain (>= 0).
    pub eta: R,
    /// Observable-width threshold (m) that arms the descent branch.
    pub tau: R,
}

impl<R: Real> IfdsParams<R> {
    pub fn new(rho: R, sigma_n: R, eta: R, tau: R) -> Result<Self> {
        if rho <= R::zero() || sigma_n <= R::zero() || eta < R::zero() || tau <= R::zero() {
            return Err(Error::InvalidParameter(
                "require rho > 0, sigma_n > 0, eta >= 0, tau > 0".into(),
            ));
        }
        Ok(Self {
            rho,
            sigma_n,
            eta,
            tau,
        })
    }
}

impl<R: Real> Default for IfdsParams<R> {
    fn default() -> Self {
        Self {
            rho: R::of(1.5),
            sigma_n: R::of(1.5),
            eta: R::of(0.3),
            tau: R::of(30.0),
        }
    }
}

/// One guidance evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceOutput<R> {
    /// Commanded velocity, |velocity| = v0.
    pub velocity: Vec3<R>,
    /// Whether the descent branch fired this step.
    pub dfaa_active: bool,
    /// Observable width under the vehicle (m).
    pub w_eff: R,
}

/// Random feasible path from start to goal: equal-speed steps that pursue a
/// smoothly jittered straight baseline, respecting the maneuver envelope.
pub fn gen_initial_path<R: Real>(
    start: Vec3<R>,
    goal: Vec3<R>,
    limits: &KinematicLimits<R>,
    seed: u64,
) -> Result<Trajectory<R>> {
    if start == goal {
        return Err(Error::InvalidParameter("start equals goal".into()));
    }
    for p in [&start, &goal] {
        if p.z < limits.h_min || p.z > limits.h_max {
            return Err(Error::InvalidParameter(
                "endpoints must lie inside the altitude band".into(),
            ));
        }
    }
    let step = limits.v0 * limits.dt;
    let dist = goal.distance(&start);
    let k = (dist / step).round().max(R::one()).to_f64().unwrap_or(1.0) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat_amp0 = rng.random_range(0.5..3.0);
    let ver_amp0 = rng.random_range(0.2..1.0);
    let lat_cycles = rng.random_range(1.0..3.0);
    let ver_cycles = rng.random_range(1.0..2.0);
    let lat_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let ver_phase = rng.random_range(0.0..std::f64::consts::TAU);

    let dir = (goal - start)
        .normalized(R::of(1e-12))
        .expect("start != goal");
    let left = Vec3::new(-dir.y, dir.x, R::zero())
        .normalized(R::of(1e-12))
        .unwrap_or(Vec3::new(R::zero(), R::one(), R::zero()));

    // shrink the jitter until the pursuit walk meets every constraint
    for attempt in 0..6 {
        let scale = R::of(0.5f64.powi(attempt));
        let lat_amp = R::of(lat_amp0) * scale * step;
        let ver_amp = R::of(ver_amp0) * scale * step;
        let target = |i: usize| -> Vec3<R> {
            let f = R::of_usize(i) / R::of_usize(k);
            let taper = (R::PI() * f).sin().powi(2);
            let base = start + (goal - start).scaled(f);
            let lat = lat_amp
                * taper
                * (R::of(std::f64::consts::TAU * lat_cycles) * f + R::of(lat_phase)).sin();
            let ver = ver_amp
                * taper
                * (R::of(std::f64::consts::TAU * ver_cycles) * f + R::of(ver_phase)).sin();
            let mut p = base + left.scaled(lat);
            p.z = (p.z + ver).max(limits.h_min).min(limits.h_max);
            p
        };

        let mut points = vec![start];
        let mut headings = vec![dir.heading()];
        let mut pitches = vec![R::zero()];
        let mut state = UavState::new(start, dir.heading(), R::zero());
        for i in 0..k {
            let want = target(i + 1) - state.position;
            let (psi, theta) = clamp_direction(want.heading(), want.pitch(), &state, limits);
            let v = Vec3::from_angles(psi, theta).scaled(limits.v0);
            state = state.advanced(&v, limits.dt);
            points.push(state.position);
            headings.push(psi);
            pitches.push(theta);
        }
        let traj = Trajectory {
            points,
            headings,
            pitches,
        };
        let close_enough = traj
            .points
            .last()
            .map(|p| p.distance(&goal) <= step + step)
            .unwrap_or(false);
        if close_enough && traj.kinematics_ok(limits) {
            return Ok(traj);
        }
    }
    Err(Error::PathGenerationFailed)
}

/// Forward-difference velocity field of a discrete path.
pub fn velocity_field_from_path<R: Real>(traj: &Trajectory<R>, dt: R) -> Vec<Vec3<R>> {
    traj.points
        .windows(2)
        .map(|w| (w[1] - w[0]).scaled(R::one() / dt))
        .collect()
}

/// Flow modulation matrix `I - w n n^T + (gain/rho) t n^T` with the canonical
/// tangent orientation (`n x z`, falling back to `n x x` for near-vertical
/// normals). Both the normal weight `w = gamma^(-1/sigma_n)` and the
/// tangential gain `gamma^(-1/rho)` approach 1 at the surface and vanish far
/// away.
pub fn modulation_matrix<R: Real>(
    p: &Vec3<R>,
    obs: &SuperEllipsoidObstacle<R>,
    params: &IfdsParams<R>,
) -> Result<Mat3<R>> {
    oriented_modulation_matrix(p, obs, params, None)
}

/// Same matrix with the tangent sign flipped so `t . flow >= 0` (the flow
/// keeps its forward sense around the obstacle).
fn oriented_modulation_matrix<R: Real>(
    p: &Vec3<R>,
    obs: &SuperEllipsoidObstacle<R>,
    params: &IfdsParams<R>,
    flow: Option<&Vec3<R>>,
) -> Result<Mat3<R>> {
    let grad = gamma_gradient(p, obs);
    let normal = grad
        .normalized(R::of(1e-12))
        .ok_or(Error::DegenerateNormal)?;
    let g = gamma(p, obs);
    let z_hat = Vec3::new(R::zero(), R::zero(), R::one());
    let x_hat = Vec3::new(R::one(), R::zero(), R::zero());
    let mut tangent = match normal.cross(&z_hat).normalized(R::of(1e-6)) {
        Some(t) => t,
        None => normal
            .cross(&x_hat)
            .normalized(R::of(1e-12))
            .ok_or(Error::DegenerateNormal)?,
    };
    if let Some(u) = flow {
        // dead band around the stagnation line: near head-on the canonical
        // orientation holds so the circulation side cannot flip step to step
        if tangent.dot(u) < -R::of(0.15) * u.norm() {
            tangent = -tangent;
        }
    }
    let weight = g.powf(-R::one() / params.sigma_n);
    let gain = g.powf(-R::one() / params.rho);
    let m = Mat3::identity()
        .sub(&Mat3::outer(&normal, &normal).scaled(weight))
        .add(&Mat3::outer(&tangent, &normal).scaled(gain / params.rho));
    Ok(m)
}

/// Descent branch of the modulation matrix: while the observable width is
/// below threshold and a worst-case step keeps clear of the floor, bias the
/// vertical channel downward.
pub fn apply_dfaa<R: Real>(
    m: &Mat3<R>,
    w_eff: R,
    params: &IfdsParams<R>,
    p: &Vec3<R>,
    limits: &KinematicLimits<R>,
) -> Mat3<R> {
    if dfaa_armed(w_eff, params, p, limits) {
        let mut out = *m;
        out.m[2][2] -= params.eta;
        out
    } else {
        *m
    }
}

#[inline]
fn dfaa_armed<R: Real>(
    w_eff: R,
    params: &IfdsParams<R>,
    p: &Vec3<R>,
    limits: &KinematicLimits<R>,
) -> bool {
    w_eff < params.tau && p.z - limits.v0 * limits.dt >= limits.h_min
}

/// Modulate a nominal velocity against the nearest obstacle and renormalize
/// the result to cruise speed.
pub fn modulate_velocity<R: Real>(
    p: &Vec3<R>,
    u: &Vec3<R>,
    obstacles: &[SuperEllipsoidObstacle<R>],
    params: &IfdsParams<R>,
    limits: &KinematicLimits<R>,
) -> Result<Vec3<R>> {
    modulate_velocity_inner(p, u, obstacles, params, limits, R::infinity())
}

fn modulate_velocity_inner<R: Real>(
    p: &Vec3<R>,
    u: &Vec3<R>,
    obstacles: &[SuperEllipsoidObstacle<R>],
    params: &IfdsParams<R>,
    limits: &KinematicLimits<R>,
    w_eff: R,
) -> Result<Vec3<R>> {
    let rescale = |v: &Vec3<R>| -> Result<Vec3<R>> {
        v.normalized(R::of(1e-12))
            .map(|d| d.scaled(limits.v0))
            .ok_or(Error::UndefinedAngle)
    };
    let nearest = match min_gamma(p, obstacles) {
        Err(Error::NoObstacles) => None,
        Err(e) => return Err(e),
        Ok((g, _)) if g >= R::of(FAR_FIELD_GAMMA) => None,
        Ok((_, idx)) => Some(&obstacles[idx]),
    };
    let Some(obs) = nearest else {
        return rescale(u);
    };
    let relative = *u - obs.velocity;
    // only inflow is modulated: a flow already departing the boundary must
    // not have its escape velocity blocked (that traps the vehicle in orbit)
    let receding = gamma_gradient(p, obs).dot(&relative) >= R::zero();
    let bent = if receding {
        let m = apply_dfaa(&Mat3::identity(), w_eff, params, p, limits);
        m.mul_vec(&relative)
    } else {
        let m = oriented_modulation_matrix(p, obs, params, Some(&relative))?;
        let m = apply_dfaa(&m, w_eff, params, p, limits);
        m.mul_vec(&relative)
    };
    // beta solves |beta * bent + v_obs| = v0: normalize the full right side
    let wv = bent.dot(&obs.velocity);
    let ww = bent.norm_squared();
    let vv = obs.velocity.norm_squared();
    let disc = wv * wv + ww * (limits.v0 * limits.v0 - vv);
    if ww <= R::of(1e-18) || disc < R::zero() {
        return rescale(&(bent + obs.velocity));
    }
    let beta = (-wv + disc.sqrt()) / ww;
    rescale(&(bent.scaled(beta) + obs.velocity))
}

/// Longest unshadowed stretch of the cross-channel transect through the
/// ground point below `p`, sampled at 1 m (0 outside the channel corridor).
pub fn effective_width<R: Real>(
    p: &Vec3<R>,
    t: R,
    scenario: &RiverScenario<R>,
    shadows: &impl ShadowQuery<R>,
) -> R {
    let q = scenario.centerline_query(p);
    let hw = scenario.half_width_at(q.arc_length);
    if q.cross_track.abs() > hw {
        return R::zero();
    }
    let res = R::of(WIDTH_RESOLUTION);
    let left = Vec3::new(-q.tangent.y, q.tangent.x, R::zero());
    if shadows.segment_clear((q.point.x, q.point.y), (left.x, left.y), hw, t) {
        return hw + hw;
    }
    if let Some(w) = shadows.transect_free_width((q.point.x, q.point.y), (left.x, left.y), hw, t)
    {
        return w;
    }
    let samples = ((hw + hw) / res).floor().to_f64().unwrap_or(0.0) as usize;
    let mut best = 0usize;
    let mut run = 0usize;
    for i in 0..=samples {
        let offset = -hw + res * R::of_usize(i);
        let pt = q.point + left.scaled(offset);
        if shadows.is_shadowed(pt.x, pt.y, t) {
            run = 0;
        } else {
            run += 1;
            best = best.max(run);
        }
    }
    if best <= 1 {
        R::zero()
    } else {
        res * R::of_usize(best - 1)
    }
}

/// Complete guidance law: reference field, flow modulation with the descent
/// branch, altitude keeping, maneuver clamps, cruise-speed output.
///
/// `cruise_altitude` is the preferred observation height; a proportional
/// vertical term pulls back toward it whenever the observable width is above
/// threshold (the descent branch owns the vertical channel below threshold).
pub fn total_guidance<R: Real>(
    uav: &UavState<R>,
    t: R,
    scenario: &RiverScenario<R>,
    shadows: &impl ShadowQuery<R>,
    obstacles: &[SuperEllipsoidObstacle<R>],
    params: &IfdsParams<R>,
    limits: &KinematicLimits<R>,
    cruise_altitude: R,
) -> Result<GuidanceOutput<R>> {
    let p = &uav.position;
    // the cross-track correction yields near obstacles: chasing the
    // centerline through a shadow is what digs grazing trajectories in
    let (tangent, correction) = crate::environment::reference_components(scenario, p)?;
    let attenuation = match min_gamma(p, obstacles) {
        Ok((g, _)) => ((g - R::one()).max(R::zero())).min(R::one()),
        Err(_) => R::one(),
    };
    let nominal = (tangent + correction.scaled(attenuation))
        .normalized(R::of(1e-12))
        .ok_or(Error::DegenerateNormal)?
        .scaled(limits.v0);
    let w_eff = effective_width(p, t, scenario, shadows);
    let armed = dfaa_armed(w_eff, params, p, limits) && params.eta > R::zero();

    let mut v = modulate_velocity_inner(p, &nominal, obstacles, params, limits, w_eff)?;
    if armed {
        // additive vertical perturbation of the closed-loop law; the matrix
        // bias alone cannot push a purely horizontal flow downward
        v.z -= params.eta * limits.v0;
    } else if w_eff >= params.tau {
        let pull = R::of(ALTITUDE_RESTORE_GAIN) * (cruise_altitude - p.z);
        v.z += pull.max(-limits.v0).min(limits.v0);
    }
    v = v
        .normalized(R::of(1e-12))
        .ok_or(Error::DegenerateNormal)?
        .scaled(limits.v0);

    let (psi, theta) = clamp_direction(v.heading(), v.pitch(), uav, limits);
    let velocity = Vec3::from_angles(psi, theta).scaled(limits.v0);
    Ok(GuidanceOutput {
        velocity,
        dfaa_active: armed,
        w_eff,
    })
}

/// Clamp a commanded direction to the turn-rate, flight-path-angle and
/// altitude-band limits relative to the current state. The output keeps unit
/// speed semantics: direction turns, magnitude never truncates.
pub fn clamp_direction<R: Real>(
    psi_cmd: R,
    theta_cmd: R,
    state: &UavState<R>,
    limits: &KinematicLimits<R>,
) -> (R, R) {
    let max_step = limits.max_heading_step();
    let dpsi = angle_diff(psi_cmd, state.heading)
        .max(-max_step)
        .min(max_step);
    let psi = state.heading + dpsi;

    let step = limits.v0 * limits.dt;
    let up = ((limits.h_max - state.position.z) / step)
        .max(-R::one())
        .min(R::one());
    let down = ((limits.h_min - state.position.z) / step)
        .max(-R::one())
        .min(R::one());
    let theta_ceiling = up.asin().min(limits.theta_max);
    let theta_floor = down.asin().max(limits.theta_min);
    // pitch changes are slewed at the same rate as heading changes
    let dtheta = (theta_cmd - state.pitch).max(-max_step).min(max_step);
    let theta = (state.pitch + dtheta).max(theta_floor).min(theta_ceiling);
    (psi, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_environment, DomainBounds, ScenarioPreset};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type V = Vec3<f64>;

    fn limits() -> KinematicLimits<f64> {
        KinematicLimits::new(0.5, (-0.35, 0.35), (50.0, 120.0), 10.0, 0.1).unwrap()
    }

    fn sphere(center: V, r: f64) -> SuperEllipsoidObstacle<f64> {
        SuperEllipsoidObstacle::sphere(center, r).unwrap()
    }

    struct NoShadows;
    impl ShadowQuery<f64> for NoShadows {
        fn is_shadowed(&self, _x: f64, _y: f64, _t: f64) -> bool {
            false
        }
    }

    #[test]
    fn initial_path_straight_case() {
        let lim = limits();
        let start = V::new(0.0, 0.0, 100.0);
        let goal = V::new(10.0, 0.0, 100.0); // 10 * v0 * dt
        let traj = gen_initial_path(start, goal, &lim, 3).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.kinematics_ok(&lim));
        assert!(traj.points.last().unwrap().distance(&goal) <= 2.0);
        for w in traj.points.windows(2) {
            let step = w[1].distance(&w[0]);
            assert!((step - 1.0).abs() <= 0.01, "step {}", step);
        }
    }

    #[test]
    fn initial_path_rejects_goal_above_band() {
        let lim = limits();
        let err = gen_initial_path(V::new(0.0, 0.0, 100.0), V::new(100.0, 0.0, 200.0), &lim, 1);
        assert!(err.is_err());
    }

    #[test]
    fn initial_path_satisfies_constraints_over_seeds() {
        // independent constraint checker applied to every consecutive pair
        let lim = limits();
        let start = V::new(0.0, 0.0, 95.0);
        let goal = V::new(300.0, 60.0, 105.0);
        for seed in 0..100 {
            let traj = gen_initial_path(start, goal, &lim, seed).unwrap();
            let max_step = lim.omega_max * lim.dt * (1.0 + 1e-9);
            for i in 0..traj.len() {
                assert!(traj.pitches[i] >= lim.theta_min && traj.pitches[i] <= lim.theta_max);
                assert!(
                    traj.points[i].z >= lim.h_min - 1e-9 && traj.points[i].z <= lim.h_max + 1e-9
                );
                if i > 0 {
                    let d = crate::scalar::angle_diff(traj.headings[i], traj.headings[i - 1]).abs();
                    assert!(d <= max_step, "turn step {} at {}", d, i);
                    let step = traj.points[i].distance(&traj.points[i - 1]);
                    assert!((step - 1.0).abs() <= 0.01);
                }
            }
        }
    }

    #[test]
    fn initial_path_fails_when_unreachable() {
        // climb far steeper than the flight-path-angle envelope allows
        let lim = limits();
        let err = gen_initial_path(V::new(0.0, 0.0, 51.0), V::new(10.0, 0.0, 119.0), &lim, 2);
        assert_eq!(err, Err(Error::PathGenerationFailed));
    }

    #[test]
    fn velocity_field_examples() {
        let traj = Trajectory {
            points: vec![V::new(0.0, 0.0, 50.0), V::new(1.0, 0.0, 50.0)],
            headings: vec![0.0, 0.0],
            pitches: vec![0.0, 0.0],
        };
        let u = velocity_field_from_path(&traj, 0.1);
        assert_eq!(u.len(), 1);
        assert!((u[0].x - 10.0).abs() < 1e-12 && u[0].y == 0.0 && u[0].z == 0.0);

        let constant = Trajectory {
            points: vec![V::new(2.0, 2.0, 60.0); 4],
            headings: vec![0.0; 4],
            pitches: vec![0.0; 4],
        };
        assert!(velocity_field_from_path(&constant, 0.1)
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn velocity_field_telescopes_back_to_path() {
        let lim = limits();
        let traj =
            gen_initial_path(V::new(0.0, 0.0, 95.0), V::new(200.0, 30.0, 100.0), &lim, 11).unwrap();
        let u = velocity_field_from_path(&traj, lim.dt);
        let mut p = traj.points[0];
        for (i, v) in u.iter().enumerate() {
            p = p + v.scaled(lim.dt);
            assert!(p.distance(&traj.points[i + 1]) < 1e-9);
        }
    }

    #[test]
    fn modulation_decays_to_identity() {
        let obs = sphere(V::zero(), 1.0);
        let params = IfdsParams::default();
        let p = V::new(1000.0, 0.0, 0.0); // gamma = 1e6
        let m = modulation_matrix(&p, &obs, &params).unwrap();
        assert!(m.sub(&Mat3::identity()).frobenius_norm() < 1e-3);
        // and at gamma = 1e4 the operator distance stays under 0.01
        let p = V::new(100.0, 0.0, 0.0);
        let m = modulation_matrix(&p, &obs, &params).unwrap();
        assert!(m.sub(&Mat3::identity()).frobenius_norm() < 0.01);
    }

    #[test]
    fn modulation_blocks_normal_component_at_surface_limit() {
        // at weight = 1 the normal component of M*u reduces to the tangential
        // contribution, which is orthogonal to n by construction
        let obs = sphere(V::zero(), 1.0);
        let params = IfdsParams {
            rho: 1.5,
            sigma_n: 1.5,
            eta: 0.0,
            tau: 30.0,
        };
        let p = V::new(1.0 + 1e-12, 0.0, 0.0);
        let m = modulation_matrix(&p, &obs, &params).unwrap();
        let u = V::new(-7.0, 2.0, 1.0);
        let n = V::new(1.0, 0.0, 0.0);
        let mu = m.mul_vec(&u);
        assert!(n.dot(&mu).abs() < 1e-9, "normal residue {}", n.dot(&mu));
    }

    #[test]
    fn modulation_matrix_hand_product() {
        // gamma = 4 sphere case, hand-evaluated 3x3 entries
        let obs = sphere(V::zero(), 1.0);
        let params = IfdsParams {
            rho: 1.5,
            sigma_n: 1.5,
            eta: 0.0,
            tau: 30.0,
        };
        let p = V::new(2.0, 0.0, 0.0);
        let m = modulation_matrix(&p, &obs, &params).unwrap();
        let w = 4.0f64.powf(-1.0 / 1.5);
        let gain = 4.0f64.powf(-1.0 / 1.5) / 1.5;
        // n = x_hat, canonical t = normalize(n x z) = (0, -1, 0)
        let expect = [[1.0 - w, 0.0, 0.0], [-gain, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (m.m[i][j] - expect[i][j]).abs() < 1e-12,
                    "m[{}][{}] = {}",
                    i,
                    j,
                    m.m[i][j]
                );
            }
        }
    }

    #[test]
    fn degenerate_normal_is_reported() {
        let obs = sphere(V::zero(), 1.0);
        let params = IfdsParams::default();
        assert_eq!(
            modulation_matrix(&V::zero(), &obs, &params),
            Err(Error::DegenerateNormal)
        );
    }

    #[test]
    fn modulate_no_obstacles_rescales() {
        let lim = limits();
        let params = IfdsParams::default();
        let out =
            modulate_velocity(&V::zero(), &V::new(3.0, 4.0, 0.0), &[], &params, &lim).unwrap();
        assert!((out.norm() - 10.0).abs() < 1e-9);
        assert!((out.x - 6.0).abs() < 1e-9 && (out.y - 8.0).abs() < 1e-9);
    }

    #[test]
    fn modulate_far_field_rescales() {
        let lim = limits();
        let params = IfdsParams::default();
        let obs = sphere(V::new(1e6, 0.0, 0.0), 1.0);
        let out =
            modulate_velocity(&V::zero(), &V::new(5.0, 0.0, 0.0), &[obs], &params, &lim).unwrap();
        assert!((out.x - 10.0).abs() < 1e-9 && out.y.abs() < 1e-12);
    }

    #[test]
    fn head_on_approach_gains_tangential_component() {
        let lim = limits();
        let params = IfdsParams::default();
        let obs = sphere(V::new(30.0, 0.0, 0.0), 10.0);
        let p = V::new(15.0, 0.0, 0.0); // gamma = 2.25, approaching along +x
        let u = V::new(10.0, 0.0, 0.0);
        let out = modulate_velocity(&p, &u, &[obs], &params, &lim).unwrap();
        assert!((out.norm() - 10.0).abs() < 1e-9);
        let tangential = (out.y * out.y + out.z * out.z).sqrt();
        assert!(tangential > 0.1, "tangential {}", tangential);

        // independent scalar evaluation of the same law
        let g: f64 = 2.25;
        let w = g.powf(-1.0 / 1.5);
        let gain = g.powf(-1.0 / 1.5) / 1.5;
        // n = -x_hat here, so n^T u = -10; canonical t = n x z = (0, 1, 0)
        let bent = V::new(10.0 - w * 10.0, gain * -10.0, 0.0);
        let expect = bent.scaled(10.0 / bent.norm());
        assert!((out.x - expect.x).abs() < 1e-9, "{} vs {}", out.x, expect.x);
        assert!((out.y - expect.y).abs() < 1e-9, "{} vs {}", out.y, expect.y);
    }

    #[test]
    fn effective_width_cases() {
        let env = build_environment::<f64>(ScenarioPreset::Open, 1).unwrap();
        let p = V::new(400.0, 0.0, 100.0);
        let w = effective_width(&p, 0.0, &env.scenario, &NoShadows);
        assert!((w - 300.0).abs() <= 2.0, "w {}", w);

        struct AllShadow;
        impl ShadowQuery<f64> for AllShadow {
            fn is_shadowed(&self, _x: f64, _y: f64, _t: f64) -> bool {
                true
            }
        }
        assert_eq!(effective_width(&p, 0.0, &env.scenario, &AllShadow), 0.0);

        // 60 m channel with a 20 m central shadow band: longest clear run 20 m
        struct BandShadow;
        impl ShadowQuery<f64> for BandShadow {
            fn is_shadowed(&self, _x: f64, y: f64, _t: f64) -> bool {
                y.abs() <= 10.0
            }
        }
        let cps = (0..6).map(|i| V::new(i as f64 * 200.0, 0.0, 0.0)).collect();
        let narrow = crate::environment::RiverScenario::new(
            cps,
            30.0,
            DomainBounds::new(V::new(-150.0, -320.0, -10.0), V::new(1150.0, 320.0, 260.0)),
            1,
            None,
        )
        .unwrap();
        let w = effective_width(&V::new(400.0, 0.0, 100.0), 0.0, &narrow, &BandShadow);
        assert!((w - 20.0).abs() <= 1.0 + 1e-9, "w {}", w);

        // outside the corridor: zero
        let w = effective_width(&V::new(400.0, 200.0, 100.0), 0.0, &narrow, &NoShadows);
        assert_eq!(w, 0.0);
    }

    #[test]
    fn dfaa_matrix_rules() {
        let lim = limits();
        let params = IfdsParams {
            rho: 1.5,
            sigma_n: 1.5,
            eta: 0.4,
            tau: 30.0,
        };
        let m = Mat3::identity();
        let p_ok = V::new(0.0, 0.0, 100.0);
        // threshold not crossed
        assert_eq!(apply_dfaa(&m, 50.0, &params, &p_ok, &lim), m);
        // crossed with altitude margin: vertical channel biased down by eta
        let biased = apply_dfaa(&m, 10.0, &params, &p_ok, &lim);
        assert!((biased.m[2][2] - (1.0 - 0.4)).abs() < 1e-12);
        // at the floor the matrix is untouched
        let p_floor = V::new(0.0, 0.0, 50.0);
        assert_eq!(apply_dfaa(&m, 10.0, &params, &p_floor, &lim), m);
    }

    #[test]
    fn guidance_follows_tangent_in_open_channel() {
        let env = build_environment::<f64>(ScenarioPreset::Open, 5).unwrap();
        let lim = limits();
        let params = IfdsParams::default();
        let (p, tangent) = env.scenario.at_arc_length(300.0);
        let uav = UavState::new(V::new(p.x, p.y, 100.0), tangent.heading(), 0.0);
        let out = total_guidance(
            &uav,
            0.0,
            &env.scenario,
            &env.shadows,
            &[],
            &params,
            &lim,
            100.0,
        )
        .unwrap();
        assert!(!out.dfaa_active);
        assert!((out.velocity.norm() - 10.0).abs() < 1e-9);
        let angle = angle_diff(out.velocity.heading(), tangent.heading()).abs();
        assert!(angle < 1e-6, "angle {}", angle);
    }

    #[test]
    fn guidance_norm_is_cruise_speed_everywhere() {
        let env = build_environment::<f64>(ScenarioPreset::Dense, 9).unwrap();
        let lim = limits();
        let params = IfdsParams::default();
        let obstacles = env.truth_obstacles(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        while checked < 1000 {
            let p = V::new(
                rng.random_range(0.0..900.0),
                rng.random_range(-200.0..200.0),
                rng.random_range(55.0..115.0),
            );
            if !crate::geometry::is_feasible(&p, &obstacles) {
                continue;
            }
            let uav = UavState::new(p, rng.random_range(-3.0..3.0), 0.0);
            let out = total_guidance(
                &uav,
                0.0,
                &env.scenario,
                &env.shadows,
                &obstacles,
                &params,
                &lim,
                100.0,
            )
            .unwrap();
            assert!(
                (out.velocity.norm() - 10.0).abs() < 1e-8,
                "norm {}",
                out.velocity.norm()
            );
            checked += 1;
        }
    }

    #[test]
    fn guidance_descends_in_narrow_corridor() {
        let env = build_environment::<f64>(ScenarioPreset::Narrow, 2).unwrap();
        let lim = limits();
        let params = IfdsParams::default(); // eta = 0.3
        let (p, tangent) = env.scenario.at_arc_length(520.0);
        let uav = UavState::new(V::new(p.x, p.y, 100.0), tangent.heading(), 0.0);
        let obstacles = env.truth_obstacles(0.0).unwrap();
        let out = total_guidance(
            &uav,
            0.0,
            &env.scenario,
            &env.shadows,
            &obstacles,
            &params,
            &lim,
            100.0,
        )
        .unwrap();
        assert!(out.w_eff < 30.0, "w_eff {}", out.w_eff);
        assert!(out.dfaa_active);
        assert!(out.velocity.z < 0.0, "vz {}", out.velocity.z);
    }
}
