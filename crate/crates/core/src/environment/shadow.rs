//! Synthetic dynamic shadow field: unions of drifting, slowly pulsing
//! super-ellipse blobs on the water surface.

use crate::error::{Error, Result};
use crate::geometry::{SuperEllipsoidObstacle, Vec3};
use crate::scalar::Real;

use super::{ObstaclePlane, RiverScenario};

/// One moving shadow region: the center advects sinusoidally (bounded
/// wander) and the extent breathes slowly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowBlob<R> {
    /// World-frame anchor of the center oscillation.
    pub center0: (R, R),
    /// Base semi-axes (m); `semi_major >= semi_minor`.
    pub semi_major: R,
    pub semi_minor: R,
    /// Horizontal shape exponent (shared by both axes).
    pub exponent: u32,
    /// Orientation of the major axis (rad).
    pub orientation: R,
    /// Center oscillation: displacement amplitude vector (m), angular
    /// frequency (rad/s) and phase (rad). Peak drift speed is
    /// `|drift_amp| * drift_omega`.
    pub drift_amp: (R, R),
    pub drift_omega: R,
    pub drift_phase: R,
    /// Fractional semi-axis modulation amplitude.
    pub pulse_amp: R,
    /// Modulation angular frequency (rad/s) and phase (rad).
    pub pulse_omega: R,
    pub pulse_phase: R,
}

impl<R: Real> ShadowBlob<R> {
    pub fn center_at(&self, t: R) -> (R, R) {
        let s = (self.drift_omega * t + self.drift_phase).sin();
        (
            self.center0.0 + self.drift_amp.0 * s,
            self.center0.1 + self.drift_amp.1 * s,
        )
    }

    /// Instantaneous center velocity (m/s).
    pub fn velocity_at(&self, t: R) -> (R, R) {
        let c = (self.drift_omega * t + self.drift_phase).cos() * self.drift_omega;
        (self.drift_amp.0 * c, self.drift_amp.1 * c)
    }

    /// Peak center speed over the whole mission (m/s).
    pub fn peak_speed(&self) -> R {
        (self.drift_amp.0 * self.drift_amp.0 + self.drift_amp.1 * self.drift_amp.1).sqrt()
            * self.drift_omega
    }

    /// Semi-axis scale factor at time `t` (slow sinusoidal breathing).
    pub fn scale_at(&self, t: R) -> R {
        R::one() + self.pulse_amp * (self.pulse_omega * t + self.pulse_phase).sin()
    }

    /// Horizontal implicit field of the blob footprint at time `t`.
    pub fn footprint_gamma(&self, x: R, y: R, t: R) -> R {
        let (cx, cy) = self.center_at(t);
        let s = self.scale_at(t);
        let (sin_y, cos_y) = (-self.orientation).sin_cos();
        let dx = x - cx;
        let dy = y - cy;
        let lx = cos_y * dx - sin_y * dy;
        let ly = sin_y * dx + cos_y * dy;
        let e = 2 * self.exponent as i32;
        (lx / (self.semi_major * s)).abs().powi(e) + (ly / (self.semi_minor * s)).abs().powi(e)
    }

    fn contains(&self, x: R, y: R, t: R) -> bool {
        self.footprint_gamma(x, y, t) <= R::one()
    }

    /// Conservative axis-aligned bounding half-extent at time `t`.
    fn bound_radius(&self, t: R) -> R {
        self.semi_major * self.scale_at(t)
    }
}

/// Time-indexed union of shadow blobs over one mission.
#[derive(Debug, Clone)]
pub struct ShadowField<R> {
    pub blobs: Vec<ShadowBlob<R>>,
    /// Valid sampling window [0, mission_window] (s).
    pub mission_window: R,
    /// Snapshot grid resolution (m).
    pub sample_cell: R,
}

/// Point query trait for "is this surface point shadowed at time t".
///
/// The live field implements it with the blob union; planner-side rollouts
/// implement it with predicted obstacle cross-sections so no future ground
/// truth leaks into planning.
pub trait ShadowQuery<R: Real>: Sync {
    fn is_shadowed(&self, x: R, y: R, t: R) -> bool;

    /// Cheap conservative pre-check: `true` guarantees the whole segment
    /// `center +- half_len * dir` is unshadowed at time `t`, letting callers
    /// skip dense sampling. The default gives no guarantee.
    fn segment_clear(&self, _center: (R, R), _dir: (R, R), _half_len: R, _t: R) -> bool {
        false
    }

    /// Exact longest free stretch of the segment when the source can compute
    /// it analytically; `None` falls back to dense sampling.
    fn transect_free_width(
        &self,
        _center: (R, R),
        _dir: (R, R),
        _half_len: R,
        _t: R,
    ) -> Option<R> {
        None
    }
}

impl<R: Real, T: ShadowQuery<R> + ?Sized> ShadowQuery<R> for &T {
    fn is_shadowed(&self, x: R, y: R, t: R) -> bool {
        (**self).is_shadowed(x, y, t)
    }
    fn segment_clear(&self, center: (R, R), dir: (R, R), half_len: R, t: R) -> bool {
        (**self).segment_clear(center, dir, half_len, t)
    }
    fn transect_free_width(&self, center: (R, R), dir: (R, R), half_len: R, t: R) -> Option<R> {
        (**self).transect_free_width(center, dir, half_len, t)
    }
}

/// Distance from a point to the segment `c +- h * d` (d unit length).
fn point_segment_distance<R: Real>(p: (R, R), c: (R, R), d: (R, R), h: R) -> R {
    let px = p.0 - c.0;
    let py = p.1 - c.1;
    let along = (px * d.0 + py * d.1).max(-h).min(h);
    let qx = px - along * d.0;
    let qy = py - along * d.1;
    (qx * qx + qy * qy).sqrt()
}

impl<R: Real> ShadowQuery<R> for ShadowField<R> {
    fn is_shadowed(&self, x: R, y: R, t: R) -> bool {
        self.blobs.iter().any(|b| b.contains(x, y, t))
    }

    fn segment_clear(&self, center: (R, R), dir: (R, R), half_len: R, t: R) -> bool {
        self.blobs.iter().all(|b| {
            let c = b.center_at(t);
            point_segment_distance(c, center, dir, half_len) > b.bound_radius(t) + R::of(2.0)
        })
    }
}

/// Shadow view derived from a set of (predicted) virtual obstacles: a ground
/// point is shadowed when it falls inside an obstacle's horizontal
/// cross-section through its center plane.
pub struct PredictedShadows<'a, R> {
    pub obstacles: &'a [SuperEllipsoidObstacle<R>],
}

impl<'a, R: Real> ShadowQuery<R> for PredictedShadows<'a, R> {
    fn is_shadowed(&self, x: R, y: R, _t: R) -> bool {
        self.obstacles.iter().any(|o| {
            crate::geometry::gamma(&Vec3::new(x, y, o.center.z), o) <= R::one()
        })
    }

    fn segment_clear(&self, center: (R, R), dir: (R, R), half_len: R, _t: R) -> bool {
        self.obstacles.iter().all(|o| {
            let bound = (o.lambda_a * o.a).max(o.lambda_b * o.b) + R::of(2.0);
            point_segment_distance((o.center.x, o.center.y), center, dir, half_len) > bound
        })
    }

    /// Exact free width against circular cross-sections (the only shape the
    /// tracker emits); falls back to sampling for anything else.
    fn transect_free_width(&self, center: (R, R), dir: (R, R), half_len: R, _t: R) -> Option<R> {
        let mut intervals: Vec<(R, R)> = Vec::with_capacity(self.obstacles.len());
        for o in self.obstacles {
            if o.p != 1 || o.q != 1 || o.a != o.b {
                return None;
            }
            let radius = o.lambda_a * o.a;
            let px = o.center.x - center.0;
            let py = o.center.y - center.1;
            let along = px * dir.0 + py * dir.1;
            let perp2 = (px * px + py * py) - along * along;
            let r2 = radius * radius;
            if perp2 >= r2 {
                continue;
            }
            let half_chord = (r2 - perp2).sqrt();
            let lo = (along - half_chord).max(-half_len);
            let hi = (along + half_chord).min(half_len);
            if lo < hi {
                intervals.push((lo, hi));
            }
        }
        if intervals.is_empty() {
            return Some(half_len + half_len);
        }
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut best = R::zero();
        let mut cursor = -half_len;
        for (lo, hi) in intervals {
            if lo > cursor {
                best = best.max(lo - cursor);
            }
            cursor = cursor.max(hi);
        }
        best = best.max(half_len - cursor);
        Some(best.max(R::zero()))
    }
}

/// Snapshot of shadowed surface points at one instant.
#[derive(Debug, Clone)]
pub struct ShadowSample<R> {
    pub time: R,
    pub points: Vec<Vec3<R>>,
}

impl<R: Real> ShadowField<R> {
    /// Ground-truth virtual obstacles (uninflated) for every blob at time `t`.
    pub fn truth_obstacles(
        &self,
        t: R,
        plane: &ObstaclePlane<R>,
    ) -> Result<Vec<SuperEllipsoidObstacle<R>>> {
        self.blobs
            .iter()
            .map(|b| {
                let (cx, cy) = b.center_at(t);
                let (vx, vy) = b.velocity_at(t);
                let s = b.scale_at(t);
                SuperEllipsoidObstacle::new(
                    Vec3::new(cx, cy, plane.plane_z),
                    (b.semi_major * s, b.semi_minor * s, plane.thickness),
                    (b.exponent, b.exponent, plane.exponent),
                    (R::one(), R::one(), R::one()),
                    b.orientation,
                    Vec3::new(vx, vy, R::zero()),
                )
            })
            .collect()
    }

    /// Fastest blob drift speed (m/s); deformation adds at most
    /// `pulse_amp * pulse_omega * semi_major` of boundary speed on top.
    pub fn max_drift_speed(&self) -> R {
        self.blobs
            .iter()
            .map(|b| b.peak_speed())
            .fold(R::zero(), |a, b| a.max(b))
    }
}

/// Rasterize the shadowed portion of the channel at time `t`.
///
/// Deterministic in (scenario seed, t): the grid is fixed and scanned
/// row-major. Errors when `t` lies outside the mission window.
pub fn sample_shadow_field<R: Real>(
    scenario: &RiverScenario<R>,
    field: &ShadowField<R>,
    t: R,
) -> Result<ShadowSample<R>> {
    sample_impl(scenario, field, t, None)
}

/// [`sample_shadow_field`] with a precomputed channel-membership grid.
pub(super) fn sample_shadow_field_masked<R: Real>(
    scenario: &RiverScenario<R>,
    field: &ShadowField<R>,
    t: R,
    mask: &super::ChannelMask,
) -> Result<ShadowSample<R>> {
    sample_impl(scenario, field, t, Some(mask))
}

fn sample_impl<R: Real>(
    scenario: &RiverScenario<R>,
    field: &ShadowField<R>,
    t: R,
    mask: Option<&super::ChannelMask>,
) -> Result<ShadowSample<R>> {
    if t < R::zero() || t > field.mission_window {
        return Err(Error::OutsideMissionWindow(
            t.to_f64().unwrap_or(f64::NAN),
            field.mission_window.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let cell = field.sample_cell;
    let b = &scenario.bounds;
    // conservative per-blob bounding boxes for cheap rejection
    let boxes: Vec<(R, R, R)> = field
        .blobs
        .iter()
        .map(|blob| {
            let (cx, cy) = blob.center_at(t);
            (cx, cy, blob.bound_radius(t) + cell)
        })
        .collect();
    let nx = ((b.max.x - b.min.x) / cell).floor().to_f64().unwrap_or(0.0) as usize;
    let ny = ((b.max.y - b.min.y) / cell).floor().to_f64().unwrap_or(0.0) as usize;
    let mut points = Vec::new();
    for iy in 0..=ny {
        let y = b.min.y + cell * R::of_usize(iy);
        for ix in 0..=nx {
            let x = b.min.x + cell * R::of_usize(ix);
            let near = field.blobs.iter().zip(&boxes).any(|(blob, (cx, cy, r))| {
                (x - *cx).abs() <= *r && (y - *cy).abs() <= *r && blob.contains(x, y, t)
            });
            if near {
                let inside = match mask {
                    Some(m) => m.get(ix, iy),
                    None => scenario.in_channel(x, y),
                };
                if inside {
                    points.push(Vec3::new(x, y, R::zero()));
                }
            }
        }
    }
    Ok(ShadowSample { time: t, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_environment, ScenarioPreset};

    #[test]
    fn sampling_is_deterministic() {
        let env = build_environment::<f64>(ScenarioPreset::Dense, 7).unwrap();
        let a = sample_shadow_field(&env.scenario, &env.shadows, 3.0).unwrap();
        let b = sample_shadow_field(&env.scenario, &env.shadows, 3.0).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        assert!(a
            .points
            .iter()
            .zip(&b.points)
            .all(|(p, q)| p.x == q.x && p.y == q.y && p.z == q.z));
        assert!(!a.points.is_empty());
    }

    #[test]
    fn static_field_does_not_move() {
        let env = build_environment::<f64>(ScenarioPreset::Dense, 11).unwrap();
        let mut field = env.shadows.clone();
        for blob in &mut field.blobs {
            blob.drift_amp = (0.0, 0.0);
            blob.pulse_amp = 0.0;
        }
        let a = sample_shadow_field(&env.scenario, &field, 0.0).unwrap();
        let b = sample_shadow_field(&env.scenario, &field, 10.0).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        assert!(a
            .points
            .iter()
            .zip(&b.points)
            .all(|(p, q)| p.x == q.x && p.y == q.y));
    }

    #[test]
    fn out_of_window_errors() {
        let env = build_environment::<f64>(ScenarioPreset::Sparse, 3).unwrap();
        assert!(sample_shadow_field(&env.scenario, &env.shadows, -0.1).is_err());
        assert!(
            sample_shadow_field(&env.scenario, &env.shadows, env.shadows.mission_window + 1.0)
                .is_err()
        );
    }

    #[test]
    fn dense_has_at_least_twice_the_sparse_area() {
        // integrate the shadow indicator over a 1 m in-channel grid at t = 0
        let area = |preset: ScenarioPreset| -> f64 {
            let env = build_environment::<f64>(preset, 5).unwrap();
            let b = &env.scenario.bounds;
            let mut count = 0u64;
            let mut y = b.min.y;
            while y <= b.max.y {
                let mut x = b.min.x;
                while x <= b.max.x {
                    if env.scenario.in_channel(x, y) && env.shadows.is_shadowed(x, y, 0.0) {
                        count += 1;
                    }
                    x += 1.0;
                }
                y += 1.0;
            }
            count as f64
        };
        let dense = area(ScenarioPreset::Dense);
        let sparse = area(ScenarioPreset::Sparse);
        assert!(
            dense >= 2.0 * sparse,
            "dense {} vs sparse {}",
            dense,
            sparse
        );
    }

    #[test]
    fn successive_samples_have_bounded_motion() {
        let env = build_environment::<f64>(ScenarioPreset::Dense, 13).unwrap();
        let dt = 0.1;
        for step in 0..100 {
            let t = step as f64 * 0.5;
            for blob in &env.shadows.blobs {
                let (x0, y0) = blob.center_at(t);
                let (x1, y1) = blob.center_at(t + dt);
                let speed = blob.peak_speed();
                let moved = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
                assert!(moved <= speed * dt + 1e-9);
                let boundary_rate = blob.pulse_amp * blob.pulse_omega * blob.semi_major;
                let da = (blob.scale_at(t + dt) - blob.scale_at(t)).abs() * blob.semi_major;
                assert!(da <= boundary_rate * dt + 1e-9);
            }
        }
    }

    #[test]
    fn predicted_shadows_match_cross_sections() {
        let obs = SuperEllipsoidObstacle::new(
            Vec3::new(0.0, 0.0, 85.0),
            (100.0, 80.0, 50.0),
            (1, 1, 2),
            (1.0, 1.0, 1.0),
            0.0,
            Vec3::zero(),
        )
        .unwrap();
        let obstacles = [obs];
        let q = PredictedShadows { obstacles: &obstacles };
        assert!(q.is_shadowed(0.0, 0.0, 0.0));
        assert!(q.is_shadowed(99.0, 0.0, 0.0));
        assert!(!q.is_shadowed(101.0, 0.0, 0.0));
        assert!(!q.is_shadowed(0.0, 81.0, 0.0));
    }
}
