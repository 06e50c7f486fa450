//! Synthetic river scenarios, dynamic shadow fields, ellipsoid fitting and
//! obstacle-state tracking.
//!
//! The shadow generator stands in for the terrain/sun/cloud prediction stack
//! a fielded system would carry; anything that produces timestamped shadow
//! snapshots over the channel plugs in behind the same interface.

mod ekf;
mod fit;
mod perception;
mod presets;
mod scenario;
mod shadow;

pub use ekf::{
    ekf_predict, ekf_update, nis, predict_obstacles, track_obstacle, EkfParams,
    ObstacleTrackState,
};
pub use fit::{containment_fraction, fit_ellipsoids, FitConfig};
pub use perception::{Perception, PerceptionConfig, Track};
pub use presets::{build_environment, Mission, ScenarioPreset};
pub use scenario::{reference_components, reference_field, CenterlineQuery, Neck, RiverScenario};
pub use shadow::{
    sample_shadow_field, PredictedShadows, ShadowBlob, ShadowField, ShadowQuery, ShadowSample,
};

use crate::geometry::Vec3;
use crate::scalar::Real;

/// Axis-aligned domain box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBounds<R> {
    pub min: Vec3<R>,
    pub max: Vec3<R>,
}

impl<R: Real> DomainBounds<R> {
    pub fn new(min: Vec3<R>, max: Vec3<R>) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3<R>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn contains_xy(&self, x: R, y: R) -> bool {
        x >= self.min.x && x <= self.max.x && y >= self.min.y && y <= self.max.y
    }
}

/// Vertical extrusion profile turning a 2-D shadow region into a 3-D virtual
/// obstacle spanning the flight corridor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePlane<R> {
    /// Altitude of the obstacle center plane (m).
    pub plane_z: R,
    /// Vertical semi-thickness c (m).
    pub thickness: R,
    /// Vertical shape exponent r.
    pub exponent: u32,
}

/// Complete simulated world: channel geometry plus the dynamic shadow field.
#[derive(Debug, Clone)]
pub struct Environment<R> {
    pub scenario: RiverScenario<R>,
    pub shadows: ShadowField<R>,
    pub plane: ObstaclePlane<R>,
    pub mission: Mission<R>,
    mask: std::sync::OnceLock<std::sync::Arc<ChannelMask>>,
}

impl<R: Real> Environment<R> {
    pub fn new(
        scenario: RiverScenario<R>,
        shadows: ShadowField<R>,
        plane: ObstaclePlane<R>,
        mission: Mission<R>,
    ) -> Self {
        Self {
            scenario,
            shadows,
            plane,
            mission,
            mask: std::sync::OnceLock::new(),
        }
    }

    /// Ground-truth virtual obstacles at time `t` (uninflated).
    pub fn truth_obstacles(
        &self,
        t: R,
    ) -> crate::Result<Vec<crate::geometry::SuperEllipsoidObstacle<R>>> {
        self.shadows.truth_obstacles(t, &self.plane)
    }

    /// Shadow snapshot using a cached channel-membership grid; identical
    /// output to [`sample_shadow_field`] but amortized for per-step use.
    pub fn sample_shadow(&self, t: R) -> crate::Result<ShadowSample<R>> {
        let mask = self.mask.get_or_init(|| {
            std::sync::Arc::new(ChannelMask::build(
                &self.scenario,
                self.shadows.sample_cell,
            ))
        });
        shadow::sample_shadow_field_masked(&self.scenario, &self.shadows, t, mask)
    }
}

/// Precomputed channel-membership grid aligned with the snapshot lattice.
#[derive(Debug)]
pub struct ChannelMask {
    cells: Vec<bool>,
    nx: usize,
    ny: usize,
}

impl ChannelMask {
    pub fn build<R: Real>(scenario: &RiverScenario<R>, cell: R) -> Self {
        let b = &scenario.bounds;
        let nx = ((b.max.x - b.min.x) / cell).floor().to_f64().unwrap_or(0.0) as usize + 1;
        let ny = ((b.max.y - b.min.y) / cell).floor().to_f64().unwrap_or(0.0) as usize + 1;
        let mut cells = vec![false; nx * ny];
        for iy in 0..ny {
            let y = b.min.y + cell * R::of_usize(iy);
            for ix in 0..nx {
                let x = b.min.x + cell * R::of_usize(ix);
                cells[iy * nx + ix] = scenario.in_channel(x, y);
            }
        }
        Self { cells, nx, ny }
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> bool {
        ix < self.nx && iy < self.ny && self.cells[iy * self.nx + ix]
    }
}
