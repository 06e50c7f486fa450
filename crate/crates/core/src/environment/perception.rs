//! Multi-obstacle track management: associates fitted shadow ellipsoids with
//! Kalman tracks frame by frame.

use crate::geometry::{SuperEllipsoidObstacle, Vec3};
use crate::scalar::Real;

use super::ekf::{ekf_predict, ekf_update, track_obstacle, EkfParams, ObstacleTrackState};
use super::ObstaclePlane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionConfig<R> {
    /// Association gate: max center distance between track and observation (m).
    pub gate: R,
    /// Frames a track may coast unmatched before it is dropped.
    pub max_misses: u32,
    /// Horizontal inflation applied to emitted planner obstacles.
    pub inflation: R,
    pub ekf: EkfParams<R>,
}

impl<R: Real> Default for PerceptionConfig<R> {
    fn default() -> Self {
        Self {
            gate: R::of(60.0),
            max_misses: 4,
            // planning margin: discrete steps with clamped turn rate lag the
            // ideal streamline, so the planner sees slightly grown obstacles
            inflation: R::of(1.15),
            ekf: EkfParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Track<R> {
    pub state: ObstacleTrackState<R>,
    pub misses: u32,
}

/// Owns the track set for one run; single-owner mutable state.
#[derive(Debug, Clone)]
pub struct Perception<R> {
    pub tracks: Vec<Track<R>>,
    pub config: PerceptionConfig<R>,
}

impl<R: Real> Perception<R> {
    pub fn new(config: PerceptionConfig<R>) -> Self {
        Self {
            tracks: Vec::new(),
            config,
        }
    }

    /// Observation tuple (center, effective radius) for a fitted ellipsoid.
    ///
    /// The radius is the circumscribing max(a, b): the emitted circular
    /// obstacle then contains the fitted ellipse, so planned clearance
    /// lower-bounds the true clearance.
    pub fn observation_of(obs: &SuperEllipsoidObstacle<R>) -> (Vec3<R>, R) {
        (obs.center, obs.a.max(obs.b))
    }

    /// Advance all tracks by `dt` and fold in the new frame of observations.
    ///
    /// Greedy nearest-neighbor association in observation order (callers pass
    /// deterministically ordered fits); unmatched observations open tracks,
    /// tracks unmatched for too long are dropped.
    pub fn step(&mut self, observations: &[(Vec3<R>, R)], dt: R) {
        for track in &mut self.tracks {
            track.state = ekf_predict(&track.state, dt);
        }
        let mut taken = vec![false; self.tracks.len()];
        for (center, radius) in observations {
            let mut best: Option<(usize, R)> = None;
            for (i, track) in self.tracks.iter().enumerate() {
                if taken[i] {
                    continue;
                }
                let d = track.state.center().distance(center);
                if d <= self.config.gate && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            match best {
                Some((i, _)) => {
                    taken[i] = true;
                    if let Ok(updated) = ekf_update(&self.tracks[i].state, (*center, *radius)) {
                        self.tracks[i].state = updated;
                        self.tracks[i].misses = 0;
                    }
                }
                None => {
                    self.tracks.push(Track {
                        state: ObstacleTrackState::from_observation(
                            *center,
                            *radius,
                            self.config.ekf,
                        ),
                        misses: 0,
                    });
                    taken.push(true);
                }
            }
        }
        for (i, track) in self.tracks.iter_mut().enumerate() {
            if i < taken.len() && !taken[i] {
                track.misses += 1;
            }
        }
        let max_misses = self.config.max_misses;
        self.tracks.retain(|t| t.misses <= max_misses);
    }

    /// Current obstacle geometry seen by the planner.
    pub fn current_obstacles(&self, plane: &ObstaclePlane<R>) -> Vec<SuperEllipsoidObstacle<R>> {
        self.current_obstacles_with(plane, self.config.inflation)
    }

    /// Current obstacle geometry with an explicit inflation (1.0 gives the
    /// raw fitted boundary, what a simple boundary-detection rule would see).
    pub fn current_obstacles_with(
        &self,
        plane: &ObstaclePlane<R>,
        inflation: R,
    ) -> Vec<SuperEllipsoidObstacle<R>> {
        self.tracks
            .iter()
            .filter_map(|t| track_obstacle(&t.state, plane, inflation))
            .collect()
    }

    pub fn track_states(&self) -> Vec<ObstacleTrackState<R>> {
        self.tracks.iter().map(|t| t.state.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_follow_observations() {
        let mut p = Perception::<f64>::new(PerceptionConfig::default());
        for step in 0..20 {
            let t = step as f64 * 0.5;
            let obs = vec![
                (Vec3::new(100.0 + t, 0.0, 85.0), 70.0),
                (Vec3::new(400.0, 50.0 - 0.5 * t, 85.0), 65.0),
            ];
            p.step(&obs, 0.5);
        }
        assert_eq!(p.tracks.len(), 2);
        // velocity estimates converge toward the true drift (1.0 and -0.5 m/s)
        let vx = p.tracks[0].state.mean[4];
        assert!((vx - 1.0).abs() < 0.4, "vx {}", vx);
        let vy = p.tracks[1].state.mean[5];
        assert!((vy + 0.5).abs() < 0.4, "vy {}", vy);
    }

    #[test]
    fn stale_tracks_are_dropped() {
        let mut p = Perception::<f64>::new(PerceptionConfig::default());
        p.step(&[(Vec3::new(0.0, 0.0, 85.0), 60.0)], 0.5);
        assert_eq!(p.tracks.len(), 1);
        for _ in 0..6 {
            p.step(&[], 0.5);
        }
        assert!(p.tracks.is_empty());
    }

    #[test]
    fn far_observation_opens_new_track() {
        let mut p = Perception::<f64>::new(PerceptionConfig::default());
        p.step(&[(Vec3::new(0.0, 0.0, 85.0), 60.0)], 0.5);
        p.step(
            &[
                (Vec3::new(1.0, 0.0, 85.0), 60.0),
                (Vec3::new(500.0, 0.0, 85.0), 55.0),
            ],
            0.5,
        );
        assert_eq!(p.tracks.len(), 2);
    }
}
