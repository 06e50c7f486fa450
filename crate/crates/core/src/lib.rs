//! Core library for UAV survey path planning over rivers with time-varying
//! surface shadow regions.
//!
//! Shadows degrade spectral observation quality, so they are treated as soft
//! obstacles: implicit super-ellipsoid fields that a flow-field guidance law
//! (with an adaptive-altitude branch) bends trajectories around, wrapped in a
//! receding-horizon parameter search. PID and flow-field-only baselines plus
//! a metrics suite support benchmarking.
//!
//! All numeric code is generic over the [`scalar::Real`] scalar (`f32` or
//! `f64`); concrete aliases for the common types live at the crate root.

pub mod baselines;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod ifds;
pub mod metrics;
pub mod mpc;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` aliases for the main domain types.
pub type Vec3F64 = geometry::Vec3<f64>;
pub type Mat3F64 = geometry::Mat3<f64>;
pub type ObstacleF64 = geometry::SuperEllipsoidObstacle<f64>;
pub type TrajectoryF64 = ifds::Trajectory<f64>;
pub type UavStateF64 = ifds::UavState<f64>;
pub type IfdsParamsF64 = ifds::IfdsParams<f64>;
pub type KinematicLimitsF64 = ifds::KinematicLimits<f64>;
pub type GuidanceOutputF64 = ifds::GuidanceOutput<f64>;
pub type MpcConfigF64 = mpc::MpcConfig<f64>;
pub type CostBreakdownF64 = mpc::CostBreakdown<f64>;
pub type RunMetricsF64 = metrics::RunMetrics<f64>;

/// `f32` aliases for the geometric primitives.
pub type Vec3F32 = geometry::Vec3<f32>;
pub type Mat3F32 = geometry::Mat3<f32>;
pub type ObstacleF32 = geometry::SuperEllipsoidObstacle<f32>;
