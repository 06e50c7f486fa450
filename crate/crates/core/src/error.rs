use thiserror::Error;

/// Errors surfaced by planner and environment operations.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("no obstacles")]
    NoObstacles,
    #[error("degenerate normal")]
    DegenerateNormal,
    #[error("singular innovation")]
    SingularInnovation,
    #[error("path generation failed")]
    PathGenerationFailed,
    #[error("undefined angle")]
    UndefinedAngle,
    #[error("point outside domain bounds")]
    OutOfDomain,
    #[error("time {0} outside mission window [0, {1}]")]
    OutsideMissionWindow(f64, f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ablation preset required")]
    AblationPresetRequired,
}

pub type Result<T> = std::result::Result<T, Error>;
