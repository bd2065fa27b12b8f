use thiserror::Error;

/// Errors raised by the geometric and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line direction is the zero vector")]
    ZeroDirection,
    #[error("surface normal is the zero vector")]
    ZeroNormal,
    #[error("invalid mirror: {0}")]
    InvalidMirror(&'static str),
    #[error("scene point coincides with the center of projection")]
    PointAtCop,
    #[error("reflection candidate failed to converge (residual {residual:e})")]
    NonConvergence { residual: f64 },
    #[error("pixel ray does not hit the mirror")]
    NoIntersection,
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("DegenerateLine: the reflection curve of this line is undefined")]
    DegenerateLine,
    #[error("DenominatorVanishes: x(y, z) has a pole at this point")]
    DenominatorVanishes,
    #[error("IllPosed: {0}")]
    IllPosed(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
