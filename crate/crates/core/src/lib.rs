//! Reflection curves of 3D lines on axially symmetric quadric mirrors and
//! planar pose estimation for non-central catadioptric cameras.
//!
//! The crate is `no_std` and needs only `alloc`. Units are centimeters and
//! radians; pixels use `(u, v)` with `v` pointing down.
//!
//! * [`geometry`]: mirrors, lines, planar poses and the pinhole camera.
//! * [`oracle`]: forward projection of world points through the mirror.
//! * [`curve`]: the implicit reflection curve of a line on the mirror.
//! * [`pose`]: planar pose estimation from reflection curves.

#![no_std]

extern crate alloc;

pub mod curve;
pub mod error;
pub mod geometry;
mod linalg;
pub mod math;
pub mod oracle;
pub mod poly;
pub mod pose;
mod seed;

pub use curve::{curve_coefficients, sample_curve, CurveCoefficients, CurveSample, CurveSamples};
pub use error::{Error, Result};
pub use geometry::{Line3D, PinholeCamera, PlanarPose, QuadricMirror, RigidTransform};
pub use math::{Mat3, Vec3};
pub use oracle::{backproject_pixel, forward_project, project_to_pixel, ReflectionSolution};
pub use pose::{estimate_pose, LineObservation, PoseEstimate, PoseProblem, SolverOptions};
