//! JSON file formats: mirrors, pose problems and solver options.

use std::path::Path;

use ncpose_core::{Line3D, LineObservation, PlanarPose, PoseProblem, QuadricMirror, SolverOptions, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

/// `Ω = x² + y² + A z² + B z − C` with its center of projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorSpec {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub cop: [f64; 3],
}

impl MirrorSpec {
    pub fn to_mirror(&self) -> ncpose_core::Result<QuadricMirror> {
        QuadricMirror::new(self.a, self.b, self.c, Vec3::from(self.cop))
    }

    pub fn from_mirror(m: &QuadricMirror) -> Self {
        MirrorSpec { a: m.a(), b: m.b(), c: m.c(), cop: m.cop().to_array() }
    }
}

/// One observed line: the world line `q + λ d` and its mirror points in the
/// camera frame, optionally with their pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub q: [f64; 3],
    pub d: [f64; 3],
    pub mirror_points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<Vec<[f64; 2]>>,
}

/// A pose problem on disk. Exactly one of `preset` and `mirror` is given;
/// `truth` is optional and only used to report errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror: Option<MirrorSpec>,
    #[serde(default)]
    pub z_offset: f64,
    pub lines: Vec<LineRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PlanarPose>,
}

impl ProblemFile {
    pub fn from_problem(problem: &PoseProblem, preset: Option<&str>, truth: Option<PlanarPose>) -> Self {
        let lines = problem
            .observations()
            .iter()
            .map(|o| LineRecord {
                q: o.line_world.q().to_array(),
                d: o.line_world.d().to_array(),
                mirror_points: o.mirror_points.iter().map(|m| m.to_array()).collect(),
                pixels: o.pixels.clone(),
            })
            .collect();
        let (preset, mirror) = match preset {
            Some(p) => (Some(p.to_string()), None),
            None => (None, Some(MirrorSpec::from_mirror(problem.mirror()))),
        };
        ProblemFile { preset, mirror, z_offset: problem.z_offset(), lines, truth }
    }

    pub fn resolve_mirror(&self) -> Result<QuadricMirror, String> {
        match (&self.preset, &self.mirror) {
            (Some(_), Some(_)) => Err("give either \"preset\" or \"mirror\", not both".into()),
            (None, None) => Err("missing \"preset\" or \"mirror\"".into()),
            (Some(p), None) => QuadricMirror::preset(p).ok_or_else(|| format!("unknown preset {p:?}")),
            (None, Some(m)) => m.to_mirror().map_err(|e| format!("mirror: {e}")),
        }
    }

    /// Builds the problem. Errors name the offending line and field.
    pub fn to_problem(&self) -> Result<PoseProblem, ncpose_core::Error> {
        let mirror = self.resolve_mirror().map_err(|_| ncpose_core::Error::InvalidInput("mirror"))?;
        let mut obs = Vec::with_capacity(self.lines.len());
        for l in &self.lines {
            let line = Line3D::new(Vec3::from(l.q), Vec3::from(l.d))?;
            let pts = l.mirror_points.iter().map(|p| Vec3::from(*p)).collect();
            obs.push(LineObservation::new(line, pts, l.pixels.clone())?);
        }
        PoseProblem::new(obs, mirror, self.z_offset)
    }

    /// Line-level validation with diagnostics, before [`to_problem`](Self::to_problem).
    pub fn check(&self) -> Result<QuadricMirror, String> {
        let mirror = self.resolve_mirror()?;
        for (i, l) in self.lines.iter().enumerate() {
            if Line3D::new(Vec3::from(l.q), Vec3::from(l.d)).is_err() {
                return Err(format!("lines[{i}].d: direction must be finite and nonzero"));
            }
            if l.mirror_points.is_empty() {
                return Err(format!("lines[{i}].mirror_points: at least one point is required"));
            }
            for (j, p) in l.mirror_points.iter().enumerate() {
                let v = mirror.eval(Vec3::from(*p));
                if !(v.abs() < ncpose_core::pose::ON_MIRROR_TOLERANCE) {
                    return Err(format!("lines[{i}].mirror_points[{j}]: not on the mirror (|Ω| = {:e})", v.abs()));
                }
            }
            if let Some(px) = &l.pixels {
                if px.len() != l.mirror_points.len() {
                    return Err(format!(
                        "lines[{i}].pixels: {} entries for {} mirror points",
                        px.len(),
                        l.mirror_points.len()
                    ));
                }
            }
        }
        Ok(mirror)
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Read { path: path.display().to_string(), source })
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, InputError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| InputError::Json { path: path.display().to_string(), source })
}

pub fn load_mirror(path: &Path) -> Result<QuadricMirror, InputError> {
    let spec: MirrorSpec = load_json(path)?;
    spec.to_mirror().map_err(|e| InputError::Invalid { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_options(path: &Path) -> Result<SolverOptions, InputError> {
    load_json(path)
}

pub fn load_problem(path: &Path) -> Result<(ProblemFile, PoseProblem), InputError> {
    let file: ProblemFile = load_json(path)?;
    let invalid = |message: String| InputError::Invalid { path: path.display().to_string(), message };
    file.check().map_err(invalid)?;
    let problem = file.to_problem().map_err(|e| invalid(e.to_string()))?;
    Ok((file, problem))
}
