//! Synthetic datasets and the Monte Carlo noise sweeps.
//!
//! A trial draws a ground-truth planar pose, a set of lines in the camera
//! frame whose sample points all reflect in the mirror, and the reflection
//! points of those samples. The world lines handed to the estimator are the
//! camera-frame lines moved back by the inverse of the truth. Noise is then
//! added either to the scene points before projection (world noise) or to
//! the pixels of the reflection points (pixel noise).

use std::f64::consts::PI;
use std::time::Instant;

use ncpose_core::geometry::camera_line_to_world;
use ncpose_core::oracle::forward_project_nearest;
use ncpose_core::pose::pose_error;
use ncpose_core::{
    backproject_pixel, estimate_pose, project_to_pixel, Line3D, LineObservation, Mat3, PinholeCamera, PlanarPose,
    PoseProblem, QuadricMirror, SolverOptions, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::MirrorSpec;

/// Sample points of a line are spread evenly over `λ ∈ [−30, 30]` cm.
pub const LAMBDA_HALF_SPAN: f64 = 30.0;
/// Candidate lines tried per requested line before giving up.
pub const MAX_LINE_ATTEMPTS: usize = 100;
/// Noise redraws for a point whose noisy version has no reflection.
pub const MAX_REDRAWS: usize = 10;
/// Half-width of the ground-truth translation box, in cm.
pub const TRUTH_BOX: f64 = 50.0;
/// Half-width of the per-line random translation `t1`, in cm.
pub const LINE_JITTER: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("GenerationExhausted: no line with {m_points} reflecting points after {attempts} attempts")]
    GenerationExhausted { m_points: usize, attempts: usize },
    #[error("invalid benchmark configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown mirror preset {0:?} (expected hyperbolic, parabolic or spheric)")]
    UnknownPreset(String),
    #[error(transparent)]
    Geometry(#[from] ncpose_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Pixel,
    World,
}

/// Cylindrical region around the mirror axis that the base line points are
/// drawn from: radius and height ranges in cm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneRegion {
    pub rho: (f64, f64),
    pub z: (f64, f64),
}

impl SceneRegion {
    /// Region in which scene lines reflect well, by mirror family.
    pub fn for_mirror(mirror: &QuadricMirror) -> Self {
        if mirror.a() < 0.0 {
            SceneRegion { rho: (40.0, 150.0), z: (-30.0, -5.0) }
        } else if mirror.a() == 0.0 {
            SceneRegion { rho: (60.0, 150.0), z: (-60.0, -10.0) }
        } else {
            SceneRegion { rho: (60.0, 150.0), z: (-60.0, 0.0) }
        }
    }
}

/// Line parameters of the `m` sample points of a line.
pub fn sample_lambdas(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    (0..m).map(|k| -LAMBDA_HALF_SPAN + 2.0 * LAMBDA_HALF_SPAN * k as f64 / (m - 1) as f64).collect()
}

fn uniform_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    Mat3::from_quaternion(q[0], q[1], q[2], q[3])
}

fn reflection_of(p: Vec3, mirror: &QuadricMirror) -> Option<Vec3> {
    forward_project_nearest(p, mirror).ok().flatten().map(|s| s.m)
}

/// `n` camera-frame lines `λ R2 d + R1 q + t1`, each checked to have a
/// reflection for all `m` of its sample points.
///
/// The base point `q` sits at a random radius and height of the scene
/// region on the `x` axis and the base direction is `z`. `R1` is a random
/// rotation about the mirror axis (a general 3D rotation would carry most
/// points out of the mirror's field of view), `t1` a small random
/// translation and `R2` a uniformly random rotation.
pub fn random_lines(
    n: usize,
    m: usize,
    rng: &mut ChaCha8Rng,
    mirror: &QuadricMirror,
) -> Result<Vec<Line3D>, SynthError> {
    let region = SceneRegion::for_mirror(mirror);
    let lambdas = sample_lambdas(m);
    let mut lines = Vec::with_capacity(n);
    for _ in 0..n {
        let mut found = None;
        for _ in 0..MAX_LINE_ATTEMPTS {
            let q =
                Vec3::new(rng.random_range(region.rho.0..region.rho.1), 0.0, rng.random_range(region.z.0..region.z.1));
            let r1 = Mat3::rot_z(rng.random_range(-PI..PI));
            let t1 = Vec3::new(
                rng.random_range(-LINE_JITTER..LINE_JITTER),
                rng.random_range(-LINE_JITTER..LINE_JITTER),
                rng.random_range(-LINE_JITTER..LINE_JITTER),
            );
            let d = uniform_rotation(rng) * Vec3::Z;
            let Ok(line) = Line3D::new(r1 * q + t1, d) else { continue };
            if lambdas.iter().all(|l| reflection_of(line.point(*l), mirror).is_some()) {
                found = Some(line);
                break;
            }
        }
        lines.push(found.ok_or(SynthError::GenerationExhausted { m_points: m, attempts: MAX_LINE_ATTEMPTS })?);
    }
    Ok(lines)
}

/// Ground truth with `θ` uniform in `[−π, π)` and the translation uniform in
/// the box `[−50, 50]²` cm.
pub fn random_truth(rng: &mut ChaCha8Rng, z_offset: f64) -> PlanarPose {
    PlanarPose::new(
        rng.random_range(-PI..PI),
        rng.random_range(-TRUTH_BOX..TRUTH_BOX),
        rng.random_range(-TRUTH_BOX..TRUTH_BOX),
        z_offset,
    )
}

/// Adds i.i.d. `N(0, σ²)` noise to every coordinate of every point.
pub fn add_world_noise(points: &[Vec3], sigma_cm: f64, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    points
        .iter()
        .map(|p| {
            let e: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
            *p + Vec3::from(e) * sigma_cm
        })
        .collect()
}

fn noisy_pixel(u: [f64; 2], sigma: f64, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let e: [f64; 2] = std::array::from_fn(|_| StandardNormal.sample(rng));
    [u[0] + sigma * e[0], u[1] + sigma * e[1]]
}

/// A generated problem and the number of points lost to noise.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub problem: PoseProblem,
    pub truth: PlanarPose,
    pub dropped_points: usize,
}

/// What a dataset is built from, apart from the random draws.
#[derive(Debug, Clone, Copy)]
pub struct DatasetSpec<'a> {
    pub mirror: &'a QuadricMirror,
    pub camera: Option<&'a PinholeCamera>,
    pub n_lines: usize,
    pub m_points: usize,
    pub noise: NoiseKind,
    pub sigma: f64,
}

/// Builds the noiseless observations of `truth` and applies the requested
/// noise. Lines that lose every point are left out; the solver reports an
/// ill-posed problem if too few remain.
pub fn generate_dataset(spec: &DatasetSpec, truth: PlanarPose, rng: &mut ChaCha8Rng) -> Result<Dataset, SynthError> {
    let mirror = spec.mirror;
    let lines = random_lines(spec.n_lines, spec.m_points, rng, mirror)?;
    let lambdas = sample_lambdas(spec.m_points);
    let mut observations = Vec::with_capacity(lines.len());
    let mut dropped = 0;
    for line in &lines {
        let mut points = Vec::with_capacity(lambdas.len());
        for &l in &lambdas {
            let p = line.point(l);
            let m = match spec.noise {
                NoiseKind::World if spec.sigma > 0.0 => {
                    (0..MAX_REDRAWS).find_map(|_| reflection_of(add_world_noise(&[p], spec.sigma, rng)[0], mirror))
                }
                _ => reflection_of(p, mirror),
            };
            match m {
                Some(m) => points.push(m),
                None => dropped += 1,
            }
        }
        if points.is_empty() {
            continue;
        }
        let pixels = spec
            .camera
            .and_then(|cam| points.iter().map(|m| project_to_pixel(*m, cam)).collect::<Result<Vec<_>, _>>().ok());
        let world = camera_line_to_world(line, &truth);
        observations.push(LineObservation::new(world, points, pixels)?);
    }
    let mut problem = PoseProblem::new(observations, *mirror, truth.z_offset)?;
    if spec.noise == NoiseKind::Pixel {
        let cam = spec.camera.ok_or_else(|| SynthError::InvalidConfig("pixel noise needs a camera".into()))?;
        let (noisy, lost) = add_pixel_noise(&problem, spec.sigma, cam, rng)?;
        problem = noisy;
        dropped += lost;
    }
    Ok(Dataset { problem, truth, dropped_points: dropped })
}

/// Replaces each mirror point by the back-projection of its pixel plus
/// `N(0, σ²)` noise per coordinate. Points whose noisy ray misses the mirror
/// are redrawn up to [`MAX_REDRAWS`] times, then dropped; the second value
/// is the number of dropped points.
pub fn add_pixel_noise(
    problem: &PoseProblem,
    sigma_px: f64,
    cam: &PinholeCamera,
    rng: &mut ChaCha8Rng,
) -> Result<(PoseProblem, usize), SynthError> {
    let mirror = problem.mirror();
    let mut dropped = 0;
    let mut observations = Vec::with_capacity(problem.observations().len());
    for obs in problem.observations() {
        let mut points = Vec::new();
        let mut pixels = Vec::new();
        for m in &obs.mirror_points {
            let Ok(u) = project_to_pixel(*m, cam) else {
                dropped += 1;
                continue;
            };
            let hit = (0..MAX_REDRAWS).find_map(|_| {
                let un = noisy_pixel(u, sigma_px, rng);
                backproject_pixel(un, cam, mirror).ok().map(|p| (p, un))
            });
            match hit {
                Some((p, un)) => {
                    points.push(p);
                    pixels.push(un);
                }
                None => dropped += 1,
            }
        }
        if !points.is_empty() {
            observations.push(LineObservation::new(obs.line_world, points, Some(pixels))?);
        }
    }
    Ok((PoseProblem::new(observations, *mirror, problem.z_offset())?, dropped))
}

fn default_m_points() -> usize {
    5
}

fn default_n_lines() -> usize {
    20
}

fn default_trials() -> usize {
    100
}

/// One benchmark sweep. With `line_counts` set, the sweep runs over line
/// counts at the first (and only) entry of `sigmas`; otherwise over
/// `sigmas` at `n_lines`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub preset: String,
    /// Overrides the preset's mirror; `preset` then only labels the rows.
    #[serde(default)]
    pub mirror: Option<MirrorSpec>,
    #[serde(default = "default_n_lines")]
    pub n_lines: usize,
    #[serde(default = "default_m_points")]
    pub m_points: usize,
    pub noise: NoiseKind,
    pub sigmas: Vec<f64>,
    #[serde(default)]
    pub line_counts: Option<Vec<usize>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub focal: Option<f64>,
    #[serde(default)]
    pub principal_point: Option<[f64; 2]>,
    /// Record wall-clock time per trial; off by default so that outputs
    /// are byte-stable.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl BenchConfig {
    /// Pixel noise, 20 lines of 5 points, σ ∈ {0, 2, …, 10} px.
    pub fn fig4(preset: &str) -> Self {
        BenchConfig {
            preset: preset.to_string(),
            mirror: None,
            n_lines: 20,
            m_points: 5,
            noise: NoiseKind::Pixel,
            sigmas: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            line_counts: None,
            trials: 100,
            seed: 0,
            focal: None,
            principal_point: None,
            timing: false,
            solver: SolverOptions::default(),
        }
    }

    /// World noise, 20 lines of 10 points, σ ∈ {0, 2, …, 10} cm.
    pub fn fig5(preset: &str) -> Self {
        BenchConfig { noise: NoiseKind::World, m_points: 10, ..Self::fig4(preset) }
    }

    /// World noise fixed at 5 cm, 10 points per line, N ∈ {4, 8, 12, 16, 20}.
    pub fn nlines(preset: &str) -> Self {
        BenchConfig { sigmas: vec![5.0], line_counts: Some(vec![4, 8, 12, 16, 20]), ..Self::fig5(preset) }
    }

    pub fn mirror(&self) -> Result<QuadricMirror, SynthError> {
        match &self.mirror {
            Some(spec) => Ok(spec.to_mirror()?),
            None => QuadricMirror::preset(&self.preset).ok_or_else(|| SynthError::UnknownPreset(self.preset.clone())),
        }
    }

    pub fn camera(&self, mirror: &QuadricMirror) -> PinholeCamera {
        let mut cam = PinholeCamera::for_mirror(mirror);
        if let Some(f) = self.focal {
            cam.focal = f;
        }
        if let Some(pp) = self.principal_point {
            cam.principal_point = pp;
        }
        cam
    }

    /// Label of the swept quantity, used in the summary.
    pub fn kind(&self) -> &'static str {
        match (self.line_counts.is_some(), self.noise) {
            (true, _) => "nlines",
            (false, NoiseKind::Pixel) => "pixel",
            (false, NoiseKind::World) => "world",
            (false, NoiseKind::None) => "none",
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.sigmas.is_empty() {
            return bad("the sigma list is empty");
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return bad("sigmas must be finite and non-negative");
        }
        if self.m_points == 0 {
            return bad("m_points must be at least 1");
        }
        match &self.line_counts {
            Some(counts) => {
                if self.sigmas.len() != 1 {
                    return bad("a line-count sweep takes exactly one sigma");
                }
                if counts.is_empty() || counts.iter().any(|n| *n < 2) {
                    return bad("line counts must be non-empty and at least 2");
                }
            }
            None if self.n_lines < 2 => return bad("n_lines must be at least 2"),
            None => {}
        }
        if let Some(f) = self.focal {
            if !(f > 0.0 && f.is_finite()) {
                return bad("focal must be positive");
            }
        }
        self.mirror().map(|_| ())
    }

    /// `(sigma, n_lines)` of every sweep point in order.
    pub fn sweep_points(&self) -> Vec<(f64, usize)> {
        match &self.line_counts {
            Some(counts) => counts.iter().map(|n| (self.sigmas[0], *n)).collect(),
            None => self.sigmas.iter().map(|s| (*s, self.n_lines)).collect(),
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial_id: usize,
    pub preset: String,
    pub sigma: f64,
    pub n_lines: usize,
    pub m_points: usize,
    pub rot_err_deg: f64,
    pub trans_err_cm: f64,
    pub objective: f64,
    pub g1_violation: f64,
    pub g2_violation: f64,
    pub converged: bool,
    pub wall_ms: f64,
    #[serde(skip)]
    pub dropped_points: usize,
}

/// Runs one trial. The random stream depends only on `seed`, so the same
/// trial index sees the same truth and lines at every sweep point.
pub fn run_trial(
    cfg: &BenchConfig,
    mirror: &QuadricMirror,
    camera: &PinholeCamera,
    trial_id: usize,
    seed: u64,
    sigma: f64,
    n_lines: usize,
) -> Result<TrialResult, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = random_truth(&mut rng, 0.0);
    let spec = DatasetSpec { mirror, camera: Some(camera), n_lines, m_points: cfg.m_points, noise: cfg.noise, sigma };
    let mut row = TrialResult {
        trial_id,
        preset: cfg.preset.clone(),
        sigma,
        n_lines,
        m_points: cfg.m_points,
        rot_err_deg: f64::NAN,
        trans_err_cm: f64::NAN,
        objective: f64::NAN,
        g1_violation: f64::NAN,
        g2_violation: f64::NAN,
        converged: false,
        wall_ms: 0.0,
        dropped_points: 0,
    };
    let dataset = match generate_dataset(&spec, truth, &mut rng) {
        Ok(d) => d,
        Err(e @ SynthError::GenerationExhausted { .. }) => return Err(e),
        // Noise can leave too few points for a well-posed problem; that is
        // a failed trial, not a failed sweep.
        Err(_) => return Ok(row),
    };
    row.dropped_points = dataset.dropped_points;
    let start = Instant::now();
    let estimate = estimate_pose(&dataset.problem, PlanarPose::identity(), &cfg.solver);
    if cfg.timing {
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    if let Ok(est) = estimate {
        let (rot, trans) = pose_error(&est.pose, &truth);
        row.rot_err_deg = rot;
        row.trans_err_cm = trans;
        row.objective = est.objective_value;
        row.g1_violation = est.g1_violation;
        row.g2_violation = est.g2_violation;
        row.converged = est.converged;
    }
    Ok(row)
}

/// Runs every trial of the sweep, in parallel on `threads` workers (all
/// cores when `None`), and returns the rows in trial order.
pub fn run_benchmark(cfg: &BenchConfig, threads: Option<usize>) -> Result<Vec<TrialResult>, SynthError> {
    cfg.validate()?;
    let mirror = cfg.mirror()?;
    let camera = cfg.camera(&mirror);
    let jobs: Vec<(usize, u64, f64, usize)> = cfg
        .sweep_points()
        .into_iter()
        .enumerate()
        .flat_map(|(k, (sigma, n))| {
            (0..cfg.trials).map(move |t| (k * cfg.trials + t, cfg.seed.wrapping_add(t as u64), sigma, n))
        })
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(id, seed, sigma, n)| run_trial(cfg, &mirror, &camera, id, seed, sigma, n))
            .collect::<Result<Vec<_>, _>>()
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    pool.install(run)
}

/// Quartile statistics of one sweep point. Failed trials count as infinite
/// errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub kind: String,
    pub preset: String,
    pub sigma: f64,
    pub n_lines: usize,
    pub m_points: usize,
    pub trials: usize,
    pub rot_median: f64,
    pub rot_q1: f64,
    pub rot_q3: f64,
    pub trans_median: f64,
    pub trans_q1: f64,
    pub trans_q3: f64,
    pub converged: usize,
    pub dropped_points: usize,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

fn sorted_errors(rows: &[&TrialResult], f: impl Fn(&TrialResult) -> f64) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|r| f(r)).map(|e| if e.is_nan() { f64::INFINITY } else { e }).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn summarize(cfg: &BenchConfig, rows: &[TrialResult]) -> Vec<SummaryRow> {
    cfg.sweep_points()
        .into_iter()
        .enumerate()
        .map(|(k, (sigma, n_lines))| {
            let group: Vec<&TrialResult> = rows.iter().filter(|r| r.trial_id / cfg.trials == k).collect();
            let rot = sorted_errors(&group, |r| r.rot_err_deg);
            let trans = sorted_errors(&group, |r| r.trans_err_cm);
            SummaryRow {
                kind: cfg.kind().to_string(),
                preset: cfg.preset.clone(),
                sigma,
                n_lines,
                m_points: cfg.m_points,
                trials: group.len(),
                rot_median: quantile(&rot, 0.5),
                rot_q1: quantile(&rot, 0.25),
                rot_q3: quantile(&rot, 0.75),
                trans_median: quantile(&trans, 0.5),
                trans_q1: quantile(&trans, 0.25),
                trans_q3: quantile(&trans, 0.75),
                converged: group.iter().filter(|r| r.converged).count(),
                dropped_points: group.iter().map(|r| r.dropped_points).sum(),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
