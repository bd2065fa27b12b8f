//! The `ncpose` command line.
//!
//! Exit codes: 0 success, 2 degenerate line, 3 estimate did not converge,
//! 4 malformed input or ill-posed problem, 5 invalid benchmark
//! configuration or line generation exhausted.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncpose_core::oracle::forward_project;
use ncpose_core::pose::pose_error;
use ncpose_core::{
    curve_coefficients, estimate_pose, sample_curve, Error as CoreError, Line3D, PlanarPose, QuadricMirror,
    SolverOptions, Vec3,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::io::{self, ProblemFile};
use crate::synth::{self, BenchConfig, DatasetSpec, NoiseKind, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_BAD_INPUT: i32 = 4;
pub const EXIT_BENCH: i32 = 5;

/// Environment variable that overrides `--seed` when set.
pub const SEED_ENV: &str = "NCPOSE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "ncpose",
    version,
    about = "Planar pose from straight lines seen through a quadric mirror",
    after_help = "Mirror presets: hyperbolic, parabolic, spheric.\n\
                  Exit codes: 0 ok, 2 degenerate line, 3 not converged, 4 bad input, 5 bench configuration.\n\
                  NCPOSE_SEED overrides --seed when set."
)]
pub struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the reflection curve of one line and overlay oracle projections.
    ProjectLine(ProjectLineArgs),
    /// Estimate the planar pose of a problem file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo noise sweep and write trial and summary CSVs.
    Bench(BenchArgs),
    /// Write a synthetic problem file.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Hyperbolic,
    Parabolic,
    Spheric,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Hyperbolic => "hyperbolic",
            Preset::Parabolic => "parabolic",
            Preset::Spheric => "spheric",
        }
    }
}

/// Three comma-separated numbers.
pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> =
        s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v.as_slice()).map_err(|_| format!("expected three comma-separated numbers, got {}", v.len()))
}

#[derive(Debug, Args)]
pub struct MirrorArgs {
    /// Mirror preset.
    #[arg(long, value_enum, default_value = "spheric")]
    pub preset: Preset,
    /// Mirror JSON file `{"A", "B", "C", "cop"}`; overrides --preset.
    #[arg(long)]
    pub mirror: Option<PathBuf>,
}

impl MirrorArgs {
    fn resolve(&self) -> Result<QuadricMirror, Failure> {
        match &self.mirror {
            Some(p) => io::load_mirror(p).map_err(Failure::input),
            None => Ok(QuadricMirror::preset(self.preset.name()).expect("preset names are valid")),
        }
    }
}

#[derive(Debug, Args)]
pub struct ProjectLineArgs {
    #[command(flatten)]
    pub mirror: MirrorArgs,
    /// Point on the line, `x,y,z` in cm.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub q: [f64; 3],
    /// Line direction, `x,y,z`.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub d: [f64; 3],
    /// Number of curve samples.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Line parameter range of the samples.
    #[arg(long, default_value_t = -30.0, allow_hyphen_values = true)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
    pub lambda_max: f64,
    /// Number of line points projected with every oracle solution.
    #[arg(long, default_value_t = 3)]
    pub overlay: usize,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Problem JSON file.
    #[arg(long)]
    pub problem: PathBuf,
    /// Solver options JSON file.
    #[arg(long)]
    pub options: Option<PathBuf>,
    /// Initial pose `theta_deg,t_x,t_y`; identity by default.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub init: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchNoise {
    /// Pixel noise sweep.
    Pixel,
    /// World-point noise sweep.
    World,
    /// Line-count sweep at fixed world noise.
    Nlines,
    /// No noise.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Pixel noise, 20 lines, 5 points per line.
    Fig4,
    /// World noise, 20 lines, 10 points per line.
    Fig5,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark configuration JSON; flags below are ignored when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "spheric")]
    pub preset: Preset,
    /// Start from a figure configuration.
    #[arg(long, value_enum)]
    pub fig: Option<Figure>,
    #[arg(long, value_enum)]
    pub noise: Option<BenchNoise>,
    /// Noise levels (px for pixel noise, cm for world noise).
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// Line counts of an `nlines` sweep.
    #[arg(long, value_delimiter = ',')]
    pub lines: Option<Vec<usize>>,
    /// Lines per trial.
    #[arg(long)]
    pub n_lines: Option<usize>,
    /// Points per line.
    #[arg(long)]
    pub m_points: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base seed; trial `k` of every sweep point uses `seed + k`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver options JSON file.
    #[arg(long)]
    pub options: Option<PathBuf>,
    /// Record per-trial wall time in the `wall_ms` column.
    #[arg(long)]
    pub timing: bool,
    /// Worker threads (all cores by default).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Trial CSV; the summary goes next to it as `<stem>.summary.csv`.
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "spheric")]
    pub preset: Preset,
    #[arg(long, default_value_t = 20)]
    pub n_lines: usize,
    #[arg(long, default_value_t = 5)]
    pub m_points: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub noise: BenchNoise,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    fn input(e: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_BAD_INPUT, e.to_string())
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_BAD_INPUT, format!("{}: {e}", path.display()))
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Failure::new(EXIT_BENCH, e.to_string())
    }
}

/// `--seed`, unless [`SEED_ENV`] holds an integer.
pub fn effective_seed(flag: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::input(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

pub fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::ProjectLine(a) => project_line(&a),
        Command::Estimate(a) => estimate(&a),
        Command::Bench(a) => bench(&a, cli.verbose),
        Command::Generate(a) => generate(&a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::io(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

#[derive(Serialize)]
struct CurveRow {
    kind: &'static str,
    lambda: f64,
    x: f64,
    y: f64,
    z: f64,
    gamma_residual: f64,
    x_residual: f64,
}

fn project_line(a: &ProjectLineArgs) -> Result<i32, Failure> {
    let mirror = a.mirror.resolve()?;
    let line = Line3D::new(Vec3::from(a.q), Vec3::from(a.d)).map_err(Failure::input)?;
    let coeffs = match curve_coefficients(&line, &mirror) {
        Ok(c) => c,
        Err(CoreError::DegenerateLine) => {
            return Err(Failure::new(EXIT_DEGENERATE, CoreError::DegenerateLine.to_string()))
        }
        Err(e) => return Err(Failure::input(e)),
    };
    let samples = sample_curve(&line, &mirror, a.lambda_min, a.lambda_max, a.n).map_err(Failure::input)?;
    let row = |kind, lambda, m: Vec3| CurveRow {
        kind,
        lambda,
        x: m.x,
        y: m.y,
        z: m.z,
        gamma_residual: coeffs.gamma_eval(m.y, m.z).abs(),
        x_residual: coeffs.x_from_yz(m.y, m.z).map_or(f64::NAN, |x| (x - m.x).abs()),
    };
    let mut rows: Vec<CurveRow> = samples.points.iter().map(|s| row("curve", s.lambda, s.m)).collect();
    for k in 0..a.overlay {
        let lambda = if a.overlay == 1 {
            0.5 * (a.lambda_min + a.lambda_max)
        } else {
            a.lambda_min + (a.lambda_max - a.lambda_min) * k as f64 / (a.overlay - 1) as f64
        };
        for sol in forward_project(line.point(lambda), &mirror).unwrap_or_default() {
            rows.push(row("overlay", lambda, sol.m));
        }
    }
    let out = output(a.out.as_deref())?;
    synth::write_csv(&rows, out).map_err(Failure::input)?;
    if !samples.skipped.is_empty() {
        eprintln!("{} sample(s) had no reflection and were skipped", samples.skipped.len());
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EstimateReport {
    theta_deg: f64,
    t_x: f64,
    t_y: f64,
    objective: f64,
    g1_violation: f64,
    g2_violation: f64,
    iterations: usize,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    rot_err_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trans_err_cm: Option<f64>,
}

fn estimate(a: &EstimateArgs) -> Result<i32, Failure> {
    let (file, problem) = io::load_problem(&a.problem).map_err(Failure::input)?;
    let opts = match &a.options {
        Some(p) => io::load_options(p).map_err(Failure::input)?,
        None => SolverOptions::default(),
    };
    let init = match &a.init {
        Some(v) => PlanarPose::new(v[0].to_radians(), v[1], v[2], problem.z_offset()),
        None => PlanarPose::new(0.0, 0.0, 0.0, problem.z_offset()),
    };
    let est = estimate_pose(&problem, init, &opts).map_err(Failure::input)?;
    let errors = file.truth.map(|t| pose_error(&est.pose, &t));
    let report = EstimateReport {
        theta_deg: est.pose.theta.to_degrees(),
        t_x: est.pose.t_x,
        t_y: est.pose.t_y,
        objective: est.objective_value,
        g1_violation: est.g1_violation,
        g2_violation: est.g2_violation,
        iterations: est.iterations,
        converged: est.converged,
        rot_err_deg: errors.map(|e| e.0),
        trans_err_cm: errors.map(|e| e.1),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(if est.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Builds the sweep from `--config` or from the flags.
pub fn bench_config(a: &BenchArgs) -> Result<BenchConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => {
            let mut cfg: BenchConfig = io::load_json(p).map_err(Failure::input)?;
            cfg.seed = effective_seed(cfg.seed)?;
            return Ok(cfg);
        }
        None => {
            let preset = a.preset.name();
            match (a.fig, a.noise) {
                (_, Some(BenchNoise::Nlines)) => BenchConfig::nlines(preset),
                (Some(Figure::Fig5), _) | (None, Some(BenchNoise::World)) => BenchConfig::fig5(preset),
                _ => BenchConfig::fig4(preset),
            }
        }
    };
    match a.noise {
        Some(BenchNoise::Pixel) => cfg.noise = NoiseKind::Pixel,
        Some(BenchNoise::World) | Some(BenchNoise::Nlines) => cfg.noise = NoiseKind::World,
        Some(BenchNoise::None) => cfg.noise = NoiseKind::None,
        None => {}
    }
    if let Some(s) = &a.sigmas {
        cfg.sigmas = s.clone();
    }
    if let Some(l) = &a.lines {
        cfg.line_counts = Some(l.clone());
    }
    if let Some(n) = a.n_lines {
        cfg.n_lines = n;
    }
    if let Some(m) = a.m_points {
        cfg.m_points = m;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(p) = &a.options {
        cfg.solver = io::load_options(p).map_err(Failure::input)?;
    }
    cfg.seed = effective_seed(a.seed)?;
    cfg.timing = a.timing;
    Ok(cfg)
}

/// `<dir>/<stem>.summary.csv` next to the trial CSV.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "bench".into());
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn bench(a: &BenchArgs, verbose: u8) -> Result<i32, Failure> {
    let cfg = bench_config(a)?;
    let echo = serde_json::to_string(&cfg).unwrap_or_default();
    if let Err(e) = cfg.validate() {
        return Err(Failure::new(EXIT_BENCH, format!("{e}\nconfiguration: {echo}")));
    }
    if verbose > 0 {
        eprintln!("running {} trial(s) per sweep point: {echo}", cfg.trials);
    }
    let rows = synth::run_benchmark(&cfg, a.threads)
        .map_err(|e| Failure::new(EXIT_BENCH, format!("{e}\nconfiguration: {echo}")))?;
    let file = File::create(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    synth::write_csv(&rows, BufWriter::new(file)).map_err(|e| Failure::io(&a.out, e))?;
    let summary = synth::summarize(&cfg, &rows);
    let spath = summary_path(&a.out);
    let file = File::create(&spath).map_err(|e| Failure::io(&spath, e))?;
    synth::write_csv(&summary, BufWriter::new(file)).map_err(|e| Failure::io(&spath, e))?;
    if verbose > 0 {
        for s in &summary {
            eprintln!(
                "sigma {} lines {}: median rot {:.3} deg, median trans {:.3} cm",
                s.sigma, s.n_lines, s.rot_median, s.trans_median
            );
        }
    }
    Ok(EXIT_OK)
}

fn generate(a: &GenerateArgs) -> Result<i32, Failure> {
    let seed = effective_seed(a.seed)?;
    let mirror = QuadricMirror::preset(a.preset.name()).expect("preset names are valid");
    let camera = ncpose_core::PinholeCamera::for_mirror(&mirror);
    let noise = match a.noise {
        BenchNoise::Pixel => NoiseKind::Pixel,
        BenchNoise::World | BenchNoise::Nlines => NoiseKind::World,
        BenchNoise::None => NoiseKind::None,
    };
    if a.n_lines < 2 || a.m_points == 0 || !(a.sigma >= 0.0) {
        return Err(Failure::new(EXIT_BENCH, "need --n-lines >= 2, --m-points >= 1 and --sigma >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = synth::random_truth(&mut rng, 0.0);
    let spec = DatasetSpec {
        mirror: &mirror,
        camera: Some(&camera),
        n_lines: a.n_lines,
        m_points: a.m_points,
        noise,
        sigma: a.sigma,
    };
    let data = synth::generate_dataset(&spec, truth, &mut rng)?;
    let file = ProblemFile::from_problem(&data.problem, Some(a.preset.name()), Some(truth));
    let mut out = output(a.out.as_deref())?;
    let text = serde_json::to_string_pretty(&file).expect("problem serializes");
    writeln!(out, "{text}").map_err(Failure::input)?;
    Ok(EXIT_OK)
}
