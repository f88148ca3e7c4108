//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 when a
//! run stops on a numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{
    self, RunConfig, RunResult, SceneFile, SceneMeta, DEFAULT_CONF_FLOOR, DEFAULT_STRIDE,
};
use crate::losses::{self, Mode};
use crate::metrics::{self, MetricSummary};
use crate::optimizer::{self, Evaluator, Trace};
use crate::problem::{Correspondence, Frame, SceneProblem};
use crate::synth::{self, Rig, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "proba", version, about = "Probabilistic initialization-free bundle adjustment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Build a scene from a JSON-lines dense-match file.
    Ingest(IngestArgs),
    /// Optimize a scene for every configured seed.
    Optimize(OptimizeArgs),
    /// Score a result file against the scene's ground truth.
    Eval(EvalArgs),
    /// Optimize once per λ value.
    SweepLambda(SweepLambdaArgs),
    /// Optimize subsets of a ten-frame scene.
    SweepFrames(SweepFramesArgs),
    /// Draw trace columns as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON generator settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ground-truth field of view, degrees.
    #[arg(long)]
    fov: Option<f64>,
    /// Pixel noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    outlier_rate: Option<f64>,
    #[arg(long, value_parser = parse_rig)]
    rig: Option<Rig>,
    /// Orbit arc in degrees, or walk length.
    #[arg(long)]
    baseline: Option<f64>,
    #[arg(long, default_value = "scene.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// JSON-lines file of {i, j, px, py, qx, qy, conf} records.
    #[arg(long)]
    matches: PathBuf,
    #[arg(long)]
    width: f64,
    #[arg(long)]
    height: f64,
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    stride: u32,
    #[arg(long, default_value_t = DEFAULT_CONF_FLOOR)]
    conf_floor: f64,
    #[arg(long, default_value = "scene.json")]
    out: PathBuf,
}

/// Flags shared by every command that runs the optimizer.
#[derive(Debug, Args)]
struct RunFlags {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    anisotropic: bool,
    #[arg(long)]
    per_frame_fov: bool,
    /// Record wall-clock time in the trace.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    result: Option<PathBuf>,
    #[arg(long, default_value = "scene.json")]
    scene: PathBuf,
    /// Also write the summary here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepLambdaArgs {
    #[command(flatten)]
    run: RunFlags,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 1.0, 10.0])]
    values: Vec<f64>,
}

#[derive(Debug, Args)]
struct SweepFramesArgs {
    #[command(flatten)]
    run: RunFlags,
    #[arg(long, value_delimiter = ',', default_values_t = 2..=10usize)]
    values: Vec<usize>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = ["maa10".to_string(), "fov_err".to_string()])]
    columns: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_rig(s: &str) -> std::result::Result<Rig, String> {
    match s {
        "orbit" => Ok(Rig::Orbit),
        "forward_walk" | "forward-walk" => Ok(Rig::ForwardWalk),
        other => Err(format!("unknown rig {other:?} (expected orbit or forward_walk)")),
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = if error.is_numerical() { EXIT_NUMERICAL } else { EXIT_INVALID };
        Failure { code, error }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Runs the command line `argv` (program name first) and returns the exit
/// code. Results go to stdout, diagnostics to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Eval(a) => cmd_eval(a),
        Command::SweepLambda(a) => cmd_sweep_lambda(a),
        Command::SweepFrames(a) => cmd_sweep_frames(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("cannot serialize output: {e}")))?;
    println!("{text}");
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.frames {
        cfg.n_frames = v;
    }
    if let Some(v) = a.points {
        cfg.n_points = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.fov {
        cfg.fov_gt = v;
    }
    if let Some(v) = a.noise {
        cfg.pixel_noise_std = v;
    }
    if let Some(v) = a.outlier_rate {
        cfg.outlier_rate = v;
    }
    if let Some(v) = a.rig {
        cfg.rig = v;
    }
    if let Some(v) = a.baseline {
        cfg.baseline = v;
    }
    let scene = synth::generate(&cfg)?;
    let meta = SceneMeta {
        generator: "proba synth".into(),
        seed: Some(cfg.seed),
        units: "pixels".into(),
    };
    io::write_json(&a.out, &SceneFile::from_problem(&scene.problem, meta))?;
    eprintln!(
        "wrote {} ({} frames, {} correspondences, {} outliers)",
        a.out.display(),
        scene.problem.frames.len(),
        scene.problem.correspondences.len(),
        scene.outliers.len()
    );
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> CmdResult {
    let records = io::read_dense_matches(&a.matches)?;
    let kept = io::sample_correspondences(&records, a.stride, a.conf_floor)?;
    let n_frames = kept.iter().map(|r| r.i.max(r.j)).max().map_or(0, |m| m + 1);
    let frames = (0..n_frames)
        .map(|id| Frame {
            id,
            width: a.width,
            height: a.height,
            gt_pose: None,
            gt_fov: None,
        })
        .collect();
    let corrs = kept
        .iter()
        .map(|r| Correspondence {
            frame_i: r.i,
            frame_j: r.j,
            p: [r.px, r.py].into(),
            q: [r.qx, r.qy].into(),
            confidence: r.conf,
        })
        .collect();
    let problem = SceneProblem::new(frames, corrs)?;
    let meta = SceneMeta {
        generator: format!("proba ingest stride={} conf>{}", a.stride, a.conf_floor),
        seed: None,
        units: "pixels".into(),
    };
    io::write_json(&a.out, &SceneFile::from_problem(&problem, meta))?;
    eprintln!(
        "kept {} of {} matches over {} frames",
        kept.len(),
        records.len(),
        n_frames
    );
    Ok(())
}

fn run_config(f: &RunFlags) -> Result<RunConfig> {
    let mut cfg: RunConfig = match &f.config {
        Some(p) => io::read_json(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &f.scene {
        cfg.scene = v.clone();
    }
    if let Some(v) = f.mode {
        cfg.mode = v;
    }
    if let Some(v) = f.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = f.iters {
        cfg.optimizer.iterations = v;
    }
    if let Some(v) = f.seed {
        cfg.seeds = vec![v];
    }
    if let Some(v) = &f.out {
        cfg.output_dir = v.clone();
    }
    cfg.anisotropic |= f.anisotropic;
    cfg.per_frame_fov |= f.per_frame_fov;
    cfg.optimizer.timing |= f.timing;
    cfg.validate()?;
    Ok(cfg)
}

/// One optimizer run on `problem` (already configured for anisotropy and
/// per-frame fov).
pub struct SeedRun {
    pub result: RunResult,
    pub trace: Trace,
    pub aborted: Option<Error>,
}

pub fn run_seed(
    problem: &SceneProblem,
    cfg: &RunConfig,
    seed: u64,
    evaluator: &Evaluator,
) -> Result<SeedRun> {
    let problem = problem
        .clone()
        .with_anisotropic(cfg.anisotropic)
        .with_per_frame_fov(cfg.per_frame_fov);
    let loss = cfg.loss();
    let opt = optimizer::OptimizerConfig {
        seed,
        ..cfg.optimizer.clone()
    };
    let out = optimizer::optimize(&problem, &loss, &opt, evaluator)?;
    let final_report = losses::total_loss(&problem, &out.params, &loss).ok();
    let last = out.trace.last();
    let pick = |f: fn(&losses::LossReport) -> f64, g: fn(&optimizer::Snapshot) -> f64| {
        final_report
            .as_ref()
            .map(f)
            .or(last.map(g))
            .unwrap_or(f64::NAN)
    };
    let metrics = match (problem.gt_poses(), problem.gt_fov()) {
        (Some(gt), Some(gt_fov)) => {
            Some(metrics::evaluate(&out.params.poses, &gt, out.params.fov(0), gt_fov)?)
        }
        _ => None,
    };
    let result = RunResult {
        mode: cfg.mode,
        lambda: cfg.lambda,
        eta: cfg.eta,
        seed,
        iterations: opt.iterations,
        anisotropic: cfg.anisotropic,
        fov: RunResult::frame_fovs(&out.params),
        poses: out.params.poses.iter().map(io::pose_to_matrix).collect(),
        total: pick(|r| r.total, |s| s.total),
        reproj: pick(|r| r.reproj, |s| s.reproj),
        bha: pick(|r| r.bha, |s| s.bha),
        skipped: final_report.as_ref().map_or(0, |r| r.skipped),
        aborted: out.aborted.as_ref().map(|e| e.to_string()),
        metrics,
    };
    Ok(SeedRun {
        result,
        trace: out.trace,
        aborted: out.aborted,
    })
}

fn first_abort(aborted: Option<Error>) -> CmdResult {
    match aborted {
        Some(error) => Err(Failure {
            code: EXIT_NUMERICAL,
            error,
        }),
        None => Ok(()),
    }
}

fn cmd_optimize(a: OptimizeArgs) -> CmdResult {
    let cfg = run_config(&a.run)?;
    let problem = io::read_scene(&cfg.scene)?;
    let evaluator = Evaluator::from_env()?;
    create_dir(&cfg.output_dir)?;
    let mut aborted = None;
    for &seed in &cfg.seeds {
        let run = run_seed(&problem, &cfg, seed, &evaluator)?;
        let result_path = cfg.output_dir.join(format!("result_seed{seed}.json"));
        io::write_json(&result_path, &run.result)?;
        io::write_trace(&cfg.output_dir.join(format!("trace_seed{seed}.csv")), &run.trace)?;
        match &run.result.metrics {
            Some(m) => eprintln!(
                "seed {seed}: total {:.4} mAA@10 {:.1} fov error {:.2}",
                run.result.total,
                m.maa10(),
                m.fov_error
            ),
            None => eprintln!("seed {seed}: total {:.4}", run.result.total),
        }
        if let Some(e) = &run.aborted {
            eprintln!("seed {seed}: aborted: {e}");
        }
        aborted = aborted.or(run.aborted);
    }
    first_abort(aborted)
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let result_path = a
        .result
        .unwrap_or_else(|| RunConfig::default().output_dir.join("result_seed0.json"));
    let result: RunResult = io::read_json(&result_path)?;
    let problem = io::read_scene(&a.scene)?;
    let gt = problem.gt_poses().ok_or(Error::MissingGroundTruth)?;
    let gt_fov = problem.gt_fov().ok_or(Error::MissingGroundTruth)?;
    let est = result.estimated_poses()?;
    let est_fov = *result
        .fov
        .first()
        .ok_or_else(|| Error::Invalid("result has no field of view".into()))?;
    let summary: MetricSummary = metrics::evaluate(&est, &gt, est_fov, gt_fov)?;
    if let Some(out) = &a.out {
        io::write_json(out, &summary)?;
    }
    print_json(&summary)?;
    Ok(())
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub total: f64,
    pub maa5: f64,
    pub maa10: f64,
    pub maa15: f64,
    pub fov_err: f64,
}

impl SweepRow {
    fn new(value: f64, r: &RunResult) -> SweepRow {
        let m = r.metrics.unwrap_or(MetricSummary {
            rra: [f64::NAN; 3],
            rta: [f64::NAN; 3],
            maa: [f64::NAN; 3],
            fov_error: f64::NAN,
        });
        SweepRow {
            value,
            seed: r.seed,
            total: r.total,
            maa5: m.maa[0],
            maa10: m.maa[1],
            maa15: m.maa[2],
            fov_err: m.fov_error,
        }
    }
}

fn write_sweep(name: &str, rows: &[SweepRow], dir: &Path) -> Result<()> {
    let render = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "{name},seed,total,maa5,maa10,maa15,fov_err")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.value, r.seed, r.total, r.maa5, r.maa10, r.maa15, r.fov_err
            )?;
        }
        Ok(())
    };
    let mut buf = Vec::new();
    render(&mut buf).map_err(|e| Error::io("<memory>", e))?;
    std::io::stdout()
        .write_all(&buf)
        .map_err(|e| Error::io("<stdout>", e))?;
    create_dir(dir)?;
    let path = dir.join(format!("sweep_{name}.csv"));
    std::fs::write(&path, &buf).map_err(|e| Error::io(&path, e))
}

fn cmd_sweep_lambda(a: SweepLambdaArgs) -> CmdResult {
    let base = run_config(&a.run)?;
    let problem = io::read_scene(&base.scene)?;
    let evaluator = Evaluator::from_env()?;
    let mut rows = Vec::new();
    let mut aborted = None;
    for &lambda in &a.values {
        let cfg = RunConfig {
            mode: Mode::Proba,
            lambda,
            ..base.clone()
        };
        cfg.validate()?;
        for &seed in &cfg.seeds {
            let run = run_seed(&problem, &cfg, seed, &evaluator)?;
            rows.push(SweepRow::new(lambda, &run.result));
            aborted = aborted.or(run.aborted);
        }
    }
    write_sweep("lambda", &rows, &base.output_dir)?;
    first_abort(aborted)
}

fn cmd_sweep_frames(a: SweepFramesArgs) -> CmdResult {
    let cfg = run_config(&a.run)?;
    let problem = io::read_scene(&cfg.scene)?;
    if problem.frames.len() != 10 {
        return Err(Error::Invalid(format!(
            "sweep-frames needs a ten-frame scene, got {} frames",
            problem.frames.len()
        ))
        .into());
    }
    let evaluator = Evaluator::from_env()?;
    let mut rows = Vec::new();
    let mut aborted = None;
    for &n in &a.values {
        let subset = problem.subset(&io::select_eval_frames(n)?)?;
        for &seed in &cfg.seeds {
            let run = run_seed(&subset, &cfg, seed, &evaluator)?;
            rows.push(SweepRow::new(n as f64, &run.result));
            aborted = aborted.or(run.aborted);
        }
    }
    write_sweep("frames", &rows, &cfg.output_dir)?;
    first_abort(aborted)
}

fn cmd_plot(a: PlotArgs) -> CmdResult {
    let table = io::read_trace(&a.trace)?;
    let out = a.out.unwrap_or_else(|| a.trace.with_extension("svg"));
    let cols: Vec<&str> = a.columns.iter().map(String::as_str).collect();
    io::plot_trace_svg(&table, &cols, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}
