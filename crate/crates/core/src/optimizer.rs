//! Gradients, AdamW with per-group learning rates, and the optimization loop.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ad::{self, Real, Var};
use crate::error::{Error, Result};
use crate::geometry::{focal_fov_derivative, rodrigues};
use crate::losses::{self, correspondence_terms, Cam, LossConfig, LossReport, CHUNK};
use crate::metrics::{self, MetricSummary};
use crate::problem::{Group, Params, SceneProblem};

/// Environment variable capping the number of gradient worker threads.
pub const WORKERS_ENV: &str = "PROBA_NUM_WORKERS";

/// Field-of-view values are kept inside this open interval after each step.
const FOV_BOUNDS: (f64, f64) = (1.0 + 1e-6, 179.0 - 1e-6);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr_fov_depth: f64,
    pub lr_pose_radius: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub iterations: usize,
    /// Iterations between trace snapshots.
    pub trace_every: usize,
    pub seed: u64,
    /// Record wall-clock milliseconds in the trace. Off by default so traces
    /// are reproducible byte for byte.
    pub timing: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr_fov_depth: 1e-3,
            lr_pose_radius: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            iterations: 10_000,
            trace_every: 100,
            seed: 0,
            timing: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_fov_depth > 0.0 && self.lr_pose_radius > 0.0) {
            return Err(Error::Invalid("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Invalid("betas must lie in [0, 1)".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::Invalid("trace_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn learning_rate(&self, group: Group) -> f64 {
        match group {
            Group::Fov | Group::Depth => self.lr_fov_depth,
            Group::Pose | Group::Radius => self.lr_pose_radius,
        }
    }
}

/// Loss and metrics after `iteration` updates.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub total: f64,
    pub reproj: f64,
    pub bha: f64,
    pub metrics: Option<MetricSummary>,
    pub ms: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub snapshots: Vec<Snapshot>,
}

impl Trace {
    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Evaluates losses and gradients, optionally on a dedicated thread pool.
/// Results do not depend on the number of workers.
pub struct Evaluator {
    pool: Option<rayon::ThreadPool>,
}

impl Evaluator {
    pub fn sequential() -> Evaluator {
        Evaluator { pool: None }
    }

    pub fn with_workers(workers: usize) -> Result<Evaluator> {
        if workers <= 1 {
            return Ok(Evaluator::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Invalid(format!("cannot start {workers} workers: {e}")))?;
        Ok(Evaluator { pool: Some(pool) })
    }

    /// Worker count from `PROBA_NUM_WORKERS`, defaulting to the number of
    /// available cores.
    pub fn from_env() -> Result<Evaluator> {
        let workers = match std::env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse::<usize>().map_err(|_| {
                Error::Invalid(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))
            })?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Evaluator::with_workers(workers.max(1))
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// Loss and its exact gradient with respect to the packed parameters.
    pub fn gradient(
        &self,
        problem: &SceneProblem,
        params: &Params,
        cfg: &LossConfig,
    ) -> Result<(LossReport, Vec<f64>)> {
        let cams = losses::cams(problem, params);
        let n = problem.correspondences.len();
        let n_chunks = n.div_ceil(CHUNK);
        let run = |k: usize| chunk_gradient(problem, params, cfg, &cams, k * CHUNK..((k + 1) * CHUNK).min(n));
        let chunks: Vec<ChunkGradient> = match &self.pool {
            Some(pool) => pool.install(|| (0..n_chunks).into_par_iter().map(run).collect()),
            None => (0..n_chunks).map(run).collect(),
        };

        let layout = params.layout;
        let width = layout.radius_width();
        let mut grad = vec![0.0; layout.len()];
        let mut frame_acc = vec![0.0; FRAME_SLOTS * problem.frames.len()];
        let (mut reproj, mut bha, mut skipped) = (0.0, 0.0, 0);
        for (k, chunk) in chunks.iter().enumerate() {
            reproj += chunk.reproj;
            bha += chunk.bha;
            skipped += chunk.skipped;
            for (a, b) in frame_acc.iter_mut().zip(&chunk.frames) {
                *a += b;
            }
            let first = k * CHUNK;
            let per = 2 + 2 * width;
            for (c, local) in chunk.locals.chunks_exact(per).enumerate() {
                let corr = first + c;
                grad[layout.depth_offset() + 2 * corr] = local[0];
                grad[layout.depth_offset() + 2 * corr + 1] = local[1];
                let r0 = layout.radius_offset() + 2 * corr * width;
                grad[r0..r0 + 2 * width].copy_from_slice(&local[2..]);
            }
        }

        ad::reset();
        for (frame, acc) in frame_acc.chunks_exact(FRAME_SLOTS).enumerate() {
            let pose = &params.poses[frame];
            let w = [
                Var::input(pose.rotation.x),
                Var::input(pose.rotation.y),
                Var::input(pose.rotation.z),
            ];
            let r = rodrigues(w);
            let mut s = Var::constant(0.0);
            for a in 0..3 {
                for b in 0..3 {
                    s = s + r[a][b] * acc[3 * a + b];
                }
            }
            let dw = ad::gradient(s, &w);
            grad[6 * frame..6 * frame + 3].copy_from_slice(&dw);
            grad[6 * frame + 3..6 * frame + 6].copy_from_slice(&acc[9..12]);
            let width_px = problem.frames[frame].width;
            grad[layout.fov_index(frame)] += acc[12] * focal_fov_derivative(params.fov(frame), width_px);
            ad::reset();
        }

        let total = reproj + cfg.lambda * bha;
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        Ok((
            LossReport {
                total,
                reproj,
                bha,
                per_correspondence: None,
                skipped,
            },
            grad,
        ))
    }
}

/// Rotation matrix (9), translation (3) and focal length (1) per frame.
const FRAME_SLOTS: usize = 13;

struct ChunkGradient {
    reproj: f64,
    bha: f64,
    skipped: usize,
    frames: Vec<f64>,
    /// Per correspondence: two log-depths then both radii.
    locals: Vec<f64>,
}

fn cam_inputs(cam: &Cam<f64>) -> Cam<Var> {
    let mut r = [[Var::constant(0.0); 3]; 3];
    for (a, row) in cam.r.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            r[a][b] = Var::input(*v);
        }
    }
    Cam {
        r,
        t: cam.t.map(Var::input),
        f: Var::input(cam.f),
        c: cam.c,
    }
}

fn cam_vars(cam: &Cam<Var>) -> impl Iterator<Item = Var> + '_ {
    cam.r
        .iter()
        .flatten()
        .copied()
        .chain(cam.t.iter().copied())
        .chain(std::iter::once(cam.f))
}

fn chunk_gradient(
    problem: &SceneProblem,
    params: &Params,
    cfg: &LossConfig,
    cams: &[Cam<f64>],
    range: std::ops::Range<usize>,
) -> ChunkGradient {
    let width = params.layout.radius_width();
    let per = 2 + 2 * width;
    let mut out = ChunkGradient {
        reproj: 0.0,
        bha: 0.0,
        skipped: 0,
        frames: vec![0.0; FRAME_SLOTS * problem.frames.len()],
        locals: Vec::with_capacity(range.len() * per),
    };
    let mut inputs: Vec<Var> = Vec::with_capacity(2 * FRAME_SLOTS + per);
    let mut buf = vec![0.0; 2 * FRAME_SLOTS + per];
    for k in range {
        let c = &problem.correspondences[k];
        ad::reset();
        let ci = cam_inputs(&cams[c.frame_i]);
        let cj = cam_inputs(&cams[c.frame_j]);
        let ld = [
            Var::input(params.log_depths[2 * k]),
            Var::input(params.log_depths[2 * k + 1]),
        ];
        let radii: Vec<Var> = params.radii[2 * k * width..(2 * k + 2) * width]
            .iter()
            .map(|v| Var::input(*v))
            .collect();
        let t = correspondence_terms(
            cfg,
            &ci,
            &cj,
            [c.p.x, c.p.y],
            [c.q.x, c.q.y],
            ld,
            &radii[..width],
            &radii[width..],
        );
        let wt = losses::weight(cfg, c.confidence);
        out.reproj += wt * t.reproj.value();
        out.bha += wt * t.bha.value();
        out.skipped += t.skipped;
        let objective = (t.reproj + t.bha * cfg.lambda) * wt;

        inputs.clear();
        inputs.extend(cam_vars(&ci));
        inputs.extend(cam_vars(&cj));
        inputs.extend(ld);
        inputs.extend(&radii);
        ad::gradient_into(objective, &inputs, &mut buf);
        let (gi, rest) = buf.split_at(FRAME_SLOTS);
        let (gj, local) = rest.split_at(FRAME_SLOTS);
        for (a, g) in out.frames[FRAME_SLOTS * c.frame_i..][..FRAME_SLOTS].iter_mut().zip(gi) {
            *a += g;
        }
        for (a, g) in out.frames[FRAME_SLOTS * c.frame_j..][..FRAME_SLOTS].iter_mut().zip(gj) {
            *a += g;
        }
        out.locals.extend_from_slice(local);
    }
    ad::reset();
    out
}

/// Gradient of the configured objective, evaluated on the calling thread.
pub fn gradient(problem: &SceneProblem, params: &Params, cfg: &LossConfig) -> Result<Vec<f64>> {
    Ok(Evaluator::sequential().gradient(problem, params, cfg)?.1)
}

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One AdamW update in place.
pub fn adamw_step(
    state: &mut AdamState,
    params: &mut [f64],
    grad: &[f64],
    tags: &[Group],
    cfg: &OptimizerConfig,
) -> Result<()> {
    let n = params.len();
    if grad.len() != n || tags.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "params {n}, grad {}, tags {}, state {}",
            grad.len(),
            tags.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powf(state.step as f64);
    let bc2 = 1.0 - cfg.beta2.powf(state.step as f64);
    for k in 0..n {
        let lr = cfg.learning_rate(tags[k]);
        let g = grad[k];
        params[k] *= 1.0 - lr * cfg.weight_decay;
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[k] / bc1;
        let v_hat = state.v[k] / bc2;
        params[k] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Result of a run. `aborted` holds the numerical failure that stopped it
/// early, in which case `params` and `trace` describe the last good state.
#[derive(Debug)]
pub struct Outcome {
    pub params: Params,
    pub trace: Trace,
    pub aborted: Option<Error>,
}

fn snapshot(
    problem: &SceneProblem,
    params: &Params,
    report: &LossReport,
    iteration: usize,
    started: Option<Instant>,
) -> Snapshot {
    let metrics = match (problem.gt_poses(), problem.gt_fov()) {
        (Some(gt), Some(gt_fov)) => metrics::evaluate(&params.poses, &gt, params.fov(0), gt_fov).ok(),
        _ => None,
    };
    Snapshot {
        iteration,
        total: report.total,
        reproj: report.reproj,
        bha: report.bha,
        metrics,
        ms: started.map(|s| s.elapsed().as_secs_f64() * 1e3),
    }
}

/// Runs `cfg.iterations` full-batch AdamW steps from the seeded
/// initialization.
pub fn optimize(
    problem: &SceneProblem,
    loss: &LossConfig,
    cfg: &OptimizerConfig,
    evaluator: &Evaluator,
) -> Result<Outcome> {
    optimize_from(problem, problem.initialize(cfg.seed), loss, cfg, evaluator)
}

/// As [`optimize`], starting from the given parameters.
pub fn optimize_from(
    problem: &SceneProblem,
    init: Params,
    loss: &LossConfig,
    cfg: &OptimizerConfig,
    evaluator: &Evaluator,
) -> Result<Outcome> {
    loss.validate()?;
    cfg.validate()?;
    let layout = problem.layout();
    if init.layout != layout {
        return Err(Error::DimensionMismatch(
            "initial parameters do not match the problem layout".into(),
        ));
    }
    let tags = layout.tags();
    let started = cfg.timing.then(Instant::now);
    let mut flat = init.pack();
    let mut params = init;
    let mut state = AdamState::new(flat.len());
    let mut trace = Trace::default();
    for it in 0..cfg.iterations {
        let (report, grad) = match evaluator.gradient(problem, &params, loss) {
            Ok(r) => r,
            Err(e) => {
                return Ok(Outcome {
                    params,
                    trace,
                    aborted: Some(e),
                })
            }
        };
        if it % cfg.trace_every == 0 {
            trace.snapshots.push(snapshot(problem, &params, &report, it, started));
        }
        adamw_step(&mut state, &mut flat, &grad, &tags, cfg)?;
        for k in layout.fov_offset()..layout.depth_offset() {
            flat[k] = flat[k].clamp(FOV_BOUNDS.0, FOV_BOUNDS.1);
        }
        params = layout.unpack(&flat)?;
    }
    match losses::total_loss(problem, &params, loss) {
        Ok(report) => {
            trace
                .snapshots
                .push(snapshot(problem, &params, &report, cfg.iterations, started));
            Ok(Outcome {
                params,
                trace,
                aborted: None,
            })
        }
        Err(e) => Ok(Outcome {
            params,
            trace,
            aborted: Some(e),
        }),
    }
}
