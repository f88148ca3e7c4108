//! Reprojection likelihood, landmark overlap and baseline objectives.
//!
//! Every objective is evaluated by one generic per-correspondence kernel so
//! the same code yields values (`f64`) and gradients ([`crate::ad::Var`]).
//! Sums run over fixed-size chunks added in chunk order, which keeps totals
//! bit-identical however the chunks are scheduled.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::ad::Real;
use crate::error::{Error, Result};
use crate::geometry::{
    backproject, focal_from_fov, mat_t_vec, mat_vec, projected_covariance, propagation_matrix,
    rotation_matrix, Intrinsics, DEPTH_FLOOR,
};
use crate::problem::{Endpoint, Params, SceneProblem};
use crate::uncertainty::{
    anisotropic_covariance, bhattacharyya_coefficient_with, congruence, general_distance,
    isotropic_distance, realize_covariance, world_gaussian, BcVariant, Radius, Sym3,
};

/// Correspondences per reduction chunk.
pub const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Reprojection likelihood plus λ times the overlap term.
    #[default]
    Proba,
    /// Squared pixel reprojection error.
    #[serde(alias = "classical_ba")]
    Ba,
    /// Pseudo object-space error.
    #[serde(alias = "pose_baseline")]
    Pose,
    /// Object-space error with exponential depth regularization.
    #[serde(alias = "expose_baseline")]
    Expose,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "proba" => Ok(Mode::Proba),
            "ba" | "classical_ba" => Ok(Mode::Ba),
            "pose" | "pose_baseline" => Ok(Mode::Pose),
            "expose" | "expose_baseline" => Ok(Mode::Expose),
            other => Err(Error::Invalid(format!(
                "unknown mode {other:?} (expected proba, ba, pose or expose)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Proba => "proba",
            Mode::Ba => "ba",
            Mode::Pose => "pose",
            Mode::Expose => "expose",
        })
    }
}

/// Penalty replacing a residual whose point lands behind the target camera:
/// `offset + weight·(DEPTH_FLOOR − z)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub offset: f64,
    pub weight: f64,
}

impl Default for Barrier {
    fn default() -> Self {
        Barrier {
            offset: 50.0,
            weight: 1e3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub mode: Mode,
    pub lambda: f64,
    /// Use both reprojection directions of every correspondence.
    pub symmetric: bool,
    /// Blend weight of the affine term in `pose` mode, and of the image-space
    /// term in `expose` mode.
    pub eta: f64,
    /// Depth scale of the exponential weight in `expose` mode.
    pub zeta: f64,
    /// Weight residuals by match confidence instead of 1.
    pub use_confidence: bool,
    pub bc_variant: BcVariant,
    pub barrier: Barrier,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            mode: Mode::Proba,
            lambda: 1.0,
            symmetric: true,
            eta: 0.05,
            zeta: 1.0,
            use_confidence: false,
            bc_variant: BcVariant::Normalized,
            barrier: Barrier::default(),
        }
    }
}

impl LossConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::OutOfRange {
                what: "lambda",
                value: self.lambda,
                range: "[0, inf)",
            });
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::OutOfRange {
                what: "eta",
                value: self.eta,
                range: "(0, 1)",
            });
        }
        if !(self.zeta > 0.0) {
            return Err(Error::OutOfRange {
                what: "zeta",
                value: self.zeta,
                range: "(0, inf)",
            });
        }
        Ok(())
    }
}

/// Loss breakdown. `bha` is zero outside `proba` mode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub reproj: f64,
    pub bha: f64,
    /// `(reproj, bha)` per correspondence when requested.
    pub per_correspondence: Option<Vec<[f64; 2]>>,
    /// Residuals replaced by the behind-camera barrier.
    pub skipped: usize,
}

/// Camera quantities entering the kernel.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Cam<T> {
    pub r: [[T; 3]; 3],
    pub t: [T; 3],
    pub f: T,
    pub c: [f64; 2],
}

impl Cam<f64> {
    pub(crate) fn from_params(problem: &SceneProblem, params: &Params, frame: usize) -> Cam<f64> {
        let pose = &params.poses[frame];
        let r = rotation_matrix(&pose.rotation);
        let fr = &problem.frames[frame];
        Cam {
            r: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            t: [pose.translation.x, pose.translation.y, pose.translation.z],
            f: focal_from_fov(params.fov(frame), fr.width),
            c: [fr.width / 2.0, fr.height / 2.0],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Terms<T> {
    pub reproj: T,
    pub bha: T,
    pub skipped: usize,
}

/// World point of pixel `pix` at depth `exp(log_depth)` seen by `cam`.
fn lift<T: Real>(cam: &Cam<T>, pix: [f64; 2], log_depth: T) -> [T; 3] {
    let d = log_depth.exp();
    let inv_f = cam.f.recip();
    let x = [
        inv_f * (pix[0] - cam.c[0]) * d,
        inv_f * (pix[1] - cam.c[1]) * d,
        d,
    ];
    let rel = [x[0] - cam.t[0], x[1] - cam.t[1], x[2] - cam.t[2]];
    mat_t_vec(&cam.r, &rel)
}

fn to_camera<T: Real>(cam: &Cam<T>, w: &[T; 3]) -> [T; 3] {
    let y = mat_vec(&cam.r, w);
    [y[0] + cam.t[0], y[1] + cam.t[1], y[2] + cam.t[2]]
}

/// `Σ` of an endpoint radius expressed in the world frame.
fn world_covariance<T: Real>(cam: &Cam<T>, radius: &[T]) -> Sym3<T> {
    let body = anisotropic_covariance(radius);
    let rt = [
        [cam.r[0][0], cam.r[1][0], cam.r[2][0]],
        [cam.r[0][1], cam.r[1][1], cam.r[2][1]],
        [cam.r[0][2], cam.r[1][2], cam.r[2][2]],
    ];
    congruence(&rt, &body)
}

/// One reprojection residual from `src` (pixel `from`, depth, radius) into
/// `dst` (observed pixel `to`). Returns the term and whether the barrier
/// replaced it.
fn directed_term<T: Real>(
    cfg: &LossConfig,
    src: &Cam<T>,
    dst: &Cam<T>,
    from: [f64; 2],
    to: [f64; 2],
    log_depth: T,
    radius: &[T],
) -> (T, bool) {
    let w = lift(src, from, log_depth);
    let y = to_camera(dst, &w);
    let z = y[2];
    if z.value() <= DEPTH_FLOOR {
        let gap = -z + DEPTH_FLOOR;
        return (gap.square() * cfg.barrier.weight + cfg.barrier.offset, true);
    }
    let inv_z = z.recip();
    let a = y[0] * inv_z;
    let b = y[1] * inv_z;
    let inv_f = dst.f.recip();
    let mx = inv_f * (to[0] - dst.c[0]);
    let my = inv_f * (to[1] - dst.c[1]);
    let ex = a - mx;
    let ey = b - my;
    let term = match cfg.mode {
        Mode::Proba if radius.len() == 1 => {
            let log_sigma = radius[0];
            let det_a = a * a + b * b + 1.0;
            let quad = ((b * b + 1.0) * ex * ex - a * b * ex * ey * 2.0 + (a * a + 1.0) * ey * ey) / det_a;
            let var = (log_sigma * 2.0).exp();
            z * z * quad / (var * 2.0) + dst.f.ln() * 2.0 + log_sigma * 2.0 - z.ln() * 2.0
                + det_a.ln() * 0.5
        }
        Mode::Proba => {
            // Σ_img = (f²/Z²) S with S = J₀ Σ_dst J₀ᵀ, J₀ = [[1,0,−a],[0,1,−b]].
            let m = mat_mat_t(&dst.r, &src.r);
            let body = anisotropic_covariance(radius);
            let s3 = congruence(&m, &body);
            let s00 = s3[0][0] - a * s3[0][2] * 2.0 + a * a * s3[2][2];
            let s11 = s3[1][1] - b * s3[1][2] * 2.0 + b * b * s3[2][2];
            let s01 = s3[0][1] - a * s3[1][2] - b * s3[0][2] + a * b * s3[2][2];
            let det = s00 * s11 - s01 * s01;
            let quad = (s11 * ex * ex - s01 * ex * ey * 2.0 + s00 * ey * ey) / det;
            z * z * quad * 0.5 + det.ln() * 0.5 + dst.f.ln() * 2.0 - z.ln() * 2.0
        }
        Mode::Ba => (ex * ex + ey * ey) * dst.f.square() * 0.5,
        Mode::Pose => {
            let ox = y[0] - z * mx;
            let oy = y[1] - z * my;
            let f2 = dst.f.square();
            // Affine part: P₁:₂X − m with P = K[R|t] acting on (world point, 1).
            let ux = dst.f * y[0] + z * dst.c[0] - to[0];
            let uy = dst.f * y[1] + z * dst.c[1] - to[1];
            ((ox * ox + oy * oy) * f2 * (1.0 - cfg.eta) + (ux * ux + uy * uy) * cfg.eta) * 0.5
        }
        Mode::Expose => {
            let ox = y[0] - z * mx;
            let oy = y[1] - z * my;
            let f2 = dst.f.square();
            let weight = (z / -cfg.zeta).exp();
            ((ox * ox + oy * oy) * weight + (ex * ex + ey * ey) * cfg.eta) * f2 * 0.5
        }
    };
    (term, false)
}

/// `A Bᵀ` for 3×3 matrices.
fn mat_mat_t<T: Real>(a: &[[T; 3]; 3], b: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut out = [[T::cst(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[j][0] + a[i][1] * b[j][1] + a[i][2] * b[j][2];
        }
    }
    out
}

/// Negative squared overlap of the two endpoint Gaussians.
fn overlap_term<T: Real>(
    cfg: &LossConfig,
    ci: &Cam<T>,
    cj: &Cam<T>,
    p: [f64; 2],
    q: [f64; 2],
    log_depths: [T; 2],
    rad_p: &[T],
    rad_q: &[T],
) -> T {
    let mp = lift(ci, p, log_depths[0]);
    let mq = lift(cj, q, log_depths[1]);
    let delta = [mp[0] - mq[0], mp[1] - mq[1], mp[2] - mq[2]];
    let distance = if rad_p.len() == 1 {
        let dist2 = delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2];
        let vp = (rad_p[0] * 2.0).exp();
        let vq = (rad_q[0] * 2.0).exp();
        isotropic_distance(dist2, vp, vq, cfg.bc_variant)
    } else {
        let sp = world_covariance(ci, rad_p);
        let sq = world_covariance(cj, rad_q);
        general_distance(delta, &sp, &sq, cfg.bc_variant)
    };
    -(distance * -2.0).exp()
}

/// All loss contributions of one correspondence, unweighted.
#[allow(clippy::too_many_arguments)]
pub(crate) fn correspondence_terms<T: Real>(
    cfg: &LossConfig,
    ci: &Cam<T>,
    cj: &Cam<T>,
    p: [f64; 2],
    q: [f64; 2],
    log_depths: [T; 2],
    rad_p: &[T],
    rad_q: &[T],
) -> Terms<T> {
    let (mut reproj, hit) = directed_term(cfg, ci, cj, p, q, log_depths[0], rad_p);
    let mut skipped = hit as usize;
    if cfg.symmetric {
        let (back, hit) = directed_term(cfg, cj, ci, q, p, log_depths[1], rad_q);
        reproj = reproj + back;
        skipped += hit as usize;
    }
    let bha = if cfg.mode == Mode::Proba && cfg.lambda != 0.0 {
        overlap_term(cfg, ci, cj, p, q, log_depths, rad_p, rad_q)
    } else {
        T::cst(0.0)
    };
    Terms {
        reproj,
        bha,
        skipped,
    }
}

pub(crate) fn weight(cfg: &LossConfig, confidence: f64) -> f64 {
    if cfg.use_confidence {
        confidence
    } else {
        1.0
    }
}

pub(crate) fn cams(problem: &SceneProblem, params: &Params) -> Vec<Cam<f64>> {
    (0..problem.frames.len())
        .map(|k| Cam::from_params(problem, params, k))
        .collect()
}

fn pixel(v: &Vector2<f64>) -> [f64; 2] {
    [v.x, v.y]
}

/// Per-chunk sums `(reproj, bha, skipped)` and optional per-correspondence
/// terms.
fn chunk_sums(
    problem: &SceneProblem,
    params: &Params,
    cfg: &LossConfig,
    cams: &[Cam<f64>],
    range: std::ops::Range<usize>,
    terms: Option<&mut Vec<[f64; 2]>>,
) -> (f64, f64, usize) {
    let w = params.layout.radius_width();
    let mut out = (0.0, 0.0, 0);
    let mut terms = terms;
    for k in range {
        let c = &problem.correspondences[k];
        let rp = &params.radii[2 * k * w..(2 * k + 1) * w];
        let rq = &params.radii[(2 * k + 1) * w..(2 * k + 2) * w];
        let t = correspondence_terms(
            cfg,
            &cams[c.frame_i],
            &cams[c.frame_j],
            pixel(&c.p),
            pixel(&c.q),
            [params.log_depths[2 * k], params.log_depths[2 * k + 1]],
            rp,
            rq,
        );
        let wt = weight(cfg, c.confidence);
        out.0 += wt * t.reproj;
        out.1 += wt * t.bha;
        out.2 += t.skipped;
        if let Some(v) = terms.as_deref_mut() {
            v.push([wt * t.reproj, wt * t.bha]);
        }
    }
    out
}

fn report(
    problem: &SceneProblem,
    params: &Params,
    cfg: &LossConfig,
    keep_terms: bool,
) -> Result<LossReport> {
    let cams = cams(problem, params);
    let n = problem.correspondences.len();
    let mut terms = keep_terms.then(|| Vec::with_capacity(n));
    let (mut reproj, mut bha, mut skipped) = (0.0, 0.0, 0);
    for start in (0..n).step_by(CHUNK) {
        let (r, b, s) = chunk_sums(
            problem,
            params,
            cfg,
            &cams,
            start..(start + CHUNK).min(n),
            terms.as_mut(),
        );
        reproj += r;
        bha += b;
        skipped += s;
    }
    let total = reproj + cfg.lambda * bha;
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(LossReport {
        total,
        reproj,
        bha,
        per_correspondence: terms,
        skipped,
    })
}

/// The objective selected by `cfg.mode`.
pub fn total_loss(problem: &SceneProblem, params: &Params, cfg: &LossConfig) -> Result<LossReport> {
    report(problem, params, cfg, false)
}

/// As [`total_loss`], also returning per-correspondence contributions.
pub fn total_loss_detailed(
    problem: &SceneProblem,
    params: &Params,
    cfg: &LossConfig,
) -> Result<LossReport> {
    report(problem, params, cfg, true)
}

pub fn classical_ba_loss(problem: &SceneProblem, params: &Params, cfg: &LossConfig) -> Result<f64> {
    Ok(total_loss(problem, params, &cfg.with_mode(Mode::Ba))?.total)
}

pub fn pose_baseline_loss(problem: &SceneProblem, params: &Params, cfg: &LossConfig) -> Result<f64> {
    Ok(total_loss(problem, params, &cfg.with_mode(Mode::Pose))?.total)
}

pub fn expose_baseline_loss(
    problem: &SceneProblem,
    params: &Params,
    cfg: &LossConfig,
) -> Result<f64> {
    Ok(total_loss(problem, params, &cfg.with_mode(Mode::Expose))?.total)
}

/// A reprojection into camera `dst` of a point already expressed in that
/// camera's frame.
#[derive(Clone, Copy, Debug)]
pub struct Reprojection {
    pub intrinsics: Intrinsics,
    pub point: Vector3<f64>,
    pub observed: Vector2<f64>,
}

/// Image-space likelihood term built from explicit matrices:
/// `(½ rᵀΣ⁻¹r, ½ log det Σ)` with `Σ` the propagated covariance at the
/// reprojected point. `covariance` is the point covariance in the camera
/// frame.
pub fn likelihood_parts(rep: &Reprojection, covariance: &Matrix3<f64>) -> Result<(f64, f64)> {
    let k = &rep.intrinsics;
    let y = rep.point;
    let predicted = crate::geometry::project(k, &y)?;
    let r = predicted - rep.observed;
    let f = k.focal();
    let jac = nalgebra::Matrix2x3::new(
        f / y.z,
        0.0,
        -f * y.x / (y.z * y.z),
        0.0,
        f / y.z,
        -f * y.y / (y.z * y.z),
    );
    let sigma = jac * covariance * jac.transpose();
    let inv = sigma.try_inverse().ok_or(Error::SingularCovariance)?;
    let det = sigma.determinant();
    if !(det > 0.0) {
        return Err(Error::SingularCovariance);
    }
    Ok((0.5 * r.dot(&(inv * r)), 0.5 * det.ln()))
}

/// The same term for an isotropic radius, via [`projected_covariance`].
pub fn likelihood_term(rep: &Reprojection, sigma: f64) -> Result<f64> {
    let cov = projected_covariance(&rep.intrinsics, &rep.point, sigma)?;
    let r = crate::geometry::project(&rep.intrinsics, &rep.point)? - rep.observed;
    let inv: Matrix2<f64> = cov.try_inverse().ok_or(Error::SingularCovariance)?;
    Ok(0.5 * r.dot(&(inv * r)) + 0.5 * cov.determinant().ln())
}

/// The object-space rewrite of [`likelihood_term`]:
/// `Z²/(2f²σ²)·rᵀA⁻¹r + 2 log(fσ) + ½ log det A − 2 log Z`.
pub fn object_space_term(rep: &Reprojection, sigma: f64) -> Result<f64> {
    let y = rep.point;
    let a = propagation_matrix(&y)?;
    let f = rep.intrinsics.focal();
    let r = crate::geometry::project(&rep.intrinsics, &y)? - rep.observed;
    let a_inv = a.try_inverse().ok_or(Error::SingularCovariance)?;
    let scale = y.z * y.z / (2.0 * f * f * sigma * sigma);
    Ok(scale * r.dot(&(a_inv * r)) + 2.0 * (f * sigma).ln() + 0.5 * a.determinant().ln()
        - 2.0 * y.z.ln())
}

enum Residual {
    Barrier { z: f64 },
    Isotropic(Reprojection, f64),
    Full(Reprojection, Matrix3<f64>),
}

/// Every residual of the problem as a camera-frame reprojection, with its
/// weight. Anisotropic shapes are rotated from the source camera into the
/// target camera.
fn residuals(problem: &SceneProblem, params: &Params, cfg: &LossConfig) -> Result<Vec<(f64, Residual)>> {
    let mut out = Vec::new();
    for (k, c) in problem.correspondences.iter().enumerate() {
        let wt = weight(cfg, c.confidence);
        let mut dirs = vec![(c.frame_i, c.frame_j, c.p, c.q, Endpoint::P)];
        if cfg.symmetric {
            dirs.push((c.frame_j, c.frame_i, c.q, c.p, Endpoint::Q));
        }
        for (src, dst, from, to, end) in dirs {
            let ks = problem.intrinsics(params, src);
            let x = backproject(&ks, &from, params.depth(k, end))?;
            let world = params.poses[src].inverse().apply(&x);
            let y = params.poses[dst].apply(&world);
            if y.z <= DEPTH_FLOOR {
                out.push((wt, Residual::Barrier { z: y.z }));
                continue;
            }
            let rep = Reprojection {
                intrinsics: problem.intrinsics(params, dst),
                point: y,
                observed: to,
            };
            let residual = match params.radius(k, end) {
                Radius::Isotropic(sigma) => Residual::Isotropic(rep, sigma),
                Radius::Anisotropic(a) => {
                    let m = params.poses[dst].matrix() * params.poses[src].matrix().transpose();
                    Residual::Full(rep, m * realize_covariance(&a) * m.transpose())
                }
            };
            out.push((wt, residual));
        }
    }
    Ok(out)
}

fn barrier_value(cfg: &LossConfig, z: f64) -> f64 {
    cfg.barrier.offset + cfg.barrier.weight * (DEPTH_FLOOR - z).powi(2)
}

/// Reprojection likelihood assembled from explicit image-plane covariance
/// matrices. Reported as `reproj`; `bha` is zero.
pub fn reproj_nll(problem: &SceneProblem, params: &Params, cfg: &LossConfig) -> Result<LossReport> {
    let mut reproj = 0.0;
    let mut skipped = 0;
    for (wt, residual) in residuals(problem, params, cfg)? {
        reproj += wt * match residual {
            Residual::Barrier { z } => {
                skipped += 1;
                barrier_value(cfg, z)
            }
            Residual::Isotropic(rep, sigma) => likelihood_term(&rep, sigma)?,
            Residual::Full(rep, cov) => {
                let (m, l) = likelihood_parts(&rep, &cov)?;
                m + l
            }
        };
    }
    if !reproj.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(LossReport {
        total: reproj,
        reproj,
        bha: 0.0,
        per_correspondence: None,
        skipped,
    })
}

/// The same sum through the object-space rewrite (isotropic radii only).
pub fn reproj_object_space(problem: &SceneProblem, params: &Params, cfg: &LossConfig) -> Result<f64> {
    let mut total = 0.0;
    for (wt, residual) in residuals(problem, params, cfg)? {
        total += wt * match residual {
            Residual::Barrier { z } => barrier_value(cfg, z),
            Residual::Isotropic(rep, sigma) => object_space_term(&rep, sigma)?,
            Residual::Full(..) => {
                return Err(Error::Invalid(
                    "the object-space form is defined for isotropic radii".into(),
                ))
            }
        };
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(total)
}

/// Sum of `−BC²` over correspondences, from explicit world Gaussians.
pub fn bha_loss(problem: &SceneProblem, params: &Params, cfg: &LossConfig) -> Result<f64> {
    let mut total = 0.0;
    for (k, c) in problem.correspondences.iter().enumerate() {
        let gp = world_gaussian(
            &problem.intrinsics(params, c.frame_i),
            &params.poses[c.frame_i],
            &c.p,
            params.depth(k, Endpoint::P),
            &params.radius(k, Endpoint::P),
        )?;
        let gq = world_gaussian(
            &problem.intrinsics(params, c.frame_j),
            &params.poses[c.frame_j],
            &c.q,
            params.depth(k, Endpoint::Q),
            &params.radius(k, Endpoint::Q),
        )?;
        let bc = bhattacharyya_coefficient_with(&gp, &gq, cfg.bc_variant)?;
        total -= weight(cfg, c.confidence) * bc * bc;
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(total)
}
