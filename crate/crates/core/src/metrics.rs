//! Relative-pose accuracy and field-of-view error.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

pub const THRESHOLDS: [f64; 3] = [5.0, 10.0, 15.0];

/// Ground-truth relative translations shorter than this count as pure
/// rotations and score a zero translation error.
pub const MIN_TRANSLATION: f64 = 1e-9;

/// Angular errors of one frame pair, in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub i: usize,
    pub j: usize,
    pub rot_err: f64,
    pub trans_err: f64,
}

/// Percentages at 5°, 10° and 15°, plus the field-of-view error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub rra: [f64; 3],
    pub rta: [f64; 3],
    pub maa: [f64; 3],
    pub fov_error: f64,
}

impl MetricSummary {
    /// Values at the 10° threshold.
    pub fn maa10(&self) -> f64 {
        self.maa[1]
    }
}

/// Rotation angle of `R`, via atan2 so that small angles keep full precision.
fn rotation_angle_deg(r: &Matrix3<f64>) -> f64 {
    let sin = 0.5
        * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    let cos = 0.5 * (r.trace() - 1.0);
    sin.atan2(cos).to_degrees()
}

/// Angle between two directions. A zero-length estimate scores 90°.
fn direction_error(est: &Vector3<f64>, gt: &Vector3<f64>) -> f64 {
    let (ne, ng) = (est.norm(), gt.norm());
    if ng < MIN_TRANSLATION {
        return 0.0;
    }
    if ne < MIN_TRANSLATION {
        return 90.0;
    }
    est.cross(gt).norm().atan2(est.dot(gt)).to_degrees()
}

/// Errors for every unordered frame pair.
pub fn relative_pose_errors(est: &[Pose], gt: &[Pose]) -> Result<Vec<PairError>> {
    if gt.len() < 2 {
        return Err(Error::MissingGroundTruth);
    }
    if est.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated poses against {} ground-truth poses",
            est.len(),
            gt.len()
        )));
    }
    let rel = |poses: &[Pose], i: usize, j: usize| {
        let ri = poses[i].matrix();
        let rj = poses[j].matrix();
        let r = rj * ri.transpose();
        (r, poses[j].translation - r * poses[i].translation)
    };
    let mut out = Vec::with_capacity(gt.len() * (gt.len() - 1) / 2);
    for i in 0..gt.len() {
        for j in i + 1..gt.len() {
            let (re, te) = rel(est, i, j);
            let (rg, tg) = rel(gt, i, j);
            let rot_err = rotation_angle_deg(&(re.transpose() * rg));
            out.push(PairError {
                i,
                j,
                rot_err,
                trans_err: direction_error(&te, &tg),
            });
        }
    }
    Ok(out)
}

fn percent(errors: &[PairError], pass: impl Fn(&PairError) -> bool) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    100.0 * errors.iter().filter(|e| pass(e)).count() as f64 / errors.len() as f64
}

/// `(RRA, RTA, mAA)` at threshold `tau`; mAA counts pairs where both
/// errors are under `tau`.
pub fn accuracy_at(errors: &[PairError], tau: f64) -> (f64, f64, f64) {
    (
        percent(errors, |e| e.rot_err < tau),
        percent(errors, |e| e.trans_err < tau),
        percent(errors, |e| e.rot_err.max(e.trans_err) < tau),
    )
}

pub fn fov_error(est: f64, gt: f64) -> f64 {
    (est - gt).abs()
}

pub fn summarize(errors: &[PairError], est_fov: f64, gt_fov: f64) -> MetricSummary {
    let mut s = MetricSummary {
        fov_error: fov_error(est_fov, gt_fov),
        ..Default::default()
    };
    for (k, tau) in THRESHOLDS.iter().enumerate() {
        (s.rra[k], s.rta[k], s.maa[k]) = accuracy_at(errors, *tau);
    }
    s
}

/// Convenience wrapper: pose errors plus summary.
pub fn evaluate(est: &[Pose], gt: &[Pose], est_fov: f64, gt_fov: f64) -> Result<MetricSummary> {
    Ok(summarize(&relative_pose_errors(est, gt)?, est_fov, gt_fov))
}
