//! Synthetic scenes with known cameras, structure and matches.

use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, Intrinsics, Pose};
use crate::problem::{Correspondence, Frame, Params, SceneProblem, INIT_SIGMA};

/// Minimum correspondences touching each frame.
pub const MIN_FRAME_MATCHES: usize = 8;
const MAX_POINT_DRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rig {
    /// Cameras on a horizontal arc around the scene, looking at its centre.
    #[default]
    Orbit,
    /// Cameras advancing towards the scene along the optical axis.
    ForwardWalk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_frames: usize,
    pub n_points: usize,
    pub fov_gt: f64,
    pub width: f64,
    pub height: f64,
    pub rig: Rig,
    /// Orbit: total arc in degrees. Forward walk: path length in scene units.
    pub baseline: f64,
    /// Camera distance from the scene centre.
    pub distance: f64,
    /// Orbit: height of the camera circle above the scene centre, degrees.
    /// Forward walk: cameras alternate between this angle above and below
    /// the walking line.
    pub elevation: f64,
    pub pixel_noise_std: f64,
    pub outlier_rate: f64,
    /// Largest outlier displacement, pixels.
    pub outlier_radius: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_frames: 5,
            n_points: 200,
            fov_gt: 60.0,
            width: 640.0,
            height: 480.0,
            rig: Rig::Orbit,
            baseline: 30.0,
            distance: 2.0,
            elevation: 15.0,
            pixel_noise_std: 1.0,
            outlier_rate: 0.05,
            outlier_radius: 50.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::Invalid("need at least 2 frames".into()));
        }
        if self.n_points < 8 {
            return Err(Error::Invalid("need at least 8 points".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(Error::OutOfRange {
                what: "outlier_rate",
                value: self.outlier_rate,
                range: "[0, 1)",
            });
        }
        if !(self.pixel_noise_std >= 0.0 && self.outlier_radius >= 0.0) {
            return Err(Error::Invalid("noise magnitudes must be non-negative".into()));
        }
        if !(self.distance > 0.0) {
            return Err(Error::Invalid("camera distance must be positive".into()));
        }
        Intrinsics::new(self.fov_gt, self.width, self.height).map(|_| ())
    }
}

/// A generated scene with its ground truth.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub problem: SceneProblem,
    pub gt_poses: Vec<Pose>,
    pub gt_fov: f64,
    /// Ground-truth parameter block: true poses, fov and endpoint depths,
    /// radii at their initial value.
    pub gt_params: Params,
    pub points: Vec<Vector3<f64>>,
    /// Indices of correspondences replaced by outliers.
    pub outliers: Vec<usize>,
}

/// World-to-camera pose of a camera at `center` looking at `target`, image
/// y axis pointing along world +y.
pub fn look_at(center: Vector3<f64>, target: Vector3<f64>) -> Pose {
    let z = (target - center).normalize();
    let x = Vector3::y().cross(&z).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    Pose::from_matrix(&r, -(r * center))
}

fn rig_poses(cfg: &SynthConfig) -> Vec<Pose> {
    let n = cfg.n_frames;
    (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64 - 0.5;
            let center = match cfg.rig {
                Rig::Orbit => {
                    let theta = (cfg.baseline * s).to_radians();
                    let e = cfg.elevation.to_radians();
                    cfg.distance
                        * Vector3::new(e.cos() * theta.sin(), -e.sin(), -e.cos() * theta.cos())
                }
                Rig::ForwardWalk => {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let lift = cfg.distance * (sign * cfg.elevation).to_radians().tan();
                    Vector3::new(0.0, -lift, -cfg.distance + cfg.baseline * s)
                }
            };
            look_at(center, Vector3::zeros())
        })
        .collect()
}

fn observe(k: &Intrinsics, pose: &Pose, x: &Vector3<f64>) -> Option<(Vector2<f64>, f64)> {
    let y = pose.apply(x);
    if y.z < 0.05 {
        return None;
    }
    let p = project(k, &y).ok()?;
    (p.x >= 0.0 && p.x < k.width && p.y >= 0.0 && p.y < k.height).then_some((p, y.z))
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = Intrinsics::new(cfg.fov_gt, cfg.width, cfg.height)?;
    let poses = rig_poses(cfg);

    let mut points = Vec::with_capacity(cfg.n_points);
    let mut draws = 0;
    while points.len() < cfg.n_points {
        draws += 1;
        if draws > MAX_POINT_DRAWS * cfg.n_points {
            return Err(Error::Invalid(
                "could not place points visible in two frames".into(),
            ));
        }
        let x = Vector3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        );
        if poses.iter().filter(|p| observe(&k, p, &x).is_some()).count() >= 2 {
            points.push(x);
        }
    }

    let noise = Normal::new(0.0, cfg.pixel_noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let jitter = |rng: &mut ChaCha8Rng| {
        if cfg.pixel_noise_std > 0.0 {
            Vector2::new(noise.sample(rng), noise.sample(rng))
        } else {
            Vector2::zeros()
        }
    };
    let mut corrs = Vec::new();
    let mut depths = Vec::new();
    for a in 0..cfg.n_frames {
        for b in a + 1..cfg.n_frames {
            for x in &points {
                let (Some((p, dp)), Some((q, dq))) =
                    (observe(&k, &poses[a], x), observe(&k, &poses[b], x))
                else {
                    continue;
                };
                let p = p + jitter(&mut rng);
                let q = q + jitter(&mut rng);
                corrs.push(Correspondence {
                    frame_i: a,
                    frame_j: b,
                    p,
                    q,
                    confidence: 1.0,
                });
                depths.extend([dp.ln(), dq.ln()]);
            }
        }
    }

    let n_out = (cfg.outlier_rate * corrs.len() as f64).round() as usize;
    let mut outliers = sample(&mut rng, corrs.len(), n_out).into_vec();
    outliers.sort_unstable();
    for &o in &outliers {
        let dir: [f64; 2] = {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            [angle.cos(), angle.sin()]
        };
        let mag = cfg.outlier_radius * (1.0 - rng.random::<f64>());
        corrs[o].q += Vector2::new(dir[0], dir[1]) * mag;
    }

    for f in 0..cfg.n_frames {
        let count = corrs
            .iter()
            .filter(|c| c.frame_i == f || c.frame_j == f)
            .count();
        if count < MIN_FRAME_MATCHES {
            return Err(Error::DegenerateScene { frame: f, count });
        }
    }

    let frames = (0..cfg.n_frames)
        .map(|id| Frame {
            id,
            width: cfg.width,
            height: cfg.height,
            gt_pose: Some(poses[id]),
            gt_fov: Some(cfg.fov_gt),
        })
        .collect();
    let problem = SceneProblem::new(frames, corrs)?;
    let mut gt_params = problem.initialize(0);
    gt_params.poses = poses.clone();
    gt_params.fovs = vec![cfg.fov_gt];
    gt_params.log_depths = depths;
    gt_params.radii.iter_mut().for_each(|r| *r = INIT_SIGMA.ln());
    Ok(SyntheticScene {
        problem,
        gt_poses: poses,
        gt_fov: cfg.fov_gt,
        gt_params,
        points,
        outliers,
    })
}

/// Perturbs each pose by a rotation of at most `pose_noise_deg` and a
/// translation offset of at most `pose_noise_deg` (in radians) times its
/// length, and each depth by a relative factor in `±depth_noise_rel`.
pub fn perturb_gt(params: &Params, pose_noise_deg: f64, depth_noise_rel: f64, seed: u64) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = params.clone();
    if pose_noise_deg > 0.0 {
        let max = pose_noise_deg.to_radians();
        for pose in &mut out.poses {
            let axis: [f64; 3] = UnitSphere.sample(&mut rng);
            let angle = rng.random_range(0.0..=max);
            let delta = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle);
            let r = delta.matrix() * pose.matrix();
            let dir: [f64; 3] = UnitSphere.sample(&mut rng);
            let shift = Vector3::from(dir) * (rng.random_range(0.0..=max) * pose.translation.norm());
            *pose = Pose::from_matrix(&r, pose.translation + shift);
        }
    }
    if depth_noise_rel > 0.0 {
        for d in &mut out.log_depths {
            *d += (1.0 + rng.random_range(-depth_noise_rel..=depth_noise_rel)).ln();
        }
    }
    out
}
