//! Frames, correspondences and the packed parameter vector.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pose};
use crate::uncertainty::{AnisotropicRadius, Radius};

pub const INIT_FOV: f64 = 60.0;
pub const INIT_SIGMA: f64 = 0.1;
pub const INIT_DEPTH_MEAN: f64 = 1.0;
pub const INIT_DEPTH_STD: f64 = 0.5;
pub const INIT_DEPTH_MIN: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub id: usize,
    pub width: f64,
    pub height: f64,
    pub gt_pose: Option<Pose>,
    pub gt_fov: Option<f64>,
}

/// A matched pixel pair: `p` in frame `frame_i`, `q` in frame `frame_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence {
    pub frame_i: usize,
    pub frame_j: usize,
    pub p: Vector2<f64>,
    pub q: Vector2<f64>,
    pub confidence: f64,
}

/// Which end of a correspondence a depth or radius belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    P = 0,
    Q = 1,
}

/// Parameter groups, each with its own learning rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Pose,
    Fov,
    Depth,
    Radius,
}

/// Offsets of each group in the flat vector:
/// `[poses 6F][fov 1 or F][log-depths 2C][radii 2C or 12C]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n_frames: usize,
    pub n_correspondences: usize,
    pub per_frame_fov: bool,
    pub anisotropic: bool,
}

impl Layout {
    pub fn n_fov(&self) -> usize {
        if self.per_frame_fov {
            self.n_frames
        } else {
            1
        }
    }

    /// Scalars per endpoint radius.
    pub fn radius_width(&self) -> usize {
        if self.anisotropic {
            6
        } else {
            1
        }
    }

    pub fn fov_offset(&self) -> usize {
        6 * self.n_frames
    }

    pub fn depth_offset(&self) -> usize {
        self.fov_offset() + self.n_fov()
    }

    pub fn radius_offset(&self) -> usize {
        self.depth_offset() + 2 * self.n_correspondences
    }

    pub fn len(&self) -> usize {
        self.radius_offset() + 2 * self.n_correspondences * self.radius_width()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fov_index(&self, frame: usize) -> usize {
        self.fov_offset() + if self.per_frame_fov { frame } else { 0 }
    }

    pub fn depth_index(&self, corr: usize, end: Endpoint) -> usize {
        self.depth_offset() + 2 * corr + end as usize
    }

    pub fn radius_index(&self, corr: usize, end: Endpoint) -> usize {
        self.radius_offset() + (2 * corr + end as usize) * self.radius_width()
    }

    /// Group tag of every coordinate, in order.
    pub fn tags(&self) -> Vec<Group> {
        let mut tags = Vec::with_capacity(self.len());
        tags.resize(self.fov_offset(), Group::Pose);
        tags.resize(self.depth_offset(), Group::Fov);
        tags.resize(self.radius_offset(), Group::Depth);
        tags.resize(self.len(), Group::Radius);
        tags
    }

    pub fn unpack(&self, flat: &[f64]) -> Result<Params> {
        if flat.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: flat.len(),
            });
        }
        let poses = flat[..self.fov_offset()]
            .chunks_exact(6)
            .map(|c| Pose::new(Vector3::new(c[0], c[1], c[2]), Vector3::new(c[3], c[4], c[5])))
            .collect();
        Ok(Params {
            layout: *self,
            poses,
            fovs: flat[self.fov_offset()..self.depth_offset()].to_vec(),
            log_depths: flat[self.depth_offset()..self.radius_offset()].to_vec(),
            radii: flat[self.radius_offset()..].to_vec(),
        })
    }
}

/// Decoded parameters. Depths are stored as logs, radii as log σ (or
/// `[rotation(3), log σ(3)]` per endpoint when anisotropic).
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub layout: Layout,
    pub poses: Vec<Pose>,
    pub fovs: Vec<f64>,
    pub log_depths: Vec<f64>,
    pub radii: Vec<f64>,
}

impl Params {
    pub fn pack(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.layout.len());
        for pose in &self.poses {
            flat.extend(pose.rotation.iter().chain(pose.translation.iter()));
        }
        flat.extend(&self.fovs);
        flat.extend(&self.log_depths);
        flat.extend(&self.radii);
        flat
    }

    pub fn fov(&self, frame: usize) -> f64 {
        if self.layout.per_frame_fov {
            self.fovs[frame]
        } else {
            self.fovs[0]
        }
    }

    pub fn depth(&self, corr: usize, end: Endpoint) -> f64 {
        self.log_depths[2 * corr + end as usize].exp()
    }

    pub fn radius(&self, corr: usize, end: Endpoint) -> Radius {
        let w = self.layout.radius_width();
        let at = (2 * corr + end as usize) * w;
        let r = &self.radii[at..at + w];
        if self.layout.anisotropic {
            Radius::Anisotropic(AnisotropicRadius {
                rotation: Vector3::new(r[0], r[1], r[2]),
                log_sigmas: Vector3::new(r[3], r[4], r[5]),
            })
        } else {
            Radius::Isotropic(r[0].exp())
        }
    }
}

/// The set of frames and correspondences to adjust.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneProblem {
    pub frames: Vec<Frame>,
    pub correspondences: Vec<Correspondence>,
    pub per_frame_fov: bool,
    pub anisotropic: bool,
}

impl SceneProblem {
    pub fn new(frames: Vec<Frame>, correspondences: Vec<Correspondence>) -> Result<SceneProblem> {
        if correspondences.is_empty() {
            return Err(Error::Invalid("scene has no correspondences".into()));
        }
        for (k, f) in frames.iter().enumerate() {
            if f.id != k {
                return Err(Error::Invalid(format!(
                    "frame ids must be dense 0..F-1; position {k} has id {}",
                    f.id
                )));
            }
            if !(f.width > 0.0 && f.height > 0.0) {
                return Err(Error::Invalid(format!("frame {k} has a non-positive size")));
            }
        }
        for (k, c) in correspondences.iter().enumerate() {
            if c.frame_i >= frames.len() || c.frame_j >= frames.len() {
                return Err(Error::Invalid(format!(
                    "correspondence {k} references a missing frame ({}, {})",
                    c.frame_i, c.frame_j
                )));
            }
            if c.frame_i == c.frame_j {
                return Err(Error::Invalid(format!(
                    "correspondence {k} links frame {} to itself",
                    c.frame_i
                )));
            }
        }
        Ok(SceneProblem {
            frames,
            correspondences,
            per_frame_fov: false,
            anisotropic: false,
        })
    }

    pub fn with_anisotropic(mut self, on: bool) -> Self {
        self.anisotropic = on;
        self
    }

    pub fn with_per_frame_fov(mut self, on: bool) -> Self {
        self.per_frame_fov = on;
        self
    }

    pub fn layout(&self) -> Layout {
        Layout {
            n_frames: self.frames.len(),
            n_correspondences: self.correspondences.len(),
            per_frame_fov: self.per_frame_fov,
            anisotropic: self.anisotropic,
        }
    }

    pub fn intrinsics(&self, params: &Params, frame: usize) -> Intrinsics {
        let f = &self.frames[frame];
        Intrinsics {
            fov: params.fov(frame),
            width: f.width,
            height: f.height,
        }
    }

    /// Identity poses, random depths around 1, σ = 0.1, fov = 60°.
    pub fn initialize(&self, seed: u64) -> Params {
        let layout = self.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(INIT_DEPTH_MEAN, INIT_DEPTH_STD).expect("valid normal");
        let log_depths = (0..2 * layout.n_correspondences)
            .map(|_| normal.sample(&mut rng).max(INIT_DEPTH_MIN).ln())
            .collect();
        let log_sigma = INIT_SIGMA.ln();
        let radii = if layout.anisotropic {
            (0..2 * layout.n_correspondences)
                .flat_map(|_| [0.0, 0.0, 0.0, log_sigma, log_sigma, log_sigma])
                .collect()
        } else {
            vec![log_sigma; 2 * layout.n_correspondences]
        };
        Params {
            layout,
            poses: vec![Pose::identity(); layout.n_frames],
            fovs: vec![INIT_FOV; layout.n_fov()],
            log_depths,
            radii,
        }
    }

    /// Ground-truth poses of every frame, if all are present.
    pub fn gt_poses(&self) -> Option<Vec<Pose>> {
        self.frames.iter().map(|f| f.gt_pose).collect()
    }

    pub fn gt_fov(&self) -> Option<f64> {
        self.frames.iter().find_map(|f| f.gt_fov)
    }

    /// Restricts the scene to the given frames (renumbered in order) and
    /// the correspondences between them.
    pub fn subset(&self, frames: &[usize]) -> Result<SceneProblem> {
        let mut remap = vec![None; self.frames.len()];
        let mut kept = Vec::with_capacity(frames.len());
        for (new, &old) in frames.iter().enumerate() {
            let f = self.frames.get(old).ok_or_else(|| {
                Error::Invalid(format!("frame {old} is not in the scene"))
            })?;
            remap[old] = Some(new);
            kept.push(Frame { id: new, ..f.clone() });
        }
        let corrs = self
            .correspondences
            .iter()
            .filter_map(|c| {
                Some(Correspondence {
                    frame_i: remap[c.frame_i]?,
                    frame_j: remap[c.frame_j]?,
                    ..c.clone()
                })
            })
            .collect();
        Ok(SceneProblem::new(kept, corrs)?
            .with_anisotropic(self.anisotropic)
            .with_per_frame_fov(self.per_frame_fov))
    }
}
