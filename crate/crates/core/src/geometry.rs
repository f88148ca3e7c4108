//! Pinhole camera, rigid transforms and first-order uncertainty propagation.

use nalgebra::{Matrix2, Matrix3, Rotation3, Vector2, Vector3};

use crate::ad::Real;
use crate::error::{Error, Result};

/// Points at or closer than this to the camera plane are rejected.
pub const DEPTH_FLOOR: f64 = 1e-6;

/// World-to-camera rigid transform with an axis-angle rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Pose {
        Pose {
            rotation: Vector3::zeros(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Pose {
        Pose {
            rotation,
            translation,
        }
    }

    /// Builds a pose from a rotation matrix, which must be orthonormal.
    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Pose {
        let r = Rotation3::from_matrix_unchecked(*rotation);
        Pose::new(r.scaled_axis(), translation)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        rotation_matrix(&self.rotation)
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.matrix() * x + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        let r = self.matrix();
        Pose::from_matrix(
            &(r * other.matrix()),
            r * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.matrix().transpose();
        Pose::new(-self.rotation, -(rt * self.translation))
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.matrix().transpose() * self.translation)
    }

    /// Relative transform taking camera-`from` coordinates to camera-`to`
    /// coordinates for two world-to-camera poses.
    pub fn relative(from: &Pose, to: &Pose) -> Pose {
        to.compose(&from.inverse())
    }
}

/// Rodrigues map from an axis-angle vector to a rotation matrix.
/// Ill-conditioned as the angle approaches π.
pub fn rotation_matrix(rotation: &Vector3<f64>) -> Matrix3<f64> {
    let r = rodrigues([rotation.x, rotation.y, rotation.z]);
    Matrix3::from_fn(|a, b| r[a][b])
}

/// Rodrigues map usable with any [`Real`]. Small angles use a Taylor
/// expansion so derivatives stay exact at the origin.
pub fn rodrigues<T: Real>(w: [T; 3]) -> [[T; 3]; 3] {
    let theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let (a, b) = if theta2.value() < 1e-8 {
        (
            -theta2 / 6.0 + 1.0,
            -theta2 / 24.0 + 0.5,
        )
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (-theta.cos() + 1.0) / theta2)
    };
    let k = [
        [T::cst(0.0), -w[2], w[1]],
        [w[2], T::cst(0.0), -w[0]],
        [-w[1], w[0], T::cst(0.0)],
    ];
    let mut r = [[T::cst(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // (K²)_ij = w_i w_j − θ² δ_ij
            let mut k2 = w[i] * w[j];
            if i == j {
                k2 = k2 - theta2;
            }
            let mut v = k[i][j] * a + k2 * b;
            if i == j {
                v = v + 1.0;
            }
            r[i][j] = v;
        }
    }
    r
}

pub(crate) fn mat_vec<T: Real>(m: &[[T; 3]; 3], v: &[T; 3]) -> [T; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn mat_t_vec<T: Real>(m: &[[T; 3]; 3], v: &[T; 3]) -> [T; 3] {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

/// Pinhole intrinsics parameterized by horizontal field of view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    /// Horizontal field of view in degrees.
    pub fov: f64,
    pub width: f64,
    pub height: f64,
}

impl Intrinsics {
    pub fn new(fov: f64, width: f64, height: f64) -> Result<Intrinsics> {
        if !(fov > 1.0 && fov < 179.0) {
            return Err(Error::OutOfRange {
                what: "fov",
                value: fov,
                range: "(1, 179) degrees",
            });
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Invalid(format!(
                "image size {width}x{height} must be positive"
            )));
        }
        Ok(Intrinsics { fov, width, height })
    }

    pub fn focal(&self) -> f64 {
        focal_from_fov(self.fov, self.width)
    }

    pub fn principal_point(&self) -> Vector2<f64> {
        Vector2::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let f = self.focal();
        let c = self.principal_point();
        Matrix3::new(f, 0.0, c.x, 0.0, f, c.y, 0.0, 0.0, 1.0)
    }
}

pub fn focal_from_fov(fov_deg: f64, width: f64) -> f64 {
    (width / 2.0) / (fov_deg.to_radians() / 2.0).tan()
}

pub fn fov_from_focal(focal: f64, width: f64) -> f64 {
    2.0 * (width / 2.0 / focal).atan().to_degrees()
}

/// d(focal)/d(fov) with fov in degrees.
pub fn focal_fov_derivative(fov_deg: f64, width: f64) -> f64 {
    let half = fov_deg.to_radians() / 2.0;
    -(width / 2.0) * (std::f64::consts::PI / 360.0) / half.sin().powi(2)
}

fn check_depth(z: f64) -> Result<()> {
    if z > DEPTH_FLOOR {
        Ok(())
    } else {
        Err(Error::NonPositiveDepth { z })
    }
}

pub fn project(k: &Intrinsics, x: &Vector3<f64>) -> Result<Vector2<f64>> {
    check_depth(x.z)?;
    let f = k.focal();
    Ok(Vector2::new(x.x / x.z, x.y / x.z) * f + k.principal_point())
}

pub fn backproject(k: &Intrinsics, p: &Vector2<f64>, depth: f64) -> Result<Vector3<f64>> {
    check_depth(depth)?;
    let m = (p - k.principal_point()) / k.focal();
    Ok(Vector3::new(m.x * depth, m.y * depth, depth))
}

/// The matrix `A` with `J Jᵀ = (f²/Z²) A` for the projection Jacobian `J`.
pub fn propagation_matrix(x: &Vector3<f64>) -> Result<Matrix2<f64>> {
    check_depth(x.z)?;
    let a = x.x / x.z;
    let b = x.y / x.z;
    Ok(Matrix2::new(1.0 + a * a, a * b, a * b, 1.0 + b * b))
}

/// Image-plane covariance of an isotropic 3D Gaussian of radius `sigma`
/// centred at camera point `x`.
pub fn projected_covariance(k: &Intrinsics, x: &Vector3<f64>, sigma: f64) -> Result<Matrix2<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveRadius { sigma });
    }
    let a = propagation_matrix(x)?;
    let f = k.focal();
    Ok(a * (f * f * sigma * sigma / (x.z * x.z)))
}
