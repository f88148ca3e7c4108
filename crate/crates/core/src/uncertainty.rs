//! Gaussian landmarks and their overlap.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::ad::Real;
use crate::error::{Error, Result};
use crate::geometry::{backproject, rodrigues, rotation_matrix, Intrinsics, Pose};

/// A 3D Gaussian in scene units.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian3 {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    /// Set when the covariance is exactly `sigma² I`.
    pub sigma: Option<f64>,
}

impl Gaussian3 {
    pub fn isotropic(mean: Vector3<f64>, sigma: f64) -> Result<Gaussian3> {
        if !(sigma > 0.0) {
            return Err(Error::NonPositiveRadius { sigma });
        }
        Ok(Gaussian3 {
            mean,
            covariance: Matrix3::identity() * (sigma * sigma),
            sigma: Some(sigma),
        })
    }

    pub fn new(mean: Vector3<f64>, covariance: Matrix3<f64>) -> Gaussian3 {
        Gaussian3 {
            mean,
            covariance,
            sigma: None,
        }
    }

    /// Density at `x`.
    pub fn pdf(&self, x: &Vector3<f64>) -> f64 {
        let d = x - self.mean;
        let inv = self.covariance.try_inverse().unwrap_or_else(Matrix3::zeros);
        let norm = ((2.0 * std::f64::consts::PI).powi(3) * self.covariance.determinant()).sqrt();
        (-0.5 * d.dot(&(inv * d))).exp() / norm
    }
}

/// An image-plane Gaussian in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian2 {
    pub mean: Vector2<f64>,
    pub covariance: Matrix2<f64>,
}

/// Oriented ellipsoidal radius: `R diag(σ²) Rᵀ` with `σ = exp(log_sigmas)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnisotropicRadius {
    pub rotation: Vector3<f64>,
    pub log_sigmas: Vector3<f64>,
}

impl AnisotropicRadius {
    pub fn isotropic(sigma: f64) -> AnisotropicRadius {
        AnisotropicRadius {
            rotation: Vector3::zeros(),
            log_sigmas: Vector3::repeat(sigma.ln()),
        }
    }
}

pub fn realize_covariance(a: &AnisotropicRadius) -> Matrix3<f64> {
    let r = rotation_matrix(&a.rotation);
    let d = Matrix3::from_diagonal(&a.log_sigmas.map(|s| (2.0 * s).exp()));
    r * d * r.transpose()
}

/// The radius attached to one correspondence endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Radius {
    Isotropic(f64),
    Anisotropic(AnisotropicRadius),
}

/// Landmark Gaussian for pixel `p` at depth `depth` in a camera with pose
/// `pose`, expressed in world coordinates. Anisotropic shapes are defined in
/// the observing camera's frame and rotated into the world.
pub fn world_gaussian(
    k: &Intrinsics,
    pose: &Pose,
    p: &Vector2<f64>,
    depth: f64,
    radius: &Radius,
) -> Result<Gaussian3> {
    let x = backproject(k, p, depth)?;
    let mean = pose.inverse().apply(&x);
    match radius {
        Radius::Isotropic(sigma) => Gaussian3::isotropic(mean, *sigma),
        Radius::Anisotropic(a) => {
            let to_world = pose.matrix().transpose();
            let cov = to_world * realize_covariance(a) * to_world.transpose();
            Ok(Gaussian3::new(mean, (cov + cov.transpose()) * 0.5))
        }
    }
}

/// Normalization of the log-determinant term of the overlap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcVariant {
    /// Mixture covariance `(Σ₁+Σ₂)/2`; identical Gaussians give 1.
    #[default]
    Normalized,
    /// `det(Σ₁+Σ₂) / (2√(det Σ₁ det Σ₂))`; identical 3D Gaussians give 1/2.
    Printed,
}

pub fn bhattacharyya_coefficient(g1: &Gaussian3, g2: &Gaussian3) -> Result<f64> {
    bhattacharyya_coefficient_with(g1, g2, BcVariant::Normalized)
}

pub fn bhattacharyya_coefficient_with(
    g1: &Gaussian3,
    g2: &Gaussian3,
    variant: BcVariant,
) -> Result<f64> {
    let d1 = g1.covariance.determinant();
    let d2 = g2.covariance.determinant();
    if !(d1 > 1e-300 && d2 > 1e-300) {
        return Err(Error::SingularCovariance);
    }
    let sum = g1.covariance + g2.covariance;
    let ds = sum.determinant();
    let inv = sum.try_inverse().ok_or(Error::SingularCovariance)?;
    if !(ds > 1e-300) {
        return Err(Error::SingularCovariance);
    }
    let delta = g1.mean - g2.mean;
    let maha = 0.25 * delta.dot(&(inv * delta));
    let ratio = match variant {
        BcVariant::Normalized => ds / 8.0 / (d1 * d2).sqrt(),
        BcVariant::Printed => ds / (2.0 * (d1 * d2).sqrt()),
    };
    Ok((-maha - 0.5 * ratio.ln()).exp())
}

/// Bhattacharyya distance between isotropic Gaussians with squared mean
/// separation `dist2` and variances `var1`, `var2`.
pub fn isotropic_distance<T: Real>(dist2: T, var1: T, var2: T, variant: BcVariant) -> T {
    let mean_var = (var1 + var2) * 0.5;
    let d = dist2 / (mean_var * 8.0) + (mean_var / (var1 * var2).sqrt()).ln() * 1.5;
    match variant {
        BcVariant::Normalized => d,
        BcVariant::Printed => d + std::f64::consts::LN_2,
    }
}

pub(crate) type Sym3<T> = [[T; 3]; 3];

pub(crate) fn det3<T: Real>(m: &Sym3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Bhattacharyya distance between general 3D Gaussians.
pub fn general_distance<T: Real>(delta: [T; 3], s1: &Sym3<T>, s2: &Sym3<T>, variant: BcVariant) -> T {
    let mut sum = [[T::cst(0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            sum[a][b] = s1[a][b] + s2[a][b];
        }
    }
    let ds = det3(&sum);
    // Adjugate solve: (Σ₁+Σ₂)⁻¹ δ = adj(Σ₁+Σ₂) δ / det.
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| sum[r0][c0] * sum[r1][c1] - sum[r0][c1] * sum[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let mut quad = T::cst(0.0);
    for a in 0..3 {
        for b in 0..3 {
            quad = quad + delta[a] * adj[a][b] * delta[b];
        }
    }
    let d1 = det3(s1);
    let d2 = det3(s2);
    let root = (d1 * d2).sqrt();
    let log_ratio = match variant {
        BcVariant::Normalized => (ds / (root * 8.0)).ln(),
        BcVariant::Printed => (ds / (root * 2.0)).ln(),
    };
    quad / ds * 0.25 + log_ratio * 0.5
}

/// `R diag(exp(2 log_sigmas)) Rᵀ` for any [`Real`]; `params` is
/// `[rotation(3), log_sigmas(3)]`.
pub fn anisotropic_covariance<T: Real>(params: &[T]) -> Sym3<T> {
    let r = rodrigues([params[0], params[1], params[2]]);
    let var = [
        (params[3] * 2.0).exp(),
        (params[4] * 2.0).exp(),
        (params[5] * 2.0).exp(),
    ];
    let mut out = [[T::cst(0.0); 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let v = r[a][0] * var[0] * r[b][0] + r[a][1] * var[1] * r[b][1] + r[a][2] * var[2] * r[b][2];
            out[a][b] = v;
            out[b][a] = v;
        }
    }
    out
}

/// `M Σ Mᵀ` for a 3×3 `M`.
pub(crate) fn congruence<T: Real>(m: &[[T; 3]; 3], s: &Sym3<T>) -> Sym3<T> {
    let mut ms = [[T::cst(0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            ms[a][b] = m[a][0] * s[0][b] + m[a][1] * s[1][b] + m[a][2] * s[2][b];
        }
    }
    let mut out = [[T::cst(0.0); 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let v = ms[a][0] * m[b][0] + ms[a][1] * m[b][1] + ms[a][2] * m[b][2];
            out[a][b] = v;
            out[b][a] = v;
        }
    }
    out
}
