//! Rotation group utilities: hat operator, exponential and logarithm maps,
//! and the right Jacobian of the exponential map.
//!
//! All perturbations in this crate are applied on the right,
//! `R <- R * Exp(delta)`, so [`dexp_right`] is the Jacobian that links an
//! additive change of a rotation vector to a right-multiplied increment.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

use crate::error::JpcmError;

/// Below this angle the closed-form expressions switch to Taylor series.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Tolerance on `R^T R - I` and `det(R) - 1` accepted by [`Rotation::from_matrix`].
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Near-pi threshold on `sin(theta)` for the diagonal axis extraction in [`log_so3`].
const NEAR_PI_SIN: f64 = 1e-4;

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and handedness.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, JpcmError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(JpcmError::InvalidRotation("non-finite entries".into()));
        }
        let gram = m.transpose() * m - Matrix3::identity();
        let worst = gram.amax();
        if worst > ORTHONORMAL_TOL {
            return Err(JpcmError::InvalidRotation(format!(
                "R^T R deviates from identity by {worst:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(JpcmError::InvalidRotation(format!("determinant {det}")));
        }
        Ok(Self(m))
    }

    /// Skips validation. Callers must guarantee the matrix is a rotation.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Nearest rotation in the Frobenius sense (polar decomposition).
    pub fn from_matrix_projected(m: Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u requested");
        let v_t = svd.v_t.expect("svd v_t requested");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Self(r)
    }

    pub fn exp(omega: &Vector3<f64>) -> Self {
        exp_so3(omega)
    }

    pub fn log(&self) -> Vector3<f64> {
        log_so3(self)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Self(self.0 * other.0)
    }

    /// `self * Exp(delta)`.
    pub fn retract(&self, delta: &Vector3<f64>) -> Self {
        Self(self.0 * exp_so3(delta).0)
    }

    /// `Log(other^T * self)`, the right-tangent difference `self ⊖ other`.
    pub fn local(&self, other: &Rotation) -> Vector3<f64> {
        log_so3(&Self(other.0.transpose() * self.0))
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Re-projects onto SO(3) to remove accumulated round-off.
    pub fn renormalize(&self) -> Self {
        Self::from_matrix_projected(self.0)
    }
}

/// Skew-symmetric matrix with `skew(v) * w == v.cross(w)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] on the antisymmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// Rodrigues' formula.
pub fn exp_so3(omega: &Vector3<f64>) -> Rotation {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(omega);
    let (s, c) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let half = (0.5 * theta).sin();
        (theta.sin() / theta, 2.0 * half * half / theta2)
    };
    Rotation(Matrix3::identity() + k * s + k * k * c)
}

/// Rotation vector with `|omega| <= pi`.
pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    let m = r.matrix();
    let s = vee(m);
    let sin_theta = s.norm();
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if theta < SMALL_ANGLE {
        return s * (1.0 + theta * theta / 6.0);
    }
    if sin_theta < NEAR_PI_SIN && cos_theta < 0.0 {
        // n n^T = (sym(R) - cos I) / (1 - cos); take the dominant column.
        let sym = (m + m.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
        let outer = sym / (1.0 - cos_theta);
        let i = (0..3)
            .max_by(|&a, &b| outer[(a, a)].total_cmp(&outer[(b, b)]))
            .unwrap_or(0);
        let mut axis: Vector3<f64> = outer.column(i).into();
        axis /= axis.norm();
        if axis.dot(&s) < 0.0 {
            axis = -axis;
        }
        return axis * theta.min(PI);
    }
    s * (theta / sin_theta)
}

/// Right Jacobian of `Exp`, `Exp(w + d) ~= Exp(w) Exp(dexp_right(w) d)`.
///
/// Closed form `I - a K + b K^2` with `K = skew(w)/theta`,
/// `a = 2 sin^2(theta/2)/theta` and `b = 1 - sin(theta)/theta`.
pub fn dexp_right(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    if theta < SMALL_ANGLE {
        let k = skew(omega);
        return Matrix3::identity() - k * 0.5 + k * k / 6.0;
    }
    let k = skew(omega) / theta;
    let half = (0.5 * theta).sin();
    let a = 2.0 * half * half / theta;
    let b = 1.0 - theta.sin() / theta;
    Matrix3::identity() - k * a + k * k * b
}

/// Inverse of [`dexp_right`]; used to differentiate `Log`.
pub fn dexp_right_inv(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = skew(omega);
    if theta2.sqrt() < SMALL_ANGLE {
        return Matrix3::identity() + k * 0.5 + k * k / 12.0;
    }
    let theta = theta2.sqrt();
    let coeff = 1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() + k * 0.5 + k * k * coeff
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn skew_of_zero_and_unit_z() {
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(skew(&Vector3::z()), expected);
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let r = exp_so3(&Vector3::new(0.0, 0.0, PI / 2.0));
        assert_relative_eq!(r.matrix().column(0).into_owned(), Vector3::y(), epsilon = 1e-15);
        assert_eq!(exp_so3(&Vector3::zeros()).matrix(), &Matrix3::identity());
    }

    #[test]
    fn log_identity_and_round_trip() {
        assert_eq!(log_so3(&Rotation::identity()), Vector3::zeros());
        let w = Vector3::new(0.1, -0.2, 0.3);
        assert_relative_eq!(log_so3(&exp_so3(&w)), w, epsilon = 1e-9);
    }

    #[test]
    fn log_at_pi() {
        let r = exp_so3(&Vector3::new(PI, 0.0, 0.0));
        let w = log_so3(&r);
        assert_relative_eq!(w.x.abs(), PI, epsilon = 1e-9);
        assert!(w.y.abs() < 1e-9 && w.z.abs() < 1e-9);
        assert_relative_eq!(*exp_so3(&w).matrix(), *r.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn log_just_below_pi_keeps_axis_sign() {
        let axis = Vector3::new(1.0, 2.0, -2.0) / 3.0;
        let w = axis * (PI - 1e-6);
        assert_relative_eq!(log_so3(&exp_so3(&w)), w, epsilon = 1e-8);
    }

    #[test]
    fn rejects_non_orthonormal() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = 1.01;
        assert!(Rotation::from_matrix(m).is_err());
        assert!(Rotation::from_matrix(-Matrix3::identity()).is_err());
    }

    #[test]
    fn projection_recovers_rotation() {
        let r = exp_so3(&Vector3::new(0.4, 0.1, -0.7));
        let noisy = r.matrix() + Matrix3::from_element(1e-6);
        let fixed = Rotation::from_matrix_projected(noisy);
        assert!(Rotation::from_matrix(*fixed.matrix()).is_ok());
        assert_relative_eq!(*fixed.matrix(), *r.matrix(), epsilon = 1e-5);
    }

    #[test]
    fn dexp_at_zero_and_tiny() {
        assert_eq!(dexp_right(&Vector3::zeros()), Matrix3::identity());
        let w = Vector3::new(1e-6, 0.0, 0.0);
        let expected = Matrix3::identity() - skew(&w) * 0.5;
        assert_relative_eq!(dexp_right(&w), expected, epsilon = 1e-9);
    }

    #[test]
    fn dexp_inverse_is_inverse() {
        for w in [Vector3::new(0.3, -1.2, 0.5), Vector3::new(1e-5, 0.0, 2e-5)] {
            let prod = dexp_right(&w) * dexp_right_inv(&w);
            assert_relative_eq!(prod, Matrix3::identity(), epsilon = 1e-12);
        }
    }
}
