//! Analytic reference trajectories.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dynamics::QuadState;
use crate::error::{JpcmError, Result};
use crate::factors::RefPoint;
use crate::so3::Rotation;

/// How the reference attitude is chosen along the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceAttitude {
    /// Body z along the required specific force, body x toward the velocity.
    #[default]
    ThrustAligned,
    /// Zero roll and pitch, body x toward the velocity.
    Level,
}

/// Constant-speed circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircleSpec {
    pub radius: f64,
    pub speed: f64,
    pub center: [f64; 3],
    pub normal: [f64; 3],
    pub attitude: ReferenceAttitude,
    /// Gravity used by [`ReferenceAttitude::ThrustAligned`].
    pub gravity: f64,
}

impl Default for CircleSpec {
    fn default() -> Self {
        Self {
            radius: 1.5,
            speed: 5.0,
            center: [0.0, 0.0, 1.0],
            normal: [0.0, 0.0, 1.0],
            attitude: ReferenceAttitude::ThrustAligned,
            gravity: 10.0,
        }
    }
}

impl CircleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(JpcmError::Config(format!("circle radius must be positive, got {}", self.radius)));
        }
        if !(self.speed >= 0.0) {
            return Err(JpcmError::Config(format!("circle speed must be non-negative, got {}", self.speed)));
        }
        if Vector3::from(self.normal).norm() < 1e-12 {
            return Err(JpcmError::Config("circle normal must be non-zero".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI * self.radius / self.speed
    }

    /// In-plane orthonormal basis; for the z normal this is `(x̂, ŷ)`.
    fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = Vector3::from(self.normal).normalize();
        let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        (e1, n.cross(&e1))
    }

    fn kinematics(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (e1, e2) = self.basis();
        let rate = self.speed / self.radius;
        let (s, c) = (rate * t).sin_cos();
        let radial = e1 * c + e2 * s;
        let tangent = -e1 * s + e2 * c;
        let p = Vector3::from(self.center) + radial * self.radius;
        let v = tangent * self.speed;
        let a = -radial * (self.speed * rate);
        (p, v, a)
    }
}

fn attitude_for(velocity: &Vector3<f64>, accel: &Vector3<f64>, spec: &CircleSpec) -> Rotation {
    let z = match spec.attitude {
        ReferenceAttitude::ThrustAligned => (accel + Vector3::z() * spec.gravity).normalize(),
        ReferenceAttitude::Level => Vector3::z(),
    };
    let heading = if velocity.norm() > 1e-12 {
        velocity.normalize()
    } else {
        Vector3::x()
    };
    let y = z.cross(&heading);
    let y = if y.norm() > 1e-12 { y.normalize() } else { z.cross(&Vector3::x()).normalize() };
    let x = y.cross(&z);
    Rotation::from_matrix_projected(Matrix3::from_columns(&[x, y, z]))
}

/// Reference point at time `t`.
pub fn circle_ref(spec: &CircleSpec, t: f64) -> RefPoint {
    let (p, v, a) = spec.kinematics(t);
    RefPoint {
        position: p,
        rotation: attitude_for(&v, &a, spec),
        velocity: v,
    }
}

pub fn hover_ref(p: Vector3<f64>) -> RefPoint {
    RefPoint {
        position: p,
        rotation: Rotation::identity(),
        velocity: Vector3::zeros(),
    }
}

/// A reference trajectory sampled by the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Circle(CircleSpec),
    Hover(Vector3<f64>),
}

impl Reference {
    pub fn at(&self, t: f64) -> RefPoint {
        match self {
            Reference::Circle(spec) => circle_ref(spec, t),
            Reference::Hover(p) => hover_ref(*p),
        }
    }

    /// `count` points starting at `t0`, spaced by `dt`.
    pub fn window(&self, t0: f64, dt: f64, count: usize) -> Vec<RefPoint> {
        (0..count).map(|k| self.at(t0 + k as f64 * dt)).collect()
    }

    /// Body angular rate implied by the reference attitude.
    pub fn body_rate(&self, t: f64) -> Vector3<f64> {
        let h = 1e-6;
        let r0 = self.at(t).rotation;
        let r1 = self.at(t + h).rotation;
        r1.local(&r0) / h
    }

    /// State exactly on the reference.
    pub fn initial_state(&self, t: f64) -> QuadState {
        let r = self.at(t);
        QuadState {
            angular_velocity: self.body_rate(t),
            ..r.to_state()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn at_origin() -> CircleSpec {
        CircleSpec {
            center: [0.0; 3],
            ..CircleSpec::default()
        }
    }

    #[test]
    fn start_and_quarter_turn() {
        let spec = at_origin();
        let r = circle_ref(&spec, 0.0);
        assert_relative_eq!(r.position, Vector3::new(1.5, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(r.velocity.norm(), 5.0, epsilon = 1e-12);
        let q = circle_ref(&spec, 2.0 * PI * 1.5 / 5.0 / 4.0);
        assert_relative_eq!(q.position, Vector3::new(0.0, 1.5, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn hover_reference() {
        let r = hover_ref(Vector3::zeros());
        assert_eq!(r.position, Vector3::zeros());
        assert_eq!(r.rotation, Rotation::identity());
        assert_eq!(hover_ref(Vector3::new(1.0, 2.0, 3.0)).velocity, Vector3::zeros());
    }

    #[test]
    fn thrust_aligned_attitude_points_along_specific_force() {
        let spec = CircleSpec::default();
        let r = circle_ref(&spec, 0.3);
        let (_, _, a) = spec.kinematics(0.3);
        let z_body = r.rotation.matrix().column(2).into_owned();
        let f = (a + Vector3::z() * spec.gravity).normalize();
        assert_relative_eq!(z_body, f, epsilon = 1e-12);
        let level = CircleSpec {
            attitude: ReferenceAttitude::Level,
            ..spec
        };
        let rl = circle_ref(&level, 0.3);
        assert_relative_eq!(rl.rotation.matrix().column(2).into_owned(), Vector3::z(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(CircleSpec { radius: 0.0, ..CircleSpec::default() }.validate().is_err());
        assert!(CircleSpec { speed: -1.0, ..CircleSpec::default() }.validate().is_err());
        assert!(CircleSpec::default().validate().is_ok());
    }
}
