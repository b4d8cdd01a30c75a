//! Quadrotor rigid-body model, rotor allocation and a noisy truth simulator.
//!
//! Tangent ordering for [`QuadState`] is `(p, theta, v, omega)`, twelve
//! components. Rotation increments are applied on the right.

use nalgebra::{Matrix3, Matrix4, SVector, Vector3, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{JpcmError, Result};
use crate::so3::{self, Rotation};

pub type Vector12 = SVector<f64, 12>;

/// Physical constants of the airframe. Rotor speeds use abstract units
/// consistent between `thrust_coeff`, `moment_coeff` and the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadParams {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub arm_length: f64,
    pub thrust_coeff: f64,
    pub moment_coeff: f64,
    pub gravity: f64,
    pub rotor_min: f64,
    pub rotor_max: f64,
    pub rotor_threshold: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        let mass: f64 = 1.0;
        let gravity = 10.0;
        let thrust_coeff = 1e-5;
        let hover = (mass * gravity / (4.0 * thrust_coeff)).sqrt();
        Self {
            mass,
            inertia: [0.01, 0.01, 0.02],
            arm_length: 0.25,
            thrust_coeff,
            moment_coeff: 1e-7,
            gravity,
            rotor_min: 0.4 * hover,
            rotor_max: 1.6 * hover,
            rotor_threshold: 20.0,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("inertia[0]", self.inertia[0]),
            ("inertia[1]", self.inertia[1]),
            ("inertia[2]", self.inertia[2]),
            ("arm_length", self.arm_length),
            ("thrust_coeff", self.thrust_coeff),
            ("moment_coeff", self.moment_coeff),
            ("gravity", self.gravity),
            ("rotor_min", self.rotor_min),
            ("rotor_max", self.rotor_max),
            ("rotor_threshold", self.rotor_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(JpcmError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rotor_min + self.rotor_threshold >= self.rotor_max - self.rotor_threshold {
            return Err(JpcmError::Config(
                "rotor_min + rotor_threshold must be below rotor_max - rotor_threshold".into(),
            ));
        }
        Ok(())
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.inertia))
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn hover_wrench(&self) -> Wrench {
        Wrench::new(self.hover_thrust(), Vector3::zeros())
    }

    pub fn hover_rotor_speed(&self) -> f64 {
        (self.hover_thrust() / (4.0 * self.thrust_coeff)).sqrt()
    }

    /// Rows 3..6 of the allocation matrix: maps squared rotor speeds to
    /// `(T_z, M_x, M_y, M_z)`.
    pub fn allocation_matrix(&self) -> Matrix4<f64> {
        let ct = self.thrust_coeff;
        let lc = self.arm_length * ct;
        let km = self.moment_coeff;
        Matrix4::new(
            ct, ct, ct, ct, //
            0.0, 0.0, lc, -lc, //
            -lc, lc, 0.0, 0.0, //
            km, km, -km, -km,
        )
    }
}

/// Full rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub position: Vector3<f64>,
    pub rotation: Rotation,
    pub velocity: Vector3<f64>,
    /// Body-frame angular rate.
    pub angular_velocity: Vector3<f64>,
}

impl Default for QuadState {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            rotation: Rotation::identity(),
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }
}

impl QuadState {
    pub fn hover_at(position: Vector3<f64>) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    pub fn retract(&self, delta: &Vector12) -> Self {
        Self {
            position: self.position + delta.fixed_rows::<3>(0),
            rotation: self.rotation.retract(&delta.fixed_rows::<3>(3).into_owned()),
            velocity: self.velocity + delta.fixed_rows::<3>(6),
            angular_velocity: self.angular_velocity + delta.fixed_rows::<3>(9),
        }
    }

    /// `self ⊖ other` in the same coordinates as [`QuadState::retract`].
    pub fn local(&self, other: &QuadState) -> Vector12 {
        let mut out = Vector12::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&(self.position - other.position));
        out.fixed_rows_mut::<3>(3).copy_from(&self.rotation.local(&other.rotation));
        out.fixed_rows_mut::<3>(6).copy_from(&(self.velocity - other.velocity));
        out.fixed_rows_mut::<3>(9)
            .copy_from(&(self.angular_velocity - other.angular_velocity));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.rotation.matrix().iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.angular_velocity.iter().all(|x| x.is_finite())
    }
}

/// Collective body-z thrust and body moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub thrust: f64,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn new(thrust: f64, moment: Vector3<f64>) -> Self {
        Self { thrust, moment }
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vector3::zeros())
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.moment.x, self.moment.y, self.moment.z)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], Vector3::new(v[1], v[2], v[3]))
    }
}

/// Per-rotor angular speeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpeeds(pub Vector4<f64>);

impl RotorSpeeds {
    pub fn uniform(speed: f64) -> Self {
        Self(Vector4::from_element(speed))
    }

    pub fn squared(&self) -> Vector4<f64> {
        self.0.component_mul(&self.0)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        Self(self.0.map(|u| u.clamp(lo, hi)))
    }
}

/// Rotor speeds to body wrench; the x/y thrust components are identically zero.
pub fn allocate(u: &RotorSpeeds, params: &QuadParams) -> Wrench {
    Wrench::from_vector(&(params.allocation_matrix() * u.squared()))
}

/// Inverse of [`allocate`] for wrenches with non-negative squared speeds.
pub fn allocate_inverse(w: &Wrench, params: &QuadParams) -> Result<RotorSpeeds> {
    let squared = squared_speeds_for(w, params)?;
    if let Some((rotor, &value)) = squared.iter().enumerate().find(|(_, a)| **a < 0.0) {
        return Err(JpcmError::InfeasibleWrench { rotor, value });
    }
    Ok(RotorSpeeds(squared.map(f64::sqrt)))
}

/// Like [`allocate_inverse`] but clips negative squared speeds to zero and
/// saturates the result to the rotor bounds.
pub fn allocate_inverse_saturated(w: &Wrench, params: &QuadParams) -> Result<RotorSpeeds> {
    let squared = squared_speeds_for(w, params)?;
    Ok(RotorSpeeds(squared.map(|a| a.max(0.0).sqrt())).clamp(params.rotor_min, params.rotor_max))
}

fn squared_speeds_for(w: &Wrench, params: &QuadParams) -> Result<Vector4<f64>> {
    let inv = params
        .allocation_matrix()
        .try_inverse()
        .ok_or_else(|| JpcmError::Config("allocation matrix is singular".into()))?;
    Ok(inv * w.as_vector())
}

/// Time derivative of the state, in tangent coordinates `(p, theta, v, omega)`.
pub fn continuous_dynamics(x: &QuadState, w: &Wrench, params: &QuadParams) -> Vector12 {
    let inertia = Vector3::from(params.inertia);
    let thrust_world = x.rotation.rotate(&Vector3::new(0.0, 0.0, w.thrust));
    let accel = thrust_world / params.mass - Vector3::new(0.0, 0.0, params.gravity);
    let omega = x.angular_velocity;
    let gyro = omega.cross(&inertia.component_mul(&omega));
    let alpha = (w.moment - gyro).component_div(&inertia);

    let mut out = Vector12::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(&x.velocity);
    out.fixed_rows_mut::<3>(3).copy_from(&omega);
    out.fixed_rows_mut::<3>(6).copy_from(&accel);
    out.fixed_rows_mut::<3>(9).copy_from(&alpha);
    out
}

/// Process noise injected by the truth simulator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProcessNoise {
    /// Thrust sigma (N).
    pub thrust_sigma: f64,
    /// Body-rate sigma (rad/s), added after each integration step.
    pub rate_sigma: f64,
}

/// The noise actually drawn during one [`step_truth`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSample {
    pub thrust: f64,
    pub rate: Vector3<f64>,
}

/// Sigmas of the synthetic positioning measurement.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementNoise {
    pub position: f64,
    pub rotation: f64,
    pub velocity: f64,
    pub angular_velocity: f64,
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| sigma * { let z: f64 = StandardNormal.sample(rng); z })
}

/// Rigid-body derivative with the rotation expressed as a matrix rate.
struct MatrixRate {
    p: Vector3<f64>,
    r: Matrix3<f64>,
    v: Vector3<f64>,
    w: Vector3<f64>,
}

struct MatrixState {
    p: Vector3<f64>,
    r: Matrix3<f64>,
    v: Vector3<f64>,
    w: Vector3<f64>,
}

impl MatrixState {
    fn rate(&self, w: &Wrench, params: &QuadParams) -> MatrixRate {
        let inertia = Vector3::from(params.inertia);
        let accel =
            self.r * Vector3::new(0.0, 0.0, w.thrust / params.mass) - Vector3::z() * params.gravity;
        let gyro = self.w.cross(&inertia.component_mul(&self.w));
        MatrixRate {
            p: self.v,
            r: self.r * so3::skew(&self.w),
            v: accel,
            w: (w.moment - gyro).component_div(&inertia),
        }
    }

    fn advanced(&self, k: &MatrixRate, h: f64) -> MatrixState {
        MatrixState {
            p: self.p + k.p * h,
            r: self.r + k.r * h,
            v: self.v + k.v * h,
            w: self.w + k.w * h,
        }
    }
}

/// Classical RK4 over `(p, R, v, omega)` with the rotation integrated as a
/// matrix and projected back onto SO(3) at the end of the step.
pub fn integrate_rk4(x: &QuadState, w: &Wrench, dt: f64, params: &QuadParams) -> QuadState {
    let s0 = MatrixState {
        p: x.position,
        r: *x.rotation.matrix(),
        v: x.velocity,
        w: x.angular_velocity,
    };
    let k1 = s0.rate(w, params);
    let k2 = s0.advanced(&k1, dt / 2.0).rate(w, params);
    let k3 = s0.advanced(&k2, dt / 2.0).rate(w, params);
    let k4 = s0.advanced(&k3, dt).rate(w, params);
    let h6 = dt / 6.0;
    QuadState {
        position: s0.p + (k1.p + (k2.p + k3.p) * 2.0 + k4.p) * h6,
        rotation: Rotation::from_matrix_projected(s0.r + (k1.r + (k2.r + k3.r) * 2.0 + k4.r) * h6),
        velocity: s0.v + (k1.v + (k2.v + k3.v) * 2.0 + k4.v) * h6,
        angular_velocity: s0.w + (k1.w + (k2.w + k3.w) * 2.0 + k4.w) * h6,
    }
}

/// Advances the true vehicle by one control period.
pub fn step_truth<R: Rng + ?Sized>(
    x: &QuadState,
    u: &RotorSpeeds,
    dt: f64,
    noise: &ProcessNoise,
    rng: &mut R,
    params: &QuadParams,
) -> (QuadState, ProcessSample) {
    let sample = ProcessSample {
        thrust: noise.thrust_sigma * { let z: f64 = StandardNormal.sample(rng); z },
        rate: gaussian3(rng, noise.rate_sigma),
    };
    let mut wrench = allocate(u, params);
    wrench.thrust += sample.thrust;
    let mut next = integrate_rk4(x, &wrench, dt, params);
    next.angular_velocity += sample.rate;
    (next, sample)
}

/// Noisy copy of the state; rotation noise is applied as `R * Exp(n)`.
pub fn measure<R: Rng + ?Sized>(x: &QuadState, sigmas: &MeasurementNoise, rng: &mut R) -> QuadState {
    QuadState {
        position: x.position + gaussian3(rng, sigmas.position),
        rotation: x.rotation.retract(&gaussian3(rng, sigmas.rotation)),
        velocity: x.velocity + gaussian3(rng, sigmas.velocity),
        angular_velocity: x.angular_velocity + gaussian3(rng, sigmas.angular_velocity),
    }
}

/// Truth simulator owning its own seeded generator.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub params: QuadParams,
    pub noise: ProcessNoise,
    state: QuadState,
    rng: ChaCha8Rng,
    last_sample: Option<ProcessSample>,
}

impl Simulator {
    pub fn new(params: QuadParams, noise: ProcessNoise, initial: QuadState, seed: u64) -> Self {
        Self {
            params,
            noise,
            state: initial,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_sample: None,
        }
    }

    pub fn state(&self) -> &QuadState {
        &self.state
    }

    pub fn last_sample(&self) -> Option<&ProcessSample> {
        self.last_sample.as_ref()
    }

    pub fn step(&mut self, u: &RotorSpeeds, dt: f64) -> &QuadState {
        let (next, sample) = step_truth(&self.state, u, dt, &self.noise, &mut self.rng, &self.params);
        self.state = next;
        self.last_sample = Some(sample);
        &self.state
    }

    /// Instantaneous position offset, e.g. an external push.
    pub fn displace(&mut self, dp: &Vector3<f64>) {
        self.state.position += dp;
    }
}
