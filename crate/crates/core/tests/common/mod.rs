#![allow(dead_code)]

use jpcm_core::dynamics::{QuadState, RotorSpeeds, Wrench};
use jpcm_core::fgo::{numerical_jacobians, Factor, ManifoldValue};
use jpcm_core::so3::Rotation;
use nalgebra::{DMatrix, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// Rotation with angle below `max_angle`.
pub fn rotation<R: Rng>(rng: &mut R, max_angle: f64) -> Rotation {
    let axis = vec3(rng, 1.0).normalize();
    Rotation::exp(&(axis * rng.random_range(0.0..max_angle)))
}

pub fn state<R: Rng>(rng: &mut R) -> QuadState {
    QuadState {
        position: vec3(rng, 3.0),
        rotation: rotation(rng, 3.0),
        velocity: vec3(rng, 5.0),
        angular_velocity: vec3(rng, 2.0),
    }
}

pub fn wrench<R: Rng>(rng: &mut R) -> Wrench {
    Wrench::new(rng.random_range(0.0..20.0), vec3(rng, 0.5))
}

pub fn rotors<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> RotorSpeeds {
    RotorSpeeds(Vector4::from_fn(|_, _| rng.random_range(lo..hi)))
}

/// Largest entry-wise mismatch between analytic and central-difference
/// Jacobians, relative to `max(1, |numeric|)`.
pub fn jacobian_mismatch<F: Factor + ?Sized>(factor: &F, values: &[ManifoldValue]) -> f64 {
    let refs: Vec<&ManifoldValue> = values.iter().collect();
    let analytic = factor.jacobians(&refs).expect("factor has analytic jacobians");
    let numeric = numerical_jacobians(factor, &refs, 1e-6);
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n): (&DMatrix<f64>, &DMatrix<f64>)| {
            assert_eq!(a.shape(), n.shape());
            a.iter()
                .zip(n.iter())
                .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
