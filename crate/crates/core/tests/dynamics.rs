// Oracle values are printed at full precision.
#![allow(clippy::excessive_precision)]

mod common;

use approx::assert_relative_eq;
use common::*;
use jpcm_core::dynamics::*;
use jpcm_core::so3::Rotation;
use jpcm_core::JpcmError;
use nalgebra::{Vector3, Vector4};
use proptest::prelude::*;

fn params() -> QuadParams {
    QuadParams::default()
}

#[test]
fn allocation_examples() {
    let p = params();
    let w = allocate(&RotorSpeeds::uniform(400.0), &p);
    assert_relative_eq!(w.thrust, 4.0 * p.thrust_coeff * 400.0 * 400.0, epsilon = 1e-12);
    assert_eq!(w.moment, Vector3::zeros());
    assert_eq!(allocate(&RotorSpeeds::uniform(0.0), &p), Wrench::zero());

    let (ct, l, km) = (p.thrust_coeff, p.arm_length, p.moment_coeff);
    let mut r = rng(21);
    for _ in 0..100 {
        let u = rotors(&mut r, 0.0, 1000.0);
        let a = u.squared();
        let w = allocate(&u, &p);
        assert_relative_eq!(w.thrust, ct * a.sum(), max_relative = 1e-14);
        assert_relative_eq!(w.moment.x, l * ct * (a[2] - a[3]), epsilon = 1e-12);
        assert_relative_eq!(w.moment.y, l * ct * (a[1] - a[0]), epsilon = 1e-12);
        assert_relative_eq!(w.moment.z, km * (a[0] + a[1] - a[2] - a[3]), epsilon = 1e-12);
    }
}

#[test]
fn inverse_allocation() {
    let p = params();
    let hover = allocate_inverse(&p.hover_wrench(), &p).unwrap();
    let expected = (p.mass * p.gravity / (4.0 * p.thrust_coeff)).sqrt();
    for j in 0..4 {
        assert_relative_eq!(hover.0[j], expected, max_relative = 1e-12);
    }
    assert_relative_eq!(p.hover_rotor_speed(), expected, max_relative = 1e-15);

    let mut r = rng(22);
    for _ in 0..100 {
        let w = allocate(&rotors(&mut r, 50.0, 1000.0), &p);
        let back = allocate(&allocate_inverse(&w, &p).unwrap(), &p);
        assert_relative_eq!(back.as_vector(), w.as_vector(), epsilon = 1e-9);
    }

    // A large positive pitch moment needs A₀ < 0.
    let bad = Wrench::new(1.0, Vector3::new(0.0, 5.0, 0.0));
    assert!(matches!(
        allocate_inverse(&bad, &p),
        Err(JpcmError::InfeasibleWrench { rotor: 0, .. })
    ));
    let clipped = allocate_inverse_saturated(&bad, &p).unwrap();
    assert!(clipped.0.iter().all(|u| *u >= p.rotor_min && *u <= p.rotor_max));
}

#[test]
fn derivative_at_equilibrium_and_free_fall() {
    let p = params();
    let hover = QuadState::hover_at(Vector3::new(1.0, 2.0, 3.0));
    assert_eq!(continuous_dynamics(&hover, &p.hover_wrench(), &p), Vector12::zeros());
    let d = continuous_dynamics(&hover, &Wrench::zero(), &p);
    assert_eq!(d.fixed_rows::<3>(6).into_owned(), Vector3::new(0.0, 0.0, -p.gravity));
}

/// Rotation vector, velocity, body rate, thrust, moment, expected derivative.
type OracleCase = ([f64; 3], [f64; 3], [f64; 3], f64, [f64; 3], [f64; 12]);

#[test]
fn derivative_matches_high_precision_oracle() {
    // Generated by tests/oracles/dynamics_oracle.py.
    let cases: [OracleCase; 3] = [
        (
            [0.3, -0.2, 0.5],
            [1.0, -2.0, 0.5],
            [0.4, -1.1, 2.3],
            12.5,
            [0.01, -0.02, 0.003],
            [
                1.0, -2.0, 0.5, 0.4, -1.1, 2.3, -1.4364619242045840760, -4.1224292211531889762,
                1.7129054660614748551, 3.53, -1.08, 0.15,
            ],
        ),
        (
            [-1.2, 0.7, 2.1],
            [0.0, 0.0, 0.0],
            [3.0, 0.5, -0.7],
            4.0,
            [-0.05, 0.04, 0.0],
            [
                0.0, 0.0, 0.0, 3.0, 0.5, -0.7, -2.2310787947724484994, 2.7936038761990702244,
                -8.2061034605077558840, -4.65, 1.9, 0.0,
            ],
        ),
        (
            [0.0, 0.0, 0.0],
            [5.0, 1.0, -1.0],
            [-0.2, 0.9, 0.1],
            10.0,
            [0.0, 0.0, 0.01],
            [5.0, 1.0, -1.0, -0.2, 0.9, 0.1, 0.0, 0.0, 0.0, -0.09, -0.02, 0.5],
        ),
    ];
    let p = params();
    for (rv, v, om, thrust, moment, expected) in cases {
        let x = QuadState {
            position: Vector3::new(0.3, 0.1, 2.0),
            rotation: Rotation::exp(&Vector3::from(rv)),
            velocity: Vector3::from(v),
            angular_velocity: Vector3::from(om),
        };
        let d = continuous_dynamics(&x, &Wrench::new(thrust, Vector3::from(moment)), &p);
        for i in 0..12 {
            assert!((d[i] - expected[i]).abs() <= 1e-12 * expected[i].abs().max(1.0), "row {i}: {} vs {}", d[i], expected[i]);
        }
    }
}

#[test]
fn noise_free_hover_is_a_fixed_point() {
    let p = params();
    let start = QuadState::hover_at(Vector3::new(0.0, 0.0, 1.0));
    let mut sim = Simulator::new(p, ProcessNoise::default(), start, 0);
    let u = allocate_inverse(&p.hover_wrench(), &p).unwrap();
    for _ in 0..100 {
        let before = *sim.state();
        let after = *sim.step(&u, 0.01);
        assert!(after.local(&before).amax() < 1e-9);
    }
    assert!(sim.state().local(&start).amax() < 1e-9);
}

/// Euler with `n` substeps and a group update of the attitude.
fn fine_euler(x: &QuadState, w: &Wrench, dt: f64, p: &QuadParams, n: usize) -> QuadState {
    let h = dt / n as f64;
    let mut s = *x;
    for _ in 0..n {
        let d = continuous_dynamics(&s, w, p);
        s = QuadState {
            position: s.position + d.fixed_rows::<3>(0) * h,
            rotation: s.rotation.retract(&(d.fixed_rows::<3>(3) * h).into_owned()),
            velocity: s.velocity + d.fixed_rows::<3>(6) * h,
            angular_velocity: s.angular_velocity + d.fixed_rows::<3>(9) * h,
        };
    }
    s
}

#[test]
fn rk4_step_matches_fine_integration() {
    let p = params();
    let mut r = rng(23);
    for _ in 0..20 {
        let x = state(&mut r);
        let u = rotors(&mut r, p.rotor_min, p.rotor_max);
        let (next, _) = step_truth(&x, &u, 0.01, &ProcessNoise::default(), &mut r, &p);
        // Richardson extrapolation of 1000 and 2000 substeps cancels Euler's first-order error.
        let coarse = fine_euler(&x, &allocate(&u, &p), 0.01, &p, 1000);
        let fine = fine_euler(&x, &allocate(&u, &p), 0.01, &p, 2000);
        let oracle = fine.retract(&fine.local(&coarse));
        assert!(next.local(&oracle).amax() < 1e-6, "{:e}", next.local(&oracle).amax());
        let m = next.rotation.matrix();
        assert!((m.transpose() * m - nalgebra::Matrix3::identity()).amax() < 1e-12);
    }
}

#[test]
fn injected_thrust_noise_has_the_configured_sigma() {
    let p = params();
    let noise = ProcessNoise {
        thrust_sigma: 1.0,
        rate_sigma: 0.0,
    };
    let mut sim = Simulator::new(p, noise, QuadState::hover_at(Vector3::zeros()), 5);
    let u = RotorSpeeds::uniform(p.hover_rotor_speed());
    let draws: Vec<f64> = (0..1000)
        .map(|_| {
            sim.step(&u, 0.01);
            sim.last_sample().unwrap().thrust
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let std = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
    assert!((std - 1.0).abs() < 0.1, "std {std}");
}

#[test]
fn measurement_noise() {
    let mut r = rng(24);
    let x = state(&mut r);
    assert_eq!(measure(&x, &MeasurementNoise::default(), &mut r), x);

    let sigmas = MeasurementNoise {
        position: 0.20,
        rotation: 0.05,
        velocity: 0.0,
        angular_velocity: 0.0,
    };
    let n = 10_000;
    let mut pos = Vector3::zeros();
    let mut rot = Vector3::zeros();
    for _ in 0..n {
        let z = measure(&x, &sigmas, &mut r);
        pos += (z.position - x.position).map(|e| e * e);
        rot += z.rotation.local(&x.rotation).map(|e| e * e);
        assert_eq!(z.velocity, x.velocity);
    }
    for a in 0..3 {
        let sp = (pos[a] / n as f64).sqrt();
        let sr = (rot[a] / n as f64).sqrt();
        assert!((sp - 0.20).abs() < 0.01, "position std {sp}");
        assert!((sr - 0.05).abs() < 0.0025, "rotation std {sr}");
    }
}

#[test]
fn free_flight_conserves_energy() {
    let p = params();
    let mut x = QuadState {
        velocity: Vector3::new(1.0, -2.0, 3.0),
        ..QuadState::hover_at(Vector3::new(0.0, 0.0, 5.0))
    };
    let energy = |s: &QuadState| s.velocity.norm_squared() + 2.0 * p.gravity * s.position.z;
    let e0 = energy(&x);
    let mut r = rng(25);
    for _ in 0..100 {
        x = step_truth(&x, &RotorSpeeds::uniform(0.0), 0.01, &ProcessNoise::default(), &mut r, &p).0;
    }
    assert!((energy(&x) - e0).abs() < 1e-9);
}

#[test]
fn parameters_are_validated() {
    assert!(params().validate().is_ok());
    let bad = QuadParams {
        rotor_threshold: 1000.0,
        ..params()
    };
    assert!(bad.validate().is_err());
    let bad = QuadParams { mass: 0.0, ..params() };
    assert!(bad.validate().is_err());
}

proptest! {
    #[test]
    fn allocation_is_quadratic(a in 0.0..1000.0f64, b in 0.0..1000.0f64, c in 0.0..1000.0f64, d in 0.0..1000.0f64, s in -3.0..3.0f64) {
        let p = params();
        let u = RotorSpeeds(Vector4::new(a, b, c, d));
        let scaled = allocate(&RotorSpeeds(u.0 * s), &p).as_vector();
        let expected = allocate(&u, &p).as_vector() * (s * s);
        prop_assert!((scaled - expected).amax() <= 1e-12 * expected.amax().max(1.0));
    }

    #[test]
    fn allocation_round_trip(a in 10.0..1000.0f64, b in 10.0..1000.0f64, c in 10.0..1000.0f64, d in 10.0..1000.0f64) {
        let p = params();
        let w = allocate(&RotorSpeeds(Vector4::new(a, b, c, d)), &p);
        let back = allocate(&allocate_inverse(&w, &p).unwrap(), &p);
        prop_assert!((back.as_vector() - w.as_vector()).amax() < 1e-9);
    }
}

#[test]
fn simulator_displacement() {
    let p = params();
    let mut sim = Simulator::new(p, ProcessNoise::default(), QuadState::default(), 0);
    sim.displace(&Vector3::new(0.0, 0.3, -0.4));
    assert_eq!(sim.state().position, Vector3::new(0.0, 0.3, -0.4));
}
