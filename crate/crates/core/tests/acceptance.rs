//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use jpcm_core::controller::{build_nominal_mpc, ControlConfig};
use jpcm_core::dynamics::*;
use jpcm_core::factors::*;
use jpcm_core::fgo::{Factor, LmConfig, ManifoldValue, NoiseModel, VariableKey};
use jpcm_core::harness::{self, Rmse, RunLog, Scenario};
use jpcm_core::so3::{dexp_right, dexp_right_inv, Rotation};
use jpcm_core::trajgen::hover_ref;
use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scenario(name: &str, seed: u64) -> Scenario {
    let mut s = harness::builtin(name).expect("built-in scenario");
    s.seed = seed;
    s
}

fn run(s: &Scenario) -> (RunLog, f64) {
    let start = Instant::now();
    let log = harness::run_scenario(s).expect("scenario runs");
    (log, start.elapsed().as_secs_f64())
}

fn rmse(log: &RunLog, s: &Scenario) -> Rmse {
    harness::compute_rmse(log, s.transient).expect("non-empty log")
}

fn fmt3(v: &[f64; 3]) -> String {
    format!("({:.4}, {:.4}, {:.4})", v[0], v[1], v[2])
}

fn csv_bytes(log: &RunLog) -> Vec<u8> {
    let mut out = Vec::new();
    harness::write_csv(&mut out, log, false).expect("csv");
    out
}

fn noise_free_tracking() -> Outcome {
    let s = scenario("mpc-nl", 1);
    let (log, secs) = run(&s);
    let r = rmse(&log, &s);
    let pass = log.failure.is_none()
        && r.position.iter().all(|&e| e <= 0.02)
        && r.rotation.iter().all(|&e| e <= 0.02)
        && secs < 60.0;
    outcome(
        pass,
        format!("position {} m, rotation {} rad, {secs:.1} s", fmt3(&r.position), fmt3(&r.rotation)),
    )
}

struct SeedPair {
    seed: u64,
    nominal: Rmse,
    joint: Rmse,
    joint_log: RunLog,
}

fn noisy_runs() -> Vec<SeedPair> {
    SEEDS
        .iter()
        .map(|&seed| {
            let ns = scenario("nominal-mpc-noisy", seed);
            let js = scenario("jpcm-gi", seed);
            let (nominal_log, _) = run(&ns);
            let (joint_log, _) = run(&js);
            SeedPair {
                seed,
                nominal: rmse(&nominal_log, &ns),
                joint: rmse(&joint_log, &js),
                joint_log,
            }
        })
        .collect()
}

fn degradation(pairs: &[SeedPair]) -> Outcome {
    let r = &pairs[0].nominal;
    let pass = r.rotation.iter().any(|&e| e >= 0.08);
    outcome(pass, format!("nominal MPC rotation {} rad", fmt3(&r.rotation)))
}

fn improvement(pairs: &[SeedPair]) -> Outcome {
    let mut pass = true;
    let mut worst = [0.0f64; 3];
    for p in pairs {
        let rot_ok = (0..3).all(|a| p.joint.rotation[a] <= 0.05 && p.joint.rotation[a] < p.nominal.rotation[a]);
        let pos_ok = (0..3).filter(|&a| p.joint.position[a] <= p.nominal.position[a]).count() >= 2;
        pass &= rot_ok && pos_ok && p.joint_log.failure.is_none();
        for (w, r) in worst.iter_mut().zip(&p.joint.rotation) {
            *w = w.max(*r);
        }
        if !(rot_ok && pos_ok) {
            pass = false;
            eprintln!(
                "seed {}: JPCM rotation {} position {}, nominal rotation {} position {}",
                p.seed,
                fmt3(&p.joint.rotation),
                fmt3(&p.joint.position),
                fmt3(&p.nominal.rotation),
                fmt3(&p.nominal.position)
            );
        }
    }
    outcome(pass, format!("{} seeds, worst JPCM rotation {} rad", pairs.len(), fmt3(&worst)))
}

fn recovery() -> Outcome {
    let js = scenario("recovery-jpcm", 1);
    let ns = scenario("recovery-mpc", 1);
    let (jl, _) = run(&js);
    let (nl, _) = run(&ns);
    let d = js.disturbance.expect("disturbance").time;
    let je = harness::error_samples(&jl);
    let ne = harness::error_samples(&nl);
    let settle = harness::first_time_below(&je, d + 0.01, 0.05);
    let window_end = d + 5.0;
    let js_std = harness::attitude_error_std(&je, d, window_end).unwrap_or(f64::INFINITY);
    let ns_std = harness::attitude_error_std(&ne, d, window_end).unwrap_or(f64::INFINITY);
    let pass = settle.is_some_and(|t| t - d <= 5.0) && js_std < ns_std;
    outcome(
        pass,
        format!(
            "below 0.05 m after {}, attitude std {js_std:.4} vs {ns_std:.4} rad",
            settle.map_or("never".into(), |t| format!("{:.2} s", t - d))
        ),
    )
}

fn sliding_window(pairs: &[SeedPair]) -> Outcome {
    let s = scenario("sw-jpcm", 1);
    let (log, _) = run(&s);
    let r = rmse(&log, &s);
    let base = &pairs[0].joint;
    let ok_failures = log.failure.is_none() && log.fallback_count() == 0 && log.records.len() == s.steps();
    let within = (0..3).all(|a| r.position[a] <= 2.0 * base.position[a] && r.rotation[a] <= 2.0 * base.rotation[a]);
    outcome(
        ok_failures && within,
        format!(
            "{} fallbacks, position {} m, rotation {} rad",
            log.fallback_count(),
            fmt3(&r.position),
            fmt3(&r.rotation)
        ),
    )
}

fn fd3(f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Matrix3<f64> {
    let h = 1e-6;
    Matrix3::from_fn(|i, j| {
        let mut d = Vector3::zeros();
        d[j] = h;
        (f(&d)[i] - f(&-d)[i]) / (2.0 * h)
    })
}

fn rel3(a: &Matrix3<f64>, n: &Matrix3<f64>) -> f64 {
    a.iter().zip(n.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

fn jacobian_suite() -> Outcome {
    let start = Instant::now();
    let p = QuadParams::default();
    let limits = RotorLimits::from_params(&p);
    let kinks = [limits.min + limits.threshold, limits.max - limits.threshold];
    let mut r = rng(100);
    let mut worst = 0.0f64;
    let mut factor_worst = 0.0f64;
    let mut record = |f: &dyn Factor, v: Vec<ManifoldValue>| factor_worst = factor_worst.max(jacobian_mismatch(f, &v));
    for _ in 0..50 {
        let xi = state(&mut r);
        let xj = state(&mut r);
        let w = wrench(&mut r);
        let key = VariableKey::state(0);
        record(
            &PositioningFactor::new(key, xj, NoiseModel::isotropic(12, 0.1).unwrap()),
            vec![ManifoldValue::State(xi)],
        );
        let rel = Pose::of_state(&xi).between(&Pose::of_state(&xj));
        let lidar = LidarFactor::new(&RelPoseMeas::new(0, 1, rel, DMatrix::identity(6, 6) * 1e-4).unwrap()).unwrap();
        let xk = QuadState {
            position: xj.position + vec3(&mut r, 0.1),
            ..xj
        };
        record(&lidar, vec![ManifoldValue::State(xi), ManifoldValue::State(xk)]);
        let dynamics = DynamicsFactor::new(
            key,
            VariableKey::wrench(0),
            VariableKey::state(1),
            0.01,
            p,
            NoiseModel::isotropic(12, 1e-2).unwrap(),
        )
        .unwrap();
        record(&dynamics, vec![ManifoldValue::State(xi), ManifoldValue::Wrench(w), ManifoldValue::State(xj)]);
        let rp = RefPoint {
            position: xj.position,
            rotation: xj.rotation,
            velocity: xj.velocity,
        };
        record(&ReferenceFactor::new(key, rp, NoiseModel::isotropic(9, 0.1).unwrap()), vec![ManifoldValue::State(xi)]);
        let u = loop {
            let u = rotors(&mut r, 100.0, 900.0);
            if u.0.iter().all(|v| kinks.iter().all(|k| (v - k).abs() > 1e-3)) {
                break u;
            }
        };
        let caf = CafFactor::new(VariableKey::wrench(0), VariableKey::rotor(0), p, NoiseModel::isotropic(4, 1e-3).unwrap());
        record(&caf, vec![ManifoldValue::Wrench(w), ManifoldValue::Rotor(u)]);
        let clf = ClfFactor::new(VariableKey::rotor(0), limits, NoiseModel::isotropic(4, 10.0).unwrap()).unwrap();
        record(&clf, vec![ManifoldValue::Rotor(u)]);
        let rate = InputRateFactor::new(
            VariableKey::wrench(0),
            VariableKey::wrench(1),
            NoiseModel::from_sigmas(&[1.0, 0.5, 0.5, 0.5]).unwrap(),
        );
        record(&rate, vec![ManifoldValue::Wrench(w), ManifoldValue::Wrench(wrench(&mut r))]);

        let om = vec3(&mut r, 1.0).normalize() * r.random_range(0.0..3.0);
        let rw = Rotation::exp(&om);
        worst = worst.max(rel3(&dexp_right(&om), &fd3(|d| Rotation::exp(&(om + d)).local(&rw))));
        worst = worst.max(rel3(&dexp_right_inv(&om), &fd3(|d| rw.retract(d).log())));
        let [i1, i2, i3] = p.inertia;
        let g = gyroscopic_jacobian(&xi.angular_velocity, &p.inertia);
        let numeric = fd3(|d| {
            let o = xi.angular_velocity + d;
            let c = o.cross(&Vector3::new(i1 * o.x, i2 * o.y, i3 * o.z));
            Vector3::new(c.x / i1, c.y / i2, c.z / i3)
        });
        worst = worst.max(rel3(&g, &numeric));
    }
    let worst = worst.max(factor_worst);
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-5 && secs < 10.0, format!("worst relative mismatch {worst:.2e}, {secs:.2} s"))
}

fn lie_group_suite() -> Outcome {
    let mut r = rng(101);
    let mut round_trip = 0.0f64;
    let mut second_order = 0.0f64;
    for _ in 0..100 {
        let w = vec3(&mut r, 1.0).normalize() * r.random_range(0.0..3.1);
        round_trip = round_trip.max((Rotation::exp(&w).log() - w).amax());
        let d = vec3(&mut r, 1e-3);
        let lhs = Rotation::exp(&(w + d));
        let rhs = Rotation::exp(&w).retract(&(dexp_right(&w) * d));
        second_order = second_order.max(lhs.local(&rhs).norm() / d.norm_squared());
    }
    let mut jump = 0.0f64;
    for axis in [Vector3::x(), Vector3::new(1.0, -2.0, 0.5).normalize()] {
        for eps in [1e-9, 1e-8, 1e-7, 1e-6, 1e-5] {
            let below = axis * eps * (1.0 - 1e-6);
            let above = axis * eps * (1.0 + 1e-6);
            jump = jump.max((Rotation::exp(&below).matrix() - Rotation::exp(&above).matrix()).amax());
            jump = jump.max((dexp_right(&below) - dexp_right(&above)).amax());
            jump = jump.max((Rotation::exp(&below).log() - below).amax());
        }
    }
    let pass = round_trip < 1e-8 && second_order < 10.0 && jump < 1e-10;
    outcome(
        pass,
        format!("round trip {round_trip:.1e}, second-order ratio {second_order:.2}, branch jump {jump:.1e}"),
    )
}

fn equilibrium() -> Outcome {
    let p = QuadParams::default();
    let start = QuadState::hover_at(Vector3::new(0.0, 0.0, 1.0));
    let mut sim = Simulator::new(p, ProcessNoise::default(), start, 0);
    let u = allocate_inverse(&p.hover_wrench(), &p).unwrap();
    let mut drift = 0.0f64;
    for _ in 0..100 {
        let before = *sim.state();
        drift = drift.max(sim.step(&u, 0.01).local(&before).amax());
    }

    let cfg = ControlConfig::default();
    let refs = vec![hover_ref(start.position); cfg.horizon];
    let solved = build_nominal_mpc(&start, &refs, &cfg, &p).unwrap().solve_lm(&LmConfig::default()).unwrap();
    let w0 = solved.values.wrench(&VariableKey::wrench(0)).unwrap();
    let wrench_err = (w0.as_vector() - p.hover_wrench().as_vector()).amax();

    let mut r = rng(102);
    let mut round = 0.0f64;
    for _ in 0..100 {
        let u = rotors(&mut r, 10.0, 1000.0);
        let back = allocate_inverse(&allocate(&u, &p), &p).unwrap();
        round = round.max(((back.0 - u.0).component_div(&u.0)).amax());
    }
    let pass = drift < 1e-9 && wrench_err < 1e-6 && round < 1e-9;
    outcome(
        pass,
        format!("hover drift {drift:.1e}/step, MPC wrench error {wrench_err:.1e}, allocation round trip {round:.1e}"),
    )
}

fn clf_exactness() -> Outcome {
    let limits = RotorLimits::from_params(&QuadParams::default());
    let (lo, hi) = (limits.min + limits.threshold, limits.max - limits.threshold);
    let expected = |u: f64| {
        if u < lo {
            lo - u
        } else if u >= hi {
            u - hi
        } else {
            0.0
        }
    };
    let value = |u: f64| clf_error(&RotorSpeeds::uniform(u), &limits)[0];
    let mut samples = vec![limits.min, limits.max, lo, hi];
    samples.extend((0..=200).map(|k| limits.min - 100.0 + k as f64 * (limits.max - limits.min + 200.0) / 200.0));
    let exact = samples.iter().all(|&u| value(u) == expected(u));
    let bounds = value(limits.min) == limits.threshold && value(limits.max) == limits.threshold;
    let eps = 1e-9;
    let continuous = [lo, hi].iter().all(|&b| (value(b - eps) - value(b + eps)).abs() < 1e-8);
    outcome(
        exact && bounds && continuous,
        format!("{} sample points, value at bounds {} / {}", samples.len(), value(limits.min), value(limits.max)),
    )
}

fn determinism(pairs: &[SeedPair]) -> Outcome {
    let s = scenario("jpcm-gi", pairs[0].seed);
    let (again, _) = run(&s);
    let a = csv_bytes(&pairs[0].joint_log);
    let b = csv_bytes(&again);
    outcome(a == b && !a.is_empty(), format!("{} CSV bytes, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (6, "jacobian suite", jacobian_suite()),
        (7, "lie group properties", lie_group_suite()),
        (8, "equilibrium oracles", equilibrium()),
        (9, "limit penalty exactness", clf_exactness()),
        (1, "noise-free tracking", noise_free_tracking()),
    ];
    let pairs = noisy_runs();
    results.push((2, "degradation under noise", degradation(&pairs)));
    results.push((3, "joint estimation improvement", improvement(&pairs)));
    results.push((4, "disturbance recovery", recovery()));
    results.push((5, "sliding window feasibility", sliding_window(&pairs)));
    results.push((10, "determinism", determinism(&pairs)));
    results.sort_by_key(|(n, _, _)| *n);

    for (n, name, o) in &results {
        println!("criterion {n:>2} {name:<30} {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if results.iter().all(|(_, _, o)| o.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
