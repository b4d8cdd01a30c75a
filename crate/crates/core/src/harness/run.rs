use nalgebra::{DMatrix, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::scenario::Scenario;
use crate::controller::{Controller, ControllerMode};
use crate::dynamics::{measure, QuadState, RotorSpeeds, Simulator, Wrench};
use crate::error::Result;
use crate::factors::{Pose, RefPoint, RelPoseMeas};

/// Position error beyond which a run is declared lost.
const LOST_DISTANCE: f64 = 50.0;

/// Separates the measurement stream from the process-noise stream.
const MEASUREMENT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub truth: QuadState,
    pub measured: QuadState,
    pub estimate: QuadState,
    pub reference: RefPoint,
    pub rotors: RotorSpeeds,
    pub wrench: Wrench,
    pub iterations: usize,
    pub fallback: bool,
}

impl StepRecord {
    pub fn position_error(&self) -> Vector3<f64> {
        self.truth.position - self.reference.position
    }

    /// `Log(R_refᵀ R_true)`.
    pub fn rotation_error(&self) -> Vector3<f64> {
        self.truth.rotation.local(&self.reference.rotation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub name: String,
    pub mode: ControllerMode,
    pub records: Vec<StepRecord>,
    /// Solve wall time per record, milliseconds. Not part of equality.
    pub solve_ms: Vec<f64>,
    /// Set when the run stopped early.
    pub failure: Option<String>,
}

impl RunLog {
    pub fn fallback_count(&self) -> usize {
        self.records.iter().filter(|r| r.fallback).count()
    }

    /// Same records, ignoring wall-clock timings.
    pub fn same_trajectory(&self, other: &RunLog) -> bool {
        self.name == other.name
            && self.mode == other.mode
            && self.records == other.records
            && self.failure == other.failure
    }
}

fn tangent_noise<R: rand::Rng>(rng: &mut R, sigmas: &[f64; 6]) -> Vector6<f64> {
    Vector6::from_fn(|i, _| sigmas[i].sqrt() * { let z: f64 = StandardNormal.sample(rng); z })
}

/// Relative pose between consecutive true poses, perturbed in the tangent
/// space by the configured relative-pose covariance.
pub fn synthesize_rel_pose<R: rand::Rng>(
    i: usize,
    prev: &QuadState,
    curr: &QuadState,
    variances: &[f64; 6],
    rng: &mut R,
) -> Result<RelPoseMeas> {
    let exact = Pose::of_state(prev).between(&Pose::of_state(curr));
    let n = tangent_noise(rng, variances);
    let noisy = Pose {
        rotation: exact.rotation.retract(&n.fixed_rows::<3>(0).into_owned()),
        translation: exact.translation + n.fixed_rows::<3>(3),
    };
    let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(variances));
    RelPoseMeas::new(i, i + 1, noisy, cov)
}

/// Closed-loop simulation: measure, control, propagate the truth.
pub fn run_scenario(s: &Scenario) -> Result<RunLog> {
    s.validate()?;
    let dt = s.control.dt;
    let initial = s.reference.initial_state(0.0);
    let mut sim = Simulator::new(s.params, s.process_noise, initial, s.seed);
    let mut meas_rng = ChaCha8Rng::seed_from_u64(s.seed ^ MEASUREMENT_STREAM);
    let mut controller = Controller::new(s.mode, s.control.clone(), s.params, s.reference)?;

    let steps = s.steps();
    let mut log = RunLog {
        name: s.name.clone(),
        mode: s.mode,
        records: Vec::with_capacity(steps),
        solve_ms: Vec::with_capacity(steps),
        failure: None,
    };
    let mut disturbed = false;
    let mut previous_truth: Option<QuadState> = None;

    for k in 0..steps {
        let t = k as f64 * dt;
        if let Some(d) = &s.disturbance {
            if !disturbed && t + 1e-9 >= d.time {
                sim.displace(&d.offset);
                disturbed = true;
            }
        }
        let truth = *sim.state();
        let measured = measure(&truth, &s.measurement_noise, &mut meas_rng);
        let rel_pose = match (&previous_truth, s.lidar && s.mode == ControllerMode::SwJpcm) {
            (Some(prev), true) => Some(synthesize_rel_pose(
                k - 1,
                prev,
                &truth,
                &s.control.lidar_covariance,
                &mut meas_rng,
            )?),
            _ => None,
        };

        let out = match controller.step(&measured, rel_pose) {
            Ok(out) => out,
            Err(e) => {
                log.failure = Some(format!("controller error at t = {t:.3}: {e}"));
                break;
            }
        };
        log.records.push(StepRecord {
            t,
            truth,
            measured,
            estimate: out.estimate,
            reference: s.reference.at(t),
            rotors: out.rotors,
            wrench: out.wrench,
            iterations: out.diagnostics.iterations,
            fallback: out.diagnostics.fallback,
        });
        log.solve_ms.push(out.diagnostics.solve_time.as_secs_f64() * 1e3);

        previous_truth = Some(truth);
        let next = *sim.step(&out.rotors, dt);
        let lost = (next.position - s.reference.at(t + dt).position).norm() > LOST_DISTANCE;
        if !next.is_finite() || lost {
            log.failure = Some(format!("vehicle diverged at t = {:.3}", t + dt));
            break;
        }
    }
    Ok(log)
}
