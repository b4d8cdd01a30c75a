//! Experiment configuration.
//!
//! A scenario file is flat TOML: one `key = value` per line, every key
//! optional. Unknown keys are rejected. See `configs/` for the shipped
//! experiments and [`ScenarioFile`] for the full key list.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::controller::{ControlConfig, ControllerMode};
use crate::dynamics::{MeasurementNoise, ProcessNoise, QuadParams};
use crate::error::{JpcmError, Result};
use crate::fgo::LmConfig;
use crate::trajgen::{CircleSpec, Reference, ReferenceAttitude};

/// Instantaneous push applied to the true vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub time: f64,
    pub offset: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mode: ControllerMode,
    pub duration: f64,
    pub seed: u64,
    /// Initial interval excluded from RMSE.
    pub transient: f64,
    pub measurement_noise: MeasurementNoise,
    pub process_noise: ProcessNoise,
    pub disturbance: Option<Disturbance>,
    pub lidar: bool,
    pub control: ControlConfig,
    pub params: QuadParams,
    pub reference: Reference,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(JpcmError::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if let Some(d) = &self.disturbance {
            if !(d.time >= 0.0 && d.time < self.duration) {
                return Err(JpcmError::Config(format!(
                    "disturbance time {} outside [0, {})",
                    d.time, self.duration
                )));
            }
        }
        if self.mode == ControllerMode::SwJpcm && self.lidar && self.control.window < 2 {
            return Err(JpcmError::Config("relative poses need a window of at least 2".into()));
        }
        if let Reference::Circle(spec) = &self.reference {
            spec.validate()?;
        }
        self.control.validate()?;
        self.params.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)?;
        let scenario = file.into_scenario()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.control.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Circle,
    Hover,
}

/// On-disk schema. Every key has a default equal to the reference setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub mode: ControllerMode,
    pub duration: f64,
    pub seed: u64,
    pub transient: f64,

    // measurement noise (positioning output)
    pub meas_sigma_position: f64,
    pub meas_sigma_rotation: f64,
    pub meas_sigma_velocity: f64,
    pub meas_sigma_rate: f64,

    // process noise (truth simulator)
    pub thrust_noise: f64,
    pub rate_noise: f64,

    pub disturbance_time: Option<f64>,
    pub disturbance_offset: [f64; 3],

    pub lidar: bool,

    // controller
    pub dt: f64,
    pub horizon: usize,
    pub window: usize,
    pub ref_covariance: [f64; 9],
    pub terminal_covariance: [f64; 9],
    pub rate_covariance: [f64; 4],
    pub dynamics_covariance: [f64; 12],
    pub positioning_covariance: [f64; 12],
    pub lidar_covariance: [f64; 6],
    pub caf_covariance: [f64; 4],
    pub clf_covariance: f64,
    pub pin_covariance: f64,
    pub lm_max_iter: usize,
    pub lm_lambda_init: f64,
    pub lm_lambda_scale: f64,
    pub lm_abs_tol: f64,
    pub lm_rel_tol: f64,

    // airframe
    pub mass: f64,
    pub gravity: f64,
    pub inertia: [f64; 3],
    pub arm_length: f64,
    pub thrust_coeff: f64,
    pub moment_coeff: f64,
    pub rotor_min: f64,
    pub rotor_max: f64,
    pub rotor_threshold: f64,

    // reference
    pub trajectory: TrajectoryKind,
    pub circle_radius: f64,
    pub circle_speed: f64,
    pub circle_center: [f64; 3],
    pub circle_normal: [f64; 3],
    pub reference_attitude: ReferenceAttitude,
    pub hover_position: [f64; 3],
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let c = ControlConfig::default();
        let p = QuadParams::default();
        let circle = CircleSpec::default();
        Self {
            name: "scenario".into(),
            mode: ControllerMode::JpcmGi,
            duration: 10.0,
            seed: 1,
            transient: 1.0,
            meas_sigma_position: 0.20,
            meas_sigma_rotation: 0.05,
            meas_sigma_velocity: 0.01,
            meas_sigma_rate: 0.001,
            thrust_noise: 1.0,
            rate_noise: 0.02,
            disturbance_time: None,
            disturbance_offset: [0.0; 3],
            lidar: false,
            dt: c.dt,
            horizon: c.horizon,
            window: c.window,
            ref_covariance: c.ref_covariance,
            terminal_covariance: c.terminal_covariance,
            rate_covariance: c.rate_covariance,
            dynamics_covariance: c.dynamics_covariance,
            positioning_covariance: c.positioning_covariance,
            lidar_covariance: c.lidar_covariance,
            caf_covariance: c.caf_covariance,
            clf_covariance: c.clf_covariance,
            pin_covariance: c.pin_covariance,
            lm_max_iter: c.lm.max_iter,
            lm_lambda_init: c.lm.lambda_init,
            lm_lambda_scale: c.lm.lambda_scale,
            lm_abs_tol: c.lm.abs_tol,
            lm_rel_tol: c.lm.rel_tol,
            mass: p.mass,
            gravity: p.gravity,
            inertia: p.inertia,
            arm_length: p.arm_length,
            thrust_coeff: p.thrust_coeff,
            moment_coeff: p.moment_coeff,
            rotor_min: p.rotor_min,
            rotor_max: p.rotor_max,
            rotor_threshold: p.rotor_threshold,
            trajectory: TrajectoryKind::Circle,
            circle_radius: circle.radius,
            circle_speed: circle.speed,
            circle_center: circle.center,
            circle_normal: circle.normal,
            reference_attitude: circle.attitude,
            hover_position: [0.0, 0.0, 1.0],
        }
    }
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let params = QuadParams {
            mass: self.mass,
            inertia: self.inertia,
            arm_length: self.arm_length,
            thrust_coeff: self.thrust_coeff,
            moment_coeff: self.moment_coeff,
            gravity: self.gravity,
            rotor_min: self.rotor_min,
            rotor_max: self.rotor_max,
            rotor_threshold: self.rotor_threshold,
        };
        let control = ControlConfig {
            horizon: self.horizon,
            window: self.window,
            dt: self.dt,
            ref_covariance: self.ref_covariance,
            terminal_covariance: self.terminal_covariance,
            rate_covariance: self.rate_covariance,
            dynamics_covariance: self.dynamics_covariance,
            positioning_covariance: self.positioning_covariance,
            lidar_covariance: self.lidar_covariance,
            caf_covariance: self.caf_covariance,
            clf_covariance: self.clf_covariance,
            pin_covariance: self.pin_covariance,
            lm: LmConfig {
                max_iter: self.lm_max_iter,
                lambda_init: self.lm_lambda_init,
                lambda_scale: self.lm_lambda_scale,
                abs_tol: self.lm_abs_tol,
                rel_tol: self.lm_rel_tol,
                ..LmConfig::default()
            },
        };
        let reference = match self.trajectory {
            TrajectoryKind::Circle => Reference::Circle(CircleSpec {
                radius: self.circle_radius,
                speed: self.circle_speed,
                center: self.circle_center,
                normal: self.circle_normal,
                attitude: self.reference_attitude,
                gravity: self.gravity,
            }),
            TrajectoryKind::Hover => Reference::Hover(Vector3::from(self.hover_position)),
        };
        Ok(Scenario {
            name: self.name,
            mode: self.mode,
            duration: self.duration,
            seed: self.seed,
            transient: self.transient,
            measurement_noise: MeasurementNoise {
                position: self.meas_sigma_position,
                rotation: self.meas_sigma_rotation,
                velocity: self.meas_sigma_velocity,
                angular_velocity: self.meas_sigma_rate,
            },
            process_noise: ProcessNoise {
                thrust_sigma: self.thrust_noise,
                rate_sigma: self.rate_noise,
            },
            disturbance: self.disturbance_time.map(|time| Disturbance {
                time,
                offset: Vector3::from(self.disturbance_offset),
            }),
            lidar: self.lidar,
            control,
            params,
            reference,
        })
    }
}

impl Default for Scenario {
    fn default() -> Self {
        ScenarioFile::default()
            .into_scenario()
            .expect("default scenario is valid")
    }
}

/// The shipped experiment files, by name.
pub const BUILTIN: &[(&str, &str)] = &[
    ("mpc-nl", include_str!("../../configs/mpc-nl.toml")),
    ("nominal-mpc-noisy", include_str!("../../configs/nominal-mpc-noisy.toml")),
    ("jpcm-gi", include_str!("../../configs/jpcm-gi.toml")),
    ("recovery-mpc", include_str!("../../configs/recovery-mpc.toml")),
    ("recovery-jpcm", include_str!("../../configs/recovery-jpcm.toml")),
    ("sw-jpcm", include_str!("../../configs/sw-jpcm.toml")),
];

pub fn builtin(name: &str) -> Result<Scenario> {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| JpcmError::Config(format!("no built-in scenario named {name:?}")))
        .and_then(|(_, text)| Scenario::from_toml_str(text))
}
