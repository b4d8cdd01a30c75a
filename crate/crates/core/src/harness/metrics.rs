use nalgebra::Vector3;

use super::run::RunLog;
use crate::error::{JpcmError, Result};

/// Tracking error at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub t: f64,
    pub position: Vector3<f64>,
    pub rotation: Vector3<f64>,
}

/// Per-axis root-mean-square tracking errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rmse {
    pub position: [f64; 3],
    pub rotation: [f64; 3],
    pub samples: usize,
}

pub fn error_samples(log: &RunLog) -> Vec<ErrorSample> {
    log.records
        .iter()
        .map(|r| ErrorSample {
            t: r.t,
            position: r.position_error(),
            rotation: r.rotation_error(),
        })
        .collect()
}

/// RMSE over samples with `t >= transient`.
pub fn rmse_of(samples: &[ErrorSample], transient: f64) -> Result<Rmse> {
    let kept: Vec<&ErrorSample> = samples.iter().filter(|s| s.t >= transient).collect();
    if kept.is_empty() {
        return Err(JpcmError::EmptyLog);
    }
    let n = kept.len() as f64;
    let mut pos = [0.0; 3];
    let mut rot = [0.0; 3];
    for s in &kept {
        for a in 0..3 {
            pos[a] += s.position[a] * s.position[a];
            rot[a] += s.rotation[a] * s.rotation[a];
        }
    }
    Ok(Rmse {
        position: pos.map(|v| (v / n).sqrt()),
        rotation: rot.map(|v| (v / n).sqrt()),
        samples: kept.len(),
    })
}

pub fn compute_rmse(log: &RunLog, transient: f64) -> Result<Rmse> {
    rmse_of(&error_samples(log), transient)
}

/// Population standard deviation of the attitude-error norm over `[t0, t1]`.
pub fn attitude_error_std(samples: &[ErrorSample], t0: f64, t1: f64) -> Result<f64> {
    let v: Vec<f64> = samples
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .map(|s| s.rotation.norm())
        .collect();
    if v.is_empty() {
        return Err(JpcmError::EmptyLog);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Ok((v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64).sqrt())
}

/// First time at or after `after` when the position error norm drops below `threshold`.
pub fn first_time_below(samples: &[ErrorSample], after: f64, threshold: f64) -> Option<f64> {
    samples
        .iter()
        .filter(|s| s.t >= after)
        .find(|s| s.position.norm() < threshold)
        .map(|s| s.t)
}
