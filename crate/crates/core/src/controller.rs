//! Receding-horizon controllers built on the factor graph.
//!
//! Three graph variants share one control chain (dynamics, reference,
//! input-rate, allocation and limit factors over `N` predicted steps):
//!
//! * nominal MPC pins the current state to the positioning output;
//! * JPCM-GI replaces the pin with a positioning factor so the current state
//!   is estimated together with the inputs;
//! * SW-JPCM additionally keeps `W - 1` past states tied by positioning and
//!   relative-pose factors.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{allocate_inverse, allocate_inverse_saturated, QuadParams, QuadState, RotorSpeeds, Wrench};
use crate::error::{JpcmError, Result};
use crate::factors::{
    CafFactor, ClfFactor, DynamicsFactor, InputRateFactor, LidarFactor, PositioningFactor, RefPoint,
    ReferenceFactor, RelPoseMeas, RotorLimits,
};
use crate::fgo::{FactorGraph, LmConfig, ManifoldValue, NoiseModel, SolveStatus, Values, VariableKey};
use crate::trajgen::Reference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerMode {
    NominalMpc,
    JpcmGi,
    SwJpcm,
}

impl std::fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControllerMode::NominalMpc => "nominal-mpc",
            ControllerMode::JpcmGi => "jpcm-gi",
            ControllerMode::SwJpcm => "sw-jpcm",
        })
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = JpcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal-mpc" => Ok(ControllerMode::NominalMpc),
            "jpcm-gi" => Ok(ControllerMode::JpcmGi),
            "sw-jpcm" => Ok(ControllerMode::SwJpcm),
            other => Err(JpcmError::Config(format!("unknown controller mode {other:?}"))),
        }
    }
}

/// Weights of the joint problem. All matrices are diagonal covariances
/// (variances), state blocks ordered `(p, R, v)` or `(p, R, v, ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub horizon: usize,
    pub window: usize,
    pub dt: f64,
    /// Running reference covariance `Q_k`.
    pub ref_covariance: [f64; 9],
    /// Terminal reference covariance `Q_N`.
    pub terminal_covariance: [f64; 9],
    /// Wrench-increment covariance `R_t` on `(T_z, M_x, M_y, M_z)`.
    pub rate_covariance: [f64; 4],
    /// Dynamics factor covariance `D_l`.
    pub dynamics_covariance: [f64; 12],
    /// Positioning covariance `P`.
    pub positioning_covariance: [f64; 12],
    /// Relative-pose covariance, `(rotation, translation)`.
    pub lidar_covariance: [f64; 6],
    /// Allocation factor covariance on `(T_z, M)`.
    pub caf_covariance: [f64; 4],
    /// Control limit covariance `Q_lim`, per rotor.
    pub clf_covariance: f64,
    /// Covariance of the prior that pins the nominal MPC's initial state.
    pub pin_covariance: f64,
    pub lm: LmConfig,
}

fn sq(v: f64) -> f64 {
    v * v
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            window: 10,
            dt: 0.01,
            ref_covariance: [
                sq(0.03), sq(0.03), sq(0.03), sq(0.3), sq(0.3), sq(0.3), sq(3.0), sq(3.0), sq(3.0),
            ],
            terminal_covariance: [
                sq(0.005), sq(0.005), sq(0.005), sq(0.3), sq(0.3), sq(0.3), sq(3.0), sq(3.0), sq(3.0),
            ],
            rate_covariance: [1.0, 0.5, 0.5, 0.5],
            dynamics_covariance: [sq(1e-4); 12],
            positioning_covariance: [
                sq(0.2), sq(0.2), sq(0.2), sq(0.05), sq(0.05), sq(0.05), sq(0.01), sq(0.01), sq(0.01),
                sq(0.001), sq(0.001), sq(0.001),
            ],
            lidar_covariance: [sq(0.001); 6],
            caf_covariance: [sq(1e-3); 4],
            clf_covariance: sq(10.0),
            pin_covariance: 1e-8,
            lm: LmConfig::default(),
        }
    }
}

fn diag_noise(variances: &[f64]) -> Result<NoiseModel> {
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(JpcmError::NotPositiveDefinite(format!("variance {v}")));
    }
    let sigmas: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    NoiseModel::from_sigmas(&sigmas)
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(JpcmError::Config("horizon must be at least 1".into()));
        }
        if self.window < 1 {
            return Err(JpcmError::Config("window must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(JpcmError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        self.noises().map(|_| ())
    }

    fn noises(&self) -> Result<Noises> {
        Ok(Noises {
            reference: diag_noise(&self.ref_covariance)?,
            terminal: diag_noise(&self.terminal_covariance)?,
            rate: diag_noise(&self.rate_covariance)?,
            dynamics: diag_noise(&self.dynamics_covariance)?,
            positioning: diag_noise(&self.positioning_covariance)?,
            caf: diag_noise(&self.caf_covariance)?,
            clf: diag_noise(&[self.clf_covariance; 4])?,
            pin: diag_noise(&[self.pin_covariance; 12])?,
        })
    }

    pub fn lidar_covariance_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.lidar_covariance))
    }
}

struct Noises {
    reference: NoiseModel,
    terminal: NoiseModel,
    rate: NoiseModel,
    dynamics: NoiseModel,
    positioning: NoiseModel,
    caf: NoiseModel,
    clf: NoiseModel,
    pin: NoiseModel,
}

/// One positioning epoch in the sliding window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEntry {
    pub index: usize,
    pub measurement: QuadState,
    /// Relative pose from the previous epoch to this one.
    pub rel_pose: Option<RelPoseMeas>,
}

/// The last `W` positioning epochs.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    capacity: usize,
    entries: VecDeque<WindowEntry>,
}

impl WindowBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn push(&mut self, entry: WindowEntry) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if entry.index <= last.index {
                return Err(JpcmError::Config(format!(
                    "window timestamps must increase: {} after {}",
                    entry.index, last.index
                )));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &WindowEntry> {
        self.entries.iter()
    }

    pub fn latest(&self) -> Option<&WindowEntry> {
        self.entries.back()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Predicted states `x_0..x_N`, wrenches and rotor speeds `0..N-1`,
/// indexed relative to the current epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Horizon {
    pub states: Vec<QuadState>,
    pub wrenches: Vec<Wrench>,
    pub rotors: Vec<RotorSpeeds>,
}

impl Horizon {
    pub fn len(&self) -> usize {
        self.wrenches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wrenches.is_empty()
    }
}

/// Cold start: current estimate, then reference points with hover inputs.
pub fn cold_start(x0: &QuadState, refs: &[RefPoint], params: &QuadParams) -> Horizon {
    let mut states = Vec::with_capacity(refs.len() + 1);
    states.push(*x0);
    states.extend(refs.iter().map(|r| QuadState {
        angular_velocity: x0.angular_velocity,
        ..r.to_state()
    }));
    Horizon {
        states,
        wrenches: vec![params.hover_wrench(); refs.len()],
        rotors: vec![RotorSpeeds::uniform(params.hover_rotor_speed()); refs.len()],
    }
}

/// Drops the first step and duplicates the last one.
pub fn shift_warm_start(previous: &Horizon) -> Horizon {
    fn shift<T: Copy>(v: &[T]) -> Vec<T> {
        let mut out: Vec<T> = v.iter().skip(1).copied().collect();
        if let Some(last) = v.last() {
            out.push(*last);
        }
        out
    }
    Horizon {
        states: shift(&previous.states),
        wrenches: shift(&previous.wrenches),
        rotors: shift(&previous.rotors),
    }
}

/// Adds `x_{base+1..base+N}`, the inputs and every control-side factor.
/// `x_base` must already be in the graph.
fn add_control_chain(
    graph: &mut FactorGraph,
    base: usize,
    refs: &[RefPoint],
    cfg: &ControlConfig,
    params: &QuadParams,
    noises: &Noises,
) -> Result<()> {
    let n = cfg.horizon;
    let hover_u = RotorSpeeds::uniform(params.hover_rotor_speed());
    let limits = RotorLimits::from_params(params);
    for (k, r) in refs.iter().enumerate().take(n) {
        let (x, w, u, x_next) = (
            VariableKey::state(base + k),
            VariableKey::wrench(base + k),
            VariableKey::rotor(base + k),
            VariableKey::state(base + k + 1),
        );
        graph.add_variable(w, ManifoldValue::Wrench(params.hover_wrench()))?;
        graph.add_variable(u, ManifoldValue::Rotor(hover_u))?;
        graph.add_variable(x_next, ManifoldValue::State(r.to_state()))?;
        graph.add_factor(DynamicsFactor::new(x, w, x_next, cfg.dt, *params, noises.dynamics.clone())?)?;
        let noise = if k + 1 == n { &noises.terminal } else { &noises.reference };
        graph.add_factor(ReferenceFactor::new(x_next, *r, noise.clone()))?;
        graph.add_factor(CafFactor::new(w, u, *params, noises.caf.clone()))?;
        graph.add_factor(ClfFactor::new(u, limits, noises.clf.clone())?)?;
        if k > 0 {
            graph.add_factor(InputRateFactor::new(
                VariableKey::wrench(base + k - 1),
                w,
                noises.rate.clone(),
            ))?;
        }
    }
    Ok(())
}

fn check_refs(refs: &[RefPoint], cfg: &ControlConfig) -> Result<()> {
    if refs.len() != cfg.horizon {
        return Err(JpcmError::ReferenceLength {
            expected: cfg.horizon,
            got: refs.len(),
        });
    }
    Ok(())
}

/// MPC with the initial state pinned to `x0`; variables are keyed from 0.
pub fn build_nominal_mpc(
    x0: &QuadState,
    refs: &[RefPoint],
    cfg: &ControlConfig,
    params: &QuadParams,
) -> Result<FactorGraph> {
    build_nominal_at(0, x0, refs, cfg, params)
}

fn build_nominal_at(
    base: usize,
    x0: &QuadState,
    refs: &[RefPoint],
    cfg: &ControlConfig,
    params: &QuadParams,
) -> Result<FactorGraph> {
    check_refs(refs, cfg)?;
    let noises = cfg.noises()?;
    let mut graph = FactorGraph::new();
    let key = VariableKey::state(base);
    graph.add_variable(key, ManifoldValue::State(*x0))?;
    graph.add_factor(PositioningFactor::prior(key, *x0, noises.pin.clone()))?;
    add_control_chain(&mut graph, base, refs, cfg, params, &noises)?;
    Ok(graph)
}

/// Joint graph over the buffered epochs and the predicted horizon. The
/// newest epoch is the current state; it is estimated, not pinned.
pub fn build_jpcm(
    buffer: &WindowBuffer,
    refs: &[RefPoint],
    cfg: &ControlConfig,
    params: &QuadParams,
) -> Result<FactorGraph> {
    check_refs(refs, cfg)?;
    let current = buffer.latest().ok_or(JpcmError::EmptyBuffer)?.index;
    let noises = cfg.noises()?;
    let mut graph = FactorGraph::new();
    for entry in buffer.entries() {
        let key = VariableKey::state(entry.index);
        graph.add_variable(key, ManifoldValue::State(entry.measurement))?;
        graph.add_factor(PositioningFactor::new(key, entry.measurement, noises.positioning.clone()))?;
        if let Some(meas) = &entry.rel_pose {
            if graph.values().contains(&VariableKey::state(meas.i)) && meas.j == entry.index {
                graph.add_factor(LidarFactor::new(meas)?)?;
            }
        }
    }
    add_control_chain(&mut graph, current, refs, cfg, params, &noises)?;
    Ok(graph)
}

/// Per-step solver report.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub initial_error: f64,
    pub final_error: f64,
    pub status: Option<SolveStatus>,
    pub solve_time: Duration,
    pub cold_start: bool,
    /// The solve failed and the previous input was held.
    pub fallback: bool,
    /// The first wrench needed negative squared rotor speeds and was clipped.
    pub saturated: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub rotors: RotorSpeeds,
    pub wrench: Wrench,
    /// Solved current state (the pinned measurement for nominal MPC).
    pub estimate: QuadState,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone)]
struct Solution {
    index: usize,
    horizon: Horizon,
    /// Past epochs `(index, state)` excluding the current one.
    past: Vec<(usize, QuadState)>,
}

/// Stateful receding-horizon loop.
#[derive(Debug, Clone)]
pub struct Controller {
    mode: ControllerMode,
    cfg: ControlConfig,
    params: QuadParams,
    reference: Reference,
    buffer: WindowBuffer,
    previous: Option<Solution>,
    last_output: Option<(RotorSpeeds, Wrench)>,
    next_index: usize,
}

impl Controller {
    pub fn new(
        mode: ControllerMode,
        cfg: ControlConfig,
        params: QuadParams,
        reference: Reference,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        let window = match mode {
            ControllerMode::SwJpcm => cfg.window,
            _ => 1,
        };
        Ok(Self {
            mode,
            cfg,
            params,
            reference,
            buffer: WindowBuffer::new(window),
            previous: None,
            last_output: None,
            next_index: 0,
        })
    }

    pub fn mode(&self) -> ControllerMode {
        self.mode
    }

    pub fn config(&self) -> &ControlConfig {
        &self.cfg
    }

    pub fn buffer(&self) -> &WindowBuffer {
        &self.buffer
    }

    /// Index the next call to [`Controller::step`] will use.
    pub fn next_index(&self) -> usize {
        self.next_index
    }

    /// Graph for the current buffer and references, with its initial values
    /// set from the warm start. Exposed for inspection.
    pub fn build_graph(&self, measurement: &QuadState) -> Result<(FactorGraph, bool)> {
        let index = self.buffer.latest().map(|e| e.index).unwrap_or(self.next_index);
        let t_next = (index + 1) as f64 * self.cfg.dt;
        let refs = self.reference.window(t_next, self.cfg.dt, self.cfg.horizon);
        let mut graph = match self.mode {
            ControllerMode::NominalMpc => build_nominal_at(index, measurement, &refs, &self.cfg, &self.params)?,
            ControllerMode::JpcmGi | ControllerMode::SwJpcm => {
                build_jpcm(&self.buffer, &refs, &self.cfg, &self.params)?
            }
        };

        let warm = self.previous.as_ref().filter(|p| p.index + 1 == index);
        let cold = warm.is_none();
        let horizon = match warm {
            Some(prev) => shift_warm_start(&prev.horizon),
            None => {
                let mut h = cold_start(measurement, &refs, &self.params);
                for (k, state) in h.states.iter_mut().enumerate().skip(1) {
                    state.angular_velocity = self.reference.body_rate(t_next + (k - 1) as f64 * self.cfg.dt);
                }
                h
            }
        };
        for (k, state) in horizon.states.iter().enumerate() {
            let value = if k == 0 && self.mode == ControllerMode::NominalMpc {
                *measurement
            } else {
                *state
            };
            graph.set_initial(VariableKey::state(index + k), ManifoldValue::State(value))?;
        }
        for (k, (w, u)) in horizon.wrenches.iter().zip(&horizon.rotors).enumerate() {
            graph.set_initial(VariableKey::wrench(index + k), ManifoldValue::Wrench(*w))?;
            graph.set_initial(VariableKey::rotor(index + k), ManifoldValue::Rotor(*u))?;
        }
        if let Some(prev) = warm {
            let known = prev
                .past
                .iter()
                .copied()
                .chain(std::iter::once((prev.index, prev.horizon.states[0])));
            for (i, state) in known {
                let key = VariableKey::state(i);
                if graph.values().contains(&key) {
                    graph.set_initial(key, ManifoldValue::State(state))?;
                }
            }
        }
        Ok((graph, cold))
    }

    /// One control period: buffer the measurement, solve, return the first input.
    pub fn step(&mut self, measurement: &QuadState, rel_pose: Option<RelPoseMeas>) -> Result<StepOutput> {
        self.push_measurement(measurement, rel_pose)?;
        self.solve_current(measurement)
    }

    /// Buffers a measurement as the newest epoch and returns its index.
    pub fn push_measurement(&mut self, measurement: &QuadState, rel_pose: Option<RelPoseMeas>) -> Result<usize> {
        let index = self.next_index;
        self.buffer.push(WindowEntry {
            index,
            measurement: *measurement,
            rel_pose,
        })?;
        self.next_index += 1;
        Ok(index)
    }

    /// Solves for the newest buffered epoch, whose measurement is `measurement`.
    pub fn solve_current(&mut self, measurement: &QuadState) -> Result<StepOutput> {
        let index = self.buffer.latest().ok_or(JpcmError::EmptyBuffer)?.index;
        let (graph, cold_start) = self.build_graph(measurement)?;
        let started = Instant::now();
        let solved = graph.solve_lm(&self.cfg.lm);
        let solve_time = started.elapsed();

        let result = match solved {
            Ok(r) if r.status != SolveStatus::Diverged => r,
            other => {
                let (status, message, iterations, e0, e1) = match other {
                    Ok(r) => (Some(r.status), "solver diverged".to_string(), r.iterations, r.initial_error, r.final_error),
                    Err(e) => (None, e.to_string(), 0, f64::NAN, f64::NAN),
                };
                return Ok(self.fallback(measurement, StepDiagnostics {
                    iterations,
                    initial_error: e0,
                    final_error: e1,
                    status,
                    solve_time,
                    cold_start,
                    fallback: true,
                    saturated: false,
                    message: Some(message),
                }));
            }
        };

        let values = &result.values;
        let wrench = *values
            .wrench(&VariableKey::wrench(index))
            .expect("graph holds the first wrench");
        let (rotors, saturated) = match allocate_inverse(&wrench, &self.params) {
            Ok(u) => {
                let clamped = u.clamp(self.params.rotor_min, self.params.rotor_max);
                let saturated = clamped != u;
                (clamped, saturated)
            }
            Err(_) => (allocate_inverse_saturated(&wrench, &self.params)?, true),
        };
        let estimate = *values
            .state(&VariableKey::state(index))
            .expect("graph holds the current state");

        self.previous = Some(extract_solution(values, index, self.cfg.horizon));
        self.last_output = Some((rotors, wrench));
        Ok(StepOutput {
            rotors,
            wrench,
            estimate,
            diagnostics: StepDiagnostics {
                iterations: result.iterations,
                initial_error: result.initial_error,
                final_error: result.final_error,
                status: Some(result.status),
                solve_time,
                cold_start,
                fallback: false,
                saturated,
                message: None,
            },
        })
    }

    /// Holds the last input and forces a cold start next period.
    fn fallback(&mut self, measurement: &QuadState, diagnostics: StepDiagnostics) -> StepOutput {
        self.previous = None;
        let (rotors, wrench) = self.last_output.unwrap_or_else(|| {
            (
                RotorSpeeds::uniform(self.params.hover_rotor_speed()),
                self.params.hover_wrench(),
            )
        });
        StepOutput {
            rotors,
            wrench,
            estimate: *measurement,
            diagnostics,
        }
    }
}

fn extract_solution(values: &Values, index: usize, horizon: usize) -> Solution {
    let state = |i| *values.state(&VariableKey::state(i)).expect("state in solution");
    let states = (0..=horizon).map(|k| state(index + k)).collect();
    let wrenches = (0..horizon)
        .map(|k| *values.wrench(&VariableKey::wrench(index + k)).expect("wrench in solution"))
        .collect();
    let rotors = (0..horizon)
        .map(|k| *values.rotor(&VariableKey::rotor(index + k)).expect("rotor in solution"))
        .collect();
    let past = values
        .iter()
        .filter_map(|(k, v)| match v {
            ManifoldValue::State(x) if k.index < index => Some((k.index, *x)),
            _ => None,
        })
        .collect();
    Solution {
        index,
        horizon: Horizon {
            states,
            wrenches,
            rotors,
        },
        past,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn hover_refs(n: usize) -> Vec<RefPoint> {
        vec![crate::trajgen::hover_ref(Vector3::new(0.0, 0.0, 1.0)); n]
    }

    #[test]
    fn nominal_graph_counts() {
        let cfg = ControlConfig::default();
        let p = QuadParams::default();
        let x0 = QuadState::hover_at(Vector3::new(0.0, 0.0, 1.0));
        let g = build_nominal_mpc(&x0, &hover_refs(20), &cfg, &p).unwrap();
        assert_eq!(g.count_factors(DynamicsFactor::NAME), 20);
        assert_eq!(g.count_factors(ReferenceFactor::NAME), 20);
        assert_eq!(g.count_factors(InputRateFactor::NAME), 19);
        assert_eq!(g.count_factors(CafFactor::NAME), 20);
        assert_eq!(g.count_factors(ClfFactor::NAME), 20);
        assert_eq!(g.count_factors(PositioningFactor::PRIOR), 1);
        assert_eq!(g.num_variables(), 61);
        assert!(matches!(
            build_nominal_mpc(&x0, &hover_refs(19), &cfg, &p),
            Err(JpcmError::ReferenceLength { expected: 20, got: 19 })
        ));
    }

    #[test]
    fn shift_of_short_horizon() {
        let p = QuadParams::default();
        let states: Vec<QuadState> = (0..4)
            .map(|i| QuadState::hover_at(Vector3::new(i as f64, 0.0, 0.0)))
            .collect();
        let wrenches: Vec<Wrench> = (0..3).map(|i| Wrench::new(i as f64, Vector3::zeros())).collect();
        let h = Horizon {
            states,
            wrenches,
            rotors: vec![RotorSpeeds::uniform(p.hover_rotor_speed()); 3],
        };
        let s = shift_warm_start(&h);
        let xs: Vec<f64> = s.states.iter().map(|x| x.position.x).collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0, 3.0]);
        let ts: Vec<f64> = s.wrenches.iter().map(|w| w.thrust).collect();
        assert_eq!(ts, vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn buffer_keeps_last_w_in_order() {
        let mut b = WindowBuffer::new(3);
        assert!(b.is_empty());
        for i in 0..5 {
            b.push(WindowEntry {
                index: i,
                measurement: QuadState::default(),
                rel_pose: None,
            })
            .unwrap();
            assert_eq!(b.len(), (i + 1).min(3));
        }
        let idx: Vec<usize> = b.entries().map(|e| e.index).collect();
        assert_eq!(idx, vec![2, 3, 4]);
        let dup = WindowEntry {
            index: 4,
            measurement: QuadState::default(),
            rel_pose: None,
        };
        assert!(b.push(dup).is_err());
    }

    #[test]
    fn jpcm_on_empty_buffer_fails() {
        let cfg = ControlConfig::default();
        let b = WindowBuffer::new(1);
        assert!(matches!(
            build_jpcm(&b, &hover_refs(20), &cfg, &QuadParams::default()),
            Err(JpcmError::EmptyBuffer)
        ));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [ControllerMode::NominalMpc, ControllerMode::JpcmGi, ControllerMode::SwJpcm] {
            assert_eq!(m.to_string().parse::<ControllerMode>().unwrap(), m);
        }
        assert!("mpc".parse::<ControllerMode>().is_err());
    }
}
