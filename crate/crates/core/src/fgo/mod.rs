//! Nonlinear least squares over quadrotor states, wrenches and rotor speeds.
//!
//! A [`FactorGraph`] holds variables keyed by [`VariableKey`] and a list of
//! whitened residual [`Factor`]s. [`FactorGraph::solve_lm`] minimizes the sum
//! of squared whitened residuals with Levenberg-Marquardt, retracting state
//! rotations on the right.

mod graph;
mod linalg;
mod noise;
mod solver;
mod values;

pub use graph::{numerical_jacobians, Factor, FactorGraph, LinearSystem};
pub use linalg::{EnvelopeMatrix, ProfileCholesky};
pub use noise::NoiseModel;
pub use solver::{LmConfig, SolveResult, SolveStatus};
pub use values::{rotor_retract, rotor_tangent_scale, ManifoldValue, Values, VariableKey, VariableKind};
