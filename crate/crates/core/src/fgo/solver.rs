use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::graph::{check_finite, FactorGraph};
use super::linalg::{EnvelopeMatrix, ProfileCholesky};
use super::values::Values;
use crate::error::{JpcmError, Result};

/// Levenberg-Marquardt settings. Damping is Marquardt's `λ·diag(H)`, divided
/// by `lambda_scale` after an accepted step and multiplied by it after a
/// rejected one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub max_iter: usize,
    pub lambda_init: f64,
    pub lambda_scale: f64,
    /// Absolute tolerance on the error decrease.
    pub abs_tol: f64,
    /// Relative tolerance on the error decrease.
    pub rel_tol: f64,
    /// Giving up once the damping exceeds this.
    pub lambda_max: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            lambda_init: 1e-4,
            lambda_scale: 10.0,
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            lambda_max: 1e10,
        }
    }
}

const LAMBDA_MIN: f64 = 1e-12;
const MIN_DIAGONAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Ran out of iterations while still making progress.
    MaxIterations,
    /// No damped step decreased the error before `lambda_max`.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub iterations: usize,
    pub initial_error: f64,
    pub final_error: f64,
    pub final_lambda: f64,
    pub values: Values,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

impl FactorGraph {
    /// Minimizes the graph starting from its stored initial values.
    pub fn solve_lm(&self, config: &LmConfig) -> Result<SolveResult> {
        self.solve_lm_from(self.values().clone(), config)
    }

    /// Minimizes starting from `initial`, which must hold exactly the
    /// graph's variables in the graph's insertion order.
    pub fn solve_lm_from(&self, initial: Values, config: &LmConfig) -> Result<SolveResult> {
        if self.num_variables() == 0 {
            return Err(JpcmError::EmptyGraph("no variables"));
        }
        if self.num_factors() == 0 {
            return Err(JpcmError::EmptyGraph("no factors"));
        }
        if initial.keys() != self.values().keys() {
            return Err(JpcmError::Dimension(
                "initial values do not match the graph's variables".into(),
            ));
        }

        let slots = self.slots(&initial)?;
        let mut offsets = Vec::with_capacity(initial.len());
        let mut n = 0;
        for (_, v) in initial.iter() {
            offsets.push(n);
            n += v.dim();
        }
        let first = envelope(&initial, &offsets, &slots, n);

        let mut values = initial;
        let mut error = self.error(&values)?;
        if !error.is_finite() {
            return Err(JpcmError::NonFinite {
                index: usize::MAX,
                name: "initial estimate".into(),
                what: "error",
            });
        }
        let initial_error = error;
        let mut lambda = config.lambda_init;
        let mut iterations = 0;

        let finish = |status, iterations, error, lambda, values| SolveResult {
            status,
            iterations,
            initial_error,
            final_error: error,
            final_lambda: lambda,
            values,
        };

        if error == 0.0 {
            return Ok(finish(SolveStatus::Converged, 0, error, lambda, values));
        }

        let mut hessian = EnvelopeMatrix::zeros(&first);
        let mut gradient = DVector::zeros(n);
        while iterations < config.max_iter {
            iterations += 1;
            self.normal_equations(&values, &slots, &offsets, &mut hessian, &mut gradient)?;
            let diag: Vec<f64> = (0..n).map(|i| hessian.diagonal(i).max(MIN_DIAGONAL)).collect();
            let neg_gradient = -&gradient;

            loop {
                let mut damped = hessian.clone();
                for (i, d) in diag.iter().enumerate() {
                    damped.add_diagonal(i, lambda * d);
                }
                let step = ProfileCholesky::factor_envelope(damped)
                    .ok()
                    .map(|chol| chol.solve(&neg_gradient));
                let candidate = step.map(|delta| retract_all(&values, &offsets, &delta));
                let candidate_error = match &candidate {
                    Some(c) => self.error(c)?,
                    None => f64::INFINITY,
                };

                if candidate_error.is_finite() && candidate_error < error {
                    let decrease = error - candidate_error;
                    values = candidate.expect("finite error implies a candidate");
                    error = candidate_error;
                    lambda = (lambda / config.lambda_scale).max(LAMBDA_MIN);
                    if decrease <= config.abs_tol
                        || decrease <= config.rel_tol * (error + decrease)
                    {
                        return Ok(finish(SolveStatus::Converged, iterations, error, lambda, values));
                    }
                    break;
                }
                if candidate_error.is_finite()
                    && (candidate_error - error).abs() <= config.abs_tol.max(config.rel_tol * error)
                {
                    // Already at a stationary point up to round-off.
                    return Ok(finish(SolveStatus::Converged, iterations, error, lambda, values));
                }
                lambda = lambda.max(LAMBDA_MIN) * config.lambda_scale;
                if lambda > config.lambda_max {
                    return Ok(finish(SolveStatus::Diverged, iterations, error, lambda, values));
                }
            }
        }
        Ok(finish(SolveStatus::MaxIterations, iterations, error, lambda, values))
    }

    /// Whitened `H = JᵀJ` (lower envelope) and `g = Jᵀe`, accumulated factor by factor.
    fn normal_equations(
        &self,
        values: &Values,
        slots: &[Vec<usize>],
        offsets: &[usize],
        hessian: &mut EnvelopeMatrix,
        gradient: &mut DVector<f64>,
    ) -> Result<()> {
        hessian.fill_zero();
        gradient.fill(0.0);
        for (index, (factor, slot)) in self.factors().iter().zip(slots).enumerate() {
            let (e, mut blocks) = factor.linearize(&FactorGraph::gather(values, slot));
            check_finite(index, factor.as_ref(), &e, &blocks)?;
            let e = factor.noise().whiten(&e);
            for block in blocks.iter_mut() {
                factor.noise().whiten_jacobian(block);
            }
            for (a, ja) in blocks.iter().enumerate() {
                let oa = offsets[slot[a]];
                let jat = ja.transpose();
                let mut g = gradient.rows_mut(oa, ja.ncols());
                g += &jat * &e;
                for (b, jb) in blocks.iter().enumerate() {
                    let ob = offsets[slot[b]];
                    if ob > oa {
                        continue;
                    }
                    let h = &jat * jb;
                    for r in 0..h.nrows() {
                        let cols = if ob == oa { r + 1 } else { h.ncols() };
                        for c in 0..cols {
                            *hessian.entry_mut(oa + r, ob + c) += h[(r, c)];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Leftmost structurally non-zero column of every Hessian row.
fn envelope(values: &Values, offsets: &[usize], slots: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut var_first = offsets.to_vec();
    for slot in slots {
        if let Some(min) = slot.iter().map(|&v| offsets[v]).min() {
            for &v in slot {
                var_first[v] = var_first[v].min(min);
            }
        }
    }
    let mut first = vec![0; n];
    for (v, (_, value)) in values.iter().enumerate() {
        for r in 0..value.dim() {
            first[offsets[v] + r] = var_first[v];
        }
    }
    first
}

fn retract_all(values: &Values, offsets: &[usize], delta: &DVector<f64>) -> Values {
    let mut out = values.clone();
    for (i, &o) in offsets.iter().enumerate() {
        let v = out.at_mut(i);
        let d = v.dim();
        *v = v.retract(&delta.as_slice()[o..o + d]);
    }
    out
}
