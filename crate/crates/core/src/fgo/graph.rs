use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::noise::NoiseModel;
use super::values::{ManifoldValue, Values, VariableKey};
use crate::error::{JpcmError, Result};

/// One residual term `‖e(x)‖²_Σ` of the objective.
///
/// Jacobians are taken with respect to the tangent coordinates used by
/// [`ManifoldValue::retract`]. A factor that does not override
/// [`Factor::jacobians`] is differentiated numerically.
pub trait Factor: Send + Sync {
    fn name(&self) -> &'static str;

    fn keys(&self) -> &[VariableKey];

    fn noise(&self) -> &NoiseModel;

    fn dim(&self) -> usize {
        self.noise().dim()
    }

    /// Unwhitened residual. `values` follows the order of [`Factor::keys`].
    fn error(&self, values: &[&ManifoldValue]) -> DVector<f64>;

    /// Unwhitened Jacobian blocks, one per key, `dim x tangent_dim(key)`.
    fn jacobians(&self, _values: &[&ManifoldValue]) -> Option<Vec<DMatrix<f64>>> {
        None
    }

    fn linearize(&self, values: &[&ManifoldValue]) -> (DVector<f64>, Vec<DMatrix<f64>>) {
        let e = self.error(values);
        let j = self
            .jacobians(values)
            .unwrap_or_else(|| numerical_jacobians(self, values, 1e-6));
        (e, j)
    }
}

/// Central differences along each tangent direction.
pub fn numerical_jacobians<F: Factor + ?Sized>(
    factor: &F,
    values: &[&ManifoldValue],
    step: f64,
) -> Vec<DMatrix<f64>> {
    let rows = factor.dim();
    let mut perturbed: Vec<ManifoldValue> = values.iter().map(|v| **v).collect();
    let mut out = Vec::with_capacity(values.len());
    for slot in 0..values.len() {
        let base = *values[slot];
        let dim = base.dim();
        let mut jac = DMatrix::zeros(rows, dim);
        let mut delta = vec![0.0; dim];
        for c in 0..dim {
            delta[c] = step;
            perturbed[slot] = base.retract(&delta);
            let plus = factor.error(&perturbed.iter().collect::<Vec<_>>());
            delta[c] = -step;
            perturbed[slot] = base.retract(&delta);
            let minus = factor.error(&perturbed.iter().collect::<Vec<_>>());
            delta[c] = 0.0;
            jac.set_column(c, &((plus - minus) / (2.0 * step)));
        }
        perturbed[slot] = base;
        out.push(jac);
    }
    out
}

/// Dense whitened Gauss-Newton system: the step solves `min ‖J δ - b‖²`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub jacobian: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Column offset of each variable, in graph insertion order.
    pub offsets: Vec<usize>,
}

#[derive(Default)]
pub struct FactorGraph {
    values: Values,
    factors: Vec<Box<dyn Factor>>,
}

impl std::fmt::Debug for FactorGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactorGraph")
            .field("variables", &self.values.len())
            .field("factors", &self.factors.len())
            .finish()
    }
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, key: VariableKey, initial: ManifoldValue) -> Result<()> {
        if self.values.contains(&key) {
            return Err(JpcmError::DuplicateKey(key));
        }
        if initial.kind() != key.kind {
            return Err(JpcmError::KindMismatch { key });
        }
        self.values.insert(key, initial);
        Ok(())
    }

    /// Replaces the initial estimate of an existing variable.
    pub fn set_initial(&mut self, key: VariableKey, value: ManifoldValue) -> Result<()> {
        if !self.values.contains(&key) {
            return Err(JpcmError::UnknownKey(key));
        }
        if value.kind() != key.kind {
            return Err(JpcmError::KindMismatch { key });
        }
        self.values.insert(key, value);
        Ok(())
    }

    pub fn add_factor<F: Factor + 'static>(&mut self, factor: F) -> Result<()> {
        self.add_boxed_factor(Box::new(factor))
    }

    pub fn add_boxed_factor(&mut self, factor: Box<dyn Factor>) -> Result<()> {
        if let Some(missing) = factor.keys().iter().find(|k| !self.values.contains(k)) {
            return Err(JpcmError::UnknownKey(*missing));
        }
        self.factors.push(factor);
        Ok(())
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn factors(&self) -> &[Box<dyn Factor>] {
        &self.factors
    }

    pub fn num_variables(&self) -> usize {
        self.values.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn tangent_dim(&self) -> usize {
        self.values.tangent_dim()
    }

    pub fn residual_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).sum()
    }

    /// Number of factors with the given [`Factor::name`].
    pub fn count_factors(&self, name: &str) -> usize {
        self.factors.iter().filter(|f| f.name() == name).count()
    }

    /// Variable positions of each factor in `values`.
    pub(crate) fn slots(&self, values: &Values) -> Result<Vec<Vec<usize>>> {
        self.factors
            .iter()
            .map(|f| {
                f.keys()
                    .iter()
                    .map(|k| values.position(k).ok_or(JpcmError::UnknownKey(*k)))
                    .collect()
            })
            .collect()
    }

    pub(crate) fn gather<'a>(values: &'a Values, slots: &[usize]) -> Vec<&'a ManifoldValue> {
        slots.iter().map(|&i| values.at(i)).collect()
    }

    /// Squared whitened error of every factor.
    pub fn factor_errors(&self, values: &Values) -> Result<Vec<f64>> {
        let slots = self.slots(values)?;
        Ok(self
            .factors
            .iter()
            .zip(&slots)
            .map(|(f, s)| f.noise().squared_mahalanobis(&f.error(&Self::gather(values, s))))
            .collect())
    }

    /// `Σ eᵀ Σ⁻¹ e` over all factors.
    pub fn error(&self, values: &Values) -> Result<f64> {
        Ok(self.factor_errors(values)?.iter().sum())
    }

    /// Stacked whitened Jacobian and negated whitened residual.
    pub fn linearize(&self, values: &Values) -> Result<LinearSystem> {
        let slots = self.slots(values)?;
        let mut offsets = Vec::with_capacity(values.len());
        let mut cols = 0;
        for (_, v) in values.iter() {
            offsets.push(cols);
            cols += v.dim();
        }
        let rows = self.residual_dim();
        let mut jacobian = DMatrix::zeros(rows, cols);
        let mut rhs = DVector::zeros(rows);
        let mut row = 0;
        for (index, (factor, slot)) in self.factors.iter().zip(&slots).enumerate() {
            let (e, mut blocks) = factor.linearize(&Self::gather(values, slot));
            check_finite(index, factor.as_ref(), &e, &blocks)?;
            let e = factor.noise().whiten(&e);
            rhs.rows_mut(row, e.len()).copy_from(&(-e));
            for (block, &var) in blocks.iter_mut().zip(slot) {
                factor.noise().whiten_jacobian(block);
                jacobian
                    .view_mut((row, offsets[var]), (block.nrows(), block.ncols()))
                    .copy_from(block);
            }
            row += factor.dim();
        }
        Ok(LinearSystem {
            jacobian,
            rhs,
            offsets,
        })
    }

    /// Human-readable listing of factors, their dimensions and whitened errors.
    pub fn dump(&self, values: &Values) -> Result<String> {
        let errors = self.factor_errors(values)?;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "graph: {} variables (tangent dim {}), {} factors (residual dim {})",
            self.num_variables(),
            self.tangent_dim(),
            self.num_factors(),
            self.residual_dim()
        );
        for (i, (f, err)) in self.factors.iter().zip(&errors).enumerate() {
            let keys: Vec<String> = f.keys().iter().map(|k| k.to_string()).collect();
            let _ = writeln!(
                out,
                "  [{i:3}] {:<12} dim {:2} keys [{}] error {:.6e}",
                f.name(),
                f.dim(),
                keys.join(", "),
                err
            );
        }
        let _ = writeln!(out, "total error {:.9e}", errors.iter().sum::<f64>());
        Ok(out)
    }
}

pub(crate) fn check_finite(
    index: usize,
    factor: &dyn Factor,
    e: &DVector<f64>,
    blocks: &[DMatrix<f64>],
) -> Result<()> {
    if !e.iter().all(|v| v.is_finite()) {
        return Err(JpcmError::NonFinite {
            index,
            name: factor.name().to_string(),
            what: "residual",
        });
    }
    if !blocks.iter().all(|b| b.iter().all(|v| v.is_finite())) {
        return Err(JpcmError::NonFinite {
            index,
            name: factor.name().to_string(),
            what: "jacobian",
        });
    }
    Ok(())
}
