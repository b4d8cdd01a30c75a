use nalgebra::{DMatrix, DVector};

use crate::error::{JpcmError, Result};

/// Lower triangle of a symmetric matrix stored row by row over its envelope.
///
/// `first[i]` is the leftmost column that may be non-zero in row `i`; row `i`
/// stores columns `first[i]..=i` contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeMatrix {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeMatrix {
    pub fn zeros(first: &[usize]) -> Self {
        let first: Vec<usize> = first.iter().enumerate().map(|(i, &f)| f.min(i)).collect();
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut len = 0;
        for (i, &f) in first.iter().enumerate() {
            start.push(len);
            len += i + 1 - f;
        }
        start.push(len);
        Self {
            first,
            start,
            data: vec![0.0; len],
        }
    }

    /// Copies the envelope part of the lower triangle of `h`.
    pub fn from_dense(h: &DMatrix<f64>, first: &[usize]) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n || first.len() != n {
            return Err(JpcmError::Dimension(format!(
                "envelope: {}x{} matrix with {} envelope rows",
                h.nrows(),
                h.ncols(),
                first.len()
            )));
        }
        let mut m = Self::zeros(first);
        for i in 0..n {
            for j in m.first[i]..=i {
                *m.entry_mut(i, j) = h[(i, j)];
            }
        }
        Ok(m)
    }

    /// Envelope of a dense matrix from its actual non-zeros.
    pub fn envelope_of(h: &DMatrix<f64>) -> Vec<usize> {
        (0..h.nrows())
            .map(|i| (0..=i).find(|&j| h[(i, j)] != 0.0).unwrap_or(i))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries.
    pub fn stored(&self) -> usize {
        self.data.len()
    }

    pub fn first(&self) -> &[usize] {
        &self.first
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.start[i]..self.start[i + 1]]
    }

    /// Entry `(i, j)` with `j <= i`; zero outside the envelope.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j < self.first[i] {
            0.0
        } else {
            self.row(i)[j - self.first[i]]
        }
    }

    /// Mutable entry `(i, j)`; panics outside the envelope.
    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        assert!(j <= i && j >= self.first[i], "({i}, {j}) outside the envelope");
        &mut self.data[self.start[i] + j - self.first[i]]
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.data[self.start[i + 1] - 1]
    }

    pub fn add_diagonal(&mut self, i: usize, v: f64) {
        self.data[self.start[i + 1] - 1] += v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| if j <= i { self.get(i, j) } else { self.get(j, i) })
    }
}

/// Cholesky factor `L` (with `A = L Lᵀ`) over the envelope of `A`.
///
/// Fill-in of a Cholesky factor never leaves the envelope, so for
/// time-ordered variables the cost is `O(n b²)` instead of `O(n³)` while the
/// result equals the dense factor.
#[derive(Debug, Clone)]
pub struct ProfileCholesky {
    l: EnvelopeMatrix,
}

impl ProfileCholesky {
    /// Factors the dense matrix `h`, reading only its lower triangle.
    pub fn factor(h: &DMatrix<f64>, first: &[usize]) -> Result<Self> {
        Self::factor_envelope(EnvelopeMatrix::from_dense(h, first)?)
    }

    /// Factors in place, consuming the matrix.
    pub fn factor_envelope(mut a: EnvelopeMatrix) -> Result<Self> {
        let n = a.dim();
        for i in 0..n {
            let fi = a.first[i];
            let si = a.start[i];
            for j in fi..=i {
                let fj = a.first[j];
                let sj = a.start[j];
                let k0 = fi.max(fj);
                let mut s = a.data[si + j - fi];
                for k in k0..j {
                    s -= a.data[si + k - fi] * a.data[sj + k - fj];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(JpcmError::NotPositiveDefinite(format!("pivot {i} is {s:e}")));
                    }
                    a.data[si + i - fi] = s.sqrt();
                } else {
                    a.data[si + j - fi] = s / a.data[sj + j - fj];
                }
            }
        }
        Ok(Self { l: a })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let l = &self.l;
        let n = l.dim();
        let mut y = b.clone();
        for i in 0..n {
            let row = l.row(i);
            let fi = l.first[i];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let row = l.row(i);
            let fi = l.first[i];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= row[k - fi] * xi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn banded_spd(n: usize, band: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(band)..=i {
                let v = ((i * 7 + j * 3) % 11) as f64 * 0.1 - 0.5;
                a[(i, j)] = v;
            }
            a[(i, i)] = 1.0 + i as f64 * 0.01;
        }
        &a * a.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn matches_dense_cholesky() {
        let h = banded_spd(40, 3);
        let b = DVector::from_fn(40, |i, _| (i as f64).sin());
        let env = EnvelopeMatrix::envelope_of(&h);
        assert!(env[30] >= 24);
        let x = ProfileCholesky::factor(&h, &env).unwrap().solve(&b);
        let dense = h.clone().cholesky().unwrap().solve(&b);
        assert_relative_eq!(x, dense, epsilon = 1e-10);
        let full = ProfileCholesky::factor(&h, &vec![0; 40]).unwrap().solve(&b);
        assert_relative_eq!(full, dense, epsilon = 1e-10);
    }

    #[test]
    fn envelope_storage_round_trip() {
        let h = banded_spd(12, 2);
        let env = EnvelopeMatrix::envelope_of(&h);
        let m = EnvelopeMatrix::from_dense(&h, &env).unwrap();
        assert!(m.stored() < 12 * 13 / 2);
        assert_eq!(m.to_dense(), h);
        assert_eq!(m.diagonal(5), h[(5, 5)]);
    }

    #[test]
    fn rejects_indefinite() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ProfileCholesky::factor(&h, &[0, 0]).is_err());
    }
}
