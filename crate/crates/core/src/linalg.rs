//! Dense vectors, row-major matrices and matrix-free linear operators.
//!
//! Vectors are plain `[f64]` slices. Every reduction sums strictly left to
//! right so that repeated runs produce bit-identical results.

use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
}

/// Returns the index of the first NaN/Inf entry, if any.
pub fn ensure_finite(v: &[f64]) -> Result<(), LinalgError> {
    match v.iter().position(|e| !e.is_finite()) {
        Some(index) => Err(LinalgError::NonFinite { index }),
        None => Ok(()),
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm_l1(a: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in a {
        s += v.abs();
    }
    s
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

/// A linear map `ℝⁿ → ℝᵐ` that need not be materialised.
pub trait LinearOperator {
    /// Output dimension `m`.
    fn rows(&self) -> usize;
    /// Input dimension `n`.
    fn cols(&self) -> usize;
    /// `out = A x`; `x.len() == cols()`, `out.len() == rows()`.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ y`; `y.len() == rows()`, `out.len() == cols()`.
    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        out
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.apply_adjoint_into(y, &mut out);
        out
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint_into(y, out)
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        ensure_finite(&data)?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// Standard-Gaussian entries, filled row by row from `rng`.
    pub fn gaussian(rows: usize, cols: usize, rng: &mut SeededRng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gaussian()).collect();
        DenseMatrix { rows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `AᵀA`, used by tests and small direct solves.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in 0..n {
                    g.data[i * n + j] += ri * row[j];
                }
            }
        }
        g
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, self.row(i), out);
        }
    }
}

/// Dense product `A x` with a checked dimension.
pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if x.len() != a.cols {
        return Err(LinalgError::DimensionMismatch {
            expected: a.cols,
            found: x.len(),
        });
    }
    Ok(a.apply(x))
}

/// Multiplicative safety margin applied to power-iteration norm estimates.
pub const OPERATOR_NORM_SAFETY: f64 = 1.01;

/// Estimates `‖A‖₂` by power iteration on `AᵀA` and inflates it by
/// [`OPERATOR_NORM_SAFETY`]. Returns 0 for the zero operator.
///
/// The start vector is drawn from a fixed seed, so the estimate is
/// deterministic for a given operator.
pub fn operator_norm<A: LinearOperator + ?Sized>(a: &A, iters: usize, tol: f64) -> f64 {
    let n = a.cols();
    if n == 0 || a.rows() == 0 {
        return 0.0;
    }
    let mut rng = SeededRng::new(0x9e37_79b9_7f4a_7c15);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|e| *e /= nv);

    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; n];
    let mut sigma_sq = 0.0_f64;
    for _ in 0..iters.max(1) {
        a.apply_into(&v, &mut av);
        a.apply_adjoint_into(&av, &mut w);
        // Rayleigh quotient vᵀAᵀAv = ‖Av‖² for unit v
        let est = norm_sq(&av);
        let nw = norm(&w);
        if nw == 0.0 {
            // v landed in the null space; a zero operator ends here
            if est == 0.0 && sigma_sq == 0.0 {
                return 0.0;
            }
            break;
        }
        let converged = (est - sigma_sq).abs() <= tol * est.max(f64::MIN_POSITIVE);
        sigma_sq = est.max(sigma_sq);
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
        if converged {
            break;
        }
    }
    sigma_sq.sqrt() * OPERATOR_NORM_SAFETY
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_examples() {
        let id = DenseMatrix::identity(2);
        assert_eq!(matvec(&id, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);

        let z = DenseMatrix::zeros(3, 2);
        assert_eq!(matvec(&z, &[1.5, -2.0]).unwrap(), vec![0.0; 3]);

        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matvec(&a, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        assert_eq!(
            matvec(&a, &[1.0, 2.0]),
            Err(LinalgError::DimensionMismatch {
                expected: 3,
                found: 2
            })
        );
    }

    #[test]
    fn matvec_is_bit_deterministic() {
        let mut rng = SeededRng::new(3);
        let a = DenseMatrix::gaussian(17, 23, &mut rng);
        let x: Vec<f64> = (0..23).map(|_| rng.gaussian()).collect();
        let y1 = matvec(&a, &x).unwrap();
        let y2 = matvec(&a, &x).unwrap();
        assert!(y1.iter().zip(&y2).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = DenseMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert_eq!(err, LinalgError::NonFinite { index: 1 });
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let a = DenseMatrix::diagonal(&[3.0, 1.0]);
        let est = operator_norm(&a, 500, 1e-14);
        assert!((est - 3.0 * 1.01).abs() < 1e-9, "{est}");
    }

    #[test]
    fn operator_norm_of_zero() {
        assert_eq!(operator_norm(&DenseMatrix::zeros(4, 3), 50, 1e-12), 0.0);
    }

    #[test]
    fn adjoint_matches_transpose() {
        let mut rng = SeededRng::new(11);
        let a = DenseMatrix::gaussian(5, 7, &mut rng);
        let y: Vec<f64> = (0..5).map(|_| rng.gaussian()).collect();
        let via_adjoint = a.apply_adjoint(&y);
        let via_transpose = a.transpose().apply(&y);
        for (p, q) in via_adjoint.iter().zip(&via_transpose) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
