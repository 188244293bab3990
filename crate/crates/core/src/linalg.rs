//! Small dense linear algebra for the low-dimensional setting (`d ≤ 2`)
//! plus the tridiagonal solver used by the implicit diffusion steps.

use serde::{Deserialize, Serialize};

/// Square matrix stored row-major. Used for `σ`, `σσ*` and flow derivatives;
/// sizes stay at `d ≤ 2` so everything is closed-form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMat {
    pub fn new(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data length must be n*n");
        Self { n, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            n: 1,
            data: vec![value],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.at(i, j);
            }
        }
        Self { n, data }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.at(i, k) * other.at(k, j);
                }
                data[i * n + j] = s;
            }
        }
        Self { n, data }
    }

    /// `σσ*`.
    pub fn gram(&self) -> Self {
        self.matmul(&self.transpose())
    }

    /// `y = A x` into `out`.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.data[i * n + j] * x[j];
            }
            out[i] = s;
        }
    }

    /// Eigenvalues of a symmetric 1×1 or 2×2 matrix, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        match self.n {
            1 => vec![self.data[0]],
            2 => {
                let (a, b, c) = (self.at(0, 0), self.at(0, 1), self.at(1, 1));
                let tr = a + c;
                let disc = ((a - c) * 0.5).hypot(b);
                vec![tr * 0.5 - disc, tr * 0.5 + disc]
            }
            n => panic!("symmetric eigendecomposition only implemented for n ≤ 2, got {n}"),
        }
    }

    pub fn min_eigenvalue_sym(&self) -> f64 {
        self.sym_eigenvalues()[0]
    }

    /// Spectral norm of a general matrix via eigenvalues of `A A*`.
    pub fn spectral_norm(&self) -> f64 {
        let eigs = self.gram().sym_eigenvalues();
        eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    /// Inverse for `n ≤ 2`. Returns `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        match self.n {
            1 => {
                let a = self.data[0];
                if a == 0.0 {
                    None
                } else {
                    Some(Self::scalar(1.0 / a))
                }
            }
            2 => {
                let (a, b, c, d) = (self.data[0], self.data[1], self.data[2], self.data[3]);
                let det = a * d - b * c;
                if det == 0.0 {
                    return None;
                }
                Some(Self::new(2, vec![d / det, -b / det, -c / det, a / det]))
            }
            n => panic!("inverse only implemented for n ≤ 2, got {n}"),
        }
    }
}

/// Euclidean norm of a slice (Frobenius norm when the slice is a flattened matrix).
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves a tridiagonal system `A x = rhs` in place by the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused), `diag[i]`
/// multiplies `x[i]`, `upper[i]` multiplies `x[i+1]` (`upper[n-1]` unused).
/// Returns `false` when a pivot vanishes.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut Vec<f64>,
) -> bool {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    if diag[0] == 0.0 {
        return false;
    }
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * scratch[i - 1];
        if denom == 0.0 {
            return false;
        }
        if i + 1 < n {
            scratch[i] = upper[i] / denom;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = SquareMat::new(2, vec![3.0, 0.0, 0.0, 1.0]);
        let e = m.sym_eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-14);
        assert!((e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_symmetric() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let m = SquareMat::new(2, vec![2.0, 1.0, 1.0, 2.0]);
        let e = m.sym_eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-14);
        assert!((e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = SquareMat::new(2, vec![2.0, 1.0, 0.5, 3.0]);
        let inv = m.inverse().unwrap();
        let id = m.matmul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id.at(i, j) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tridiagonal_against_dense() {
        // -u'' style system with known solution
        let n = 7;
        let lower = vec![-1.0; n];
        let diag = vec![3.0; n];
        let upper = vec![-1.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = 3.0 * x_true[i];
            if i > 0 {
                rhs[i] -= x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] -= x_true[i + 1];
            }
        }
        let mut scratch = Vec::new();
        assert!(solve_tridiagonal(
            &lower,
            &diag,
            &upper,
            &mut rhs,
            &mut scratch
        ));
        for i in 0..n {
            assert!((rhs[i] - x_true[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn spectral_norm_scalar() {
        assert!((SquareMat::scalar(-2.0).spectral_norm() - 2.0).abs() < 1e-15);
    }
}
