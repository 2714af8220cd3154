//! Small dense symmetric matrices and ellipticity windows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Two-sided quadratic-form bounds `λ I ≤ a ≤ Λ I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityPair {
    lambda: f64,
    upper: f64,
}

impl EllipticityPair {
    pub fn new(lambda: f64, upper: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(config("lambda", format!("must be positive, got {lambda}")));
        }
        if !(upper >= lambda && upper.is_finite()) {
            return Err(config("Lambda", format!("must be at least lambda={lambda}, got {upper}")));
        }
        Ok(Self { lambda, upper })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The upper bound `Λ`.
    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `1 − λ/Λ`, the contraction factor of the contrast `I − a/Λ`.
    #[inline]
    pub fn contrast(&self) -> f64 {
        1.0 - self.lambda / self.upper
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lambda - tol && value <= self.upper + tol
    }
}

/// A real symmetric `d×d` matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major entries; symmetry must hold exactly.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Matrix(format!("expected {} entries, got {}", dim * dim, entries.len())));
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::Matrix(format!("entry ({i},{j}) breaks symmetry")));
                }
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Matrix("non-finite entry".into()));
        }
        Ok(Self { dim, entries })
    }

    /// Symmetrizes `(m + mᵀ)/2` from arbitrary row-major entries.
    pub fn symmetrized(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Matrix(format!("expected {} entries, got {}", dim * dim, entries.len())));
        }
        let mut out = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
            }
        }
        Self::new(dim, out)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = c;
        }
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, &v) in diag.iter().enumerate() {
            entries[i * dim + i] = v;
        }
        Self { dim, entries }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.to_dmatrix().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn determinant(&self) -> f64 {
        self.to_dmatrix().determinant()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j) == 0.0))
    }

    /// `x · a x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        (0..d).map(|i| x[i] * (0..d).map(|j| self.get(i, j) * x[j]).sum::<f64>()).sum()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// Inverse of a positive definite matrix via Cholesky.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        let chol = self
            .to_dmatrix()
            .cholesky()
            .ok_or_else(|| Error::Matrix("matrix is not positive definite".into()))?;
        let inv = chol.inverse();
        let mut entries = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                entries[i * self.dim + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        Ok(SymMatrix { dim: self.dim, entries })
    }

    /// Solves `a y = x` for positive definite `a`.
    pub fn solve_pd(&self, x: &[f64]) -> Result<Vec<f64>> {
        let chol = self
            .to_dmatrix()
            .cholesky()
            .ok_or_else(|| Error::Matrix("matrix is not positive definite".into()))?;
        Ok(chol.solve(&DVector::from_column_slice(x)).iter().copied().collect())
    }

    pub fn within(&self, window: &EllipticityPair, tol: f64) -> bool {
        let ev = self.eigenvalues();
        ev.first().is_some_and(|&lo| lo >= window.lambda() - tol)
            && ev.last().is_some_and(|&hi| hi <= window.upper() + tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_bad_windows() {
        assert!(SymMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(EllipticityPair::new(0.0, 1.0).is_err());
        assert!(EllipticityPair::new(2.0, 1.0).is_err());
    }

    #[test]
    fn inverse_and_spectrum() {
        let a = SymMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(a.eigenvalues().len(), 2);
        let ev = a.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        assert!((a.determinant() - 3.0).abs() < 1e-14);
        let inv = a.inverse_pd().unwrap();
        let y = inv.apply(&a.apply(&[0.3, -1.2]));
        assert!((y[0] - 0.3).abs() < 1e-14 && (y[1] + 1.2).abs() < 1e-14);
        assert!(SymMatrix::new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap().inverse_pd().is_err());
        let w = EllipticityPair::new(1.0, 3.0).unwrap();
        assert!(a.within(&w, 1e-12));
        assert!(!SymMatrix::identity(2).within(&EllipticityPair::new(1.5, 2.0).unwrap(), 0.0));
    }
}
