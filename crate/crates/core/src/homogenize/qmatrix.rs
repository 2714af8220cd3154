//! `q(ξ,η) = ⟨a⟩ + ⟨a∂_ξΦ⟩` per sample and across samples.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::corrector::{corrector_solve_projected, CorrectorField};
use super::ops::apply_coefficient;
use crate::env::CoefficientField;
use crate::error::{config, Result};
use crate::matrix::{EllipticityPair, SymMatrix};
use crate::stats::Estimate;

/// A `d×d` complex estimate with per-entry standard errors of the real and
/// imaginary parts (NaN for a single sample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QMatrix {
    pub xi: Vec<f64>,
    pub eta: f64,
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub se_re: Vec<f64>,
    pub se_im: Vec<f64>,
    pub n_samples: usize,
}

impl QMatrix {
    pub fn entry(&self, j: usize, k: usize) -> C {
        C::new(self.re[j * self.dim + k], self.im[j * self.dim + k])
    }

    /// Pools per-sample matrices (row-major) into a mean with standard errors.
    pub fn from_samples(xi: &[f64], eta: f64, dim: usize, samples: &[Vec<C>]) -> Result<Self> {
        if samples.is_empty() {
            return Err(config("samples", "need at least one sample"));
        }
        let mut q = Self {
            xi: xi.to_vec(),
            eta,
            dim,
            re: vec![0.0; dim * dim],
            im: vec![0.0; dim * dim],
            se_re: vec![0.0; dim * dim],
            se_im: vec![0.0; dim * dim],
            n_samples: samples.len(),
        };
        for e in 0..dim * dim {
            let re: Vec<f64> = samples.iter().map(|s| s[e].re).collect();
            let im: Vec<f64> = samples.iter().map(|s| s[e].im).collect();
            let (r, i) = (Estimate::from_samples(&re), Estimate::from_samples(&im));
            q.re[e] = r.mean;
            q.im[e] = i.mean;
            q.se_re[e] = r.se;
            q.se_im[e] = i.se;
        }
        Ok(q)
    }

    /// The symmetric part of the real part.
    pub fn symmetrized(&self) -> SymMatrix {
        SymMatrix::symmetrized(self.dim, &self.re).expect("square")
    }

    /// Largest standard error over entries (0 for a single sample).
    pub fn max_se(&self) -> f64 {
        self.se_re.iter().chain(&self.se_im).map(|s| if s.is_finite() { *s } else { 0.0 }).fold(0.0, f64::max)
    }

    /// Symmetric within `k_sigma` standard errors plus `tol`.
    pub fn is_symmetric(&self, k_sigma: f64, tol: f64) -> bool {
        let d = self.dim;
        (0..d).all(|j| {
            (0..d).all(|k| {
                let (a, b) = (j * d + k, k * d + j);
                let se = |s: &[f64]| (s[a].powi(2) + s[b].powi(2)).sqrt();
                let se_re = if se(&self.se_re).is_finite() { se(&self.se_re) } else { 0.0 };
                let se_im = if se(&self.se_im).is_finite() { se(&self.se_im) } else { 0.0 };
                (self.re[a] - self.re[b]).abs() <= k_sigma * se_re + tol
                    && (self.im[a] - self.im[b]).abs() <= k_sigma * se_im + tol
            })
        })
    }

    /// Eigenvalues of the symmetrized real part inside `[λ − kσ, Λ + kσ]`.
    pub fn within_window(&self, window: &EllipticityPair, k_sigma: f64) -> bool {
        let slack = k_sigma * self.max_se() + 1e-12 * window.upper();
        let ev = self.symmetrized().eigenvalues();
        ev[0] >= window.lambda() - slack && ev[ev.len() - 1] <= window.upper() + slack
    }
}

/// Row-major `⟨a⟩ + ⟨a∂_ξΦ⟩` on one sample.
pub fn q_entries(phi: &CorrectorField, a: &CoefficientField) -> Result<Vec<C>> {
    if phi.grid.cube != *a.cube() || phi.grid.n_times != a.n_times() {
        return Err(config("corrector", "solved on a different sample"));
    }
    let d = phi.dim();
    let n = a.cube().volume();
    let nt = a.n_times();
    let points = (n * nt) as f64;
    let mut q = vec![C::default(); d * d];
    for t in 0..nt {
        for x in 0..n {
            for j in 0..d {
                for k in 0..d {
                    q[j * d + k] += a.entry(t, x, j, k);
                }
            }
        }
    }
    let mut flux = vec![C::default(); d * n];
    for k in 0..d {
        let g = phi.gradient(k);
        for t in 0..nt {
            apply_coefficient(a, t, &g[t * d * n..(t + 1) * d * n], &mut flux);
            for j in 0..d {
                q[j * d + k] += flux[j * n..(j + 1) * n].iter().sum::<C>();
            }
        }
    }
    Ok(q.into_iter().map(|v| v / points).collect())
}

/// `q(ξ,η)` from one corrector, as a single-sample [`QMatrix`].
pub fn q_matrix(phi: &CorrectorField, a: &CoefficientField) -> Result<QMatrix> {
    let q = q_entries(phi, a)?;
    QMatrix::from_samples(&phi.xi, phi.eta, phi.dim(), &[q])
}

/// Solves the projected corrector on every sample and pools `q`.
pub fn q_estimate(samples: &[CoefficientField], xi: &[f64], eta: f64) -> Result<QMatrix> {
    let per: Vec<Result<Vec<C>>> = crate::rng::par_indexed(samples.len(), |i| {
        let phi = corrector_solve_projected(&samples[i], xi, eta)?;
        q_entries(&phi, &samples[i])
    });
    let per: Vec<Vec<C>> = per.into_iter().collect::<Result<_>>()?;
    let d = samples.first().map_or(xi.len(), |s| s.cube().dim());
    QMatrix::from_samples(xi, eta, d, &per)
}
