//! Fourier–Laplace transform of the averaged kernel against `1/[η + e(ξ)*q e(ξ)]`.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::ops::e_vector;
use super::qmatrix::q_estimate;
use crate::env::CoefficientField;
use crate::error::{config, Result};
use crate::lattice::PeriodicCube;
use crate::matrix::SymMatrix;
use crate::parabolic::exponential_step;
use crate::quad::gauss_legendre;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierLaplaceRow {
    pub mode: Vec<i64>,
    pub xi: Vec<f64>,
    pub eta: f64,
    /// `∫ e^{−ηt} Σ_x G(x,t)e^{ix·ξ} dt` from the time-stepped kernel.
    pub transform: (f64, f64),
    /// `1/[η + e(ξ)*q(ξ,η)e(ξ)]` with `q` from the corrector route.
    pub formula: (f64, f64),
    pub error: f64,
}

/// Compares both sides for constant `a` on reciprocal-lattice `ξ = 2πm/L`.
pub fn fourier_laplace_check(a: &SymMatrix, side: usize, modes: &[Vec<i64>], etas: &[f64]) -> Result<Vec<FourierLaplaceRow>> {
    let d = a.dim();
    let cube = PeriodicCube::new(d, side)?;
    if modes.iter().any(|m| m.len() != d) {
        return Err(config("modes", format!("each mode needs {d} components")));
    }
    if etas.iter().any(|e| !(*e > 0.0)) {
        return Err(config("eta", "values must be positive"));
    }
    let field = CoefficientField::constant(&cube, a)?;
    let n = cube.volume();
    let two_pi = 2.0 * std::f64::consts::PI;
    let xis: Vec<Vec<f64>> = modes.iter().map(|m| m.iter().map(|&k| two_pi * k as f64 / side as f64).collect()).collect();
    let eta_min = etas.iter().copied().fold(f64::INFINITY, f64::min);
    let t_end = (1e16f64).ln() / eta_min;
    let panel = 0.5;
    let n_panels = (t_end / panel).ceil() as usize;
    let mut u = vec![0.0; n];
    u[cube.origin()] = 1.0;
    let phases: Vec<Vec<C>> = xis
        .iter()
        .map(|xi| (0..n).map(|x| C::from_polar(1.0, cube.coords(x).iter().zip(xi).map(|(c, k)| *c as f64 * k).sum())).collect())
        .collect();
    let mut acc = vec![vec![C::default(); etas.len()]; xis.len()];
    let mut now = 0.0;
    for p in 0..n_panels {
        let (ts, ws) = gauss_legendre(12, p as f64 * panel, (p + 1) as f64 * panel);
        for (&t, &w) in ts.iter().zip(&ws) {
            exponential_step(&field, 0, t - now, 0.0, &mut u, None);
            now = t;
            for (xi_i, ph) in phases.iter().enumerate() {
                let g: C = ph.iter().zip(&u).map(|(p, v)| p * v).sum();
                for (e_i, &eta) in etas.iter().enumerate() {
                    acc[xi_i][e_i] += g * (w * (-eta * t).exp());
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (xi_i, xi) in xis.iter().enumerate() {
        let e = e_vector(xi);
        for (e_i, &eta) in etas.iter().enumerate() {
            let q = q_estimate(std::slice::from_ref(&field), xi, eta)?;
            let mut eqe = C::default();
            for j in 0..d {
                for k in 0..d {
                    eqe += e[j].conj() * q.entry(j, k) * e[k];
                }
            }
            let formula = C::new(1.0, 0.0) / (eqe + eta);
            let transform = acc[xi_i][e_i];
            rows.push(FourierLaplaceRow {
                mode: modes[xi_i].clone(),
                xi: xi.clone(),
                eta,
                transform: (transform.re, transform.im),
                formula: (formula.re, formula.im),
                error: (transform - formula).norm(),
            });
        }
    }
    Ok(rows)
}
