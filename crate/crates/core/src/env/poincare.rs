//! Space-time Fourier test for the Poincaré property of a stationary
//! covariance: the inequality holds iff `Γ̂ ∈ L^∞`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Samples of `Γ(x, τ)` for `x ∈ [-R, R]^d` (last coordinate fastest) and
/// `τ = k·Δt`, `k = -K..=K`; slice `k + K` holds lag `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceTable {
    pub dim: usize,
    pub radius: i64,
    pub dt: f64,
    pub lags: i64,
    pub values: Vec<f64>,
}

impl CovarianceTable {
    pub fn from_fn(dim: usize, radius: i64, dt: f64, lags: i64, f: impl Fn(&[i64], f64) -> f64) -> Self {
        let side = (2 * radius + 1) as usize;
        let nx = side.pow(dim as u32);
        let mut values = Vec::with_capacity(nx * (2 * lags + 1) as usize);
        let mut x = vec![0i64; dim];
        for k in -lags..=lags {
            for idx in 0..nx {
                let mut rem = idx;
                for j in (0..dim).rev() {
                    x[j] = (rem % side) as i64 - radius;
                    rem /= side;
                }
                values.push(f(&x, k as f64 * dt));
            }
        }
        Self { dim, radius, dt, lags, values }
    }

    fn spatial_len(&self) -> usize {
        ((2 * self.radius + 1) as usize).pow(self.dim as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub sup_value: f64,
    /// Fraction of `Σ|Γ|` on the outer spatial shell and the extreme lags.
    pub edge_fraction: f64,
    pub summable: bool,
    pub bounded: bool,
}

/// Evaluates `Γ̂(ζ, θ) = Σ_x Σ_k Δt Γ(x, kΔt) e^{i(x·ζ + kΔtθ)}` on a grid of
/// `n_zeta` points per spatial axis and `n_theta` frequencies in `[0, π/Δt)`.
pub fn poincare_fourier_check(
    table: &CovarianceTable,
    n_zeta: usize,
    n_theta: usize,
    threshold: f64,
    edge_tolerance: f64,
) -> Result<PoincareReport> {
    let nx = table.spatial_len();
    let nk = (2 * table.lags + 1) as usize;
    if table.values.len() != nx * nk {
        return Err(config("covariance", format!("expected {} values, got {}", nx * nk, table.values.len())));
    }
    if n_zeta == 0 || n_theta == 0 {
        return Err(config("grid", "frequency grids must be nonempty"));
    }
    let side = (2 * table.radius + 1) as usize;
    let coords = |idx: usize| -> Vec<i64> {
        let mut rem = idx;
        let mut x = vec![0i64; table.dim];
        for j in (0..table.dim).rev() {
            x[j] = (rem % side) as i64 - table.radius;
            rem /= side;
        }
        x
    };

    let mut total = 0.0;
    let mut edge = 0.0;
    for k in 0..nk {
        let lag_edge = k == 0 || k == nk - 1;
        for idx in 0..nx {
            let v = table.values[k * nx + idx].abs();
            total += v;
            if lag_edge || coords(idx).iter().any(|c| c.abs() == table.radius) {
                edge += v;
            }
        }
    }
    let edge_fraction = if total > 0.0 { edge / total } else { 0.0 };

    // time transform first: Γ̃(x, θ) = Σ_k Δt Γ(x, kΔt) e^{ikΔtθ}
    let thetas: Vec<f64> = (0..n_theta).map(|j| std::f64::consts::PI / table.dt * j as f64 / n_theta as f64).collect();
    let mut partial = vec![Complex64::new(0.0, 0.0); n_theta * nx];
    for (ti, &theta) in thetas.iter().enumerate() {
        for k in 0..nk {
            let tau = (k as i64 - table.lags) as f64 * table.dt;
            let w = Complex64::from_polar(table.dt, theta * tau);
            for idx in 0..nx {
                partial[ti * nx + idx] += w * table.values[k * nx + idx];
            }
        }
    }
    let n_modes = n_zeta.pow(table.dim as u32);
    let tau = 2.0 * std::f64::consts::PI;
    let mut sup = 0.0f64;
    for mode in 0..n_modes {
        let mut rem = mode;
        let mut zeta = vec![0.0; table.dim];
        for j in (0..table.dim).rev() {
            zeta[j] = tau * (rem % n_zeta) as f64 / n_zeta as f64;
            rem /= n_zeta;
        }
        let phases: Vec<Complex64> = (0..nx)
            .map(|idx| {
                let x = coords(idx);
                let arg: f64 = x.iter().zip(&zeta).map(|(a, b)| *a as f64 * b).sum();
                Complex64::from_polar(1.0, arg)
            })
            .collect();
        for ti in 0..n_theta {
            let v: Complex64 = (0..nx).map(|idx| phases[idx] * partial[ti * nx + idx]).sum();
            sup = sup.max(v.norm());
        }
    }
    let summable = edge_fraction < edge_tolerance;
    Ok(PoincareReport { sup_value: sup, edge_fraction, summable, bounded: summable && sup.is_finite() && sup < threshold })
}
