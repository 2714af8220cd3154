//! The inhomogeneous backward problem `∂_s u = ½∇*a∇u − f`, `u → 0` as
//! `s → ∞`, and its damped variant with an extra `−(m²/2)v` term.
//!
//! In discrete time `u_i = S_i(u_{i+1} + Δ f_{i+1})`, which unrolls to the
//! representation `u_i = Σ_{j>i} Δ Σ_x G(·, s_i; x, t_j) f(x, t_j)`.

use super::greens::{backward_step, check_backward, greens_backward};
use super::SpaceTimeField;
use crate::env::CoefficientField;
use crate::error::{config, Error, Result};

fn check_forcing(a: &CoefficientField, f: &SpaceTimeField) -> Result<()> {
    if f.cube() != a.cube() {
        return Err(config("forcing", "forcing and coefficients live on different cubes"));
    }
    if (f.dt() - a.dt()).abs() > 1e-12 * a.dt() || (f.t0() - a.t0()).abs() > 1e-12 * a.dt().max(1.0) {
        return Err(config("forcing", "forcing must share the coefficient time grid"));
    }
    if !a.is_time_independent() {
        if let Some(last) = f.last_nonzero() {
            if last > a.n_times() {
                return Err(Error::Domain(format!(
                    "forcing is nonzero at time index {last}, beyond the {} coefficient slices",
                    a.n_times()
                )));
            }
        }
    }
    check_backward(a, f.n_times().saturating_sub(1), 0)
}

fn backward_inhomogeneous(a: &CoefficientField, f: &SpaceTimeField, damping: f64) -> SpaceTimeField {
    let n = a.cube().volume();
    let nt = f.n_times();
    let mut out = SpaceTimeField::zeros(a.cube(), f.t0(), f.dt(), nt);
    let mut u = vec![0.0; n];
    let mut ku = vec![0.0; n];
    let dt = a.dt();
    for i in (0..nt.saturating_sub(1)).rev() {
        let fi = f.slice(i + 1);
        for (v, g) in u.iter_mut().zip(fi) {
            *v += dt * g;
        }
        backward_step(a, i, &mut u, &mut ku);
        if damping != 1.0 {
            for v in u.iter_mut() {
                *v *= damping;
            }
        }
        out.slice_mut(i).copy_from_slice(&u);
    }
    out
}

/// Direct backward integration.
pub fn duhamel_solve(a: &CoefficientField, f: &SpaceTimeField) -> Result<SpaceTimeField> {
    check_forcing(a, f)?;
    Ok(backward_inhomogeneous(a, f, 1.0))
}

/// The same solution assembled from stored Green's tables, one per forcing point.
pub fn duhamel_representation(a: &CoefficientField, f: &SpaceTimeField) -> Result<SpaceTimeField> {
    check_forcing(a, f)?;
    let n = a.cube().volume();
    let nt = f.n_times();
    let mut out = SpaceTimeField::zeros(a.cube(), f.t0(), f.dt(), nt);
    for j in 1..nt {
        for x in 0..n {
            let w = f.slice(j)[x];
            if w == 0.0 {
                continue;
            }
            let g = greens_backward(a, x, j, 0)?;
            for i in 0..j {
                let gi = g.slice(i).expect("stored slice");
                for (o, v) in out.slice_mut(i).iter_mut().zip(gi) {
                    *o += a.dt() * w * v;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DampedSolution {
    pub v: SpaceTimeField,
    /// `e^{−m²(t_first − t_0)/2}` where `t_first` starts the forcing support:
    /// the relative weight of the part of `v` below the grid.
    pub lower_tail: f64,
}

impl DampedSolution {
    /// True when the grid reaches far enough below the forcing that the
    /// neglected damping factor is under `1e-14`.
    pub fn is_resolved(&self) -> bool {
        self.lower_tail < 1e-14
    }
}

/// `v(y,s) = Σ_x ∫_s^∞ e^{−m²(t−s)/2} G(y,s;x,t) g(x,t) dt`, so that
/// `v_i = e^{−m²Δ/2} S_i(v_{i+1} + Δ g_{i+1})`.
pub fn damped_resolvent(a: &CoefficientField, m: f64, g: &SpaceTimeField) -> Result<DampedSolution> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("damped resolvent needs m > 0, got {m}")));
    }
    check_forcing(a, g)?;
    let q = (-m * m * a.dt() / 2.0).exp();
    let v = backward_inhomogeneous(a, g, q);
    let lower_tail = match g.first_nonzero() {
        Some(i) => (-m * m * i as f64 * a.dt() / 2.0).exp(),
        None => 0.0,
    };
    Ok(DampedSolution { v, lower_tail })
}

/// Number of slices to pad below a forcing so that `e^{−m²T/2} < 1e-14`.
pub fn damping_padding(m: f64, dt: f64) -> usize {
    (2.0 * 1e14f64.ln() / (m * m * dt)).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{heat_kernel, PeriodicCube};
    use crate::matrix::SymMatrix;
    use crate::env::{coefficient_field, langevin_simulate, CoefficientMap, LangevinConfig, Potential};
    use crate::rng::SeedRecord;

    #[test]
    fn delta_forcing_is_one_greens_slice() {
        let cube = PeriodicCube::new(2, 6).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let mut cfg = LangevinConfig::new(p, 1.0, 0.1, 20);
        cfg.burn_in = 30;
        let t = langevin_simulate(&cube, &cfg, SeedRecord::new(2, 0)).unwrap();
        let a = coefficient_field(&t, &CoefficientMap::HessianOfGradient(p)).unwrap();
        let mut f = SpaceTimeField::zeros(&cube, a.t0(), a.dt(), 21);
        f.slice_mut(15)[7] = 1.0 / a.dt();
        let u = duhamel_solve(&a, &f).unwrap();
        let g = greens_backward(&a, 7, 15, 0).unwrap();
        for i in 0..15 {
            for y in 0..36 {
                assert!((u.slice(i)[y] - g.at(y, i)).abs() < 1e-14);
            }
        }
        let rep = duhamel_representation(&a, &f).unwrap();
        assert!(rep.values().iter().zip(u.values()).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn constant_coefficients_match_heat_kernel_convolution() {
        // f = δ_0(x) on [1, 2): u(y, 0) = ∫_1^2 G(y, c t/2) dt
        let cube = PeriodicCube::new(1, 48).unwrap();
        let c = 1.0;
        let dt = 0.001;
        let a = CoefficientField::constant(&cube, &SymMatrix::scaled_identity(1, c)).unwrap().with_time_grid(0.0, dt);
        let mut f = SpaceTimeField::zeros(&cube, 0.0, dt, 2101);
        for j in 1001..=2000 {
            f.slice_mut(j)[0] = 1.0;
        }
        let u = duhamel_solve(&a, &f).unwrap();
        let (nodes, weights) = crate::quad::gauss_legendre(30, 1.0, 2.0);
        for y in 0..6 {
            let exact: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * heat_kernel(&[y as i64], c * t / 2.0).unwrap()).sum();
            assert!((u.slice(0)[y] - exact).abs() < 2e-3, "y={y}");
        }
    }

    #[test]
    fn forcing_past_the_grid_is_a_domain_error() {
        let cube = PeriodicCube::new(1, 8).unwrap();
        let p = Potential::quadratic(1.0).unwrap();
        let mut cfg = LangevinConfig::new(p, 1.0, 0.1, 5);
        cfg.burn_in = 0;
        let t = langevin_simulate(&cube, &cfg, SeedRecord::new(2, 0)).unwrap();
        let a = coefficient_field(&t, &CoefficientMap::HessianOfGradient(p)).unwrap();
        let mut f = SpaceTimeField::zeros(&cube, a.t0(), a.dt(), 12);
        f.slice_mut(10)[0] = 1.0;
        assert!(matches!(duhamel_solve(&a, &f), Err(Error::Domain(_))));
    }

    #[test]
    fn damped_zero_forcing_and_mode_oracle() {
        let cube = PeriodicCube::new(1, 16).unwrap();
        let c = 1.2;
        let m = 0.8;
        let dt = 0.002;
        let a = CoefficientField::constant(&cube, &SymMatrix::scaled_identity(1, c)).unwrap().with_time_grid(0.0, dt);
        let zero = SpaceTimeField::zeros(&cube, 0.0, dt, 50);
        assert!(damped_resolvent(&a, m, &zero).unwrap().v.values().iter().all(|v| *v == 0.0));
        assert!(damped_resolvent(&a, 0.0, &zero).is_err());
        // g = cos(2πkx/L) on [t1, t2]: v(s) = cos(·) ∫ e^{−(m²+cσ)(t−s)/2} dt
        let k = 3.0;
        let sigma = 4.0 * (std::f64::consts::PI * k / 16.0).sin().powi(2);
        let (t1, t2) = (1.0, 1.5);
        let nt = 800;
        let mut g = SpaceTimeField::zeros(&cube, 0.0, dt, nt);
        for j in 0..nt {
            let t = j as f64 * dt;
            if t > t1 && t <= t2 + 1e-12 {
                for x in 0..16 {
                    g.slice_mut(j)[x] = (2.0 * std::f64::consts::PI * k * x as f64 / 16.0).cos();
                }
            }
        }
        let v = damped_resolvent(&a, m, &g).unwrap().v;
        let rate = (m * m + c * sigma) / 2.0;
        for &i in &[0usize, 250, 600] {
            let s = i as f64 * dt;
            let lo = t1.max(s);
            let amp = if t2 > lo { ((-rate * (lo - s)).exp() - (-rate * (t2 - s)).exp()) / rate } else { 0.0 };
            assert!((v.slice(i)[0] - amp).abs() < 4.0 * dt, "i={i}: {} vs {amp}", v.slice(i)[0]);
        }
    }
}
