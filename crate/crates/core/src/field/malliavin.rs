//! Pathwise sensitivity of the Euler–Maruyama field to one Brownian increment,
//! against `e^{−m²(t−s)/2} G_Q(y,s;x,t,φ)` from the backward Green's function.

use serde::{Deserialize, Serialize};

use crate::env::{brownian_increments, CoefficientField, LangevinConfig, LangevinStepper, Layout, Potential};
use crate::error::{config, Result};
use crate::lattice::PeriodicCube;
use crate::parabolic::greens_backward;
use crate::rng::SeedRecord;

#[derive(Clone, Debug)]
pub struct MalliavinSpec {
    pub cube: PeriodicCube,
    pub potential: Potential,
    pub mass: f64,
    pub dt: f64,
    /// Field time run from zero before `t = 0`.
    pub burn_in: f64,
    pub y: Vec<i64>,
    /// Perturbation time; the increment on `[s − Δt, s)` is shifted.
    pub s: f64,
    pub x: Vec<i64>,
    pub t: f64,
    pub delta: f64,
}

impl MalliavinSpec {
    pub fn new(cube: PeriodicCube, potential: Potential, mass: f64, y: Vec<i64>, s: f64, x: Vec<i64>, t: f64) -> Self {
        Self { cube, potential, mass, dt: 1e-3, burn_in: 10.0 / (mass * mass), y, s, x, t, delta: 1e-5 }
    }

    fn validate(&self) -> Result<()> {
        if !(1e-7..=1e-3).contains(&self.delta) {
            return Err(config("delta", format!("{} outside [1e-7, 1e-3]", self.delta)));
        }
        let d = self.cube.dim();
        if self.x.len() != d || self.y.len() != d {
            return Err(config("x", format!("points need {d} coordinates")));
        }
        LangevinConfig::new(self.potential, self.mass, self.dt, 0).validate(d)?;
        if !(self.s > 0.0 && self.t > 0.0 && self.burn_in >= 0.0) {
            return Err(config("s", "times must be positive"));
        }
        for (name, v) in [("s", self.s), ("t", self.t)] {
            let k = (v / self.dt).round();
            if (k * self.dt - v).abs() > 1e-9 * v.max(1.0) {
                return Err(config(name, format!("time {v} is not a multiple of the step {}", self.dt)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MalliavinReport {
    /// `[φ_δ(x,t) − φ(x,t)]/δ`.
    pub fd_value: f64,
    pub formula_value: f64,
    pub rel_error: f64,
}

/// The same check at `Δt` and `Δt/2` on one Brownian path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MalliavinRefinement {
    pub coarse: MalliavinReport,
    pub fine: MalliavinReport,
    /// `fine.rel_error / coarse.rel_error`; close to 1/2 for a first-order scheme.
    pub ratio: f64,
}

/// Runs `n` Euler–Maruyama steps from `initial`, adding `delta` to the
/// increment of step `bump.0` at site `bump.1`. Returns all `n + 1` states.
fn replay(
    cube: &PeriodicCube,
    potential: Potential,
    mass: f64,
    dt: f64,
    initial: &[f64],
    increments: &[f64],
    bump: Option<(usize, usize, f64)>,
) -> Vec<f64> {
    let v = cube.volume();
    let n = increments.len() / v;
    let mut stepper = LangevinStepper::new(cube, potential, mass, dt);
    let mut phi = initial.to_vec();
    let mut out = Vec::with_capacity((n + 1) * v);
    out.extend_from_slice(&phi);
    let mut inc = vec![0.0; v];
    for k in 0..n {
        inc.copy_from_slice(&increments[k * v..(k + 1) * v]);
        if let Some((bk, y, delta)) = bump {
            if bk == k {
                inc[y] += delta;
            }
        }
        stepper.step(&mut phi, &inc);
        out.extend_from_slice(&phi);
    }
    out
}

fn report(spec: &MalliavinSpec, dt: f64, initial: &[f64], increments: &[f64]) -> Result<MalliavinReport> {
    let cube = &spec.cube;
    let (v, d) = (cube.volume(), cube.dim());
    let x = cube.index(&spec.x);
    let y = cube.index(&spec.y);
    let t_index = (spec.t / dt).round() as usize;
    let s_index = (spec.s / dt).round() as usize;
    if s_index == 0 {
        return Err(config("s", format!("must be at least one step ({dt})")));
    }
    let base = replay(cube, spec.potential, spec.mass, dt, initial, increments, None);
    let bumped = replay(cube, spec.potential, spec.mass, dt, initial, increments, Some((s_index - 1, y, spec.delta)));
    let fd_value = (bumped[t_index * v + x] - base[t_index * v + x]) / spec.delta;
    if s_index > t_index {
        return Ok(MalliavinReport { fd_value, formula_value: 0.0, rel_error: fd_value.abs() });
    }
    let mut data = vec![0.0; (t_index + 1) * v * d];
    for i in 0..=t_index {
        let phi = &base[i * v..(i + 1) * v];
        for site in 0..v {
            for j in 0..d {
                data[(i * v + site) * d + j] = spec.potential.d2(phi[cube.up(j, site)] - phi[site]);
            }
        }
    }
    let a = CoefficientField::from_data(cube.clone(), 0.0, dt, spec.potential.window(), Layout::Diagonal, data)?;
    let g = greens_backward(&a, x, t_index, s_index)?;
    let s = s_index as f64 * dt;
    let t = t_index as f64 * dt;
    let formula_value = (-spec.mass * spec.mass * (t - s) / 2.0).exp() * g.at(y, s_index);
    let rel_error = if formula_value == 0.0 { fd_value.abs() } else { (fd_value - formula_value).abs() / formula_value.abs() };
    Ok(MalliavinReport { fd_value, formula_value, rel_error })
}

/// Burn-in from zero at step `dt`, then Brownian increments at `dt/split`
/// for `[0, t]` (or `[0, s]` when later).
fn path(spec: &MalliavinSpec, split: usize, seed: SeedRecord) -> (Vec<f64>, Vec<f64>) {
    let cube = &spec.cube;
    let v = cube.volume();
    let mut rng = seed.rng();
    let mut phi = vec![0.0; v];
    let mut inc = vec![0.0; v];
    let mut stepper = LangevinStepper::new(cube, spec.potential, spec.mass, spec.dt);
    for _ in 0..(spec.burn_in / spec.dt).ceil() as usize {
        brownian_increments(&mut rng, spec.dt, &mut inc);
        stepper.step(&mut phi, &inc);
    }
    let fine_dt = spec.dt / split as f64;
    let n = (spec.t.max(spec.s) / fine_dt).round() as usize;
    let mut increments = vec![0.0; n * v];
    for k in 0..n {
        brownian_increments(&mut rng, fine_dt, &mut increments[k * v..(k + 1) * v]);
    }
    (phi, increments)
}

/// Single-increment finite difference against the Green's-function formula.
pub fn malliavin_fd_check(spec: &MalliavinSpec, seed: SeedRecord) -> Result<MalliavinReport> {
    spec.validate()?;
    let (initial, increments) = path(spec, 1, seed);
    report(spec, spec.dt, &initial, &increments)
}

/// Runs the check at `Δt` and `Δt/2` with the coarse increments formed by
/// summing pairs of fine ones.
pub fn malliavin_refinement(spec: &MalliavinSpec, seed: SeedRecord) -> Result<MalliavinRefinement> {
    spec.validate()?;
    let v = spec.cube.volume();
    let (initial, fine_inc) = path(spec, 2, seed);
    let n = fine_inc.len() / (2 * v);
    let mut coarse_inc = vec![0.0; n * v];
    for k in 0..n {
        for i in 0..v {
            coarse_inc[k * v + i] = fine_inc[2 * k * v + i] + fine_inc[(2 * k + 1) * v + i];
        }
    }
    let coarse = report(spec, spec.dt, &initial, &coarse_inc)?;
    let fine = report(spec, spec.dt / 2.0, &initial, &fine_inc)?;
    Ok(MalliavinRefinement { coarse, fine, ratio: fine.rel_error / coarse.rel_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `(1/V) Σ_ξ cos(ξ·r) f(μ_ξ)` on a one-dimensional ring.
    fn ring_mode_sum(side: usize, r: i64, f: impl Fn(f64) -> f64) -> f64 {
        (0..side)
            .map(|k| {
                let xi = 2.0 * std::f64::consts::PI * k as f64 / side as f64;
                let mu = 2.0 - 2.0 * xi.cos();
                (xi * r as f64).cos() * f(mu)
            })
            .sum::<f64>()
            / side as f64
    }

    #[test]
    fn quadratic_matches_mode_products() {
        let side = 8;
        let cube = PeriodicCube::new(1, side).unwrap();
        let (c, m, dt) = (1.5, 0.8, 1e-3);
        let p = Potential::quadratic(c).unwrap();
        let mut spec = MalliavinSpec::new(cube, p, m, vec![1], 0.2, vec![3], 0.7);
        spec.dt = dt;
        spec.burn_in = 1.0;
        let r = malliavin_fd_check(&spec, SeedRecord::new(4, 0)).unwrap();
        let steps = ((0.7 - 0.2) / dt).round() as i32;
        let jacobian = ring_mode_sum(side, 2, |mu| (1.0 - dt * (c * mu + m * m) / 2.0).powi(steps));
        let greens = ring_mode_sum(side, 2, |mu| (1.0 - dt * c * mu / 2.0).powi(steps));
        let exact = ring_mode_sum(side, 2, |mu| (-(0.5) * (c * mu + m * m) / 2.0).exp());
        assert!((r.fd_value - jacobian).abs() < 1e-8);
        assert!((r.formula_value - (-m * m * 0.25f64).exp() * greens).abs() < 1e-12);
        assert!((r.formula_value - exact).abs() < 1e-6 + 10.0 * dt * exact);
    }

    #[test]
    fn perturbation_after_t_has_no_effect() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let spec = MalliavinSpec::new(cube, p, 1.0, vec![0, 0], 0.5, vec![0, 0], 0.3);
        let r = malliavin_fd_check(&spec, SeedRecord::new(1, 0)).unwrap();
        assert_eq!(r.fd_value, 0.0);
        assert_eq!(r.formula_value, 0.0);
    }

    #[test]
    fn dipole_error_is_first_order() {
        let cube = PeriodicCube::new(2, 6).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let spec = MalliavinSpec::new(cube, p, 1.0, vec![1, 0], 0.3, vec![2, 1], 0.8);
        let r = malliavin_refinement(&spec, SeedRecord::new(8, 0)).unwrap();
        assert!(r.coarse.rel_error < 1e-3, "{r:?}");
        assert!((r.ratio - 0.5).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn rejects_delta_outside_range() {
        let cube = PeriodicCube::new(1, 4).unwrap();
        let p = Potential::quadratic(1.0).unwrap();
        let mut spec = MalliavinSpec::new(cube, p, 1.0, vec![0], 0.1, vec![0], 0.2);
        spec.delta = 1e-2;
        assert!(malliavin_fd_check(&spec, SeedRecord::new(0, 0)).is_err());
    }
}
