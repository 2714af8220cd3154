//! Euler–Maruyama integration of
//! `dφ(x) = −½[∇*V'(∇φ)(x) + m²φ(x)] dt + dB(x)` on the periodic cube.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FieldTrajectory, Potential, Provenance};
use crate::error::{config, Error, Result};
use crate::lattice::PeriodicCube;
use crate::rng::SeedRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    pub potential: Potential,
    pub mass: f64,
    pub dt: f64,
    /// Recorded steps after burn-in; the trajectory has `n_steps + 1` slices.
    pub n_steps: usize,
    pub burn_in: usize,
    /// Record every `stride`-th step.
    pub stride: usize,
    /// Test hook: drop the Brownian increments.
    pub noise: bool,
}

impl LangevinConfig {
    /// Default burn-in of `10/(m²Δt)` steps.
    pub fn new(potential: Potential, mass: f64, dt: f64, n_steps: usize) -> Self {
        let burn_in = if mass > 0.0 && dt > 0.0 { (10.0 / (mass * mass * dt)).ceil() as usize } else { 0 };
        Self { potential, mass, dt, n_steps, burn_in, stride: 1, noise: true }
    }

    /// Largest step allowed for this potential, mass and dimension.
    pub fn max_dt(&self, dim: usize) -> f64 {
        let upper = self.potential.window().upper();
        (1.0 / (2.0 * dim as f64 * upper)).min(1.0 / (self.mass * self.mass))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.potential.validate()?;
        if self.mass == 0.0 {
            return Err(Error::Unsupported(
                "the massless field has no invariant measure; use a mass ladder and extrapolate".into(),
            ));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(config("m", format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.dt > 0.0 && self.dt <= self.max_dt(dim) * (1.0 + 1e-12)) {
            return Err(config(
                "dt",
                format!("step {} outside (0, {}] required for stability", self.dt, self.max_dt(dim)),
            ));
        }
        if self.stride == 0 {
            return Err(config("stride", "must be at least 1"));
        }
        Ok(())
    }
}

/// `−½[∇*V'(∇φ) + m²φ]` at every site.
pub fn langevin_drift(cube: &PeriodicCube, potential: &Potential, mass: f64, phi: &[f64], out: &mut [f64]) {
    let m2 = mass * mass;
    for x in 0..cube.volume() {
        out[x] = m2 * phi[x];
    }
    // ∇*F(x) = Σ_j F_j(x−e_j) − F_j(x) with F_j = v'(∇_jφ)
    for j in 0..cube.dim() {
        for x in 0..cube.volume() {
            let up = cube.up(j, x);
            let f = potential.d1(phi[up] - phi[x]);
            out[up] += f;
            out[x] -= f;
        }
    }
    for v in out.iter_mut() {
        *v *= -0.5;
    }
}

/// The deterministic Euler–Maruyama map: given `φ_n` and the increments
/// `ΔB_n`, advances to `φ_{n+1} = φ_n + Δt·drift(φ_n) + ΔB_n`.
pub struct LangevinStepper<'a> {
    cube: &'a PeriodicCube,
    potential: Potential,
    mass: f64,
    dt: f64,
    drift: Vec<f64>,
}

impl<'a> LangevinStepper<'a> {
    pub fn new(cube: &'a PeriodicCube, potential: Potential, mass: f64, dt: f64) -> Self {
        Self { cube, potential, mass, dt, drift: vec![0.0; cube.volume()] }
    }

    pub fn step(&mut self, phi: &mut [f64], increments: &[f64]) {
        langevin_drift(self.cube, &self.potential, self.mass, phi, &mut self.drift);
        for ((p, d), b) in phi.iter_mut().zip(&self.drift).zip(increments) {
            *p += self.dt * d + b;
        }
    }

    pub fn step_noiseless(&mut self, phi: &mut [f64]) {
        langevin_drift(self.cube, &self.potential, self.mass, phi, &mut self.drift);
        for (p, d) in phi.iter_mut().zip(&self.drift) {
            *p += self.dt * d;
        }
    }
}

/// Fills `out` with independent `N(0, Δt)` increments.
pub fn brownian_increments<R: Rng>(rng: &mut R, dt: f64, out: &mut [f64]) {
    let s = dt.sqrt();
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = s * z;
    }
}

/// Simulates from `φ(·,0) = 0`, discards `burn_in` steps, and records the rest.
pub fn langevin_simulate(cube: &PeriodicCube, cfg: &LangevinConfig, seed: SeedRecord) -> Result<FieldTrajectory> {
    langevin_simulate_from(cube, cfg, seed, &vec![0.0; cube.volume()])
}

pub fn langevin_simulate_from(
    cube: &PeriodicCube,
    cfg: &LangevinConfig,
    seed: SeedRecord,
    initial: &[f64],
) -> Result<FieldTrajectory> {
    cfg.validate(cube.dim())?;
    let n = cube.volume();
    if initial.len() != n {
        return Err(config("initial", format!("expected {n} values, got {}", initial.len())));
    }
    let mut rng = seed.rng();
    let mut stepper = LangevinStepper::new(cube, cfg.potential, cfg.mass, cfg.dt);
    let mut phi = initial.to_vec();
    let mut inc = vec![0.0; n];
    let mut advance = |phi: &mut Vec<f64>| {
        if cfg.noise {
            brownian_increments(&mut rng, cfg.dt, &mut inc);
            stepper.step(phi, &inc);
        } else {
            stepper.step_noiseless(phi);
        }
    };
    for _ in 0..cfg.burn_in {
        advance(&mut phi);
    }
    let recorded = cfg.n_steps / cfg.stride;
    let mut values = Vec::with_capacity((recorded + 1) * n);
    values.extend_from_slice(&phi);
    for _ in 0..recorded {
        for _ in 0..cfg.stride {
            advance(&mut phi);
        }
        values.extend_from_slice(&phi);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrity("Langevin trajectory left the finite range".into()));
    }
    let provenance = Provenance {
        sampler: "langevin".into(),
        potential: cfg.potential,
        mass: cfg.mass,
        burn_in: cfg.burn_in,
        seed,
    };
    Ok(FieldTrajectory::new(
        cube.clone(),
        cfg.burn_in as f64 * cfg.dt,
        cfg.dt * cfg.stride as f64,
        values,
        provenance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_on_indicator_field_by_hand() {
        // d = 1, L = 4, V = |z|²/2, m = 1, φ = δ_0: ∇*∇φ = (2, −1, 0, −1)
        let cube = PeriodicCube::new(1, 4).unwrap();
        let p = Potential::quadratic(1.0).unwrap();
        let mut out = vec![0.0; 4];
        langevin_drift(&cube, &p, 1.0, &[1.0, 0.0, 0.0, 0.0], &mut out);
        assert_eq!(out, vec![-1.5, 0.5, 0.0, 0.5]);
        // dipole c=1, a=0.5: F = v'(∇φ) = (∇φ − 0.5 sin ∇φ) with ∇φ = (−1, 0, 0, 1)
        let p = Potential::dipole(1.0, 0.5).unwrap();
        langevin_drift(&cube, &p, 1.0, &[1.0, 0.0, 0.0, 0.0], &mut out);
        let f = 1.0 - 0.5 * 1.0f64.sin();
        assert!((out[0] - (-0.5 * (2.0 * f + 1.0))).abs() < 1e-15);
        assert!((out[1] - 0.5 * f).abs() < 1e-15);
        assert!((out[3] - 0.5 * f).abs() < 1e-15);
        assert_eq!(out[2], 0.0);
    }

    #[test]
    fn noiseless_constant_field_decays_exponentially() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let mut cfg = LangevinConfig::new(Potential::quadratic(1.0).unwrap(), 1.0, 0.01, 100);
        cfg.burn_in = 0;
        cfg.noise = false;
        let traj = langevin_simulate_from(&cube, &cfg, SeedRecord::new(0, 0), &[2.0; 16]).unwrap();
        let t = traj.time(100) - traj.t0();
        let exact = 2.0 * (-t / 2.0f64).exp();
        for &v in traj.slice(100) {
            assert!((v - exact).abs() < 2.0 * 0.01);
        }
    }

    #[test]
    fn rejects_unstable_step_and_zero_mass() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let cfg = LangevinConfig::new(p, 0.5, 0.5, 10);
        assert!(matches!(langevin_simulate(&cube, &cfg, SeedRecord::new(1, 0)), Err(Error::Config { field: "dt", .. })));
        let cfg = LangevinConfig::new(p, 0.0, 0.01, 10);
        assert!(matches!(langevin_simulate(&cube, &cfg, SeedRecord::new(1, 0)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cube = PeriodicCube::new(1, 8).unwrap();
        let mut cfg = LangevinConfig::new(Potential::dipole(1.0, 0.2).unwrap(), 1.0, 0.05, 50);
        cfg.burn_in = 10;
        let a = langevin_simulate(&cube, &cfg, SeedRecord::new(5, 1)).unwrap();
        let b = langevin_simulate(&cube, &cfg, SeedRecord::new(5, 1)).unwrap();
        assert_eq!(a.values(), b.values());
    }
}
