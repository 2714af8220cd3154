//! Metropolis-adjusted Langevin sampling of the invariant measure
//! `exp[−Σ_x V(∇φ(x)) + m²φ(x)²/2]` on the periodic cube.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::{langevin_drift, Potential};
use crate::error::{config, Result};
use crate::lattice::PeriodicCube;

/// `H(φ) = Σ_x V(∇φ(x)) + m²φ(x)²/2`.
pub fn field_energy(cube: &PeriodicCube, potential: &Potential, mass: f64, phi: &[f64]) -> f64 {
    let m2 = 0.5 * mass * mass;
    let mut h = 0.0;
    let mut z = vec![0.0; cube.dim()];
    for x in 0..cube.volume() {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = phi[cube.up(j, x)] - phi[x];
        }
        h += potential.value(&z) + m2 * phi[x] * phi[x];
    }
    h
}

/// One MALA chain. The proposal is `φ' = φ − (h/2)∇H(φ) + √h ξ`, i.e. one
/// Euler–Maruyama step of `dφ = −½∇H dt + dB` with step `h`, followed by a
/// Metropolis–Hastings correction.
pub struct MalaChain<'a> {
    cube: &'a PeriodicCube,
    potential: Potential,
    mass: f64,
    step: f64,
    phi: Vec<f64>,
    drift: Vec<f64>,
    energy: f64,
    proposal: Vec<f64>,
    proposal_drift: Vec<f64>,
    accepted: u64,
    proposed: u64,
}

impl<'a> MalaChain<'a> {
    pub fn new(cube: &'a PeriodicCube, potential: Potential, mass: f64, step: f64, initial: &[f64]) -> Result<Self> {
        potential.validate()?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(config("m", format!("mass must be positive, got {mass}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(config("mala_step", format!("must be positive, got {step}")));
        }
        let n = cube.volume();
        if initial.len() != n {
            return Err(config("initial", format!("expected {n} values, got {}", initial.len())));
        }
        let phi = initial.to_vec();
        let mut drift = vec![0.0; n];
        langevin_drift(cube, &potential, mass, &phi, &mut drift);
        let energy = field_energy(cube, &potential, mass, &phi);
        Ok(Self {
            cube,
            potential,
            mass,
            step,
            phi,
            drift,
            energy,
            proposal: vec![0.0; n],
            proposal_drift: vec![0.0; n],
            accepted: 0,
            proposed: 0,
        })
    }

    /// Default step `1/(4dΛ + m²)`, the inverse of the largest Hessian eigenvalue.
    pub fn default_step(dim: usize, potential: &Potential, mass: f64) -> f64 {
        1.0 / (4.0 * dim as f64 * potential.window().upper() + mass * mass)
    }

    /// One proposal; returns whether it was accepted.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> bool {
        let h = self.step;
        let s = h.sqrt();
        // drift = −½∇H, so the proposal mean is φ + h·drift.
        for ((p, &x), &d) in self.proposal.iter_mut().zip(&self.phi).zip(&self.drift) {
            let z: f64 = rng.sample(StandardNormal);
            *p = x + h * d + s * z;
        }
        langevin_drift(self.cube, &self.potential, self.mass, &self.proposal, &mut self.proposal_drift);
        let e_new = field_energy(self.cube, &self.potential, self.mass, &self.proposal);
        let mut forward = 0.0;
        let mut backward = 0.0;
        for i in 0..self.phi.len() {
            let f = self.proposal[i] - self.phi[i] - h * self.drift[i];
            let b = self.phi[i] - self.proposal[i] - h * self.proposal_drift[i];
            forward += f * f;
            backward += b * b;
        }
        let log_ratio = self.energy - e_new + (forward - backward) / (2.0 * h);
        self.proposed += 1;
        let u: f64 = rng.random();
        let accept = log_ratio >= 0.0 || u < log_ratio.exp();
        if accept {
            std::mem::swap(&mut self.phi, &mut self.proposal);
            std::mem::swap(&mut self.drift, &mut self.proposal_drift);
            self.energy = e_new;
            self.accepted += 1;
        }
        accept
    }

    pub fn state(&self) -> &[f64] {
        &self.phi
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposed as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::massive_green_periodic;
    use crate::rng::SeedRecord;

    #[test]
    fn energy_gradient_matches_drift() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let phi: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut drift = vec![0.0; 16];
        langevin_drift(&cube, &p, 0.8, &phi, &mut drift);
        let h = 1e-6;
        for x in [0, 5, 11] {
            let mut a = phi.clone();
            let mut b = phi.clone();
            a[x] += h;
            b[x] -= h;
            let fd = (field_energy(&cube, &p, 0.8, &a) - field_energy(&cube, &p, 0.8, &b)) / (2.0 * h);
            assert!((fd + 2.0 * drift[x]).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_variance_is_unbiased() {
        // Large step: plain Euler–Maruyama would be visibly biased here.
        let cube = PeriodicCube::new(1, 8).unwrap();
        let p = Potential::quadratic(1.0).unwrap();
        let step = 2.0 * MalaChain::default_step(1, &p, 1.0);
        let mut chain = MalaChain::new(&cube, p, 1.0, step, &[0.0; 8]).unwrap();
        let mut rng = SeedRecord::new(3, 0).rng();
        for _ in 0..500 {
            chain.step(&mut rng);
        }
        let mut xs = Vec::new();
        for _ in 0..40_000 {
            chain.step(&mut rng);
            let s = chain.state();
            xs.push(s.iter().map(|v| v * v).sum::<f64>() / 8.0);
        }
        let est = crate::stats::Estimate::from_series(&xs);
        let exact = massive_green_periodic(&cube, 1.0, 0);
        assert!(est.z_against_value(exact) < 3.5, "{est:?} vs {exact}");
        assert!(chain.acceptance() > 0.3);
    }
}
