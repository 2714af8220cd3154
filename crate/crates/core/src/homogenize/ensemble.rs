//! Environment ensembles and the averaged Green's function `G_a(x,t) = ⟨u(x,t)⟩`.

use serde::{Deserialize, Serialize};

use crate::env::{
    coefficient_field, gaussian_field_sample, langevin_simulate, CoefficientField, CoefficientMap, FieldTrajectory,
    LangevinConfig, Potential,
};
use crate::error::{config, Error, Result};
use crate::lattice::PeriodicCube;
use crate::parabolic::solve_forward;
use crate::rng::{par_indexed, SeedRecord};
use crate::stats::Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Euler–Maruyama for the Langevin dynamics.
    Langevin,
    /// Exact per-mode Ornstein–Uhlenbeck updates; quadratic `V` with `c = 1` only.
    Gaussian,
}

/// How to draw one coefficient sample `a(x, t)` on a walk-time grid.
#[derive(Clone, Debug)]
pub struct EnvironmentSpec {
    pub cube: PeriodicCube,
    pub potential: Potential,
    pub mass: f64,
    pub map: CoefficientMap,
    pub sampler: Sampler,
    /// Walk-time spacing of the coefficient slices.
    pub walk_dt: f64,
    /// Field time elapsed per unit of walk time.
    pub clock: f64,
    /// Langevin steps per coefficient slice.
    pub substeps: usize,
}

impl EnvironmentSpec {
    /// Langevin step size implied by the grid.
    pub fn field_dt(&self) -> f64 {
        self.walk_dt * self.clock / self.substeps as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.walk_dt > 0.0 && self.walk_dt.is_finite()) {
            return Err(config("dt", format!("walk step must be positive, got {}", self.walk_dt)));
        }
        if !(self.clock > 0.0 && self.clock.is_finite()) {
            return Err(config("clock", format!("must be positive, got {}", self.clock)));
        }
        if self.substeps == 0 {
            return Err(config("substeps", "must be at least 1"));
        }
        if self.sampler == Sampler::Gaussian && self.potential != (Potential::Quadratic { c: 1.0 }) {
            return Err(Error::Unsupported("the exact Gaussian sampler needs V(z) = |z|²/2".into()));
        }
        Ok(())
    }

    /// A field trajectory with `n_slices` slices spaced by `walk_dt·clock`.
    pub fn trajectory(&self, n_slices: usize, seed: SeedRecord) -> Result<FieldTrajectory> {
        self.validate()?;
        if n_slices == 0 {
            return Err(config("n_times", "need at least one slice"));
        }
        match self.sampler {
            Sampler::Gaussian => gaussian_field_sample(&self.cube, self.mass, self.walk_dt * self.clock, n_slices, seed),
            Sampler::Langevin => {
                let mut cfg = LangevinConfig::new(self.potential, self.mass, self.field_dt(), (n_slices - 1) * self.substeps);
                cfg.stride = self.substeps;
                langevin_simulate(&self.cube, &cfg, seed)
            }
        }
    }

    /// Coefficients on the walk-time grid `t_i = i·walk_dt`.
    pub fn coefficients(&self, n_slices: usize, seed: SeedRecord) -> Result<CoefficientField> {
        let traj = self.trajectory(n_slices, seed)?;
        Ok(coefficient_field(&traj, &self.map)?.with_time_grid(0.0, self.walk_dt))
    }
}

/// Estimates of `G_a(x, t)` on the whole cube at the requested times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensMcTable {
    pub times: Vec<f64>,
    pub side: usize,
    pub dim: usize,
    /// `mean[k][x]` at `times[k]`.
    pub mean: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    /// Largest `|Σ_x u(x,t) − 1|` over samples and times.
    pub mass_deviation: f64,
    pub n_samples: usize,
}

impl GreensMcTable {
    pub fn at(&self, k: usize, point: &[i64]) -> Estimate {
        let cube = PeriodicCube::new(self.dim, self.side).expect("stored cube is valid");
        let x = cube.index(point);
        Estimate { mean: self.mean[k][x], se: self.se[k][x], n: self.n_samples }
    }
}

/// Walk-step indices for `times`, which must lie on the grid.
pub(crate) fn grid_steps(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if !(t >= 0.0) || (k * dt - t).abs() > 1e-9 * t.max(1.0) {
                Err(config("t", format!("time {t} is not a multiple of the step {dt}")))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Welford accumulators for an order-fixed streaming mean and variance.
pub(crate) struct Moments {
    pub n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self { n: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    pub fn push(&mut self, v: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, q), x) in self.mean.iter_mut().zip(&mut self.m2).zip(v) {
            let d = x - *m;
            *m += d / n;
            *q += d * (x - *m);
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }

    pub fn se(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2.iter().map(|q| if self.n < 2 { f64::NAN } else { (q / (n - 1.0) / n).sqrt() }).collect()
    }
}

/// Samples processed between order-fixed reductions.
pub(crate) const CHUNK: usize = 128;

/// Monte Carlo `G_a(·, t)` for a delta at the origin, via [`solve_forward`] on
/// independent coefficient samples (`seed.child(i)` for sample `i`).
pub fn avg_greens_mc(spec: &EnvironmentSpec, times: &[f64], n_samples: usize, seed: SeedRecord) -> Result<GreensMcTable> {
    if n_samples < 2 {
        return Err(config("samples", "need at least 2 samples for error bars"));
    }
    if times.is_empty() {
        return Err(config("t", "need at least one time"));
    }
    let steps = grid_steps(times, spec.walk_dt)?;
    let n_steps = steps.iter().copied().max().unwrap_or(0);
    let v = spec.cube.volume();
    let mut h = vec![0.0; v];
    h[spec.cube.origin()] = 1.0;
    let mut moments = Moments::new(times.len() * v);
    let mut mass_deviation: f64 = 0.0;
    let mut start = 0;
    while start < n_samples {
        let len = CHUNK.min(n_samples - start);
        let chunk: Vec<Result<(Vec<f64>, f64)>> = par_indexed(len, |i| {
            let a = spec.coefficients(n_steps.max(1), seed.child((start + i) as u64))?;
            let u = solve_forward(&a, &h, n_steps)?;
            let mut out = Vec::with_capacity(times.len() * v);
            let mut dev: f64 = 0.0;
            for &k in &steps {
                let s = u.slice(k);
                dev = dev.max((s.iter().sum::<f64>() - 1.0).abs());
                out.extend_from_slice(s);
            }
            Ok((out, dev))
        });
        for r in chunk {
            let (vals, dev) = r?;
            moments.push(&vals);
            mass_deviation = mass_deviation.max(dev);
        }
        start += len;
    }
    let mean = moments.mean();
    let se = moments.se();
    Ok(GreensMcTable {
        times: times.to_vec(),
        side: spec.cube.side(),
        dim: spec.cube.dim(),
        mean: mean.chunks(v).map(|c| c.to_vec()).collect(),
        se: se.chunks(v).map(|c| c.to_vec()).collect(),
        mass_deviation,
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::heat_kernel;
    use crate::matrix::SymMatrix;

    #[test]
    fn constant_environment_has_zero_variance() {
        let cube = PeriodicCube::new(1, 32).unwrap();
        let spec = EnvironmentSpec {
            cube: cube.clone(),
            potential: Potential::Quadratic { c: 1.0 },
            mass: 1.0,
            map: CoefficientMap::Constant(SymMatrix::scaled_identity(1, 0.5)),
            sampler: Sampler::Gaussian,
            walk_dt: 0.05,
            clock: 1.0,
            substeps: 1,
        };
        let g = avg_greens_mc(&spec, &[1.0, 2.0], 3, SeedRecord::new(1, 0)).unwrap();
        assert!(g.se.iter().flatten().all(|s| *s < 1e-12));
        assert!(g.mass_deviation < 1e-12);
        // Explicit Euler error at this step.
        assert!((g.at(1, &[0]).mean - heat_kernel(&[0], 1.0).unwrap()).abs() < 0.01);
    }

    #[test]
    fn dipole_environment_is_symmetric_in_law() {
        let cube = PeriodicCube::new(1, 16).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let spec = EnvironmentSpec {
            cube,
            potential: p,
            mass: 1.0,
            map: CoefficientMap::HessianOfGradient(p),
            sampler: Sampler::Langevin,
            walk_dt: 0.1,
            clock: 1.0,
            substeps: 2,
        };
        let g = avg_greens_mc(&spec, &[2.0], 200, SeedRecord::new(5, 0)).unwrap();
        assert!(g.mass_deviation < 1e-8);
        for x in 1..4 {
            let (a, b) = (g.at(0, &[x]), g.at(0, &[-x]));
            assert!(a.z_against(&b) < 3.0, "x={x}");
        }
    }
}
