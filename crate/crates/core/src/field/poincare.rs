//! `Var[G] ≤ ⟨‖D G‖²⟩` for functionals of the field at time `T` started from
//! `φ(·,0) = 0`, with `D φ(y,s;x,T) = e^{−m²(T−s)/2} G_Q(y,s;x,T)`.

use serde::{Deserialize, Serialize};

use crate::env::{brownian_increments, CoefficientField, LangevinConfig, LangevinStepper, Layout, Potential};
use crate::error::{config, Result};
use crate::lattice::PeriodicCube;
use crate::rng::{par_indexed, SeedRecord};
use crate::stats::Estimate;

/// A functional of `φ(·,T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Functional {
    Constant,
    /// `Σ_x w(x)φ(x,T)`.
    Linear { weights: Vec<f64> },
    /// `tanh(φ(site,T))`.
    Tanh { site: Vec<i64> },
    /// `φ(site,T)²`.
    Square { site: Vec<i64> },
}

impl Functional {
    pub fn name(&self) -> String {
        match self {
            Self::Constant => "constant".into(),
            Self::Linear { .. } => "linear".into(),
            Self::Tanh { site } => format!("tanh{site:?}"),
            Self::Square { site } => format!("square{site:?}"),
        }
    }

    fn validate(&self, cube: &PeriodicCube) -> Result<()> {
        match self {
            Self::Constant => Ok(()),
            Self::Linear { weights } if weights.len() == cube.volume() => Ok(()),
            Self::Linear { .. } => Err(config("weights", format!("need {} weights", cube.volume()))),
            Self::Tanh { site } | Self::Square { site } if site.len() == cube.dim() => Ok(()),
            _ => Err(config("site", format!("need {} coordinates", cube.dim()))),
        }
    }

    /// Value and gradient in `φ(·,T)`.
    fn eval(&self, cube: &PeriodicCube, phi: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        match self {
            Self::Constant => 1.0,
            Self::Linear { weights } => {
                grad.copy_from_slice(weights);
                weights.iter().zip(phi).map(|(w, p)| w * p).sum()
            }
            Self::Tanh { site } => {
                let x = cube.index(site);
                let th = phi[x].tanh();
                grad[x] = 1.0 - th * th;
                th
            }
            Self::Square { site } => {
                let x = cube.index(site);
                grad[x] = 2.0 * phi[x];
                phi[x] * phi[x]
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PoincareSpec {
    pub cube: PeriodicCube,
    pub potential: Potential,
    pub mass: f64,
    pub dt: f64,
    pub horizon: f64,
    pub samples: usize,
    pub functionals: Vec<Functional>,
}

impl PoincareSpec {
    fn validate(&self) -> Result<()> {
        LangevinConfig::new(self.potential, self.mass, self.dt, 0).validate(self.cube.dim())?;
        if !(self.horizon >= self.dt) {
            return Err(config("T", format!("horizon {} shorter than one step", self.horizon)));
        }
        if self.samples < 40 {
            return Err(config("samples", "need at least 40 samples for the jackknife"));
        }
        self.functionals.iter().try_for_each(|f| f.validate(&self.cube))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareRow {
    pub functional: String,
    pub variance: f64,
    /// Mean of `‖D G‖²` with its standard error.
    pub derivative_bound: Estimate,
    pub ratio: f64,
    /// Jackknife standard error of the ratio.
    pub ratio_se: f64,
}

impl PoincareRow {
    /// `ratio ≤ 1 + kσ`; `0 ≤ 0` counts as a pass.
    pub fn passes(&self, k: f64) -> bool {
        if self.derivative_bound.mean == 0.0 {
            return self.variance <= 1e-300;
        }
        self.ratio <= 1.0 + k * self.ratio_se
    }
}

/// Values and `‖D G‖²` for every functional on one Brownian path.
fn one_path(spec: &PoincareSpec, seed: SeedRecord) -> Result<Vec<(f64, f64)>> {
    let cube = &spec.cube;
    let (v, d) = (cube.volume(), cube.dim());
    let n = (spec.horizon / spec.dt).round() as usize;
    let mut rng = seed.rng();
    let mut stepper = LangevinStepper::new(cube, spec.potential, spec.mass, spec.dt);
    let mut phi = vec![0.0; v];
    let mut inc = vec![0.0; v];
    let mut data = vec![0.0; n * v * d];
    for k in 0..n {
        for x in 0..v {
            for j in 0..d {
                data[(k * v + x) * d + j] = spec.potential.d2(phi[cube.up(j, x)] - phi[x]);
            }
        }
        brownian_increments(&mut rng, spec.dt, &mut inc);
        stepper.step(&mut phi, &inc);
    }
    let a = CoefficientField::from_data(cube.clone(), 0.0, spec.dt, spec.potential.window(), Layout::Diagonal, data)?;
    let damp = (-spec.mass * spec.mass * spec.dt / 2.0).exp();
    let mut grad = vec![0.0; v];
    let mut ku = vec![0.0; v];
    let mut out = Vec::with_capacity(spec.functionals.len());
    for f in &spec.functionals {
        let value = f.eval(cube, &phi, &mut grad);
        // u(·,s_i) for i = n, n−1, …, 1 is the derivative in the increment
        // ending at s_i.
        let mut u = grad.clone();
        let mut norm = 0.0;
        for i in (0..n).rev() {
            norm += spec.dt * u.iter().map(|x| x * x).sum::<f64>();
            if i == 0 {
                break;
            }
            a.apply(i, &u, &mut ku);
            for (x, k) in u.iter_mut().zip(&ku) {
                *x = damp * (*x - 0.5 * spec.dt * k);
            }
        }
        out.push((value, norm));
    }
    Ok(out)
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Block-jackknife standard error of `Var[g]/mean[b]`.
fn jackknife_ratio_se(g: &[f64], b: &[f64], blocks: usize) -> f64 {
    let n = g.len();
    let size = n / blocks;
    let mut est = Vec::with_capacity(blocks);
    for k in 0..blocks {
        let keep = |i: &usize| *i < k * size || *i >= (k + 1) * size;
        let gs: Vec<f64> = (0..n).filter(keep).map(|i| g[i]).collect();
        let bs: Vec<f64> = (0..n).filter(keep).map(|i| b[i]).collect();
        est.push(variance(&gs) / (bs.iter().sum::<f64>() / bs.len() as f64));
    }
    let m = est.iter().sum::<f64>() / blocks as f64;
    let q = est.iter().map(|e| (e - m).powi(2)).sum::<f64>();
    ((blocks as f64 - 1.0) / blocks as f64 * q).sqrt()
}

/// Monte Carlo variance against the mean squared derivative norm.
pub fn poincare_variance_check(spec: &PoincareSpec, seed: SeedRecord) -> Result<Vec<PoincareRow>> {
    spec.validate()?;
    let paths: Vec<Result<Vec<(f64, f64)>>> = par_indexed(spec.samples, |i| one_path(spec, seed.child(i as u64)));
    let paths: Vec<Vec<(f64, f64)>> = paths.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (k, f) in spec.functionals.iter().enumerate() {
        let g: Vec<f64> = paths.iter().map(|p| p[k].0).collect();
        let b: Vec<f64> = paths.iter().map(|p| p[k].1).collect();
        let var = variance(&g);
        let bound = Estimate::from_samples(&b);
        let (ratio, ratio_se) = if bound.mean == 0.0 { (0.0, 0.0) } else { (var / bound.mean, jackknife_ratio_se(&g, &b, 40)) };
        rows.push(PoincareRow { functional: f.name(), variance: var, derivative_bound: bound, ratio, ratio_se });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Per-mode variance of `φ(0,T)` and its damped derivative norm for the
    /// quadratic field on a ring under Euler–Maruyama.
    fn ring_oracle(side: usize, c: f64, m: f64, dt: f64, n: usize) -> (f64, f64) {
        let mut var = 0.0;
        let mut bound = 0.0;
        for k in 0..side {
            let xi = 2.0 * std::f64::consts::PI * k as f64 / side as f64;
            let mu = 2.0 - 2.0 * xi.cos();
            let rho = 1.0 - dt * (c * mu + m * m) / 2.0;
            let sigma = (1.0 - dt * c * mu / 2.0) * (-m * m * dt / 2.0).exp();
            for j in 0..n as i32 {
                var += dt * rho.powi(2 * j);
                bound += dt * sigma.powi(2 * j);
            }
        }
        (var / side as f64, bound / side as f64)
    }

    #[test]
    fn quadratic_point_value_matches_oracle() {
        let side = 8;
        let cube = PeriodicCube::new(1, side).unwrap();
        let (c, m, dt, n) = (1.0, 0.7, 0.05, 60);
        let mut w = vec![0.0; side];
        w[0] = 1.0;
        let spec = PoincareSpec {
            cube,
            potential: Potential::quadratic(c).unwrap(),
            mass: m,
            dt,
            horizon: n as f64 * dt,
            samples: 4000,
            functionals: vec![Functional::Linear { weights: w }, Functional::Constant],
        };
        let rows = poincare_variance_check(&spec, SeedRecord::new(6, 0)).unwrap();
        let (var, bound) = ring_oracle(side, c, m, dt, n);
        assert!((rows[0].derivative_bound.mean - bound).abs() < 1e-10);
        assert!(rows[0].derivative_bound.se < 1e-12);
        // Sample variance error is about var·√(2/N).
        assert!((rows[0].variance - var).abs() < 3.5 * var * (2.0 / 4000f64).sqrt());
        assert!(var <= bound);
        assert!(rows.iter().all(|r| r.passes(3.0)));
        assert_eq!(rows[1].variance, 0.0);
        assert_eq!(rows[1].derivative_bound.mean, 0.0);
    }

    #[test]
    fn dipole_tanh_is_within_bound() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let spec = PoincareSpec {
            cube,
            potential: Potential::dipole(1.0, 0.3).unwrap(),
            mass: 1.0,
            dt: 0.05,
            horizon: 2.0,
            samples: 800,
            functionals: vec![Functional::Tanh { site: vec![0, 0] }, Functional::Square { site: vec![1, 2] }],
        };
        let rows = poincare_variance_check(&spec, SeedRecord::new(2, 0)).unwrap();
        assert!(rows.iter().all(|r| r.passes(3.0) && r.ratio_se > 0.0), "{rows:?}");
    }
}
