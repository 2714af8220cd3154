use serde::{Deserialize, Serialize};

use super::diffusion::euler_maruyama_path;
use super::potential::ConvexPotential;
use crate::env::brownian_increments;
use crate::error::{config, Result};
use crate::rng::{par_indexed, SeedRecord};
use crate::stats::Estimate;

/// Self-normalized path-weight estimate of `⟨f⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeynmanKacEstimate {
    pub estimate: f64,
    /// Delta-method standard error of the ratio.
    pub se: f64,
    /// `(Σw)²/Σw²`.
    pub ess: f64,
    pub paths: usize,
    /// Effective sample size below 5% of the paths.
    pub flagged: bool,
}

impl FeynmanKacEstimate {
    pub fn as_estimate(&self) -> Estimate {
        Estimate { mean: self.estimate, se: self.se, n: self.paths }
    }
}

/// Brownian paths from 0 on `[0, T]` at step `dt`, weighted by
/// `exp{−½∫_0^T [−½ΔW(B) + ¼|∇W(B)|²] ds} e^{−W(B(T))/2}`; the time integral
/// uses the trapezoidal rule.
pub fn feynman_kac_estimate(
    w: &ConvexPotential,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: SeedRecord,
) -> Result<FeynmanKacEstimate> {
    if !(dt > 0.0 && horizon >= dt) {
        return Err(config("T", format!("need T >= dt > 0, got T = {horizon}, dt = {dt}")));
    }
    if paths < 2 {
        return Err(config("paths", "need at least two paths"));
    }
    let k = w.dim();
    let n = (horizon / dt).round() as usize;
    let draws: Vec<(f64, f64)> = par_indexed(paths, |p| {
        let mut rng = seed.child(p as u64).rng();
        let mut b = vec![0.0; k];
        let mut db = vec![0.0; k];
        let mut integral = 0.5 * w.density(&b);
        for i in 1..=n {
            brownian_increments(&mut rng, dt, &mut db);
            b.iter_mut().zip(&db).for_each(|(x, d)| *x += d);
            let u = w.density(&b);
            integral += if i == n { 0.5 * u } else { u };
        }
        (-0.5 * dt * integral - 0.5 * w.value(&b), f(&b))
    });
    let top = draws.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = draws.iter().map(|d| (d.0 - top).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let num: f64 = weights.iter().zip(&draws).map(|(w, d)| w * d.1).sum();
    let estimate = num / sum;
    let se = weights.iter().zip(&draws).map(|(w, d)| (w * (d.1 - estimate)).powi(2)).sum::<f64>().sqrt() / sum;
    let ess = sum * sum / weights.iter().map(|w| w * w).sum::<f64>();
    Ok(FeynmanKacEstimate { estimate, se, ess, paths, flagged: ess < 0.05 * paths as f64 })
}

/// Time average of `f` along one Euler–Maruyama path after `burn_in` time,
/// with the standard error inflated by the integrated autocorrelation time.
pub fn time_average_estimate(
    w: &ConvexPotential,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    dt: f64,
    duration: f64,
    burn_in: f64,
    seed: SeedRecord,
) -> Result<Estimate> {
    let k = w.dim();
    let skip = (burn_in / dt).ceil() as usize;
    let n = (duration / dt).round() as usize;
    let mut rng = seed.rng();
    let mut state = vec![0.0; k];
    let mut series = Vec::with_capacity(n);
    let chunk = 4096;
    let mut done = 0;
    while done < skip + n {
        let len = chunk.min(skip + n - done);
        let inc: Vec<Vec<f64>> = (0..len)
            .map(|_| {
                let mut b = vec![0.0; k];
                brownian_increments(&mut rng, dt, &mut b);
                b
            })
            .collect();
        let path = euler_maruyama_path(w, dt, &state, &inc)?;
        for (i, x) in path.iter().enumerate().skip(1) {
            if done + i > skip {
                series.push(f(x));
            }
        }
        state = path[len].clone();
        done += len;
    }
    Ok(Estimate::from_series(&series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMatrix;

    #[test]
    fn constant_observable_is_exactly_one() {
        let w = ConvexPotential::cosine_perturbed(SymMatrix::identity(1), 0.3).unwrap();
        let r = feynman_kac_estimate(&w, &|_| 1.0, 4.0, 0.01, 500, SeedRecord::new(1, 0)).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.se, 0.0);
    }

    #[test]
    fn gaussian_second_moment() {
        let w = ConvexPotential::quadratic(SymMatrix::identity(1), vec![0.0]).unwrap();
        let r = feynman_kac_estimate(&w, &|x| x[0] * x[0], 8.0, 0.01, 20000, SeedRecord::new(2, 0)).unwrap();
        assert!(!r.flagged, "{r:?}");
        assert!((r.estimate - 1.0).abs() < 3.0 * r.se, "{r:?}");
    }

    #[test]
    fn agrees_with_time_average() {
        let w = ConvexPotential::cosine_perturbed(SymMatrix::identity(1), 0.3).unwrap();
        let f = |x: &[f64]| x[0].cos();
        let fk = feynman_kac_estimate(&w, &f, 8.0, 0.01, 20000, SeedRecord::new(3, 0)).unwrap();
        let ta = time_average_estimate(&w, &f, 0.01, 10000.0, 20.0, SeedRecord::new(4, 0)).unwrap();
        assert!(!fk.flagged);
        assert!(fk.as_estimate().z_against(&ta) < 3.0, "{fk:?} {ta:?}");
    }

    #[test]
    fn long_horizon_degeneracy_is_flagged() {
        let w = ConvexPotential::quadratic(SymMatrix::diagonal(&[1.0, 1.0, 1.0]), vec![0.0; 3]).unwrap();
        let r = feynman_kac_estimate(&w, &|x| x[0], 200.0, 0.05, 200, SeedRecord::new(5, 0)).unwrap();
        assert!(r.flagged, "{r:?}");
    }
}
