use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{sym_function, Verdict};
use crate::error::{config, Result};
use crate::matrix::SymMatrix;
use crate::rng::{par_indexed, SeedRecord};
use crate::stats::Estimate;

#[derive(Clone, Debug)]
pub struct MomentsSpec {
    pub a: SymMatrix,
    pub b: Vec<f64>,
    pub lags: Vec<f64>,
    pub samples: usize,
    /// Time run from `φ(0) = 0` before the first recorded state.
    pub burn_in: f64,
}

impl MomentsSpec {
    /// Burn-in defaults to `10/λ_min(A)`.
    pub fn new(a: SymMatrix, b: Vec<f64>, lags: Vec<f64>, samples: usize) -> Self {
        let lo = a.eigenvalues()[0];
        Self { a, b, lags, samples, burn_in: 10.0 / lo }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentsReport {
    pub mean: Vec<Estimate>,
    /// `A⁻¹b`.
    pub mean_oracle: Vec<f64>,
    /// Per lag, row-major `k×k` estimates of `Cov(φ(t), φ(t+τ))`.
    pub covariance: Vec<Vec<Estimate>>,
    /// Per lag, `A⁻¹e^{−Aτ/2}`.
    pub covariance_oracle: Vec<Vec<f64>>,
    pub verdicts: Vec<Verdict>,
}

impl MomentsReport {
    pub fn passes(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Exact Gaussian transition over time `tau`:
/// `φ ↦ e^{−Aτ/2}φ + (I − e^{−Aτ/2})A⁻¹b + N(0, A⁻¹(I − e^{−Aτ}))`.
struct Transition {
    decay: DMatrix<f64>,
    shift: DVector<f64>,
    noise: DMatrix<f64>,
}

impl Transition {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>, tau: f64) -> Self {
        Self {
            decay: sym_function(a, |l| (-l * tau / 2.0).exp()),
            shift: sym_function(a, |l| -(-l * tau / 2.0).exp_m1() / l) * b,
            noise: sym_function(a, |l| (-(-l * tau).exp_m1() / l).sqrt()),
        }
    }

    fn apply(&self, phi: &DVector<f64>, rng: &mut impl rand::Rng) -> DVector<f64> {
        let z = DVector::from_iterator(phi.len(), (0..phi.len()).map(|_| StandardNormal.sample(rng)));
        &self.decay * phi + &self.shift + &self.noise * z
    }
}

/// Independent paths from `φ(0) = 0`, each recorded at the burn-in time and
/// at every lag after it, simulated with exact transitions.
pub fn stationary_moments_check(spec: &MomentsSpec, seed: SeedRecord) -> Result<MomentsReport> {
    let k = spec.a.dim();
    if spec.b.len() != k {
        return Err(config("b", format!("need {k} entries")));
    }
    if spec.samples < 2 {
        return Err(config("samples", "need at least two samples"));
    }
    if spec.lags.iter().any(|&t| !(t >= 0.0 && t.is_finite())) || !(spec.burn_in >= 0.0) {
        return Err(config("lags", "lags and burn-in must be non-negative"));
    }
    let a = spec.a.to_dmatrix();
    if spec.a.eigenvalues()[0] <= 0.0 {
        return Err(config("A", "must be positive definite"));
    }
    let b = DVector::from_column_slice(&spec.b);
    let mut order: Vec<usize> = (0..spec.lags.len()).collect();
    order.sort_by(|&i, &j| spec.lags[i].total_cmp(&spec.lags[j]));
    let start = Transition::new(&a, &b, spec.burn_in);
    let mut steps = Vec::with_capacity(order.len());
    let mut prev = 0.0;
    for &i in &order {
        steps.push(Transition::new(&a, &b, spec.lags[i] - prev));
        prev = spec.lags[i];
    }
    let paths: Vec<(DVector<f64>, Vec<DVector<f64>>)> = par_indexed(spec.samples, |p| {
        let mut rng = seed.child(p as u64).rng();
        let x0 = start.apply(&DVector::zeros(k), &mut rng);
        let mut x = x0.clone();
        let mut later = vec![DVector::zeros(k); order.len()];
        for (step, &i) in steps.iter().zip(&order) {
            x = step.apply(&x, &mut rng);
            later[i] = x.clone();
        }
        (x0, later)
    });

    let inv = spec.a.inverse_pd()?;
    let mean_oracle = inv.apply(&spec.b);
    let mean: Vec<Estimate> = (0..k).map(|j| Estimate::from_samples(&paths.iter().map(|p| p.0[j]).collect::<Vec<_>>())).collect();
    let mut verdicts: Vec<Verdict> =
        (0..k).map(|j| Verdict::within(format!("mean[{j}]"), mean[j], mean_oracle[j], 3.0)).collect();
    let mut covariance = Vec::new();
    let mut covariance_oracle = Vec::new();
    for (li, &tau) in spec.lags.iter().enumerate() {
        let oracle = sym_function(&a, |l| (-l * tau / 2.0).exp() / l);
        let later_mean: Vec<f64> = (0..k).map(|l| paths.iter().map(|p| p.1[li][l]).sum::<f64>() / spec.samples as f64).collect();
        let mut est = Vec::with_capacity(k * k);
        let mut orc = Vec::with_capacity(k * k);
        for j in 0..k {
            for l in 0..k {
                let products: Vec<f64> =
                    paths.iter().map(|p| (p.0[j] - mean[j].mean) * (p.1[li][l] - later_mean[l])).collect();
                let e = Estimate::from_samples(&products);
                verdicts.push(Verdict::within(format!("cov[{j},{l}](tau={tau})"), e, oracle[(j, l)], 3.0));
                est.push(e);
                orc.push(oracle[(j, l)]);
            }
        }
        covariance.push(est);
        covariance_oracle.push(orc);
    }
    Ok(MomentsReport { mean, mean_oracle, covariance, covariance_oracle, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_variance_and_lag_one() {
        let spec = MomentsSpec::new(SymMatrix::diagonal(&[2.0]), vec![0.0], vec![0.0, 1.0], 20000);
        let r = stationary_moments_check(&spec, SeedRecord::new(21, 0)).unwrap();
        assert_eq!(r.covariance_oracle[0][0], 0.5);
        assert!((r.covariance_oracle[1][0] - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(r.passes(), "{:?}", r.verdicts);
    }

    #[test]
    fn diagonal_mean_is_linear_solve() {
        let spec = MomentsSpec::new(SymMatrix::diagonal(&[1.0, 4.0]), vec![1.0, 1.0], vec![0.0, 0.5, 2.0], 20000);
        let r = stationary_moments_check(&spec, SeedRecord::new(22, 0)).unwrap();
        assert_eq!(r.mean_oracle, vec![1.0, 0.25]);
        assert!(r.passes(), "{:?}", r.verdicts);
    }

    #[test]
    fn lag_zero_is_inverse() {
        let a = SymMatrix::new(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let spec = MomentsSpec::new(a.clone(), vec![0.3, -0.4], vec![0.0, 1.0], 20000);
        let r = stationary_moments_check(&spec, SeedRecord::new(23, 0)).unwrap();
        let inv = a.inverse_pd().unwrap();
        for (x, y) in r.covariance_oracle[0].iter().zip(inv.entries()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(r.passes(), "{:?}", r.verdicts);
    }
}
