//! Means, standard errors, regression and extrapolation helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se, n }
    }

    /// Mean of a correlated series with the standard error inflated by the
    /// integrated autocorrelation time.
    pub fn from_series(xs: &[f64]) -> Self {
        let base = Self::from_samples(xs);
        let tau = integrated_autocorrelation_time(xs);
        Self { se: base.se * (2.0 * tau).sqrt(), ..base }
    }

    /// `|self − other|` in units of the combined standard error.
    pub fn z_against(&self, other: &Estimate) -> f64 {
        (self.mean - other.mean).abs() / (self.se * self.se + other.se * other.se).sqrt()
    }

    pub fn z_against_value(&self, value: f64) -> f64 {
        (self.mean - value).abs() / self.se
    }
}

/// Sample variance with its standard error (delta method on the fourth moment).
pub fn variance_with_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    Estimate { mean: var, se: ((m4 - m2 * m2) / n).max(0.0).sqrt(), n: xs.len() }
}

/// Sokal's windowed estimate of `τ = 1/2 + Σ_{k≥1} ρ(k)`.
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 0.5;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for k in 1..n / 2 {
        let ck = (0..n - k).map(|i| (xs[i] - mean) * (xs[i + k] - mean)).sum::<f64>() / n as f64;
        tau += ck / c0;
        if k as f64 >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub residuals: Vec<f64>,
    pub dof: usize,
}

impl LinearFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Option<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return None;
        }
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
        let dof = n - 2;
        let slope_se = if dof > 0 {
            (residuals.iter().map(|r| r * r).sum::<f64>() / dof as f64 / sxx).sqrt()
        } else {
            f64::NAN
        };
        Some(Self { slope, intercept, slope_se, residuals, dof })
    }

    /// Two-sided confidence interval for the slope at the given level.
    pub fn slope_interval(&self, level: f64) -> (f64, f64) {
        if self.dof == 0 || !self.slope_se.is_finite() {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        if self.slope_se == 0.0 {
            return (self.slope, self.slope);
        }
        let t = StudentsT::new(0.0, 1.0, self.dof as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.5 + level / 2.0);
        (self.slope - t * self.slope_se, self.slope + t * self.slope_se)
    }
}

/// Polynomial (Neville) extrapolation to `h = 0` from values at nodes `h`.
/// Returns the diagonal of the tableau: entry `k` uses the first `k+1` points.
pub fn richardson(h: &[f64], values: &[f64]) -> Vec<f64> {
    let n = h.len().min(values.len());
    let mut p: Vec<f64> = values[..n].to_vec();
    let mut diag = vec![p[0]];
    for k in 1..n {
        for i in (k..n).rev() {
            p[i] = (h[i - k] * p[i] - h[i] * p[i - 1]) / (h[i - k] - h[i]);
        }
        diag.push(p[k]);
    }
    diag
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_slope() {
        let eps: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let y: Vec<f64> = eps.iter().map(|e| (3.0 * e.powf(0.5)).ln()).collect();
        let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let fit = LinearFit::fit(&x, &y).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        let (lo, hi) = fit.slope_interval(0.95);
        assert!(lo <= 0.5 + 1e-9 && hi >= 0.5 - 1e-9);
    }

    #[test]
    fn richardson_is_exact_for_polynomials() {
        let h = [0.1, 0.01, 0.001];
        let v: Vec<f64> = h.iter().map(|x| 1.6 + 2.0 * x - 5.0 * x * x).collect();
        let d = richardson(&h, &v);
        assert!((d[2] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn ks_of_identical_and_disjoint_samples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&a, &[10.0, 11.0]), 1.0);
    }

    #[test]
    fn estimate_of_constant_series() {
        let e = Estimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
    }
}
