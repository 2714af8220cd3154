//! Log-log decay fits of measured differences against a scale.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::stats::LinearFit;

/// How the fitted slope maps to the reported exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateModel {
    /// `diff ≈ C·ε^α`: `α = slope`.
    Power,
    /// `diff ≈ C·s^{−(offset+α)/2}` with `s = Λt+1`: `α = −2·slope − offset`.
    Parabolic { offset: f64 },
    /// `diff ≈ C·|x|^{−(offset+α)}`: `α = −slope − offset`.
    Elliptic { offset: f64 },
}

impl RateModel {
    fn exponent(&self, slope: f64) -> f64 {
        match *self {
            Self::Power => slope,
            Self::Parabolic { offset } => -2.0 * slope - offset,
            Self::Elliptic { offset } => -slope - offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub model: RateModel,
    /// Scales of the retained points, strictly decreasing.
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    /// Fitted excess exponent and its 95% interval.
    pub alpha: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub residuals: Vec<f64>,
    /// Points dropped before fitting, with reasons.
    pub warnings: Vec<String>,
    /// True when too few points rise above the declared noise floor.
    pub noise_dominated: bool,
}

impl RateReport {
    /// Positive exponent with a positive lower confidence bound.
    pub fn positive(&self) -> bool {
        !self.noise_dominated && self.alpha > 0.0 && self.alpha_lower > 0.0
    }
}

/// Fits `log diff` against `log scale`. Nonpositive differences and those
/// below `floor` (when given, per point) are dropped with a warning; fewer
/// than four surviving points mark the report as noise-dominated.
pub fn rate_fit(scales: &[f64], diffs: &[f64], model: RateModel, floor: Option<&[f64]>) -> Result<RateReport> {
    if scales.len() != diffs.len() {
        return Err(config("diffs", format!("{} scales but {} differences", scales.len(), diffs.len())));
    }
    if scales.len() < 4 {
        return Err(config("scales", format!("need at least 4 scales, got {}", scales.len())));
    }
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(config("scales", "scales must be positive and finite"));
    }
    if let Some(f) = floor {
        if f.len() != scales.len() {
            return Err(config("floor", "one noise floor per scale"));
        }
    }
    let mut idx: Vec<usize> = (0..scales.len()).collect();
    idx.sort_by(|&a, &b| scales[b].total_cmp(&scales[a]));
    if idx.windows(2).any(|w| scales[w[0]] == scales[w[1]]) {
        return Err(config("scales", "scales must be distinct"));
    }
    let mut warnings = Vec::new();
    let mut kept_s = Vec::new();
    let mut kept_v = Vec::new();
    for &i in &idx {
        let v = diffs[i];
        if !(v > 0.0 && v.is_finite()) {
            warnings.push(format!("scale {:e}: nonpositive difference {v:e} dropped", scales[i]));
            continue;
        }
        if let Some(f) = floor {
            if v <= f[i] {
                warnings.push(format!("scale {:e}: difference {v:e} below noise floor {:e} dropped", scales[i], f[i]));
                continue;
            }
        }
        kept_s.push(scales[i]);
        kept_v.push(v);
    }
    let noise_dominated = kept_s.len() < 4;
    let x: Vec<f64> = kept_s.iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = kept_v.iter().map(|v| v.ln()).collect();
    let (slope, slope_se, intercept, residuals, lo, hi) = match LinearFit::fit(&x, &y) {
        Some(fit) => {
            let (lo, hi) = fit.slope_interval(0.95);
            (fit.slope, fit.slope_se, fit.intercept, fit.residuals, lo, hi)
        }
        None => (f64::NAN, f64::NAN, f64::NAN, Vec::new(), f64::NAN, f64::NAN),
    };
    let (a_lo, a_hi) = {
        let (p, q) = (model.exponent(lo), model.exponent(hi));
        (p.min(q), p.max(q))
    };
    Ok(RateReport {
        model,
        scales: kept_s,
        values: kept_v,
        slope,
        slope_se,
        intercept,
        alpha: model.exponent(slope),
        alpha_lower: a_lo,
        alpha_upper: a_hi,
        residuals,
        warnings,
        noise_dominated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let eps = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let d: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(0.5)).collect();
        let r = rate_fit(&eps, &d, RateModel::Power, None).unwrap();
        assert!((r.alpha - 0.5).abs() < 1e-6);
        assert!(r.scales.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn parabolic_offset() {
        let s = [2.0, 4.0, 8.0, 16.0, 32.0];
        let d: Vec<f64> = s.iter().map(|s: &f64| s.powf(-(3.0 + 0.8) / 2.0)).collect();
        let r = rate_fit(&s, &d, RateModel::Parabolic { offset: 3.0 }, None).unwrap();
        assert!((r.alpha - 0.8).abs() < 1e-10);
    }

    #[test]
    fn filters_and_flags_noise() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        let d = [1e-15, -1e-16, 2e-15, 1e-15, 0.0];
        let r = rate_fit(&s, &d, RateModel::Power, Some(&[1e-13; 5])).unwrap();
        assert!(r.noise_dominated);
        assert!(!r.positive());
        assert_eq!(r.warnings.len(), 5);
    }

    #[test]
    fn needs_four_scales() {
        assert!(rate_fit(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], RateModel::Power, None).is_err());
    }
}
