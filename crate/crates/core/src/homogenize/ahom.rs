//! `a_hom = lim_{η→0} q(0,η)` by polynomial extrapolation over an η-ladder.

use serde::{Deserialize, Serialize};

use super::qmatrix::QMatrix;
use crate::error::{config, Result};
use crate::matrix::SymMatrix;
use crate::stats::richardson;

/// Default ladder `{1e−1, 1e−2, 1e−3}·Λ`.
pub fn default_eta_ladder(upper: f64) -> Vec<f64> {
    vec![1e-1 * upper, 1e-2 * upper, 1e-3 * upper]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AHomEstimate {
    pub matrix: SymMatrix,
    /// Per entry: spread of the last two extrapolants.
    pub spread: Vec<f64>,
    /// Per entry: standard error propagated through the extrapolation weights.
    pub statistical: Vec<f64>,
    /// Per entry, the extrapolation tableau diagonal.
    pub extrapolants: Vec<Vec<f64>>,
    pub etas: Vec<f64>,
    /// Set when an entry's η-sequence changes direction by more than two
    /// standard errors.
    pub flagged: bool,
}

impl AHomEstimate {
    /// Largest entry uncertainty `spread + 2·statistical`.
    pub fn uncertainty(&self) -> f64 {
        self.spread.iter().zip(&self.statistical).map(|(s, e)| s + 2.0 * e).fold(0.0, f64::max)
    }
}

/// Extrapolates the symmetrized real part of `q(0, η)` to `η = 0`.
pub fn a_hom_extract(qs: &[QMatrix]) -> Result<AHomEstimate> {
    if qs.len() < 3 {
        return Err(config("eta", format!("need at least 3 ladder values, got {}", qs.len())));
    }
    if qs.iter().any(|q| q.xi.iter().any(|x| *x != 0.0)) {
        return Err(config("xi", "a_hom is extracted at ξ = 0"));
    }
    let etas: Vec<f64> = qs.iter().map(|q| q.eta).collect();
    if etas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(config("eta", "ladder must be strictly decreasing"));
    }
    let ratios: Vec<f64> = etas.windows(2).map(|w| w[0] / w[1]).collect();
    if ratios.iter().any(|r| (r / ratios[0] - 1.0).abs() > 0.1) {
        return Err(config("eta", "ladder must be geometrically spaced"));
    }
    let d = qs[0].dim;
    let syms: Vec<SymMatrix> = qs.iter().map(|q| q.symmetrized()).collect();
    // Linear weights of the last extrapolant, for error propagation.
    let weights: Vec<f64> = (0..qs.len())
        .map(|i| {
            let mut unit = vec![0.0; qs.len()];
            unit[i] = 1.0;
            *richardson(&etas, &unit).last().expect("nonempty")
        })
        .collect();
    let mut entries = vec![0.0; d * d];
    let mut spread = vec![0.0; d * d];
    let mut statistical = vec![0.0; d * d];
    let mut extrapolants = Vec::with_capacity(d * d);
    let mut flagged = false;
    for j in 0..d {
        for k in 0..d {
            let e = j * d + k;
            let values: Vec<f64> = syms.iter().map(|s| s.get(j, k)).collect();
            let ses: Vec<f64> = qs
                .iter()
                .map(|q| {
                    let s = 0.5 * (q.se_re[e].powi(2) + q.se_re[k * d + j].powi(2)).sqrt();
                    if s.is_finite() {
                        s
                    } else {
                        0.0
                    }
                })
                .collect();
            let ex = richardson(&etas, &values);
            let n = ex.len();
            entries[e] = ex[n - 1];
            spread[e] = (ex[n - 1] - ex[n - 2]).abs();
            statistical[e] = weights.iter().zip(&ses).map(|(w, s)| (w * s).abs()).sum();
            let steps: Vec<(f64, f64)> = values
                .windows(2)
                .zip(ses.windows(2))
                .map(|(v, s)| (v[1] - v[0], 2.0 * (s[0] * s[0] + s[1] * s[1]).sqrt()))
                .collect();
            let up = steps.iter().any(|(dv, tol)| *dv > *tol + 1e-14);
            let down = steps.iter().any(|(dv, tol)| *dv < -*tol - 1e-14);
            flagged |= up && down;
            extrapolants.push(ex);
        }
    }
    let matrix = SymMatrix::symmetrized(d, &entries)?;
    Ok(AHomEstimate { matrix, spread, statistical, extrapolants, etas, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CoefficientField, Layout};
    use crate::homogenize::q_estimate;
    use crate::lattice::PeriodicCube;
    use crate::matrix::EllipticityPair;

    #[test]
    fn constant_extrapolates_exactly() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let c = SymMatrix::new(2, vec![1.1, 0.2, 0.2, 0.9]).unwrap();
        let a = CoefficientField::constant(&cube, &c).unwrap();
        let qs: Vec<QMatrix> = default_eta_ladder(1.2)
            .into_iter()
            .map(|eta| q_estimate(std::slice::from_ref(&a), &[0.0, 0.0], eta).unwrap())
            .collect();
        let h = a_hom_extract(&qs).unwrap();
        assert!(h.matrix.entries().iter().zip(c.entries()).all(|(x, y)| (x - y).abs() < 1e-13));
        assert!(!h.flagged);
    }

    #[test]
    fn two_phase_extrapolates_to_harmonic_mean() {
        let cube = PeriodicCube::new(1, 8).unwrap();
        let data: Vec<f64> = (0..8).map(|x| if x % 2 == 0 { 1.0 } else { 4.0 }).collect();
        let a = CoefficientField::from_data(cube, 0.0, 1.0, EllipticityPair::new(1.0, 4.0).unwrap(), Layout::Diagonal, data)
            .unwrap();
        let qs: Vec<QMatrix> = default_eta_ladder(4.0)
            .into_iter()
            .map(|eta| q_estimate(std::slice::from_ref(&a), &[0.0], eta).unwrap())
            .collect();
        let h = a_hom_extract(&qs).unwrap();
        assert!((h.matrix.get(0, 0) - 1.6).abs() <= h.uncertainty().max(1e-9), "{h:?}");
        assert!((h.matrix.get(0, 0) - 1.6).abs() < 1e-3);
    }

    #[test]
    fn rejects_short_or_unordered_ladders() {
        let cube = PeriodicCube::new(1, 4).unwrap();
        let a = CoefficientField::constant(&cube, &SymMatrix::identity(1)).unwrap();
        let q = |eta| q_estimate(std::slice::from_ref(&a), &[0.0], eta).unwrap();
        assert!(a_hom_extract(&[q(0.1), q(0.01)]).is_err());
        assert!(a_hom_extract(&[q(0.01), q(0.1), q(1.0)]).is_err());
    }
}
