//! `q = ⟨a⟩ − Λ Σ_{m≥1} ⟨b X_m⟩` with `b = I − a/Λ`, `X_1 = TPb`,
//! `X_{m+1} = TP(bX_m)`, applied column by column.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::ops::{apply_coefficient, mean_norm, SampleGrid};
use super::qmatrix::QMatrix;
use super::toperator::t_operator_spectral;
use crate::env::CoefficientField;
use crate::error::{config, Result};

/// Per-term record of the series on one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannTerm {
    pub m: usize,
    /// `−Λ⟨bX_m⟩`, row-major, real and imaginary parts.
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `‖X_m‖` summed in quadrature over columns.
    pub norm: f64,
    /// `‖X_m‖/‖X_{m−1}‖` (NaN for the first term).
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannSeries {
    pub q: QMatrix,
    /// Terms of the first sample; ratios of all samples go into `max_ratio`.
    pub terms: Vec<NeumannTerm>,
    /// Largest measured term ratio over samples and terms.
    pub max_ratio: f64,
    /// `1 − λ/Λ`.
    pub contrast: f64,
    /// Bound on every entry of the neglected tail, `Λκ^{M+2}/(1−κ)`.
    pub tail_bound: f64,
}

/// `out = (I − a/Λ)f` on one slice.
fn apply_b(a: &CoefficientField, t: usize, upper: f64, f: &[C], out: &mut [C]) {
    apply_coefficient(a, t, f, out);
    for (o, v) in out.iter_mut().zip(f) {
        *o = v - *o / upper;
    }
}

fn apply_b_field(a: &CoefficientField, upper: f64, f: &[C]) -> Vec<C> {
    let n = a.cube().volume();
    let d = a.cube().dim();
    let mut out = vec![C::default(); f.len()];
    for t in 0..a.n_times() {
        apply_b(a, t, upper, &f[t * d * n..(t + 1) * d * n], &mut out[t * d * n..(t + 1) * d * n]);
    }
    out
}

fn project(f: &mut [C], grid: &SampleGrid) {
    let n = grid.cube.volume();
    let d = grid.cube.dim();
    for j in 0..d {
        let mut m = C::default();
        for t in 0..grid.n_times {
            m += f[(t * d + j) * n..(t * d + j + 1) * n].iter().sum::<C>();
        }
        m /= grid.scalar_len() as f64;
        for t in 0..grid.n_times {
            for v in &mut f[(t * d + j) * n..(t * d + j + 1) * n] {
                *v -= m;
            }
        }
    }
}

/// Per-sample terms: returns (`⟨a⟩`, terms).
fn sample_series(a: &CoefficientField, xi: &[f64], eta: f64, m_max: usize) -> Result<(Vec<C>, Vec<NeumannTerm>)> {
    let grid = SampleGrid::of(a);
    let (n, d, nt) = (a.cube().volume(), a.cube().dim(), a.n_times());
    let upper = a.window().upper();
    let points = grid.scalar_len() as f64;
    let mut mean_a = vec![C::default(); d * d];
    for t in 0..nt {
        for x in 0..n {
            for j in 0..d {
                for k in 0..d {
                    mean_a[j * d + k] += a.entry(t, x, j, k);
                }
            }
        }
    }
    mean_a.iter_mut().for_each(|v| *v /= points);

    // Column k of the running product starts as b e_k.
    let mut cols: Vec<Vec<C>> = (0..d)
        .map(|k| {
            let mut ek = vec![C::default(); grid.vector_len()];
            for t in 0..nt {
                ek[(t * d + k) * n..(t * d + k + 1) * n].fill(C::new(1.0, 0.0));
            }
            apply_b_field(a, upper, &ek)
        })
        .collect();
    let mut terms = Vec::with_capacity(m_max);
    let mut prev_norm = f64::NAN;
    for m in 1..=m_max {
        let mut norm2 = 0.0;
        let mut term = vec![C::default(); d * d];
        for (k, col) in cols.iter_mut().enumerate() {
            project(col, &grid);
            let x = t_operator_spectral(&grid, upper, xi, eta, col)?;
            norm2 += mean_norm(&x, grid.scalar_len()).powi(2);
            let bx = apply_b_field(a, upper, &x);
            for t in 0..nt {
                for j in 0..d {
                    term[j * d + k] += bx[(t * d + j) * n..(t * d + j + 1) * n].iter().sum::<C>();
                }
            }
            *col = bx;
        }
        let norm = norm2.sqrt();
        let term: Vec<C> = term.into_iter().map(|v| -v * upper / points).collect();
        terms.push(NeumannTerm {
            m,
            re: term.iter().map(|v| v.re).collect(),
            im: term.iter().map(|v| v.im).collect(),
            norm,
            ratio: norm / prev_norm,
        });
        prev_norm = norm;
    }
    Ok((mean_a, terms))
}

/// Truncated Neumann-series estimate of `q(ξ,η)` pooled over samples.
pub fn neumann_series_q(samples: &[CoefficientField], xi: &[f64], eta: f64, m_max: usize) -> Result<NeumannSeries> {
    if m_max == 0 {
        return Err(config("M_max", "need at least one term"));
    }
    let first = samples.first().ok_or_else(|| config("samples", "need at least one sample"))?;
    let window = first.window();
    let per: Vec<Result<(Vec<C>, Vec<NeumannTerm>)>> =
        crate::rng::par_indexed(samples.len(), |i| sample_series(&samples[i], xi, eta, m_max));
    let per: Vec<(Vec<C>, Vec<NeumannTerm>)> = per.into_iter().collect::<Result<_>>()?;
    let d = first.cube().dim();
    let totals: Vec<Vec<C>> = per
        .iter()
        .map(|(mean_a, terms)| {
            let mut q = mean_a.clone();
            for t in terms {
                for e in 0..d * d {
                    q[e] += C::new(t.re[e], t.im[e]);
                }
            }
            q
        })
        .collect();
    let q = QMatrix::from_samples(xi, eta, d, &totals)?;
    let max_ratio = per
        .iter()
        .flat_map(|(_, terms)| terms.iter().skip(1).map(|t| t.ratio))
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    let kappa = 1.0 - window.lambda() / window.upper();
    // Each column of bX_m has norm at most κ^{m+1}, which bounds every entry of term m.
    let tail_bound = window.upper() * kappa.powi(m_max as i32 + 2) / (1.0 - kappa);
    Ok(NeumannSeries { q, terms: per.into_iter().next().map(|p| p.1).unwrap_or_default(), max_ratio, contrast: kappa, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Layout;
    use crate::homogenize::q_estimate;
    use crate::lattice::PeriodicCube;
    use crate::matrix::{EllipticityPair, SymMatrix};
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_upper_coefficient_has_no_terms() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let a = CoefficientField::constant(&cube, &SymMatrix::scaled_identity(2, 1.3)).unwrap();
        let s = neumann_series_q(std::slice::from_ref(&a), &[0.2, 0.0], 0.1, 3).unwrap();
        assert!(s.terms.iter().all(|t| t.norm == 0.0));
        assert!((s.q.entry(0, 0) - 1.3).norm() < 1e-15 && s.q.entry(0, 1).norm() < 1e-15);
    }

    #[test]
    fn series_matches_corrector_q() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..2 * 16 * 3).map(|_| rng.random_range(0.8..1.2)).collect();
        let a = CoefficientField::from_data(cube, 0.0, 0.3, EllipticityPair::new(0.8, 1.2).unwrap(), Layout::Diagonal, data)
            .unwrap();
        for xi in [[0.0, 0.0], [0.6, -0.3]] {
            let s = neumann_series_q(std::slice::from_ref(&a), &xi, 0.2, 30).unwrap();
            let q = q_estimate(std::slice::from_ref(&a), &xi, 0.2).unwrap();
            for e in 0..4 {
                let diff = (C::new(s.q.re[e], s.q.im[e]) - C::new(q.re[e], q.im[e])).norm();
                assert!(diff < s.tail_bound + 1e-9, "entry {e}: {diff} vs tail {}", s.tail_bound);
            }
            assert!(s.max_ratio <= s.contrast + 1e-12);
        }
    }
}
