//! Perturbation expansion around the constant coefficient `Λ I`.
//!
//! With `a = Λ(I − b̃)` one backward step splits as `S_i = S_0 + B_i`, where
//! `S_0 = I − (ΔΛ/2)∇*∇` and `B_i = (ΔΛ/2)∇*b̃_i∇`. The terms obey
//! `u_0(i) = S_0 u_0(i+1)` and `u_n(i) = S_0 u_n(i+1) + B_i u_{n−1}(i+1)`
//! with `u_n` vanishing at the terminal time for `n ≥ 1`; they sum to the
//! full backward solution exactly.

use super::greens::{backward_step, check_backward};
use super::SpaceTimeField;
use crate::env::CoefficientField;
use crate::error::{config, Error, Result};
use crate::lattice::{gradient, laplacian};

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationTerms {
    pub terms: Vec<SpaceTimeField>,
    /// The full solution computed directly.
    pub direct: SpaceTimeField,
    /// `‖u_n‖₂` in space-time.
    pub term_norms: Vec<f64>,
    /// `‖∇u_n‖₂` in space-time.
    pub gradient_norms: Vec<f64>,
    /// `‖direct − Σ_{k≤n} u_k‖₂` for each `n`.
    pub residuals: Vec<f64>,
}

struct Split<'a> {
    a: &'a CoefficientField,
    upper: f64,
    lap: Vec<f64>,
    ka: Vec<f64>,
}

impl<'a> Split<'a> {
    fn new(a: &'a CoefficientField) -> Self {
        let n = a.cube().volume();
        Self { a, upper: a.window().upper(), lap: vec![0.0; n], ka: vec![0.0; n] }
    }

    /// `out = S_0 w + B_i p`.
    fn apply(&mut self, i: usize, w: &[f64], p: Option<&[f64]>, out: &mut [f64]) {
        let h = 0.5 * self.a.dt();
        laplacian(self.a.cube(), w, &mut self.lap);
        for ((o, wv), l) in out.iter_mut().zip(w).zip(&self.lap) {
            *o = wv - h * self.upper * l;
        }
        if let Some(p) = p {
            laplacian(self.a.cube(), p, &mut self.lap);
            self.a.apply(i, p, &mut self.ka);
            for ((o, l), k) in out.iter_mut().zip(&self.lap).zip(&self.ka) {
                *o += h * (self.upper * l - k);
            }
        }
    }
}

fn gradient_norm(f: &SpaceTimeField) -> f64 {
    let cube = f.cube();
    let mut g = vec![0.0; cube.dim() * cube.volume()];
    let mut acc = 0.0;
    for i in 0..f.n_times() {
        gradient(cube, f.slice(i), &mut g);
        acc += g.iter().map(|v| v * v).sum::<f64>();
    }
    (f.dt() * acc).sqrt()
}

fn finish(terms: Vec<SpaceTimeField>, direct: SpaceTimeField) -> PerturbationTerms {
    let term_norms = terms.iter().map(SpaceTimeField::l2_norm).collect();
    let gradient_norms = terms.iter().map(gradient_norm).collect();
    let mut partial = vec![0.0; direct.values().len()];
    let mut residuals = Vec::with_capacity(terms.len());
    for t in &terms {
        for (p, v) in partial.iter_mut().zip(t.values()) {
            *p += v;
        }
        let r: f64 = partial.iter().zip(direct.values()).map(|(p, d)| (p - d).powi(2)).sum();
        residuals.push((direct.dt() * r).sqrt());
    }
    PerturbationTerms { terms, direct, term_norms, gradient_norms, residuals }
}

/// Expansion of the backward solution with terminal data `terminal` at `t_index`,
/// stored for `s_start ≤ i ≤ t_index`.
pub fn perturbation_terms(
    a: &CoefficientField,
    terminal: &[f64],
    t_index: usize,
    s_start: usize,
    n_max: usize,
) -> Result<PerturbationTerms> {
    check_backward(a, t_index, s_start)?;
    let cube = a.cube();
    let n = cube.volume();
    if terminal.len() != n {
        return Err(config("terminal", format!("expected {n} values, got {}", terminal.len())));
    }
    let nt = t_index - s_start + 1;
    let t0 = a.t0() + s_start as f64 * a.dt();
    let mut terms: Vec<SpaceTimeField> = (0..=n_max).map(|_| SpaceTimeField::zeros(cube, t0, a.dt(), nt)).collect();
    terms[0].slice_mut(nt - 1).copy_from_slice(terminal);
    let mut split = Split::new(a);
    let mut out = vec![0.0; n];
    for k in (0..nt - 1).rev() {
        let i = s_start + k;
        for m in 0..=n_max {
            let (lo, hi) = terms.split_at_mut(m);
            let prev = lo.last().map(|p| p.slice(k + 1));
            split.apply(i, hi[0].slice(k + 1), prev, &mut out);
            hi[0].slice_mut(k).copy_from_slice(&out);
        }
    }
    let mut direct = SpaceTimeField::zeros(cube, t0, a.dt(), nt);
    let mut u = terminal.to_vec();
    let mut ku = vec![0.0; n];
    direct.slice_mut(nt - 1).copy_from_slice(&u);
    for k in (0..nt - 1).rev() {
        backward_step(a, s_start + k, &mut u, &mut ku);
        direct.slice_mut(k).copy_from_slice(&u);
    }
    Ok(finish(terms, direct))
}

/// Expansion of the damped resolvent `v_i = q S_i (v_{i+1} + Δ g_{i+1})`, `q = e^{−m²Δ/2}`.
pub fn damped_perturbation_terms(
    a: &CoefficientField,
    m: f64,
    g: &SpaceTimeField,
    n_max: usize,
) -> Result<PerturbationTerms> {
    if !(m > 0.0) {
        return Err(Error::Domain(format!("damped resolvent needs m > 0, got {m}")));
    }
    let direct = super::damped_resolvent(a, m, g)?.v;
    let cube = a.cube();
    let n = cube.volume();
    let nt = g.n_times();
    let q = (-m * m * a.dt() / 2.0).exp();
    let mut terms: Vec<SpaceTimeField> = (0..=n_max).map(|_| SpaceTimeField::zeros(cube, g.t0(), a.dt(), nt)).collect();
    let mut split = Split::new(a);
    let mut out = vec![0.0; n];
    let mut w0 = vec![0.0; n];
    for i in (0..nt.saturating_sub(1)).rev() {
        // w_0 = v_0 + Δg at i+1, w_n = v_n otherwise
        for (w, (v, f)) in w0.iter_mut().zip(terms[0].slice(i + 1).iter().zip(g.slice(i + 1))) {
            *w = v + a.dt() * f;
        }
        for mm in (0..=n_max).rev() {
            let cur: Vec<f64> = if mm == 0 { w0.clone() } else { terms[mm].slice(i + 1).to_vec() };
            let prev: Option<Vec<f64>> = match mm {
                0 => None,
                1 => Some(w0.clone()),
                _ => Some(terms[mm - 1].slice(i + 1).to_vec()),
            };
            split.apply(i, &cur, prev.as_deref(), &mut out);
            for (t, o) in terms[mm].slice_mut(i).iter_mut().zip(&out) {
                *t = q * o;
            }
        }
    }
    Ok(finish(terms, direct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::PeriodicCube;
    use crate::matrix::SymMatrix;
    use crate::env::{coefficient_field, langevin_simulate, CoefficientMap, LangevinConfig, Potential};
    use crate::rng::SeedRecord;

    fn env() -> CoefficientField {
        let cube = PeriodicCube::new(2, 8).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let mut cfg = LangevinConfig::new(p, 1.0, 0.1, 40);
        cfg.burn_in = 50;
        let t = langevin_simulate(&cube, &cfg, SeedRecord::new(8, 0)).unwrap();
        coefficient_field(&t, &CoefficientMap::HessianOfGradient(p)).unwrap()
    }

    #[test]
    fn top_level_environment_has_no_corrections() {
        let cube = PeriodicCube::new(2, 6).unwrap();
        let a = CoefficientField::constant(&cube, &SymMatrix::scaled_identity(2, 1.3)).unwrap().with_time_grid(0.0, 0.1);
        let mut h = vec![0.0; 36];
        h[4] = 1.0;
        let p = perturbation_terms(&a, &h, 20, 0, 3).unwrap();
        assert!(p.term_norms[1..].iter().all(|v| *v < 1e-14));
        assert!(p.residuals[0] < 1e-14);
    }

    #[test]
    fn partial_sums_converge_to_direct_solve() {
        let a = env();
        let mut h = vec![0.0; 64];
        h[9] = 1.0;
        let p = perturbation_terms(&a, &h, 40, 0, 30).unwrap();
        assert!(*p.residuals.last().unwrap() < 1e-12);
        let q = a.window().contrast();
        for w in p.residuals.windows(2).take(8) {
            assert!(w[1] <= (q + 0.05) * w[0] + 1e-15);
        }
    }

    #[test]
    fn damped_terms_sum_to_resolvent() {
        let a = env();
        let cube = a.cube().clone();
        let mut g = SpaceTimeField::zeros(&cube, a.t0(), a.dt(), 41);
        for j in 20..41 {
            g.slice_mut(j)[3] = 1.0;
            g.slice_mut(j)[40] = -0.5;
        }
        let p = damped_perturbation_terms(&a, 1.0, &g, 25).unwrap();
        assert!(*p.residuals.last().unwrap() < 1e-12 * p.direct.l2_norm());
    }
}
