use super::SpaceTimeField;
use crate::env::CoefficientField;
use crate::error::{config, Result};

/// Largest explicit step for `∂_t u = −κ∇*a∇u`, from the spectral bound `4dΛ`.
pub fn max_explicit_step(dim: usize, upper: f64, kappa: f64) -> f64 {
    1.0 / (2.0 * dim as f64 * upper * kappa)
}

pub(crate) fn check_step(dim: usize, upper: f64, kappa: f64, dt: f64) -> Result<()> {
    let limit = max_explicit_step(dim, upper, kappa);
    if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
        return Err(config("dt", format!("step {dt} outside (0, {limit}] required for stability")));
    }
    Ok(())
}

/// Explicit Euler for `∂_t u = −∇*a∇u` from `u(·, t_0) = h`: `n_steps + 1` slices.
pub fn solve_forward(a: &CoefficientField, h: &[f64], n_steps: usize) -> Result<SpaceTimeField> {
    let cube = a.cube();
    check_step(cube.dim(), a.window().upper(), 1.0, a.dt())?;
    if h.len() != cube.volume() {
        return Err(config("h", format!("expected {} values, got {}", cube.volume(), h.len())));
    }
    if !a.is_time_independent() && n_steps > a.n_times() {
        return Err(config("n_steps", format!("{n_steps} steps exceed the {} coefficient slices", a.n_times())));
    }
    let n = cube.volume();
    let mut out = SpaceTimeField::zeros(cube, a.t0(), a.dt(), n_steps + 1);
    out.slice_mut(0).copy_from_slice(h);
    let mut ku = vec![0.0; n];
    let mut u = h.to_vec();
    for i in 0..n_steps {
        a.apply(i, &u, &mut ku);
        for (v, k) in u.iter_mut().zip(&ku) {
            *v -= a.dt() * k;
        }
        out.slice_mut(i + 1).copy_from_slice(&u);
    }
    Ok(out)
}

/// `u ← e^{−h(K_i+μ)}u` with `K_i = ∇*a(·,t_i)∇`, by a truncated Taylor series
/// on substeps of length at most `0.5/(4dΛ + μ)`. When `integral` is given it
/// accumulates `∫_0^h e^{−s(K_i+μ)}u ds` into it.
pub fn exponential_step(a: &CoefficientField, i: usize, h: f64, mu: f64, u: &mut [f64], mut integral: Option<&mut [f64]>) {
    let n = u.len();
    let norm = 4.0 * a.cube().dim() as f64 * a.window().upper() + mu;
    let sub = ((h * norm / 0.5).ceil() as usize).max(1);
    let hs = h / sub as f64;
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..sub {
        term.copy_from_slice(u);
        if let Some(acc) = integral.as_deref_mut() {
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += hs * t;
            }
        }
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for order in 1..80 {
            a.apply(i, &term, &mut next);
            let c = -hs / order as f64;
            let mut sup = 0.0f64;
            for ((tv, nv), uv) in term.iter_mut().zip(&next).zip(&mut *u) {
                *tv = c * (nv + mu * *tv);
                *uv += *tv;
                sup = sup.max(tv.abs());
            }
            if let Some(acc) = integral.as_deref_mut() {
                let w = hs / (order + 1) as f64;
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += w * t;
                }
            }
            if sup <= 1e-17 * scale {
                break;
            }
        }
    }
}
