//! Empirical constants in the Aronson-type bound
//! `G(z,s;x,t) ≤ C [Λ(t−s)+1]^{-d/2} exp[−|x−z|/√(Λ(t−s)+1)]`
//! and its gradient version with an extra decay `[Λ(t−s)+1]^{-β/2}`.

use serde::{Deserialize, Serialize};

use super::greens::{box_radius_for, check_backward, BoxBackward, BoxOperator};
use crate::env::CoefficientField;
use crate::error::Result;
use crate::stats::LinearFit;

/// Per-environment envelope values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AronsonSample {
    /// `max_{z,s} G·[Λτ+1]^{d/2}·exp(|x−z|/√(Λτ+1))`.
    pub c_value: f64,
    /// The same maximum over `z` at each stored lag.
    pub c_by_lag: Vec<f64>,
    /// `Λτ + 1` for each stored lag `τ = t − s`.
    pub scale: Vec<f64>,
    /// `max_{z} max_j |G(z,s;x+e_j,t) − G(z,s;x,t)|·exp(|x−z|/√(Λτ+1))` per lag.
    pub grad_envelope: Vec<f64>,
    /// Mass on the outer shell of the truncation box.
    pub boundary_mass: f64,
}

/// Runs the free-box solver from `x` and `x + e_j` in lockstep and records
/// the envelope statistics.
pub fn aronson_sample(a: &CoefficientField, source: usize, t_index: usize, s_start: usize) -> Result<AronsonSample> {
    check_backward(a, t_index, s_start)?;
    a.cube().check(source)?;
    let d = a.cube().dim();
    let upper = a.window().upper();
    let tau_max = (t_index - s_start) as f64 * a.dt();
    let radius = box_radius_for(d, upper, tau_max, 1e-13) + 1;
    let op = BoxOperator::new(a.cube(), source, radius);
    let mut solvers = vec![BoxBackward::new(&op, &vec![0; d])];
    for j in 0..d {
        let mut e = vec![0i64; d];
        e[j] = 1;
        solvers.push(BoxBackward::new(&op, &e));
    }
    let dist: Vec<f64> = (0..op.interior().len())
        .map(|k| op.interior_offset(k).iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt())
        .collect();
    let mut c_value = 0.0f64;
    let mut c_by_lag = Vec::new();
    let mut scale = Vec::new();
    let mut grad_envelope = Vec::new();
    let mut record = |solvers: &[BoxBackward], tau: f64| {
        let sc = upper * tau + 1.0;
        let root = sc.sqrt();
        let pre = sc.powf(d as f64 / 2.0);
        let g0 = solvers[0].values();
        let mut gmax = 0.0f64;
        let mut cmax = 0.0f64;
        for (k, &p) in op.interior().iter().enumerate() {
            let w = (dist[k] / root).exp();
            cmax = cmax.max(g0[p] * pre * w);
            for s in &solvers[1..] {
                gmax = gmax.max((s.values()[p] - g0[p]).abs() * w);
            }
        }
        c_value = c_value.max(cmax);
        c_by_lag.push(cmax);
        scale.push(sc);
        grad_envelope.push(gmax);
    };
    record(&solvers, 0.0);
    for i in (s_start..t_index).rev() {
        for s in solvers.iter_mut() {
            s.step(a, i);
        }
        record(&solvers, (t_index - i) as f64 * a.dt());
    }
    let field = solvers[0].field();
    Ok(AronsonSample { c_value, c_by_lag, scale, grad_envelope, boundary_mass: field.boundary_mass() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AronsonReport {
    pub n_samples: usize,
    pub c_hat: f64,
    /// The same constant from the first half of the samples.
    pub c_hat_half: f64,
    pub relative_change: f64,
    /// The constant over lags with `Λτ+1 ≥ min_scale` only. The full maximum
    /// is usually attained at `τ = 0`, where `G` is a delta and `C = 1`.
    pub c_hat_lagged: f64,
    pub c_hat_lagged_half: f64,
    pub lagged_change: f64,
    pub stable: bool,
    pub passes: bool,
    /// Fitted extra decay exponent of the gradient envelope, with a 95% interval.
    pub beta_hat: f64,
    pub beta_interval: (f64, f64),
}

/// Combines samples; the gradient exponent is fitted over lags with `Λτ+1 ≥ min_scale`.
pub fn aronson_fit(samples: &[AronsonSample], dim: usize, min_scale: f64) -> AronsonReport {
    let n = samples.len();
    let c_of = |s: &[AronsonSample]| s.iter().map(|x| x.c_value).fold(0.0, f64::max);
    let c_hat = c_of(samples);
    let c_hat_half = c_of(&samples[..n / 2]);
    let relative_change = (c_hat - c_hat_half).abs() / c_hat_half;
    let lagged = |s: &[AronsonSample]| {
        s.iter()
            .flat_map(|x| x.scale.iter().zip(&x.c_by_lag).filter(|(sc, _)| **sc >= min_scale).map(|(_, c)| *c))
            .fold(0.0, f64::max)
    };
    let c_hat_lagged = lagged(samples);
    let c_hat_lagged_half = lagged(&samples[..n / 2]);
    let lagged_change = (c_hat_lagged - c_hat_lagged_half).abs() / c_hat_lagged_half;
    let stable = relative_change <= 0.1 && lagged_change <= 0.1;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    if let Some(first) = samples.first() {
        for k in 0..first.scale.len() {
            let sc = first.scale[k];
            let env = samples.iter().map(|s| s.grad_envelope[k]).fold(0.0, f64::max);
            if sc >= min_scale && env > 0.0 {
                xs.push(sc.ln());
                ys.push(env.ln());
            }
        }
    }
    let (beta_hat, beta_interval) = match LinearFit::fit(&xs, &ys) {
        Some(fit) => {
            let (lo, hi) = fit.slope_interval(0.95);
            (-2.0 * fit.slope - dim as f64, (-2.0 * hi - dim as f64, -2.0 * lo - dim as f64))
        }
        None => (f64::NAN, (f64::NAN, f64::NAN)),
    };
    AronsonReport {
        n_samples: n,
        c_hat,
        c_hat_half,
        relative_change,
        c_hat_lagged,
        c_hat_lagged_half,
        lagged_change,
        stable,
        passes: c_hat.is_finite() && stable,
        beta_hat,
        beta_interval,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{heat_kernel, PeriodicCube};
    use crate::matrix::SymMatrix;

    #[test]
    fn constant_coefficients_match_closed_form_envelope() {
        let cube = PeriodicCube::new(2, 8).unwrap();
        let dt = 0.05;
        let a = CoefficientField::constant(&cube, &SymMatrix::identity(2)).unwrap().with_time_grid(0.0, dt);
        let s = aronson_sample(&a, 0, 100, 0).unwrap();
        // oracle from the closed form at the rescaled time τ/2
        let mut oracle = 0.0f64;
        for k in 0..=100 {
            let tau = k as f64 * dt;
            let sc = tau + 1.0;
            for x in -20i64..=20 {
                for y in -20i64..=20 {
                    let r = ((x * x + y * y) as f64).sqrt();
                    let g = heat_kernel(&[x, y], tau / 2.0).unwrap();
                    oracle = oracle.max(g * sc * (r / sc.sqrt()).exp());
                }
            }
        }
        assert!(s.c_value.is_finite());
        assert!((s.c_value - oracle).abs() / oracle < 0.05, "{} vs {oracle}", s.c_value);
        assert!(s.boundary_mass < 1e-12);
        let r = aronson_fit(&[s.clone(), s], 2, 2.0);
        assert!(r.passes);
        assert!(r.beta_hat > 0.0);
    }
}
