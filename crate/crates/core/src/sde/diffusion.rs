use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::potential::ConvexPotential;
use super::sym_function;
use crate::env::brownian_increments;
use crate::error::{config, Result};
use crate::matrix::SymMatrix;
use crate::rng::{par_indexed, SeedRecord};

/// An Euler–Maruyama path on the grid `t_i = iΔt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub dt: f64,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub seed: SeedRecord,
}

fn check_step(w: &ConvexPotential, dt: f64) -> Result<()> {
    let upper = w.window().1;
    if !(dt > 0.0 && dt * upper <= 1.0) {
        return Err(config("dt", format!("need 0 < dt <= 1/Lambda_W = {}, got {dt}", 1.0 / upper)));
    }
    Ok(())
}

/// `φ_{n+1} = φ_n − ½∇W(φ_n)Δt + ΔB_n` from `initial`; passing zero
/// increments gives the deterministic gradient flow.
pub fn euler_maruyama_path(w: &ConvexPotential, dt: f64, initial: &[f64], increments: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_step(w, dt)?;
    let k = w.dim();
    if initial.len() != k || increments.iter().any(|b| b.len() != k) {
        return Err(config("increments", format!("states and increments need {k} coordinates")));
    }
    let mut out = Vec::with_capacity(increments.len() + 1);
    let mut phi = initial.to_vec();
    out.push(phi.clone());
    for db in increments {
        let g = w.gradient(&phi);
        for j in 0..k {
            phi[j] += -0.5 * g[j] * dt + db[j];
        }
        out.push(phi.clone());
    }
    Ok(out)
}

fn draw_increments(k: usize, dt: f64, n: usize, seed: SeedRecord) -> Vec<Vec<f64>> {
    let mut rng = seed.rng();
    (0..n)
        .map(|_| {
            let mut b = vec![0.0; k];
            brownian_increments(&mut rng, dt, &mut b);
            b
        })
        .collect()
}

/// Euler–Maruyama from `φ(0) = 0`.
pub fn convex_diffusion_simulate(w: &ConvexPotential, dt: f64, n_steps: usize, seed: SeedRecord) -> Result<PathSample> {
    check_step(w, dt)?;
    let increments = draw_increments(w.dim(), dt, n_steps, seed);
    let values = euler_maruyama_path(w, dt, &vec![0.0; w.dim()], &increments)?;
    let times = (0..=n_steps).map(|i| i as f64 * dt).collect();
    Ok(PathSample { dt, times, values, seed })
}

/// The explicit solution `φ(t) = e^{−At/2}φ(0) + ∫_0^t e^{−A(t−s)/2}(b/2 ds + dB(s))`
/// on the increment grid, with each stochastic integral over `[t_n, t_{n+1}]`
/// taken at the midpoint, `e^{−AΔt/4}ΔB_n`.
pub fn quadratic_exact_path(a: &SymMatrix, b: &[f64], dt: f64, initial: &[f64], increments: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = a.dim();
    if b.len() != k || initial.len() != k {
        return Err(config("b", format!("need {k} coordinates")));
    }
    let m = a.to_dmatrix();
    let e = sym_function(&m, |l| (-l * dt / 2.0).exp());
    let half = sym_function(&m, |l| (-l * dt / 4.0).exp());
    // (I − e^{−AΔt/2}) A⁻¹ b, built spectrally to stay accurate for small Δt.
    let drift = sym_function(&m, |l| -(-l * dt / 2.0).exp_m1() / l) * DVector::from_column_slice(b);
    let mut phi = DVector::from_column_slice(initial);
    let mut out = Vec::with_capacity(increments.len() + 1);
    out.push(initial.to_vec());
    for db in increments {
        phi = &e * &phi + &drift + &half * DVector::from_column_slice(db);
        out.push(phi.iter().copied().collect());
    }
    Ok(out)
}

/// Mean pathwise Euler–Maruyama error against the explicit solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathwiseConvergence {
    pub dts: Vec<f64>,
    /// Mean over paths of `max_i |φ_EM(t_i) − φ_exact(t_i)|`.
    pub errors: Vec<f64>,
    /// `errors[i+1] / errors[i]`.
    pub ratios: Vec<f64>,
}

/// Euler–Maruyama at each step in `dts` against the explicit solution on a
/// grid `refine` times finer than the smallest step, all driven by the same
/// fine increments. Every step must be an integer multiple of the fine step.
pub fn pathwise_em_error(
    w: &ConvexPotential,
    dts: &[f64],
    horizon: f64,
    refine: usize,
    paths: usize,
    seed: SeedRecord,
) -> Result<PathwiseConvergence> {
    let (a, b) = w
        .quadratic_form()
        .ok_or_else(|| config("W", "the explicit solution needs a quadratic potential"))?;
    let fine = dts.iter().copied().fold(f64::INFINITY, f64::min) / refine.max(1) as f64;
    let mut factors = Vec::with_capacity(dts.len());
    for &dt in dts {
        check_step(w, dt)?;
        let f = (dt / fine).round();
        if (f * fine - dt).abs() > 1e-9 * dt || ((horizon / dt).round() * dt - horizon).abs() > 1e-9 * horizon {
            return Err(config("dts", format!("step {dt} does not divide the grid")));
        }
        factors.push(f as usize);
    }
    let k = w.dim();
    let n = (horizon / fine).round() as usize;
    let per_path: Vec<Result<Vec<f64>>> = par_indexed(paths, |p| {
        let inc = draw_increments(k, fine, n, seed.child(p as u64));
        let exact = quadratic_exact_path(a, b, fine, &vec![0.0; k], &inc)?;
        factors
            .iter()
            .zip(dts)
            .map(|(&f, &dt)| {
                let coarse: Vec<Vec<f64>> = inc
                    .chunks(f)
                    .map(|c| (0..k).map(|j| c.iter().map(|v| v[j]).sum()).collect())
                    .collect();
                let em = euler_maruyama_path(w, dt, &vec![0.0; k], &coarse)?;
                Ok(em
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x.iter().zip(&exact[i * f]).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
                    .fold(0.0, f64::max))
            })
            .collect()
    });
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_>>()?;
    let errors: Vec<f64> = (0..dts.len()).map(|i| per_path.iter().map(|e| e[i]).sum::<f64>() / paths as f64).collect();
    let ratios = errors.windows(2).map(|e| e[1] / e[0]).collect();
    Ok(PathwiseConvergence { dts: dts.to_vec(), errors, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_decays_exponentially() {
        let w = ConvexPotential::quadratic(SymMatrix::identity(2), vec![0.0, 0.0]).unwrap();
        let dt = 1e-3;
        let n = 2000;
        let path = euler_maruyama_path(&w, dt, &[1.0, -2.0], &vec![vec![0.0; 2]; n]).unwrap();
        let end = (-(n as f64) * dt / 2.0).exp();
        assert!((path[n][0] - end).abs() < 2.0 * dt * end);
        assert!((path[n][1] + 2.0 * end).abs() < 4.0 * dt * end);
        let exact = quadratic_exact_path(&SymMatrix::identity(2), &[0.0, 0.0], dt, &[1.0, -2.0], &vec![vec![0.0; 2]; n]).unwrap();
        assert!((exact[n][0] - end).abs() < 1e-12);
    }

    #[test]
    fn simulate_is_deterministic_and_starts_at_zero() {
        let w = ConvexPotential::cosine_perturbed(SymMatrix::identity(1), 0.3).unwrap();
        let a = convex_diffusion_simulate(&w, 0.01, 100, SeedRecord::new(3, 1)).unwrap();
        let b = convex_diffusion_simulate(&w, 0.01, 100, SeedRecord::new(3, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values[0], vec![0.0]);
        assert_eq!(a.times.len(), 101);
    }

    #[test]
    fn unstable_step_is_a_config_error() {
        let w = ConvexPotential::quadratic(SymMatrix::diagonal(&[1.0, 4.0]), vec![0.0, 0.0]).unwrap();
        let err = convex_diffusion_simulate(&w, 0.3, 10, SeedRecord::new(0, 0)).unwrap_err();
        assert!(err.to_string().contains("dt"));
    }

    #[test]
    fn exact_step_matches_constant_drift_limit() {
        // With A = a scalar and no noise the fixed point is b/a.
        let a = SymMatrix::diagonal(&[2.0]);
        let out = quadratic_exact_path(&a, &[1.0], 0.5, &[0.0], &vec![vec![0.0]; 200]).unwrap();
        assert!((out[200][0] - 0.5).abs() < 1e-12);
        assert!((out[1][0] - 0.5 * (1.0 - (-0.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn euler_maruyama_is_first_order_pathwise() {
        let a = SymMatrix::new(2, vec![1.0, 0.3, 0.3, 2.0]).unwrap();
        let w = ConvexPotential::quadratic(a, vec![0.5, -0.2]).unwrap();
        let r = pathwise_em_error(&w, &[0.04, 0.02, 0.01], 4.0, 32, 24, SeedRecord::new(11, 0)).unwrap();
        assert!(r.errors[0] < 0.05, "{r:?}");
        assert!(r.ratios.iter().all(|q| (q - 0.5).abs() < 0.1), "{r:?}");
    }
}
