use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::potential::ConvexPotential;
use crate::error::{config, Result};
use crate::rng::SeedRecord;

fn check_path(w: &ConvexPotential, path: &[Vec<f64>], h: f64) -> Result<()> {
    if path.len() < 3 {
        return Err(config("path", "need at least one interior point between the clamped ends"));
    }
    if path.iter().any(|p| p.len() != w.dim()) {
        return Err(config("path", format!("points need {} coordinates", w.dim())));
    }
    if !(h > 0.0) {
        return Err(config("h", "step must be positive"));
    }
    Ok(())
}

/// `Σ_i h[½|(φ_{i+1} − φ_i)/h|² − ½ΔW(φ_i) + ¼|∇W(φ_i)|²]`, kinetic terms over
/// the `n` links and density terms over the interior points.
pub fn path_action(w: &ConvexPotential, path: &[Vec<f64>], h: f64) -> Result<f64> {
    check_path(w, path, h)?;
    let kinetic: f64 = path.windows(2).map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| (b - a).powi(2)).sum::<f64>()).sum();
    let density: f64 = path[1..path.len() - 1].iter().map(|p| w.density(p)).sum();
    Ok(kinetic / (2.0 * h) + h * density)
}

/// Hessian of [`path_action`] in the interior points, ordered point-major.
pub fn path_action_hessian(w: &ConvexPotential, path: &[Vec<f64>], h: f64) -> Result<DMatrix<f64>> {
    check_path(w, path, h)?;
    let k = w.dim();
    let m = path.len() - 2;
    let mut out = DMatrix::zeros(m * k, m * k);
    for i in 0..m {
        let u = w.density_hessian(&path[i + 1]);
        for j in 0..k {
            out[(i * k + j, i * k + j)] += 2.0 / h;
            if i + 1 < m {
                out[(i * k + j, (i + 1) * k + j)] = -1.0 / h;
                out[((i + 1) * k + j, i * k + j)] = -1.0 / h;
            }
            for l in 0..k {
                out[(i * k + j, i * k + l)] += h * u[(j, l)];
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionProbe {
    pub min_eigenvalue: f64,
    /// `max |H − Hᵀ|`.
    pub symmetry_error: f64,
    /// `min_eigenvalue ≥ −tolerance`.
    pub log_concave: bool,
}

pub fn path_action_hessian_probe(w: &ConvexPotential, path: &[Vec<f64>], h: f64, tolerance: f64) -> Result<ActionProbe> {
    let hess = path_action_hessian(w, path, h)?;
    let symmetry_error = (&hess - hess.transpose()).abs().max();
    let min_eigenvalue = hess.symmetric_eigen().eigenvalues.min();
    Ok(ActionProbe { min_eigenvalue, symmetry_error, log_concave: min_eigenvalue >= -tolerance })
}

/// Probes over random paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityScan {
    pub probes: Vec<ActionProbe>,
    pub min_eigenvalue: f64,
    pub negative_paths: usize,
}

impl ConcavityScan {
    pub fn log_concave(&self) -> bool {
        self.negative_paths == 0
    }
}

/// `paths` random paths with `n_grid` links of step `h`: a level in
/// `[−spread, spread]^k` (the clamped ends) plus a Brownian bridge scaled by
/// `roughness`.
pub fn action_concavity_scan(
    w: &ConvexPotential,
    n_grid: usize,
    h: f64,
    paths: usize,
    spread: f64,
    roughness: f64,
    tolerance: f64,
    seed: SeedRecord,
) -> Result<ConcavityScan> {
    let k = w.dim();
    let mut rng = seed.rng();
    let mut probes = Vec::with_capacity(paths);
    for _ in 0..paths {
        let level: Vec<f64> = (0..k).map(|_| rng.random_range(-spread..=spread)).collect();
        let mut walk = vec![vec![0.0; k]; n_grid + 1];
        for i in 1..=n_grid {
            for j in 0..k {
                let z: f64 = rng.sample(StandardNormal);
                walk[i][j] = walk[i - 1][j] + roughness * h.sqrt() * z;
            }
        }
        let end = walk[n_grid].clone();
        let path: Vec<Vec<f64>> = (0..=n_grid)
            .map(|i| {
                let s = i as f64 / n_grid as f64;
                (0..k).map(|j| level[j] + walk[i][j] - s * end[j]).collect()
            })
            .collect();
        probes.push(path_action_hessian_probe(w, &path, h, tolerance)?);
    }
    let min_eigenvalue = probes.iter().map(|p| p.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let negative_paths = probes.iter().filter(|p| !p.log_concave).count();
    Ok(ConcavityScan { probes, min_eigenvalue, negative_paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMatrix;

    fn constant_path(level: f64, n: usize) -> Vec<Vec<f64>> {
        vec![vec![level]; n + 1]
    }

    #[test]
    fn hessian_matches_second_differences_of_action() {
        let w = ConvexPotential::cosine_perturbed(SymMatrix::identity(1), 0.3).unwrap();
        let h = 0.2;
        let path: Vec<Vec<f64>> = (0..=12).map(|i| vec![1.0 + (i as f64 * 0.7).sin() * 2.0]).collect();
        let hess = path_action_hessian(&w, &path, h).unwrap();
        let e = 1e-4;
        for (r, c) in [(0, 0), (3, 3), (3, 4), (5, 7)] {
            let bump = |dr: f64, dc: f64| {
                let mut p = path.clone();
                p[r + 1][0] += dr;
                p[c + 1][0] += dc;
                path_action(&w, &p, h).unwrap()
            };
            let fd = (bump(e, e) - bump(e, -e) - bump(-e, e) + bump(-e, -e)) / (4.0 * e * e);
            assert!((fd - hess[(r, c)]).abs() < 1e-5, "({r},{c}): {fd} vs {}", hess[(r, c)]);
        }
    }

    #[test]
    fn quadratic_action_is_log_concave() {
        let a = SymMatrix::new(2, vec![1.0, 0.4, 0.4, 2.0]).unwrap();
        let w = ConvexPotential::quadratic(a, vec![0.5, 0.0]).unwrap();
        let scan = action_concavity_scan(&w, 60, 0.25, 20, 6.0, 1.0, 1e-9, SeedRecord::new(1, 0)).unwrap();
        assert!(scan.log_concave() && scan.min_eigenvalue > 0.0, "{}", scan.min_eigenvalue);
        assert!(scan.probes.iter().all(|p| p.symmetry_error <= 1e-12));
    }

    #[test]
    fn cosine_perturbation_breaks_log_concavity() {
        let w = ConvexPotential::cosine_perturbed(SymMatrix::identity(1), 0.3).unwrap();
        let probe = path_action_hessian_probe(&w, &constant_path(4.7, 200), 0.1, 1e-9).unwrap();
        assert!(!probe.log_concave && probe.min_eigenvalue < 0.0, "{probe:?}");
        assert!(probe.symmetry_error <= 1e-12);
        let scan = action_concavity_scan(&w, 200, 0.1, 40, 6.0, 0.3, 1e-9, SeedRecord::new(2, 0)).unwrap();
        assert!(scan.negative_paths > 0, "{}", scan.min_eigenvalue);
        // Near the quadratic minimum the density stays convex.
        let calm = path_action_hessian_probe(&w, &constant_path(0.0, 200), 0.1, 1e-9).unwrap();
        assert!(calm.log_concave);
    }
}
