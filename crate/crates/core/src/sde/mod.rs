//! The finite-dimensional diffusion `dφ = −½∇W(φ)dt + dB` for a uniformly
//! convex `W: R^k → R`, started from `φ(0) = 0`.
//!
//! Quadratic `W(φ) = ½φ·Aφ − b·φ` has an explicit Gaussian solution, which
//! gives exact moments and a pathwise reference for Euler–Maruyama. For general
//! `W` the invariant expectation is also reachable through Brownian paths
//! reweighted by `exp{−½∫[−½ΔW + ¼|∇W|²]} e^{−W(B(T))/2}`, and the discretized
//! path action built from the same density probes log-concavity.

mod action;
mod diffusion;
mod feynman_kac;
mod moments;
mod potential;

pub use action::{action_concavity_scan, path_action, path_action_hessian, path_action_hessian_probe, ActionProbe, ConcavityScan};
pub use diffusion::{
    convex_diffusion_simulate, euler_maruyama_path, pathwise_em_error, quadratic_exact_path, PathSample, PathwiseConvergence,
};
pub use feynman_kac::{feynman_kac_estimate, time_average_estimate, FeynmanKacEstimate};
pub use moments::{stationary_moments_check, MomentsReport, MomentsSpec};
pub use potential::ConvexPotential;

use serde::{Deserialize, Serialize};

use crate::stats::Estimate;

/// One checked quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub estimate: f64,
    pub oracle: f64,
    pub sigma: f64,
    pub pass: bool,
}

impl Verdict {
    /// Passes when `|estimate − oracle| ≤ k σ`.
    pub fn within(name: impl Into<String>, estimate: Estimate, oracle: f64, k: f64) -> Self {
        let pass = (estimate.mean - oracle).abs() <= k * estimate.se;
        Self { name: name.into(), estimate: estimate.mean, oracle, sigma: estimate.se, pass }
    }
}

/// `V f(Λ) Vᵀ` for symmetric `a = V Λ Vᵀ`.
pub(crate) fn sym_function(a: &nalgebra::DMatrix<f64>, f: impl Fn(f64) -> f64) -> nalgebra::DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let diag = nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let out = v * diag * v.transpose();
    (&out + out.transpose()) * 0.5
}
