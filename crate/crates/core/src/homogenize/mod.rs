//! Correctors, `q(ξ,η)`, the homogenized matrix, the `T_{ξ,η}` series, the
//! Fourier–Laplace check and empirical rate fits.
//!
//! Stationary functions on the environment are realized on a sample that is
//! periodic in space and time; ensemble averages are space-time averages
//! over the sample, pooled over independent samples.

mod ahom;
mod corrector;
mod ensemble;
mod fourier_laplace;
pub mod krylov;
mod neumann;
pub mod ops;
mod qmatrix;
mod rate;
mod toperator;

pub use ahom::{a_hom_extract, default_eta_ladder, AHomEstimate};
pub use corrector::{corrector_solve, corrector_solve_projected, CorrectorField, CorrectorVariant, EnergyCheck, RESIDUAL_TOL};
pub use ensemble::{avg_greens_mc, EnvironmentSpec, GreensMcTable, Sampler};
pub use fourier_laplace::{fourier_laplace_check, FourierLaplaceRow};
pub use neumann::{neumann_series_q, NeumannSeries, NeumannTerm};
pub use ops::SampleGrid;
pub use qmatrix::{q_entries, q_estimate, q_matrix, QMatrix};
pub use rate::{rate_fit, RateModel, RateReport};
pub use toperator::{contraction_ratio, fft_nd, t_operator_quadrature, t_operator_spectral, QuadratureApply};
