//! Random space-time environments: the massive Langevin dynamics of a
//! gradient field, exact stationary Gaussian fields, and the coefficient
//! maps that turn a field into a diffusion matrix.

mod coefficient;
mod dump;
mod gaussian;
mod langevin;
mod poincare;
mod potential;
mod trajectory;

pub use coefficient::{coefficient_field, CoefficientField, CoefficientMap, Layout, Profile};
pub use dump::{read_trajectory, write_trajectory};
pub use gaussian::{gaussian_field_sample, massive_green_periodic, RealFourierBasis};
pub use langevin::{
    brownian_increments, langevin_drift, langevin_simulate, langevin_simulate_from, LangevinConfig, LangevinStepper,
};
pub use poincare::{poincare_fourier_check, CovarianceTable, PoincareReport};
pub use potential::Potential;
pub use trajectory::{FieldTrajectory, Provenance};
