//! Checks on the Langevin field itself: the correlation identity, Malliavin
//! derivatives, Poincaré-type variance bounds and the large-scale decay of
//! correlations.

mod correlation;
mod decay;
mod elliptic;
mod malliavin;
mod mala;
mod poincare;

pub use correlation::{correlation_identity_check, quadratic_resolvent, CorrelationRow, CorrelationSpec, CorrelationTable};
pub use malliavin::{malliavin_fd_check, malliavin_refinement, MalliavinRefinement, MalliavinReport, MalliavinSpec};
pub use decay::{
    log_slope, parabolic_decay_check, periodic_hom_greens, periodic_hom_heat_kernel, thm13_decay_check, DecayLevel,
    DecayReport, DecaySpec, LevelDecay, ParabolicDecayReport,
};
pub use elliptic::{
    hom_elliptic_difference, hom_elliptic_gradient, hom_elliptic_greens, hom_elliptic_hessian, EllipticHomGreens,
};
pub use mala::{field_energy, MalaChain};
pub use poincare::{poincare_variance_check, Functional, PoincareRow, PoincareSpec};
