//! Solvers for parabolic equations with random coefficients: the forward
//! problem, backward Green's functions on the cube and on free boxes, the
//! Duhamel representation, the damped resolvent and perturbation expansions.

mod aronson;
mod duhamel;
mod field;
mod forward;
mod greens;
mod perturbation;

pub use aronson::{aronson_fit, aronson_sample, AronsonReport, AronsonSample};
pub use duhamel::{damped_resolvent, damping_padding, duhamel_representation, duhamel_solve, DampedSolution};
pub use field::SpaceTimeField;
pub use forward::{exponential_step, max_explicit_step, solve_forward};
pub use greens::{
    box_radius_for, greens_backward, greens_backward_box, greens_sum_rules, periodic_greens, periodize, BoxBackward,
    BoxGreens, BoxOperator, GreensTable, SumRules,
};
pub use perturbation::{damped_perturbation_terms, perturbation_terms, PerturbationTerms};
