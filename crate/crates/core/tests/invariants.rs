//! Structural invariants on randomly generated inputs.

use num_complex::Complex64 as C;
use proptest::prelude::*;

use latthom::env::{CoefficientField, Layout};
use latthom::homogenize::{contraction_ratio, q_estimate, t_operator_spectral, SampleGrid};
use latthom::lattice::{heat_kernel, heat_kernel_box};
use latthom::parabolic::{damped_resolvent, greens_sum_rules, SpaceTimeField};
use latthom::sde::{path_action_hessian_probe, ConvexPotential};
use latthom::{EllipticityPair, PeriodicCube, SymMatrix};

fn diagonal_field(d: usize, side: usize, dt: f64, data: Vec<f64>) -> CoefficientField {
    let cube = PeriodicCube::new(d, side).unwrap();
    CoefficientField::from_data(cube, 0.0, dt, EllipticityPair::new(0.5, 2.0).unwrap(), Layout::Diagonal, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greens_function_is_a_doubly_stochastic_kernel(data in proptest::collection::vec(0.5f64..2.0, 2 * 16 * 9)) {
        let a = diagonal_field(2, 4, 0.1, data);
        let r = greens_sum_rules(&a, 8, 0).unwrap();
        prop_assert!(r.over_y < 1e-12 && r.over_x < 1e-12, "{r:?}");
        prop_assert!(r.min_value >= 0.0);
    }

    #[test]
    fn damped_resolvent_is_bounded_by_twice_the_inverse_mass_squared(
        data in proptest::collection::vec(0.5f64..2.0, 8 * 21),
        g in proptest::collection::vec(-1.0f64..1.0, 8 * 21),
        m in 0.3f64..2.0,
    ) {
        let a = diagonal_field(1, 8, 0.1, data);
        let g = SpaceTimeField::from_values(a.cube(), a.t0(), a.dt(), g);
        let v = damped_resolvent(&a, m, &g).unwrap().v;
        prop_assert!(v.l2_norm() <= 2.0 / (m * m) * g.l2_norm());
    }

    #[test]
    fn t_operator_is_a_contraction(
        re in proptest::collection::vec(-1.0f64..1.0, 2 * 16 * 3),
        im in proptest::collection::vec(-1.0f64..1.0, 2 * 16 * 3),
        xi in proptest::collection::vec(-3.0f64..3.0, 2),
        eta in 0.01f64..2.0,
    ) {
        let grid = SampleGrid { cube: PeriodicCube::new(2, 4).unwrap(), n_times: 3, dt: 0.5 };
        let g: Vec<C> = re.iter().zip(&im).map(|(r, i)| C::new(*r, *i)).collect();
        let tg = t_operator_spectral(&grid, 2.0, &xi, eta, &g).unwrap();
        prop_assert!(contraction_ratio(&grid, &g, &tg) <= 1.0 + 1e-10);
    }

    #[test]
    fn constant_coefficients_are_their_own_q(
        diag in proptest::collection::vec(0.6f64..1.8, 2),
        off in -0.2f64..0.2,
        xi in proptest::collection::vec(-2.0f64..2.0, 2),
        eta in 0.01f64..1.0,
    ) {
        let c = SymMatrix::new(2, vec![diag[0], off, off, diag[1]]).unwrap();
        let a = CoefficientField::constant(&PeriodicCube::new(2, 4).unwrap(), &c).unwrap();
        let q = q_estimate(std::slice::from_ref(&a), &xi, eta).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                prop_assert!((q.entry(j, k) - C::new(c.get(j, k), 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_kernel_is_a_symmetric_probability(x in -6i64..=6, y in -6i64..=6, t in 0.05f64..6.0) {
        let g = heat_kernel(&[x, y], t).unwrap();
        prop_assert_eq!(g, heat_kernel(&[-x, y], t).unwrap());
        prop_assert_eq!(g, heat_kernel(&[y, x], t).unwrap());
        let field = &heat_kernel_box(1, &[t]).unwrap()[0];
        prop_assert!((field.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_path_action_is_convex(
        path in proptest::collection::vec(-5.0f64..5.0, 2 * 30),
        h in 0.05f64..0.5,
    ) {
        let a = SymMatrix::new(2, vec![1.0, 0.3, 0.3, 2.0]).unwrap();
        let w = ConvexPotential::quadratic(a, vec![0.5, -0.2]).unwrap();
        let path: Vec<Vec<f64>> = path.chunks(2).map(|c| c.to_vec()).collect();
        let p = path_action_hessian_probe(&w, &path, h, 1e-9).unwrap();
        prop_assert!(p.symmetry_error <= 1e-12);
        prop_assert!(p.log_concave && p.min_eigenvalue > 0.0);
    }
}
