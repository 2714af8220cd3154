//! Forward-difference gradient `∇_j φ(x) = φ(x+e_j) − φ(x)` and its adjoint
//! `∇*F(x) = Σ_j F_j(x−e_j) − F_j(x)` on the periodic cube.

use super::PeriodicCube;
use crate::error::{config, Result};

pub fn discrete_gradient(cube: &PeriodicCube, phi: &[f64], x: usize) -> Result<Vec<f64>> {
    check_len(phi.len(), cube.volume(), "phi")?;
    cube.check(x)?;
    Ok((0..cube.dim()).map(|j| phi[cube.up(j, x)] - phi[x]).collect())
}

pub fn discrete_divergence(cube: &PeriodicCube, field: &[f64], x: usize) -> Result<f64> {
    let n = cube.volume();
    check_len(field.len(), cube.dim() * n, "F")?;
    cube.check(x)?;
    Ok((0..cube.dim())
        .map(|j| field[j * n + cube.down(j, x)] - field[j * n + x])
        .sum())
}

/// Gradient of a whole scalar field into a component-major vector field.
pub fn gradient(cube: &PeriodicCube, phi: &[f64], out: &mut [f64]) {
    let n = cube.volume();
    for j in 0..cube.dim() {
        for x in 0..n {
            out[j * n + x] = phi[cube.up(j, x)] - phi[x];
        }
    }
}

pub fn divergence(cube: &PeriodicCube, field: &[f64], out: &mut [f64]) {
    let n = cube.volume();
    out[..n].fill(0.0);
    for j in 0..cube.dim() {
        let f = &field[j * n..(j + 1) * n];
        for x in 0..n {
            out[x] += f[cube.down(j, x)] - f[x];
        }
    }
}

/// `∇*∇φ(x) = Σ_j [2φ(x) − φ(x+e_j) − φ(x−e_j)]`, a nonnegative operator.
pub fn laplacian(cube: &PeriodicCube, phi: &[f64], out: &mut [f64]) {
    let n = cube.volume();
    let d = cube.dim() as f64;
    for x in 0..n {
        let mut acc = 2.0 * d * phi[x];
        for j in 0..cube.dim() {
            acc -= phi[cube.up(j, x)] + phi[cube.down(j, x)];
        }
        out[x] = acc;
    }
}

/// `out = ∇*(a∇u)` where `coeff` holds a row-major `d×d` matrix per site.
pub fn div_a_grad(cube: &PeriodicCube, coeff: &[f64], u: &[f64], out: &mut [f64]) {
    let d = cube.dim();
    let dd = d * d;
    let n = cube.volume();
    let flux = |x: usize, i: usize| -> f64 {
        let a = &coeff[x * dd + i * d..x * dd + i * d + d];
        let ux = u[x];
        (0..d).map(|j| a[j] * (u[cube.up(j, x)] - ux)).sum()
    };
    for x in 0..n {
        let mut acc = 0.0;
        for i in 0..d {
            acc += flux(cube.down(i, x), i) - flux(x, i);
        }
        out[x] = acc;
    }
}

/// `out = ∇*(a∇u)` for a diagonal coefficient given as `diag[x * d + j]`.
pub fn div_a_grad_diag(cube: &PeriodicCube, diag: &[f64], u: &[f64], out: &mut [f64]) {
    let d = cube.dim();
    let n = cube.volume();
    for x in 0..n {
        let ux = u[x];
        let mut acc = 0.0;
        for j in 0..d {
            let up = cube.up(j, x);
            let down = cube.down(j, x);
            acc += diag[down * d + j] * (ux - u[down]) - diag[x * d + j] * (u[up] - ux);
        }
        out[x] = acc;
    }
}

pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    inner(a, a).sqrt()
}

fn check_len(got: usize, want: usize, field: &'static str) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(config(field, format!("expected {want} values, got {got}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_of_constant_vanishes() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let phi = vec![3.5; cube.volume()];
        for x in 0..cube.volume() {
            assert_eq!(discrete_gradient(&cube, &phi, x).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn gradient_of_indicator_in_one_dimension() {
        let cube = PeriodicCube::new(1, 4).unwrap();
        let phi = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(discrete_gradient(&cube, &phi, 0).unwrap(), vec![-1.0]);
        assert_eq!(discrete_gradient(&cube, &phi, 3).unwrap(), vec![1.0]);
        assert!(discrete_gradient(&cube, &phi, 4).is_err());
    }

    #[test]
    fn divergence_of_constant_field_vanishes() {
        let cube = PeriodicCube::new(3, 4).unwrap();
        let f = vec![1.25; 3 * cube.volume()];
        for x in 0..cube.volume() {
            assert_eq!(discrete_divergence(&cube, &f, x).unwrap(), 0.0);
        }
    }

    #[test]
    fn adjointness_against_brute_force_double_sum() {
        // <∇φ, F> = Σ_x Σ_j (φ(x+e_j) − φ(x)) F_j(x) versus Σ_x φ(x) ∇*F(x)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, l) in [(1, 6), (2, 4), (3, 4)] {
            let cube = PeriodicCube::new(d, l).unwrap();
            let n = cube.volume();
            for _ in 0..100 {
                let phi: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let f: Vec<f64> = (0..d * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut lhs = 0.0;
                for x in 0..n {
                    let c = cube.coords(x);
                    for j in 0..d {
                        let mut p = c.clone();
                        p[j] += 1;
                        lhs += (phi[cube.index(&p)] - phi[x]) * f[j * n + x];
                    }
                }
                let rhs: f64 = (0..n)
                    .map(|x| phi[x] * discrete_divergence(&cube, &f, x).unwrap())
                    .sum();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn div_a_grad_matches_diagonal_path_and_laplacian() {
        let cube = PeriodicCube::new(2, 6).unwrap();
        let n = cube.volume();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut full = vec![0.0; 4 * n];
        for x in 0..n {
            full[x * 4] = diag[x * 2];
            full[x * 4 + 3] = diag[x * 2 + 1];
        }
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        div_a_grad(&cube, &full, &u, &mut a);
        div_a_grad_diag(&cube, &diag, &u, &mut b);
        for x in 0..n {
            assert!((a[x] - b[x]).abs() < 1e-13);
        }
        let ones = vec![1.0; 2 * n];
        let mut c = vec![0.0; n];
        div_a_grad_diag(&cube, &ones, &u, &mut b);
        laplacian(&cube, &u, &mut c);
        for x in 0..n {
            assert!((b[x] - c[x]).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn dirichlet_form_is_nonnegative(values in proptest::collection::vec(-10.0f64..10.0, 16)) {
            let cube = PeriodicCube::new(2, 4).unwrap();
            let mut lap = vec![0.0; 16];
            laplacian(&cube, &values, &mut lap);
            let mut g = vec![0.0; 32];
            gradient(&cube, &values, &mut g);
            let form = inner(&values, &lap);
            prop_assert!(form >= -1e-10);
            prop_assert!((form - inner(&g, &g)).abs() <= 1e-9 * (1.0 + form));
        }
    }
}
