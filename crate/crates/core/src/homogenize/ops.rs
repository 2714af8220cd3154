//! ξ-twisted shifts on a space-time periodic sample.
//!
//! Scalar fields are stored time-major (`n·V + x`); vector fields put the
//! component between time and site (`(n·d + j)·V + x`).

use num_complex::Complex64 as C;

use crate::env::{CoefficientField, Layout};
use crate::lattice::PeriodicCube;

/// The torus `Z_L^d × Z_N` with time spacing `dt`. `n_times == 1` means a
/// time-independent sample, on which the time difference vanishes.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    pub cube: PeriodicCube,
    pub n_times: usize,
    pub dt: f64,
}

impl SampleGrid {
    pub fn of(a: &CoefficientField) -> Self {
        Self { cube: a.cube().clone(), n_times: a.n_times(), dt: a.dt() }
    }

    pub fn scalar_len(&self) -> usize {
        self.cube.volume() * self.n_times
    }

    pub fn vector_len(&self) -> usize {
        self.scalar_len() * self.cube.dim()
    }
}

/// `e^{−iξ_j}` per axis.
pub fn twist_phases(xi: &[f64]) -> Vec<C> {
    xi.iter().map(|&x| C::from_polar(1.0, -x)).collect()
}

/// `e(ξ)_j = e^{−iξ_j} − 1`, the twisted gradient of the constant 1.
pub fn e_vector(xi: &[f64]) -> Vec<C> {
    twist_phases(xi).into_iter().map(|p| p - 1.0).collect()
}

/// One slice: `out_j(x) = e^{−iξ_j}ψ(x+e_j) − ψ(x)`.
pub fn twisted_gradient(cube: &PeriodicCube, phase: &[C], psi: &[C], out: &mut [C]) {
    let n = cube.volume();
    for (j, p) in phase.iter().enumerate() {
        let o = &mut out[j * n..(j + 1) * n];
        for x in 0..n {
            o[x] = p * psi[cube.up(j, x)] - psi[x];
        }
    }
}

/// One slice, the adjoint of [`twisted_gradient`]: `out(x) = Σ_j e^{iξ_j}F_j(x−e_j) − F_j(x)`.
pub fn twisted_divergence(cube: &PeriodicCube, phase: &[C], f: &[C], out: &mut [C]) {
    let n = cube.volume();
    out[..n].fill(C::new(0.0, 0.0));
    for (j, p) in phase.iter().enumerate() {
        let pc = p.conj();
        let fj = &f[j * n..(j + 1) * n];
        for x in 0..n {
            out[x] += pc * fj[cube.down(j, x)] - fj[x];
        }
    }
}

/// One slice: `out_j(x) = Σ_k a_{jk}(x, t_i) F_k(x)`.
pub fn apply_coefficient(a: &CoefficientField, i: usize, f: &[C], out: &mut [C]) {
    let cube = a.cube();
    let n = cube.volume();
    let d = cube.dim();
    let s = a.slice(i);
    match a.layout() {
        Layout::Diagonal => {
            for j in 0..d {
                for x in 0..n {
                    out[j * n + x] = f[j * n + x] * s[x * d + j];
                }
            }
        }
        Layout::Full => {
            for j in 0..d {
                for x in 0..n {
                    let row = &s[x * d * d + j * d..x * d * d + (j + 1) * d];
                    out[j * n + x] = (0..d).map(|k| f[k * n + x] * row[k]).sum();
                }
            }
        }
    }
}

/// Scratch-carrying evaluator of `K_i = ∂_ξ* a(·, t_i) ∂_ξ` on single slices.
pub struct TwistedOperator<'a> {
    pub a: &'a CoefficientField,
    pub phase: Vec<C>,
    grad: Vec<C>,
    flux: Vec<C>,
}

impl<'a> TwistedOperator<'a> {
    pub fn new(a: &'a CoefficientField, xi: &[f64]) -> Self {
        let len = a.cube().volume() * a.cube().dim();
        Self { a, phase: twist_phases(xi), grad: vec![C::default(); len], flux: vec![C::default(); len] }
    }

    pub fn apply(&mut self, i: usize, psi: &[C], out: &mut [C]) {
        let cube = self.a.cube();
        twisted_gradient(cube, &self.phase, psi, &mut self.grad);
        apply_coefficient(self.a, i, &self.grad, &mut self.flux);
        twisted_divergence(cube, &self.phase, &self.flux, out);
    }
}

pub fn inner(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Sample-average norm `⟨|f|²⟩^{1/2}` over `points` space-time points.
pub fn mean_norm(f: &[C], points: usize) -> f64 {
    (norm_sqr(f) / points as f64).sqrt()
}

pub fn mean(f: &[C]) -> C {
    f.iter().sum::<C>() / f.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_complex(rng: &mut impl Rng, n: usize) -> Vec<C> {
        (0..n).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn twisted_divergence_is_adjoint() {
        let cube = PeriodicCube::new(2, 6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let phase = twist_phases(&[0.7, -1.9]);
        for _ in 0..20 {
            let psi = random_complex(&mut rng, 36);
            let f = random_complex(&mut rng, 72);
            let mut g = vec![C::default(); 72];
            let mut dv = vec![C::default(); 36];
            twisted_gradient(&cube, &phase, &psi, &mut g);
            twisted_divergence(&cube, &phase, &f, &mut dv);
            assert!((inner(&g, &f) - inner(&psi, &dv)).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_one_is_e() {
        let cube = PeriodicCube::new(3, 4).unwrap();
        let xi = [0.3, 1.1, -2.0];
        let mut g = vec![C::default(); 3 * 64];
        twisted_gradient(&cube, &twist_phases(&xi), &vec![C::new(1.0, 0.0); 64], &mut g);
        let e = e_vector(&xi);
        for j in 0..3 {
            assert!(g[j * 64..(j + 1) * 64].iter().all(|v| (v - e[j]).norm() < 1e-15));
        }
    }

    #[test]
    fn twist_is_a_gauge_conjugation() {
        // ∂_ξ(e^{ix·ξ}h) = e^{ix·ξ}∇h on the whole lattice; on the torus this
        // holds whenever ξ is a reciprocal-lattice vector.
        let cube = PeriodicCube::new(1, 8).unwrap();
        let xi = [2.0 * std::f64::consts::PI * 3.0 / 8.0];
        let h: Vec<f64> = (0..8).map(|x| (x as f64).sin()).collect();
        let f: Vec<C> = (0..8).map(|x| C::from_polar(1.0, x as f64 * xi[0]) * h[x]).collect();
        let mut g = vec![C::default(); 8];
        twisted_gradient(&cube, &twist_phases(&xi), &f, &mut g);
        for x in 0..8 {
            let expect = C::from_polar(1.0, x as f64 * xi[0]) * (h[(x + 1) % 8] - h[x]);
            assert!((g[x] - expect).norm() < 1e-14);
        }
    }
}
