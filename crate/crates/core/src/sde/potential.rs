use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{config, Error, Result};
use crate::matrix::SymMatrix;
use crate::rng::SeedRecord;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A `C²` potential with `λ_W I ≤ W'' ≤ Λ_W I`.
#[derive(Clone)]
pub struct ConvexPotential {
    k: usize,
    lambda: f64,
    upper: f64,
    value: ScalarFn,
    gradient: VectorFn,
    hessian: MatrixFn,
    /// Hessian of `−½ΔW + ¼|∇W|²` when known in closed form.
    density_hessian: Option<MatrixFn>,
    quadratic: Option<(SymMatrix, Vec<f64>)>,
}

impl fmt::Debug for ConvexPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexPotential")
            .field("k", &self.k)
            .field("lambda", &self.lambda)
            .field("upper", &self.upper)
            .field("quadratic", &self.quadratic)
            .finish_non_exhaustive()
    }
}

fn window_of(a: &SymMatrix) -> Result<(f64, f64)> {
    let ev = a.eigenvalues();
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(lo > 0.0) {
        return Err(config("A", format!("must be positive definite, smallest eigenvalue {lo}")));
    }
    Ok((lo, hi))
}

impl ConvexPotential {
    /// `W(φ) = ½φ·Aφ − b·φ`.
    pub fn quadratic(a: SymMatrix, b: Vec<f64>) -> Result<Self> {
        let k = a.dim();
        if b.len() != k {
            return Err(config("b", format!("need {k} entries, got {}", b.len())));
        }
        let (lambda, upper) = window_of(&a)?;
        let m = a.to_dmatrix();
        let (a1, a2, b1, b2) = (a.clone(), a.clone(), b.clone(), b.clone());
        let h = m.clone();
        let dh = &m * &m * 0.5;
        Ok(Self {
            k,
            lambda,
            upper,
            value: Arc::new(move |x| 0.5 * a1.quad_form(x) - b1.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()),
            gradient: Arc::new(move |x| a2.apply(x).into_iter().zip(&b2).map(|(ax, b)| ax - b).collect()),
            hessian: Arc::new(move |_| h.clone()),
            density_hessian: Some(Arc::new(move |_| dh.clone())),
            quadratic: Some((a, b)),
        })
    }

    /// `W(φ) = ½φ·Aφ + ε Σ_j cos φ_j`, convex when `λ_min(A) > |ε|`.
    pub fn cosine_perturbed(a: SymMatrix, eps: f64) -> Result<Self> {
        let k = a.dim();
        let (lo, hi) = window_of(&a)?;
        if !(eps.abs() < lo) {
            return Err(config("eps", format!("|eps| = {} must be below the smallest eigenvalue {lo}", eps.abs())));
        }
        let m = a.to_dmatrix();
        let (a1, a2) = (a.clone(), a.clone());
        let m1 = m.clone();
        let grad = move |x: &[f64]| -> Vec<f64> { a2.apply(x).into_iter().zip(x).map(|(ax, p)| ax - eps * p.sin()).collect() };
        let g2 = grad.clone();
        Ok(Self {
            k,
            lambda: lo - eps.abs(),
            upper: hi + eps.abs(),
            value: Arc::new(move |x| 0.5 * a1.quad_form(x) + eps * x.iter().map(|p| p.cos()).sum::<f64>()),
            gradient: Arc::new(grad),
            hessian: Arc::new(move |x| {
                let mut h = m1.clone();
                for (j, p) in x.iter().enumerate() {
                    h[(j, j)] -= eps * p.cos();
                }
                h
            }),
            // −½∇²ΔW + ½(W''² + Σ_l ∂_lW ∇²∂_lW).
            density_hessian: Some(Arc::new(move |x| {
                let mut h = m.clone();
                for (j, p) in x.iter().enumerate() {
                    h[(j, j)] -= eps * p.cos();
                }
                let g = g2(x);
                let mut out = &h * &h * 0.5;
                for (j, p) in x.iter().enumerate() {
                    out[(j, j)] += -0.5 * eps * p.cos() + 0.5 * eps * p.sin() * g[j];
                }
                out
            })),
            quadratic: None,
        })
    }

    /// A general potential from callables and a claimed spectral window.
    pub fn from_fns(
        k: usize,
        lambda: f64,
        upper: f64,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if k == 0 {
            return Err(config("k", "dimension must be positive"));
        }
        if !(lambda > 0.0 && upper >= lambda && upper.is_finite()) {
            return Err(config("lambda", format!("need 0 < lambda <= Lambda, got ({lambda}, {upper})")));
        }
        Ok(Self {
            k,
            lambda,
            upper,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            density_hessian: None,
            quadratic: None,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.k
    }

    /// `(λ_W, Λ_W)`.
    pub fn window(&self) -> (f64, f64) {
        (self.lambda, self.upper)
    }

    /// `(A, b)` for quadratic potentials.
    pub fn quadratic_form(&self) -> Option<(&SymMatrix, &[f64])> {
        self.quadratic.as_ref().map(|(a, b)| (a, b.as_slice()))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.hessian)(x)
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.hessian(x).trace()
    }

    /// `−½ΔW + ¼|∇W|²`, the path-weight density.
    pub fn density(&self, x: &[f64]) -> f64 {
        let g = self.gradient(x);
        -0.5 * self.laplacian(x) + 0.25 * g.iter().map(|v| v * v).sum::<f64>()
    }

    /// Hessian of [`Self::density`]; central differences when no closed form
    /// was supplied.
    pub fn density_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(h) = &self.density_hessian {
            return h(x);
        }
        let k = self.k;
        let e = 1e-4 * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let at = |dj: (usize, f64), dl: (usize, f64)| {
            let mut y = x.to_vec();
            y[dj.0] += dj.1;
            y[dl.0] += dl.1;
            self.density(&y)
        };
        let mut h = DMatrix::zeros(k, k);
        for j in 0..k {
            h[(j, j)] = (at((j, e), (j, 0.0)) - 2.0 * self.density(x) + at((j, -e), (j, 0.0))) / (e * e);
            for l in 0..j {
                let v = (at((j, e), (l, e)) - at((j, e), (l, -e)) - at((j, -e), (l, e)) + at((j, -e), (l, -e))) / (4.0 * e * e);
                h[(j, l)] = v;
                h[(l, j)] = v;
            }
        }
        h
    }

    /// Checks `λ_W ≤ eig W''(φ) ≤ Λ_W` at `samples` uniform points of
    /// `[−radius, radius]^k`.
    pub fn verify_window(&self, samples: usize, radius: f64, seed: SeedRecord) -> Result<()> {
        let mut rng = seed.rng();
        let tol = 1e-12 * self.upper;
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.k).map(|_| rng.random_range(-radius..=radius)).collect();
            let ev = self.hessian(&x).symmetric_eigen().eigenvalues;
            let (lo, hi) = (ev.min(), ev.max());
            if lo < self.lambda - tol || hi > self.upper + tol {
                return Err(Error::Integrity(format!(
                    "Hessian spectrum [{lo}, {hi}] at {x:?} leaves [{}, {}]",
                    self.lambda, self.upper
                )));
            }
        }
        Ok(())
    }

    /// Largest `|∇W − ∇_h W| / max(1, |∇W|)` over random points, with central
    /// differences of step `h`.
    pub fn gradient_fd_error(&self, samples: usize, radius: f64, h: f64, seed: SeedRecord) -> f64 {
        let mut rng = seed.rng();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.k).map(|_| rng.random_range(-radius..=radius)).collect();
            let g = DVector::from_vec(self.gradient(&x));
            let fd = DVector::from_iterator(
                self.k,
                (0..self.k).map(|j| {
                    let (mut p, mut m) = (x.clone(), x.clone());
                    p[j] += h;
                    m[j] -= h;
                    (self.value(&p) - self.value(&m)) / (2.0 * h)
                }),
            );
            worst = worst.max((g.clone() - fd).norm() / g.norm().max(1.0));
        }
        worst
    }
}
