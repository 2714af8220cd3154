//! Continuum Green's function of `−div(a∇)` for a constant positive definite
//! `a`: `Γ(x) = q(x)^{(2−d)/2} / ((d−2)|S^{d−1}|√det a)` with `q(x) = x·a⁻¹x`.
//! In `d = 2` only gradients and differences are defined.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{config, Error, Result};
use crate::matrix::SymMatrix;

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

struct Geometry {
    inv: SymMatrix,
    scale: f64,
}

impl Geometry {
    fn new(a: &SymMatrix, x: &[f64]) -> Result<Self> {
        if x.len() != a.dim() {
            return Err(config("x", format!("point has {} coordinates, matrix is {}x{}", x.len(), a.dim(), a.dim())));
        }
        if a.dim() < 2 {
            return Err(Error::Unsupported("the continuum Green's function is used for d ≥ 2 only".into()));
        }
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::Domain("the Green's function is singular at the origin".into()));
        }
        let inv = a.inverse_pd()?;
        let scale = 1.0 / (sphere_area(a.dim()) * a.determinant().sqrt());
        Ok(Self { inv, scale })
    }
}

/// `Γ(x)` for `d ≥ 3`; `d = 2` is an unsupported request.
pub fn hom_elliptic_greens(a: &SymMatrix, x: &[f64]) -> Result<f64> {
    if a.dim() == 2 {
        return Err(Error::Unsupported("the d = 2 Green's function diverges; use gradients or differences".into()));
    }
    let g = Geometry::new(a, x)?;
    let d = a.dim() as f64;
    Ok(g.scale / (d - 2.0) * g.inv.quad_form(x).powf((2.0 - d) / 2.0))
}

/// `∇Γ(x) = −a⁻¹x / (|S^{d−1}|√det a · q(x)^{d/2})`, any `d ≥ 2`.
pub fn hom_elliptic_gradient(a: &SymMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let g = Geometry::new(a, x)?;
    let q = g.inv.quad_form(x);
    let f = -g.scale * q.powf(-(a.dim() as f64) / 2.0);
    Ok(g.inv.apply(x).into_iter().map(|v| f * v).collect())
}

/// Hessian `∂_j∂_kΓ(x)`, row-major.
pub fn hom_elliptic_hessian(a: &SymMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let g = Geometry::new(a, x)?;
    let d = a.dim();
    let q = g.inv.quad_form(x);
    let ax = g.inv.apply(x);
    let mut h = vec![0.0; d * d];
    for j in 0..d {
        for k in 0..d {
            h[j * d + k] =
                -g.scale * (g.inv.get(j, k) * q.powf(-(d as f64) / 2.0) - d as f64 * ax[j] * ax[k] * q.powf(-(d as f64) / 2.0 - 1.0));
        }
    }
    Ok(h)
}

/// `Γ(x) − Γ(y)`, finite in every `d ≥ 2`.
pub fn hom_elliptic_difference(a: &SymMatrix, x: &[f64], y: &[f64]) -> Result<f64> {
    if a.dim() != 2 {
        return Ok(hom_elliptic_greens(a, x)? - hom_elliptic_greens(a, y)?);
    }
    let gx = Geometry::new(a, x)?;
    Geometry::new(a, y)?;
    Ok(-0.5 * gx.scale * (gx.inv.quad_form(x) / gx.inv.quad_form(y)).ln())
}

/// Tabulated `Γ` (or `∇Γ` in `d = 2`) at lattice points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticHomGreens {
    pub a_hom: SymMatrix,
    pub points: Vec<Vec<i64>>,
    /// `Γ(x)`; `None` in `d = 2`.
    pub values: Option<Vec<f64>>,
    pub gradients: Vec<Vec<f64>>,
}

impl EllipticHomGreens {
    pub fn new(a_hom: SymMatrix, points: Vec<Vec<i64>>) -> Result<Self> {
        let xs: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|&c| c as f64).collect()).collect();
        let values = if a_hom.dim() >= 3 {
            Some(xs.iter().map(|x| hom_elliptic_greens(&a_hom, x)).collect::<Result<_>>()?)
        } else {
            None
        };
        let gradients = xs.iter().map(|x| hom_elliptic_gradient(&a_hom, x)).collect::<Result<_>>()?;
        Ok(Self { a_hom, points, values, gradients })
    }

    /// Largest `|Σ a_jk ∂_j∂_kΓ|` over the tabulated points, from central
    /// differences of the gradient with relative step `h`, scaled by `|∇Γ|/|x|`.
    pub fn harmonic_residual(&self, h: f64) -> Result<f64> {
        let d = self.a_hom.dim();
        let mut worst: f64 = 0.0;
        for p in &self.points {
            let x: Vec<f64> = p.iter().map(|&c| c as f64).collect();
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let step = h * r;
            let mut lap = 0.0;
            for k in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += step;
                xm[k] -= step;
                let gp = hom_elliptic_gradient(&self.a_hom, &xp)?;
                let gm = hom_elliptic_gradient(&self.a_hom, &xm)?;
                for j in 0..d {
                    lap += self.a_hom.get(j, k) * (gp[j] - gm[j]) / (2.0 * step);
                }
            }
            let g = hom_elliptic_gradient(&self.a_hom, &x)?;
            let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt() / r;
            worst = worst.max(lap.abs() / scale);
        }
        Ok(worst)
    }
}
