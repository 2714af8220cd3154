//! The lattice heat kernel `G(x,t)` of `∂_t G + ∇*∇G = 0`, `G(·,0) = δ`, and
//! the continuum Gaussian kernel of a constant diffusion matrix.

use super::bessel::scaled_bessel_i;
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

/// Closed form `G(x,t) = ∏_j e^{-2t} I_{x_j}(2t)` on `Z^d`.
pub fn heat_kernel(x: &[i64], t: f64) -> Result<f64> {
    heat_kernel_diag(x, t, &vec![1.0; x.len()])
}

/// Kernel of `∂_t G + ∇*a∇G = 0` for a constant diagonal `a`.
pub fn heat_kernel_diag(x: &[i64], t: f64, diag: &[f64]) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("heat kernel needs t >= 0, got {t}")));
    }
    Ok(x.iter().zip(diag).map(|(&xj, &aj)| scaled_bessel_i(xj, 2.0 * aj * t)).product())
}

/// Smallest `R` such that the mass of `G(·,t)` outside `[-R, R]^d` is below `tol`.
pub fn heat_kernel_tail_radius(dim: usize, t: f64, tol: f64) -> i64 {
    if t <= 0.0 {
        return 0;
    }
    let x = 2.0 * t;
    // one-dimensional two-sided tail, union bound over coordinates
    let mut inside = scaled_bessel_i(0, x);
    let mut r = 0i64;
    loop {
        let tail = (1.0 - inside).max(0.0);
        // the complement loses accuracy near 1e-16, so switch to a direct tail sum
        let tail = if tail < 1e-9 { direct_tail(r, x) } else { tail };
        if dim as f64 * tail < tol {
            return r;
        }
        r += 1;
        inside += 2.0 * scaled_bessel_i(r, x);
    }
}

fn direct_tail(r: i64, x: f64) -> f64 {
    let mut s = 0.0;
    let mut n = r + 1;
    loop {
        let term = 2.0 * scaled_bessel_i(n, x);
        s += term;
        if term < 1e-30 || term < s * 1e-17 {
            return s;
        }
        n += 1;
    }
}

/// Values of a field on the box `[-R, R]^d`, lexicographic with the last
/// coordinate fastest. Points outside the box read as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxField {
    dim: usize,
    radius: i64,
    values: Vec<f64>,
}

impl BoxField {
    pub fn zeros(dim: usize, radius: i64) -> Self {
        let side = (2 * radius + 1) as usize;
        Self { dim, radius, values: vec![0.0; side.pow(dim as u32)] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn radius(&self) -> i64 {
        self.radius
    }

    #[inline]
    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn offset(&self, x: &[i64]) -> Option<usize> {
        let side = self.side();
        let mut idx = 0usize;
        for &xj in x {
            if xj.abs() > self.radius {
                return None;
            }
            idx = idx * side + (xj + self.radius) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side();
        let mut p = vec![0i64; self.dim];
        for j in (0..self.dim).rev() {
            p[j] = (idx % side) as i64 - self.radius;
            idx /= side;
        }
        p
    }

    pub fn get(&self, x: &[i64]) -> f64 {
        self.offset(x).map_or(0.0, |i| self.values[i])
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Mass on the outermost shell `max_j |x_j| = R`.
    pub fn boundary_mass(&self) -> f64 {
        (0..self.values.len())
            .filter(|&i| self.point(i).iter().any(|x| x.abs() == self.radius))
            .map(|i| self.values[i].abs())
            .sum()
    }
}

/// Applies `∇*∇` on the box with zero values outside it.
pub(crate) fn box_laplacian(dim: usize, side: usize, u: &[f64], out: &mut [f64]) {
    let n = u.len();
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let mut acc = 2.0 * dim as f64 * u[i];
        let mut stride = 1usize;
        let mut rem = i;
        for _ in 0..dim {
            let c = rem % side;
            rem /= side;
            if c + 1 < side {
                acc -= u[i + stride];
            }
            if c > 0 {
                acc -= u[i - stride];
            }
            stride *= side;
        }
        *o = acc;
    }
}

/// Solver path for the heat kernel: evolves `δ` on a box sized so the mass
/// beyond it stays below `1e-13`, using a truncated Taylor series of
/// `exp(-h∇*∇)` per step. Returns one snapshot per requested time.
pub fn heat_kernel_box(dim: usize, times: &[f64]) -> Result<Vec<BoxField>> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Domain("heat kernel needs t >= 0".into()));
    }
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let radius = heat_kernel_tail_radius(dim, t_max, 1e-13) + 4;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut field = BoxField::zeros(dim, radius);
    let origin = field.offset(&vec![0; dim]).expect("origin lies in the box");
    field.values[origin] = 1.0;
    let side = field.side();
    let n = field.values.len();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut now = 0.0;
    let mut out = vec![None; times.len()];
    for &k in &order {
        let target = times[k];
        let span = target - now;
        let steps = (span / 0.1).ceil() as usize;
        let h = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            term.copy_from_slice(&field.values);
            let mut acc = field.values.clone();
            for order in 1..60 {
                box_laplacian(dim, side, &term, &mut next);
                let c = -h / order as f64;
                let mut sup = 0.0f64;
                for (tv, nv) in term.iter_mut().zip(&next) {
                    *tv = c * nv;
                    sup = sup.max(tv.abs());
                }
                for (a, tv) in acc.iter_mut().zip(&term) {
                    *a += tv;
                }
                if sup < 1e-18 {
                    break;
                }
            }
            field.values.copy_from_slice(&acc);
        }
        now = target;
        out[k] = Some(field.clone());
    }
    Ok(out.into_iter().map(|f| f.expect("every time visited")).collect())
}

/// Least `C` with `G(x,t) + (t+1)^{1/2}|∇G(x,t)| ≤ C (t+1)^{-d/2} exp[-γ min{|x|, |x|²/(t+1)}]`
/// over `x ∈ [-R, R]^d` and the given times, from the closed form.
pub fn heat_kernel_bound_constant(dim: usize, gamma: f64, radius: i64, times: &[f64]) -> Result<f64> {
    let side = (2 * radius + 1) as usize;
    let mut best = 0.0f64;
    let mut x = vec![0i64; dim];
    for &t in times {
        for idx in 0..side.pow(dim as u32) {
            let mut rem = idx;
            for j in (0..dim).rev() {
                x[j] = (rem % side) as i64 - radius;
                rem /= side;
            }
            let g = heat_kernel(&x, t)?;
            let mut grad2 = 0.0;
            for j in 0..dim {
                let mut y = x.clone();
                y[j] += 1;
                let dg = heat_kernel(&y, t)? - g;
                grad2 += dg * dg;
            }
            let r = x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            let lhs = g + (t + 1.0).sqrt() * grad2.sqrt();
            let env = (t + 1.0).powf(-(dim as f64) / 2.0) * (-gamma * r.min(r * r / (t + 1.0))).exp();
            best = best.max(lhs / env);
        }
    }
    Ok(best)
}

/// `(4πt)^{-d/2} det(a)^{-1/2} exp(-x·a^{-1}x / 4t)`.
pub fn hom_gaussian_kernel(x: &[f64], t: f64, a: &SymMatrix) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("Gaussian kernel needs t > 0, got {t}")));
    }
    if x.len() != a.dim() {
        return Err(Error::Domain(format!("point has {} coordinates, matrix is {}x{}", x.len(), a.dim(), a.dim())));
    }
    let inv = a.inverse_pd()?;
    let det = a.determinant();
    let d = a.dim() as f64;
    Ok((4.0 * std::f64::consts::PI * t).powf(-d / 2.0) / det.sqrt() * (-inv.quad_form(x) / (4.0 * t)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_reference_value() {
        assert!((heat_kernel(&[0], 1.0).unwrap() - 0.308508322553671).abs() < 1e-14);
        assert_eq!(heat_kernel(&[0, 0], 0.0).unwrap(), 1.0);
        assert_eq!(heat_kernel(&[1, 0], 0.0).unwrap(), 0.0);
        assert!(heat_kernel(&[0], -0.1).is_err());
    }

    #[test]
    fn box_solver_matches_closed_form() {
        let times = [0.0, 0.5, 1.0, 3.0, 10.0];
        for dim in [1, 2] {
            let snaps = heat_kernel_box(dim, &times).unwrap();
            for (snap, &t) in snaps.iter().zip(&times) {
                assert!((snap.sum() - 1.0).abs() < 1e-10);
                let mut sup = 0.0f64;
                for i in 0..snap.values().len() {
                    let p = snap.point(i);
                    sup = sup.max((snap.values()[i] - heat_kernel(&p, t).unwrap()).abs());
                }
                assert!(sup < 1e-10, "d={dim} t={t} sup={sup}");
            }
        }
    }

    #[test]
    fn gaussian_kernel_identity_and_symmetry() {
        let id = SymMatrix::identity(1);
        let t = 0.7f64;
        let v = hom_gaussian_kernel(&[0.4], t, &id).unwrap();
        let expect = (-0.16 / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt();
        assert!((v - expect).abs() < 1e-15);
        let a = SymMatrix::new(2, vec![1.3, 0.2, 0.2, 0.8]).unwrap();
        let p = hom_gaussian_kernel(&[0.3, -0.9], 1.1, &a).unwrap();
        let q = hom_gaussian_kernel(&[-0.3, 0.9], 1.1, &a).unwrap();
        assert_eq!(p, q);
        assert!(hom_gaussian_kernel(&[0.0, 0.0], 1.0, &SymMatrix::new(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap()).is_err());
    }
}
