//! Complex conjugate gradients and restarted GMRES, matrix-free.

use num_complex::Complex64 as C;

use super::ops::{inner, norm_sqr};
use crate::error::{Error, Result};

/// Convergence record of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final residual relative to the right side.
    pub residual: f64,
}

/// CG for a Hermitian positive definite operator; `x` holds the initial guess.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[C], &mut [C]),
    b: &[C],
    x: &mut [C],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm_sqr(b).sqrt();
    if bnorm == 0.0 {
        x.fill(C::default());
        return Ok(SolveStats { iterations: 0, residual: 0.0 });
    }
    let mut ax = vec![C::default(); n];
    apply(x, &mut ax);
    let mut r: Vec<C> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = norm_sqr(&r);
    let mut ap = vec![C::default(); n];
    for it in 0..max_iter {
        let res = rr.sqrt() / bnorm;
        if res <= tol {
            return Ok(SolveStats { iterations: it, residual: res });
        }
        apply(&p, &mut ap);
        let alpha = rr / inner(&p, &ap).re;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rr_new = norm_sqr(&r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
    }
    let res = rr.sqrt() / bnorm;
    if res <= tol {
        Ok(SolveStats { iterations: max_iter, residual: res })
    } else {
        Err(Error::Solver { iterations: max_iter, residual: res })
    }
}

/// Restarted GMRES(`restart`) with Givens rotations; `x` holds the initial guess.
pub fn gmres(
    mut apply: impl FnMut(&[C], &mut [C]),
    b: &[C],
    x: &mut [C],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm_sqr(b).sqrt();
    if bnorm == 0.0 {
        x.fill(C::default());
        return Ok(SolveStats { iterations: 0, residual: 0.0 });
    }
    let mut total = 0;
    let mut w = vec![C::default(); n];
    loop {
        apply(x, &mut w);
        let r: Vec<C> = b.iter().zip(&w).map(|(b, a)| b - a).collect();
        let beta = norm_sqr(&r).sqrt();
        if beta / bnorm <= tol {
            return Ok(SolveStats { iterations: total, residual: beta / bnorm });
        }
        if total >= max_iter {
            return Err(Error::Solver { iterations: total, residual: beta / bnorm });
        }
        let mut basis: Vec<Vec<C>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<C>> = Vec::new();
        let mut cs: Vec<C> = Vec::new();
        let mut sn: Vec<C> = Vec::new();
        let mut g = vec![C::new(beta, 0.0)];
        let mut k = 0;
        while k < restart && total < max_iter {
            apply(&basis[k], &mut w);
            let mut col = vec![C::default(); k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = inner(v, &w);
                col[i] = hij;
                for (wl, vl) in w.iter_mut().zip(v) {
                    *wl -= hij * vl;
                }
            }
            let hn = norm_sqr(&w).sqrt();
            col[k + 1] = C::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * col[i] + sn[i].conj() * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = (col[k].norm_sqr() + col[k + 1].norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 { (C::new(1.0, 0.0), C::default()) } else { (col[k] / denom, col[k + 1] / denom) };
            col[k] = C::new(denom, 0.0);
            col[k + 1] = C::default();
            g.push(-s * g[k]);
            g[k] = c.conj() * g[k];
            cs.push(c);
            sn.push(s);
            h.push(col);
            total += 1;
            k += 1;
            let res = g[k].norm() / bnorm;
            if hn == 0.0 || res <= tol {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![C::default(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xl, vl) in x.iter_mut().zip(&basis[j]) {
                *xl += yj * vl;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn random_matrix(n: usize, seed: u64) -> DMatrix<C> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn matvec(m: &DMatrix<C>, x: &[C], out: &mut [C]) {
        for i in 0..m.nrows() {
            out[i] = (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum();
        }
    }

    #[test]
    fn cg_solves_hermitian_system() {
        let a = random_matrix(30, 1);
        let m = &a.adjoint() * &a + DMatrix::<C>::identity(30, 30);
        let b: Vec<C> = (0..30).map(|i| C::new(i as f64, 1.0)).collect();
        let mut x = vec![C::default(); 30];
        conjugate_gradient(|v, o| matvec(&m, v, o), &b, &mut x, 1e-13, 500).unwrap();
        let mut r = vec![C::default(); 30];
        matvec(&m, &x, &mut r);
        assert!(r.iter().zip(&b).all(|(r, b)| (r - b).norm() < 1e-9));
    }

    #[test]
    fn gmres_solves_nonhermitian_system_with_restarts() {
        let m = random_matrix(40, 2) * C::new(0.1, 0.0) + DMatrix::<C>::identity(40, 40) * C::new(2.0, 0.5);
        let b: Vec<C> = (0..40).map(|i| C::new(1.0, i as f64 * 0.1)).collect();
        let mut x = vec![C::default(); 40];
        let stats = gmres(|v, o| matvec(&m, v, o), &b, &mut x, 1e-12, 8, 1000).unwrap();
        assert!(stats.residual <= 1e-12);
        let mut r = vec![C::default(); 40];
        matvec(&m, &x, &mut r);
        assert!(r.iter().zip(&b).all(|(r, b)| (r - b).norm() < 1e-9));
    }

    #[test]
    fn nonconvergence_reports_residual() {
        let m = random_matrix(30, 3) + DMatrix::<C>::identity(30, 30) * C::new(0.01, 0.0);
        let b = vec![C::new(1.0, 0.0); 30];
        let mut x = vec![C::default(); 30];
        match gmres(|v, o| matvec(&m, v, o), &b, &mut x, 1e-14, 2, 3) {
            Err(Error::Solver { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected solver error, got {other:?}"),
        }
    }
}
