//! The operator `T_{ξ,η}` on stationary vector fields of a periodic sample.
//!
//! `T g = ∂_ξψ` where `(1/Λ)(η + D_t)ψ + ∂_ξ*∂_ξψ = ∂_ξ*g`. Two independent
//! routes are provided: a space-time FFT solve and the time-integral
//! representation against the heat kernel, evaluated by quadrature.

use num_complex::Complex64 as C;
use rustfft::FftPlanner;

use super::ops::{mean_norm, twist_phases, twisted_divergence, twisted_gradient, SampleGrid};
use crate::error::{config, Error, Result};
use crate::lattice::{heat_kernel_tail_radius, ln_factorial, scaled_bessel_i};
use crate::quad::gauss_legendre;

/// In-place multi-dimensional FFT of a row-major array with shape `dims`.
/// The inverse is unnormalized.
pub fn fft_nd(data: &mut [C], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total);
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = total;
    for &len in dims {
        stride /= len;
        if len == 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
        let mut line = vec![C::default(); len];
        let block = stride * len;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

fn check_input(grid: &SampleGrid, upper: f64, xi: &[f64], eta: f64, g: &[C]) -> Result<()> {
    if xi.len() != grid.cube.dim() {
        return Err(config("xi", format!("expected {} components, got {}", grid.cube.dim(), xi.len())));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(config("eta", format!("must be positive, got {eta}")));
    }
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(config("Lambda", format!("must be positive, got {upper}")));
    }
    if grid.n_times > 1 && !(grid.dt > 0.0) {
        return Err(config("dt", "a time-dependent sample needs a positive time step"));
    }
    if g.len() != grid.vector_len() {
        return Err(config("g", format!("expected {} values, got {}", grid.vector_len(), g.len())));
    }
    if !g.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(config("g", "field must be finite"));
    }
    Ok(())
}

fn split_components(grid: &SampleGrid, g: &[C]) -> Vec<Vec<C>> {
    let n = grid.cube.volume();
    let d = grid.cube.dim();
    (0..d)
        .map(|j| {
            let mut c = Vec::with_capacity(n * grid.n_times);
            for t in 0..grid.n_times {
                c.extend_from_slice(&g[(t * d + j) * n..(t * d + j + 1) * n]);
            }
            c
        })
        .collect()
}

fn join_components(grid: &SampleGrid, comps: &[Vec<C>]) -> Vec<C> {
    let n = grid.cube.volume();
    let d = grid.cube.dim();
    let mut g = vec![C::default(); grid.vector_len()];
    for t in 0..grid.n_times {
        for j in 0..d {
            g[(t * d + j) * n..(t * d + j + 1) * n].copy_from_slice(&comps[j][t * n..(t + 1) * n]);
        }
    }
    g
}

/// `T_{ξ,η}g` by diagonalizing the space-time shifts with an FFT.
pub fn t_operator_spectral(grid: &SampleGrid, upper: f64, xi: &[f64], eta: f64, g: &[C]) -> Result<Vec<C>> {
    check_input(grid, upper, xi, eta, g)?;
    let cube = &grid.cube;
    let (n, d, l, nt) = (cube.volume(), cube.dim(), cube.side(), grid.n_times);
    let mut dims = vec![nt];
    dims.extend(std::iter::repeat_n(l, d));
    let mut comps = split_components(grid, g);
    for c in comps.iter_mut() {
        fft_nd(c, &dims, false);
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut eps = vec![C::default(); d];
    for t in 0..nt {
        let z = if nt > 1 {
            let theta = two_pi * t as f64 / nt as f64;
            (C::new(eta, 0.0) + (C::new(1.0, 0.0) - C::from_polar(1.0, -theta)) / grid.dt) / upper
        } else {
            C::new(eta / upper, 0.0)
        };
        for x in 0..n {
            let m = cube.coords(x);
            for j in 0..d {
                eps[j] = C::from_polar(1.0, two_pi * m[j] as f64 / l as f64 - xi[j]) - 1.0;
            }
            let e2: f64 = eps.iter().map(|e| e.norm_sqr()).sum();
            let idx = t * n + x;
            let proj: C = (0..d).map(|j| eps[j].conj() * comps[j][idx]).sum::<C>() / (z + e2);
            for j in 0..d {
                comps[j][idx] = eps[j] * proj;
            }
        }
    }
    let scale = 1.0 / (n * nt) as f64;
    for c in comps.iter_mut() {
        fft_nd(c, &dims, true);
        for v in c.iter_mut() {
            *v *= scale;
        }
    }
    Ok(join_components(grid, &comps))
}

/// `Σ_n e^{−2s}I_{x+Ln}(2s) e^{i(x+Ln)ξ}` for `x ∈ 0..L`: the one-axis heat
/// kernel at time `s`, twisted and folded onto the circle.
fn folded_axis_kernel(l: usize, xi: f64, s: f64) -> Vec<C> {
    let li = l as i64;
    let reach = heat_kernel_tail_radius(1, s, 1e-18) + li;
    (0..li)
        .map(|x0| {
            let mut acc = C::default();
            let mut x = x0 - ((reach + x0) / li) * li;
            while x <= reach {
                let g = if s == 0.0 { if x == 0 { 1.0 } else { 0.0 } } else { scaled_bessel_i(x, 2.0 * s) };
                acc += C::from_polar(g, x as f64 * xi);
                x += li;
            }
            acc
        })
        .collect()
}

/// Poisson(μ) probabilities folded modulo `n`.
fn folded_poisson(mu: f64, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if mu == 0.0 {
        w[0] = 1.0;
        return w;
    }
    let spread = 15.0 * mu.sqrt() + 40.0;
    let lo = (mu - spread).floor().max(0.0) as u64;
    let hi = (mu + spread).ceil() as u64;
    let lm = mu.ln();
    for k in lo..=hi {
        let p = (-mu + k as f64 * lm - ln_factorial(k)).exp();
        w[(k % n as u64) as usize] += p;
    }
    w
}

/// Panel endpoints covering `[0, t_end]`, geometric in `t` with width caps that
/// resolve the kernel and the Poisson time shift.
fn panels(upper: f64, dt: Option<f64>, t_end: f64, ratio: f64) -> Vec<f64> {
    let base = match dt {
        Some(dt) => (0.25 / upper).min(0.25 * dt),
        None => 0.25 / upper,
    };
    let mut edges = vec![0.0, base];
    while *edges.last().unwrap() < t_end {
        let t = *edges.last().unwrap();
        let mut w = t * (ratio - 1.0);
        if let Some(dt) = dt {
            w = w.min(2.0 * (t * dt).sqrt()).max(base);
        }
        edges.push((t + w).min(t_end));
    }
    edges
}

/// The space-time kernel `Q(x, k) = Λ∫ e^{−ηt} G_ξ(x, Λt) w_t(k) dt` of the resolvent
/// `Λ(η + D_t + Λ∂_ξ*∂_ξ)^{-1}` on the sample.
fn resolvent_kernel(grid: &SampleGrid, upper: f64, xi: &[f64], eta: f64, ratio: f64, nodes: usize, t_end: f64) -> Vec<C> {
    let cube = &grid.cube;
    let (n, d, l, nt) = (cube.volume(), cube.dim(), cube.side(), grid.n_times);
    let coords: Vec<Vec<i64>> = (0..n).map(|x| cube.coords(x)).collect();
    let dt = (nt > 1).then_some(grid.dt);
    let edges = panels(upper, dt, t_end, ratio);
    let mut q = vec![C::default(); n * nt];
    for w in edges.windows(2) {
        let (ts, ws) = gauss_legendre(nodes, w[0], w[1]);
        for (&t, &wt) in ts.iter().zip(&ws) {
            let axes: Vec<Vec<C>> = (0..d).map(|j| folded_axis_kernel(l, xi[j], upper * t)).collect();
            let pois = match dt {
                Some(dt) => folded_poisson(t / dt, nt),
                None => vec![1.0],
            };
            let weight = upper * wt * (-eta * t).exp();
            for (x, c) in coords.iter().enumerate() {
                let kx: C = (0..d).map(|j| axes[j][c[j] as usize]).product::<C>() * weight;
                for (k, p) in pois.iter().enumerate() {
                    q[k * n + x] += kx * *p;
                }
            }
        }
    }
    q
}

/// Result of the quadrature route with its self-assessed accuracy.
#[derive(Clone, Debug)]
pub struct QuadratureApply {
    pub value: Vec<C>,
    /// Largest kernel change between two quadrature resolutions.
    pub quadrature_error: f64,
    /// Bound on the neglected tail `∫_{t_end}^∞`.
    pub truncation_bound: f64,
}

/// `T_{ξ,η}g` from the time-integral representation against the heat kernel.
/// The backward time difference becomes a Poisson-distributed shift of the
/// sample in time. Failing the self-check against `tol` is an integrity error.
pub fn t_operator_quadrature(
    grid: &SampleGrid,
    upper: f64,
    xi: &[f64],
    eta: f64,
    g: &[C],
    tol: f64,
) -> Result<QuadratureApply> {
    check_input(grid, upper, xi, eta, g)?;
    let cube = &grid.cube;
    let (n, d, nt) = (cube.volume(), cube.dim(), grid.n_times);
    let t_end = (upper / (eta * tol * 1e-3)).ln().max(1.0) / eta;
    let truncation_bound = upper * (-eta * t_end).exp() / eta;
    let fine = resolvent_kernel(grid, upper, xi, eta, 1.15, 24, t_end);
    let coarse = resolvent_kernel(grid, upper, xi, eta, 1.3, 16, t_end);
    let quadrature_error = fine.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if quadrature_error > tol || truncation_bound > tol {
        return Err(Error::Integrity(format!(
            "T-operator quadrature error {quadrature_error:e}, truncation {truncation_bound:e} exceed {tol:e}"
        )));
    }
    let phase = twist_phases(xi);
    let mut h = vec![C::default(); n * nt];
    for t in 0..nt {
        twisted_divergence(cube, &phase, &g[t * d * n..(t + 1) * d * n], &mut h[t * n..(t + 1) * n]);
    }
    let coords: Vec<Vec<i64>> = (0..n).map(|x| cube.coords(x)).collect();
    let mut psi = vec![C::default(); n * nt];
    let mut diff = vec![0usize; n * n];
    for y in 0..n {
        for z in 0..n {
            let p: Vec<i64> = coords[y].iter().zip(&coords[z]).map(|(a, b)| a - b).collect();
            diff[y * n + z] = cube.index(&p);
        }
    }
    for s in 0..nt {
        for y in 0..n {
            let mut acc = C::default();
            for k in 0..nt {
                let src = (s + nt - k) % nt;
                let qk = &fine[k * n..(k + 1) * n];
                let hs = &h[src * n..(src + 1) * n];
                for z in 0..n {
                    acc += qk[diff[y * n + z]] * hs[z];
                }
            }
            psi[s * n + y] = acc;
        }
    }
    let mut value = vec![C::default(); grid.vector_len()];
    for t in 0..nt {
        twisted_gradient(cube, &phase, &psi[t * n..(t + 1) * n], &mut value[t * d * n..(t + 1) * d * n]);
    }
    Ok(QuadratureApply { value, quadrature_error, truncation_bound })
}

/// `‖Tg‖/‖g‖` in the sample-average norm (0 for `g = 0`).
pub fn contraction_ratio(grid: &SampleGrid, g: &[C], tg: &[C]) -> f64 {
    let ng = mean_norm(g, grid.scalar_len());
    if ng == 0.0 {
        0.0
    } else {
        mean_norm(tg, grid.scalar_len()) / ng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::PeriodicCube;
    use rand::{Rng, SeedableRng};

    fn random_g(grid: &SampleGrid, seed: u64) -> Vec<C> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..grid.vector_len()).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn fft_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let orig: Vec<C> = (0..3 * 4 * 4).map(|_| C::new(rng.random(), rng.random())).collect();
        let mut v = orig.clone();
        fft_nd(&mut v, &[3, 4, 4], false);
        fft_nd(&mut v, &[3, 4, 4], true);
        assert!(v.iter().zip(&orig).all(|(a, b)| (a / 48.0 - b).norm() < 1e-13));
    }

    #[test]
    fn spectral_route_matches_a_krylov_solve() {
        use crate::env::{CoefficientField, Layout};
        use crate::homogenize::corrector::SpaceTimeSystem;
        use crate::matrix::EllipticityPair;
        let grid = SampleGrid { cube: PeriodicCube::new(2, 4).unwrap(), n_times: 3, dt: 0.5 };
        let (upper, xi, eta) = (1.3, [0.4, -0.7], 0.2);
        let g = random_g(&grid, 2);
        let tg = t_operator_spectral(&grid, upper, &xi, eta, &g).unwrap();
        // (η + D_t + Λ∂*∂)ψ = Λ∂*g with the space-time solver on a ≡ Λ.
        let (n, d) = (16, 2);
        let a = CoefficientField::from_data(
            grid.cube.clone(),
            0.0,
            grid.dt,
            EllipticityPair::new(upper, upper).unwrap(),
            Layout::Diagonal,
            vec![upper; d * n * 3],
        )
        .unwrap();
        let sys = SpaceTimeSystem::new(&a, &xi, eta).unwrap();
        let phase = twist_phases(&xi);
        let mut rhs = vec![C::default(); n * 3];
        for t in 0..3 {
            twisted_divergence(&grid.cube, &phase, &g[t * d * n..(t + 1) * d * n], &mut rhs[t * n..(t + 1) * n]);
        }
        rhs.iter_mut().for_each(|v| *v *= upper);
        let psi = sys.solve(&rhs).unwrap();
        let mut grad = vec![C::default(); grid.vector_len()];
        for t in 0..3 {
            twisted_gradient(&grid.cube, &phase, &psi[t * n..(t + 1) * n], &mut grad[t * d * n..(t + 1) * d * n]);
        }
        assert!(tg.iter().zip(&grad).all(|(a, b)| (a - b).norm() < 1e-10));
        assert!(contraction_ratio(&grid, &g, &tg) <= 1.0 + 1e-12);
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = SampleGrid { cube: PeriodicCube::new(1, 6).unwrap(), n_times: 2, dt: 0.5 };
        let z = vec![C::default(); grid.vector_len()];
        assert!(t_operator_spectral(&grid, 1.0, &[0.3], 0.1, &z).unwrap().iter().all(|v| v.norm() == 0.0));
        let q = t_operator_quadrature(&grid, 1.0, &[0.3], 0.5, &z, 1e-8).unwrap();
        assert!(q.value.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn routes_agree_time_independent() {
        let grid = SampleGrid { cube: PeriodicCube::new(2, 4).unwrap(), n_times: 1, dt: 1.0 };
        let g = random_g(&grid, 7);
        let a = t_operator_spectral(&grid, 1.2, &[0.5, 0.1], 0.4, &g).unwrap();
        let b = t_operator_quadrature(&grid, 1.2, &[0.5, 0.1], 0.4, &g, 1e-9).unwrap().value;
        let err = mean_norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>(), grid.scalar_len());
        assert!(err / mean_norm(&a, grid.scalar_len()) < 1e-8, "relative difference {err}");
    }

    #[test]
    fn routes_agree_time_dependent() {
        let grid = SampleGrid { cube: PeriodicCube::new(1, 6).unwrap(), n_times: 4, dt: 0.3 };
        let g = random_g(&grid, 8);
        let a = t_operator_spectral(&grid, 1.5, &[1.1], 0.3, &g).unwrap();
        let b = t_operator_quadrature(&grid, 1.5, &[1.1], 0.3, &g, 1e-9).unwrap().value;
        let err = mean_norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>(), grid.scalar_len());
        assert!(err / mean_norm(&a, grid.scalar_len()) < 1e-8, "relative difference {err}");
    }
}
