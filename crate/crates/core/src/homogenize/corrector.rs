//! The corrector `Φ(ξ,η)` on a space-time periodic sample.
//!
//! The sample is a [`CoefficientField`] whose slices are read cyclically, so
//! slice `N−1` precedes slice `0`. The time derivative is the backward
//! difference `(ψ(n) − ψ(n−1))/Δt`; with a single slice it is zero.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::krylov::{conjugate_gradient, gmres, SolveStats};
use super::ops::{apply_coefficient, inner, norm_sqr, twisted_divergence, twisted_gradient, SampleGrid, TwistedOperator};
use crate::env::CoefficientField;
use crate::error::{config, Error, Result};
use crate::matrix::SymMatrix;

const CG_TOL: f64 = 1e-14;
const GMRES_TOL: f64 = 1e-13;
/// Acceptance threshold on the relative residual of the full space-time system.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Which corrector equation was solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectorVariant {
    /// `(η+∂_t)Φ + ∂_ξ*a∂_ξΦ = −∂_ξ*a`.
    Plain,
    /// `(η+∂_t)Φ + P∂_ξ*a∂_ξΦ = −P∂_ξ*a` with `P` removing the sample mean.
    Projected,
}

/// The discrete energy identity evaluated on a solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    /// `max_{|v|=1} η‖Φv‖² + λ‖∂_ξΦv‖²`.
    pub energy: f64,
    /// `Λ²/λ`.
    pub bound: f64,
}

impl EnergyCheck {
    pub fn holds(&self) -> bool {
        self.energy <= self.bound * (1.0 + 1e-10)
    }
}

/// `Φ = (Φ_1, …, Φ_d)` with `Φv = Σ_k Φ_k v_k`.
#[derive(Clone, Debug)]
pub struct CorrectorField {
    pub xi: Vec<f64>,
    pub eta: f64,
    pub variant: CorrectorVariant,
    pub grid: SampleGrid,
    /// One scalar field per component, time-major.
    pub components: Vec<Vec<C>>,
    /// Largest relative residual over components.
    pub residual: f64,
    pub energy: EnergyCheck,
}

impl CorrectorField {
    pub fn dim(&self) -> usize {
        self.grid.cube.dim()
    }

    /// `∂_ξΦ_k` as a vector field, layout `(n·d + j)·V + x`.
    pub fn gradient(&self, k: usize) -> Vec<C> {
        let cube = &self.grid.cube;
        let n = cube.volume();
        let d = cube.dim();
        let phase = super::ops::twist_phases(&self.xi);
        let mut out = vec![C::default(); self.grid.vector_len()];
        for t in 0..self.grid.n_times {
            twisted_gradient(cube, &phase, &self.components[k][t * n..(t + 1) * n], &mut out[t * d * n..(t + 1) * d * n]);
        }
        out
    }
}

/// The operator `η + D_t + K` (optionally `η + D_t + PK`) on a periodic sample.
pub(crate) struct SpaceTimeSystem<'a> {
    a: &'a CoefficientField,
    xi: Vec<f64>,
    eta: f64,
}

impl<'a> SpaceTimeSystem<'a> {
    pub(crate) fn new(a: &'a CoefficientField, xi: &[f64], eta: f64) -> Result<Self> {
        if xi.len() != a.cube().dim() {
            return Err(config("xi", format!("expected {} components, got {}", a.cube().dim(), xi.len())));
        }
        if !xi.iter().all(|v| v.is_finite()) {
            return Err(config("xi", "components must be finite reals"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(config("eta", format!("must be positive, got {eta}")));
        }
        if a.n_times() > 1 && !(a.dt() > 0.0) {
            return Err(config("dt", "a time-dependent sample needs a positive time step"));
        }
        Ok(Self { a, xi: xi.to_vec(), eta })
    }

    fn volume(&self) -> usize {
        self.a.cube().volume()
    }

    fn n_times(&self) -> usize {
        self.a.n_times()
    }

    /// `out = (η + D_t + K)z` on the whole sample.
    pub(crate) fn apply(&self, z: &[C], out: &mut [C]) {
        let n = self.volume();
        let nt = self.n_times();
        let mut op = TwistedOperator::new(self.a, &self.xi);
        let inv_dt = if nt > 1 { 1.0 / self.a.dt() } else { 0.0 };
        for t in 0..nt {
            let prev = (t + nt - 1) % nt;
            let o = &mut out[t * n..(t + 1) * n];
            op.apply(t, &z[t * n..(t + 1) * n], o);
            for x in 0..n {
                o[x] += z[t * n + x] * self.eta + (z[t * n + x] - z[prev * n + x]) * inv_dt;
            }
        }
    }

    /// Solves one slice `(shift + K_t)y = rhs`, starting from `y`.
    fn slice_solve(&self, op: &mut TwistedOperator, t: usize, shift: f64, rhs: &[C], y: &mut [C]) -> Result<SolveStats> {
        let max_iter = 50 * self.volume() + 100;
        conjugate_gradient(
            |v, o| {
                op.apply(t, v, o);
                for (ol, vl) in o.iter_mut().zip(v) {
                    *ol += vl * shift;
                }
            },
            rhs,
            y,
            CG_TOL,
            max_iter,
        )
    }

    /// One implicit sweep `z(t) = (η + 1/Δt + K_t)^{-1}[b(t) + z(t−1)/Δt]` from `z(−1) = w`.
    fn sweep(&self, op: &mut TwistedOperator, w: &[C], b: Option<&[C]>, z: &mut [C]) -> Result<()> {
        let n = self.volume();
        let inv_dt = 1.0 / self.a.dt();
        let shift = self.eta + inv_dt;
        let mut rhs = vec![C::default(); n];
        let mut prev = w.to_vec();
        for t in 0..self.n_times() {
            for x in 0..n {
                rhs[x] = prev[x] * inv_dt + b.map_or(C::default(), |b| b[t * n + x]);
            }
            let y = &mut z[t * n..(t + 1) * n];
            y.copy_from_slice(&prev);
            self.slice_solve(op, t, shift, &rhs, y)?;
            prev.copy_from_slice(y);
        }
        Ok(())
    }

    /// Solves `(η + D_t + K)z = b`, with up to two refinement passes on the
    /// residual when the period map is poorly conditioned.
    pub(crate) fn solve(&self, b: &[C]) -> Result<Vec<C>> {
        let mut z = self.solve_once(b)?;
        let mut az = vec![C::default(); z.len()];
        for _ in 0..2 {
            self.apply(&z, &mut az);
            let r: Vec<C> = b.iter().zip(&az).map(|(b, a)| b - a).collect();
            if norm_sqr(&r).sqrt() <= 0.01 * RESIDUAL_TOL * norm_sqr(b).sqrt() {
                break;
            }
            let dz = self.solve_once(&r)?;
            z.iter_mut().zip(&dz).for_each(|(z, d)| *z += d);
        }
        Ok(z)
    }

    fn solve_once(&self, b: &[C]) -> Result<Vec<C>> {
        let n = self.volume();
        let nt = self.n_times();
        let mut op = TwistedOperator::new(self.a, &self.xi);
        let mut z = vec![C::default(); n * nt];
        if norm_sqr(b) == 0.0 {
            return Ok(z);
        }
        if nt == 1 {
            self.slice_solve(&mut op, 0, self.eta, b, &mut z)?;
            return Ok(z);
        }
        // Fixed point of the period map w ↦ z(N−1): (I − M)w = c.
        self.sweep(&mut op, &vec![C::default(); n], Some(b), &mut z)?;
        let c = z[(nt - 1) * n..].to_vec();
        let mut scratch = vec![C::default(); n * nt];
        let mut failure = None;
        let mut w = c.clone();
        // The period map contracts the slowest mode by (1 + ηΔt)^{−N}, so
        // inner solves at CG_TOL limit the attainable outer residual.
        let gap = 1.0 - (1.0 + self.eta * self.a.dt()).powi(-(nt as i32));
        let tol = GMRES_TOL.max(10.0 * CG_TOL / gap);
        let stats = gmres(
            |v, out| {
                if failure.is_some() {
                    out.copy_from_slice(v);
                    return;
                }
                if let Err(e) = self.sweep(&mut op, v, None, &mut scratch) {
                    failure = Some(e);
                }
                for x in 0..n {
                    out[x] = v[x] - scratch[(nt - 1) * n + x];
                }
            },
            &c,
            &mut w,
            tol,
            60,
            4000,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        stats?;
        self.sweep(&mut op, &w, Some(b), &mut z)?;
        Ok(z)
    }

    pub(crate) fn relative_residual(&self, z: &[C], b: &[C], projector: Option<&[C]>) -> f64 {
        let mut az = vec![C::default(); z.len()];
        self.apply(z, &mut az);
        if let Some(h) = projector {
            let m = inner(h, z) / z.len() as f64;
            for v in az.iter_mut() {
                *v -= m;
            }
        }
        let r: f64 = az.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum();
        let bn = norm_sqr(b);
        if bn == 0.0 {
            r.sqrt()
        } else {
            (r / bn).sqrt()
        }
    }

    /// `h = K1` slice by slice, so that `⟨Kz⟩ = ⟨h, z⟩/(VN)` for Hermitian `K_t`.
    pub(crate) fn k_of_one(&self) -> Vec<C> {
        let n = self.volume();
        let mut op = TwistedOperator::new(self.a, &self.xi);
        let one = vec![C::new(1.0, 0.0); n];
        let mut h = vec![C::default(); n * self.n_times()];
        for t in 0..self.n_times() {
            op.apply(t, &one, &mut h[t * n..(t + 1) * n]);
        }
        h
    }

    /// Solves `(η + D_t + PK)z = b` by Sherman–Morrison on `PK = K − 1⟨h,·⟩/(VN)`.
    pub(crate) fn solve_projected(&self, b: &[C], h: &[C]) -> Result<Vec<C>> {
        let len = b.len() as f64;
        let y = self.solve(b)?;
        let s = self.solve(&vec![C::new(1.0, 0.0); b.len()])?;
        let wy = inner(h, &y) / len;
        let ws = inner(h, &s) / len;
        let f = wy / (C::new(1.0, 0.0) - ws);
        Ok(y.iter().zip(&s).map(|(y, s)| y + s * f).collect())
    }
}

/// Right side `−∂_ξ*(a e_k)` on every slice.
fn corrector_rhs(a: &CoefficientField, xi: &[f64], k: usize) -> Vec<C> {
    let cube = a.cube();
    let n = cube.volume();
    let d = cube.dim();
    let phase = super::ops::twist_phases(xi);
    let mut ek = vec![C::default(); d * n];
    ek[k * n..(k + 1) * n].fill(C::new(1.0, 0.0));
    let mut col = vec![C::default(); d * n];
    let mut out = vec![C::default(); n * a.n_times()];
    for t in 0..a.n_times() {
        apply_coefficient(a, t, &ek, &mut col);
        let o = &mut out[t * n..(t + 1) * n];
        twisted_divergence(cube, &phase, &col, o);
        for v in o.iter_mut() {
            *v = -*v;
        }
    }
    out
}

fn solve_variant(a: &CoefficientField, xi: &[f64], eta: f64, variant: CorrectorVariant) -> Result<CorrectorField> {
    let sys = SpaceTimeSystem::new(a, xi, eta)?;
    let d = a.cube().dim();
    let h = match variant {
        CorrectorVariant::Plain => None,
        CorrectorVariant::Projected => Some(sys.k_of_one()),
    };
    let mut components = Vec::with_capacity(d);
    let mut residual: f64 = 0.0;
    for k in 0..d {
        let mut b = corrector_rhs(a, xi, k);
        let z = match &h {
            None => sys.solve(&b)?,
            Some(h) => {
                let m = super::ops::mean(&b);
                for v in b.iter_mut() {
                    *v -= m;
                }
                sys.solve_projected(&b, h)?
            }
        };
        let r = sys.relative_residual(&z, &b, h.as_deref());
        if !(r < RESIDUAL_TOL) {
            return Err(Error::Solver { iterations: 0, residual: r });
        }
        residual = residual.max(r);
        components.push(z);
    }
    let mut phi = CorrectorField {
        xi: xi.to_vec(),
        eta,
        variant,
        grid: SampleGrid::of(a),
        components,
        residual,
        energy: EnergyCheck { energy: 0.0, bound: 0.0 },
    };
    phi.energy = energy_check(&phi, a);
    Ok(phi)
}

/// Solves the corrector equation with the unprojected right side.
pub fn corrector_solve(a: &CoefficientField, xi: &[f64], eta: f64) -> Result<CorrectorField> {
    solve_variant(a, xi, eta, CorrectorVariant::Plain)
}

/// Solves the projected corrector equation, the one entering `q(ξ,η)`.
/// Both variants coincide at `ξ = 0`.
pub fn corrector_solve_projected(a: &CoefficientField, xi: &[f64], eta: f64) -> Result<CorrectorField> {
    solve_variant(a, xi, eta, CorrectorVariant::Projected)
}

fn energy_check(phi: &CorrectorField, a: &CoefficientField) -> EnergyCheck {
    let d = phi.dim();
    let points = phi.grid.scalar_len() as f64;
    let grads: Vec<Vec<C>> = (0..d).map(|k| phi.gradient(k)).collect();
    let (lam, up) = (a.window().lambda(), a.window().upper());
    // Hermitian form M_kl; its top eigenvalue via the real 2d×2d embedding.
    let mut m = vec![C::default(); d * d];
    for k in 0..d {
        for l in 0..d {
            m[k * d + l] = (inner(&phi.components[k], &phi.components[l]) * phi.eta
                + inner(&grads[k], &grads[l]) * lam)
                / points;
        }
    }
    let n2 = 2 * d;
    let mut real = vec![0.0; n2 * n2];
    for k in 0..d {
        for l in 0..d {
            let v = m[k * d + l];
            real[k * n2 + l] = v.re;
            real[(k + d) * n2 + l + d] = v.re;
            real[k * n2 + l + d] = -v.im;
            real[(k + d) * n2 + l] = v.im;
        }
    }
    let sym = SymMatrix::symmetrized(n2, &real).expect("square embedding");
    let energy = *sym.eigenvalues().last().expect("nonempty spectrum");
    EnergyCheck { energy, bound: up * up / lam }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Layout;
    use crate::lattice::PeriodicCube;
    use crate::matrix::EllipticityPair;
    use rand::{Rng, SeedableRng};

    fn random_field(d: usize, l: usize, nt: usize, seed: u64) -> CoefficientField {
        let cube = PeriodicCube::new(d, l).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..d * cube.volume() * nt).map(|_| rng.random_range(0.7..1.3)).collect();
        CoefficientField::from_data(cube, 0.0, 0.25, EllipticityPair::new(0.7, 1.3).unwrap(), Layout::Diagonal, data).unwrap()
    }

    #[test]
    fn constant_coefficient_projected_corrector_vanishes() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let a = CoefficientField::constant(&cube, &SymMatrix::new(2, vec![1.2, 0.1, 0.1, 0.9]).unwrap()).unwrap();
        let phi = corrector_solve_projected(&a, &[0.4, -1.0], 0.3).unwrap();
        assert!(phi.components.iter().flatten().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn constant_coefficient_plain_corrector_is_the_constant_mode() {
        let cube = PeriodicCube::new(1, 6).unwrap();
        let a = CoefficientField::constant(&cube, &SymMatrix::scaled_identity(1, 2.0)).unwrap();
        let xi = [0.8];
        let eta = 0.5;
        let phi = corrector_solve(&a, &xi, eta).unwrap();
        let e = super::super::ops::e_vector(&xi)[0];
        let expect = -(e.conj() * 2.0) / (eta + 2.0 * e.norm_sqr());
        assert!(phi.components[0].iter().all(|v| (v - expect).norm() < 1e-12));
    }

    #[test]
    fn residual_and_energy_on_time_dependent_sample() {
        let a = random_field(2, 4, 6, 11);
        for phi in [corrector_solve(&a, &[0.3, 0.0], 0.2).unwrap(), corrector_solve_projected(&a, &[0.3, 0.0], 0.2).unwrap()] {
            assert!(phi.residual < RESIDUAL_TOL);
            assert!(phi.energy.holds(), "{:?}", phi.energy);
        }
    }

    #[test]
    fn variants_coincide_at_zero_xi() {
        let a = random_field(2, 4, 3, 5);
        let p = corrector_solve(&a, &[0.0, 0.0], 0.1).unwrap();
        let q = corrector_solve_projected(&a, &[0.0, 0.0], 0.1).unwrap();
        for k in 0..2 {
            for (x, y) in p.components[k].iter().zip(&q.components[k]) {
                assert!((x - y).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_eta() {
        let a = random_field(1, 4, 1, 1);
        assert!(matches!(corrector_solve(&a, &[0.0], 0.0), Err(Error::Config { .. })));
        assert!(matches!(corrector_solve(&a, &[0.0, 1.0], 0.1), Err(Error::Config { .. })));
    }
}
