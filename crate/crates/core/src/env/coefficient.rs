//! Random coefficients `a(x,t)` built from a field trajectory.

use std::sync::Arc;

use super::{FieldTrajectory, Potential};
use crate::error::{config, Error, Result};
use crate::lattice::{div_a_grad, div_a_grad_diag, PeriodicCube};
use crate::matrix::{EllipticityPair, SymMatrix};

/// Storage of the per-site matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// `d` diagonal entries per site.
    Diagonal,
    /// A row-major `d×d` matrix per site.
    Full,
}

/// A scalar-argument profile `ã: R → Sym(d)`.
#[derive(Clone)]
pub enum Profile {
    /// `(base + amp·tanh(s))·I_d`.
    Tanh { base: f64, amp: f64 },
    /// An arbitrary map with a declared window; checked on every evaluation.
    Custom(Arc<dyn Fn(f64) -> SymMatrix + Send + Sync>),
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Tanh { base, amp } => write!(f, "Tanh {{ base: {base}, amp: {amp} }}"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// How `a` depends on the environment.
#[derive(Clone, Debug)]
pub enum CoefficientMap {
    /// `a ≡ const`.
    Constant(SymMatrix),
    /// `a(x,t) = ã(φ(x,t))`.
    ScalarOfField { profile: Profile, window: EllipticityPair },
    /// `a(x,t) = V''(∇φ(x,t))`.
    HessianOfGradient(Potential),
}

impl CoefficientMap {
    pub fn tanh(base: f64, amp: f64) -> Result<Self> {
        let window = EllipticityPair::new(base - amp.abs(), base + amp.abs())
            .map_err(|_| config("amp", format!("tanh profile must stay positive: base={base}, amp={amp}")))?;
        Ok(Self::ScalarOfField { profile: Profile::Tanh { base, amp }, window })
    }

    pub fn window(&self) -> Result<EllipticityPair> {
        match self {
            Self::Constant(a) => {
                let ev = a.eigenvalues();
                EllipticityPair::new(ev[0], ev[ev.len() - 1])
            }
            Self::ScalarOfField { window, .. } => Ok(*window),
            Self::HessianOfGradient(p) => Ok(p.window()),
        }
    }
}

/// Symmetric matrices `a(x, t_i)` on a cube and uniform time grid; entry `i`
/// governs the interval `[t_i, t_{i+1})`. A single slice means time-independent.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    cube: PeriodicCube,
    t0: f64,
    dt: f64,
    n_times: usize,
    window: EllipticityPair,
    layout: Layout,
    data: Vec<f64>,
}

impl CoefficientField {
    /// Wraps raw data, checking sizes and the spectral window.
    pub fn from_data(
        cube: PeriodicCube,
        t0: f64,
        dt: f64,
        window: EllipticityPair,
        layout: Layout,
        data: Vec<f64>,
    ) -> Result<Self> {
        let d = cube.dim();
        let stride = match layout {
            Layout::Diagonal => d,
            Layout::Full => d * d,
        };
        let per_time = stride * cube.volume();
        if data.is_empty() || data.len() % per_time != 0 {
            return Err(config("coefficients", format!("length {} is not a multiple of {per_time}", data.len())));
        }
        let n_times = data.len() / per_time;
        let f = Self { cube, t0, dt, n_times, window, layout, data };
        f.validate()?;
        Ok(f)
    }

    pub fn constant(cube: &PeriodicCube, a: &SymMatrix) -> Result<Self> {
        let ev = a.eigenvalues();
        let window = EllipticityPair::new(ev[0], ev[ev.len() - 1])?;
        Self::constant_in_window(cube, a, window)
    }

    pub fn constant_in_window(cube: &PeriodicCube, a: &SymMatrix, window: EllipticityPair) -> Result<Self> {
        let n = cube.volume();
        let (layout, data) = if a.is_diagonal() {
            let diag: Vec<f64> = (0..a.dim()).map(|j| a.get(j, j)).collect();
            (Layout::Diagonal, diag.repeat(n))
        } else {
            (Layout::Full, a.entries().repeat(n))
        };
        Self::from_data(cube.clone(), 0.0, 1.0, window, layout, data)
    }

    /// Checks every matrix against the window; violations are integrity errors.
    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12 * self.window.upper();
        let d = self.cube.dim();
        match self.layout {
            Layout::Diagonal => {
                if let Some((k, v)) = self.data.iter().enumerate().find(|(_, v)| !self.window.contains(**v, tol)) {
                    return Err(self.violation(k / d, *v));
                }
            }
            Layout::Full => {
                for (k, m) in self.data.chunks(d * d).enumerate() {
                    let a = SymMatrix::new(d, m.to_vec()).map_err(|e| Error::Integrity(e.to_string()))?;
                    let ev = a.eigenvalues();
                    for v in [ev[0], ev[d - 1]] {
                        if !self.window.contains(v, tol) {
                            return Err(self.violation(k, v));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn violation(&self, flat_site: usize, value: f64) -> Error {
        let n = self.cube.volume();
        Error::Integrity(format!(
            "coefficient eigenvalue {value} at site {} time index {} outside [{}, {}]",
            flat_site % n,
            flat_site / n,
            self.window.lambda(),
            self.window.upper()
        ))
    }

    pub fn cube(&self) -> &PeriodicCube {
        &self.cube
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn window(&self) -> EllipticityPair {
        self.window
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn is_diagonal(&self) -> bool {
        match self.layout {
            Layout::Diagonal => true,
            Layout::Full => self.data.chunks(self.cube.dim().pow(2)).all(|m| {
                let d = self.cube.dim();
                (0..d).all(|i| (0..d).all(|j| i == j || m[i * d + j] == 0.0))
            }),
        }
    }

    pub fn is_time_independent(&self) -> bool {
        self.n_times == 1
    }

    fn time_index(&self, i: usize) -> usize {
        if self.n_times == 1 {
            0
        } else {
            assert!(i < self.n_times, "time index {i} beyond {} slices", self.n_times);
            i
        }
    }

    /// Raw entries for time index `i` (diagonal or full, per the layout).
    pub fn slice(&self, i: usize) -> &[f64] {
        let i = self.time_index(i);
        let per = self.data.len() / self.n_times;
        &self.data[i * per..(i + 1) * per]
    }

    pub fn matrix_at(&self, i: usize, x: usize) -> SymMatrix {
        let d = self.cube.dim();
        let s = self.slice(i);
        match self.layout {
            Layout::Diagonal => SymMatrix::diagonal(&s[x * d..(x + 1) * d]),
            Layout::Full => SymMatrix::new(d, s[x * d * d..(x + 1) * d * d].to_vec()).expect("validated symmetric"),
        }
    }

    /// Entry `(j, k)` of `a(x, t_i)`.
    #[inline]
    pub fn entry(&self, i: usize, x: usize, j: usize, k: usize) -> f64 {
        let d = self.cube.dim();
        let s = self.slice(i);
        match self.layout {
            Layout::Diagonal => {
                if j == k {
                    s[x * d + j]
                } else {
                    0.0
                }
            }
            Layout::Full => s[x * d * d + j * d + k],
        }
    }

    /// `out = ∇*(a(·, t_i)∇u)`.
    pub fn apply(&self, i: usize, u: &[f64], out: &mut [f64]) {
        match self.layout {
            Layout::Diagonal => div_a_grad_diag(&self.cube, self.slice(i), u, out),
            Layout::Full => div_a_grad(&self.cube, self.slice(i), u, out),
        }
    }

    /// Returns a copy restricted to time indices `start..end`.
    pub fn window_in_time(&self, start: usize, end: usize) -> Self {
        if self.n_times == 1 {
            return self.clone();
        }
        let per = self.data.len() / self.n_times;
        Self {
            cube: self.cube.clone(),
            t0: self.t0 + start as f64 * self.dt,
            dt: self.dt,
            n_times: end - start,
            window: self.window,
            layout: self.layout,
            data: self.data[start * per..end * per].to_vec(),
        }
    }

    /// The same coefficients on a different time grid.
    pub fn with_time_grid(mut self, t0: f64, dt: f64) -> Self {
        self.t0 = t0;
        self.dt = dt;
        self
    }

    /// Multiplies all coefficients by `s` (and the window accordingly).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let window = EllipticityPair::new(self.window.lambda() * s, self.window.upper() * s)?;
        Ok(Self { window, data: self.data.iter().map(|v| v * s).collect(), ..self.clone() })
    }

    /// Unchecked raw data, for writers that need the flat block.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Overwrites one diagonal entry without validation; used to inject faults in tests.
    #[doc(hidden)]
    pub fn poke_unchecked(&mut self, flat: usize, value: f64) {
        self.data[flat] = value;
    }
}

/// Evaluates `map` on every site and time of `traj`.
pub fn coefficient_field(traj: &FieldTrajectory, map: &CoefficientMap) -> Result<CoefficientField> {
    let cube = traj.cube().clone();
    let d = cube.dim();
    let n = cube.volume();
    let nt = traj.n_times();
    let window = map.window()?;
    let (layout, data) = match map {
        CoefficientMap::Constant(a) => {
            let c = CoefficientField::constant_in_window(&cube, a, window)?;
            (c.layout, c.data.repeat(nt))
        }
        CoefficientMap::HessianOfGradient(p) => {
            let mut data = vec![0.0; nt * n * d];
            for i in 0..nt {
                let phi = traj.slice(i);
                let out = &mut data[i * n * d..(i + 1) * n * d];
                for x in 0..n {
                    for j in 0..d {
                        out[x * d + j] = p.d2(phi[cube.up(j, x)] - phi[x]);
                    }
                }
            }
            (Layout::Diagonal, data)
        }
        CoefficientMap::ScalarOfField { profile: Profile::Tanh { base, amp }, .. } => {
            let mut data = Vec::with_capacity(nt * n * d);
            for &v in traj.values() {
                let s = base + amp * v.tanh();
                data.extend(std::iter::repeat_n(s, d));
            }
            (Layout::Diagonal, data)
        }
        CoefficientMap::ScalarOfField { profile: Profile::Custom(f), .. } => {
            let mut data = Vec::with_capacity(nt * n * d * d);
            for &v in traj.values() {
                let a = f(v);
                if a.dim() != d {
                    return Err(config("profile", format!("profile returns {}x{} matrices on a {d}-dimensional cube", a.dim(), a.dim())));
                }
                data.extend_from_slice(a.entries());
            }
            (Layout::Full, data)
        }
    };
    CoefficientField::from_data(cube, traj.t0(), traj.dt(), window, layout, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{langevin_simulate, LangevinConfig};
    use crate::rng::SeedRecord;

    fn traj() -> FieldTrajectory {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let mut cfg = LangevinConfig::new(Potential::dipole(1.0, 0.3).unwrap(), 1.0, 0.05, 20);
        cfg.burn_in = 20;
        langevin_simulate(&cube, &cfg, SeedRecord::new(3, 0)).unwrap()
    }

    #[test]
    fn constant_map_gives_constant_field() {
        let t = traj();
        let a = SymMatrix::new(2, vec![1.0, 0.2, 0.2, 1.5]).unwrap();
        let f = coefficient_field(&t, &CoefficientMap::Constant(a.clone())).unwrap();
        for i in 0..f.n_times() {
            for x in 0..16 {
                assert_eq!(f.matrix_at(i, x), a);
            }
        }
    }

    #[test]
    fn hessian_map_matches_direct_evaluation() {
        let t = traj();
        let f = coefficient_field(&t, &CoefficientMap::HessianOfGradient(Potential::dipole(1.0, 0.3).unwrap())).unwrap();
        let cube = t.cube();
        for i in [0, 7, 20] {
            for x in 0..16 {
                for j in 0..2 {
                    let g = t.at(cube.up(j, x), i) - t.at(x, i);
                    assert_eq!(f.entry(i, x, j, j), 1.0 - 0.3 * g.cos());
                }
                assert_eq!(f.entry(i, x, 0, 1), 0.0);
            }
        }
    }

    #[test]
    fn violating_custom_profile_is_an_integrity_error() {
        let t = traj();
        let window = EllipticityPair::new(0.5, 1.5).unwrap();
        let map = CoefficientMap::ScalarOfField {
            profile: Profile::Custom(Arc::new(|s| SymMatrix::scaled_identity(2, 1.0 + 10.0 * s))),
            window,
        };
        assert!(matches!(coefficient_field(&t, &map), Err(Error::Integrity(_))));
    }
}
