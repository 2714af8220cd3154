//! Two-point function of the invariant measure against the Laplace transform
//! of the averaged Green's function with `a(φ) = V''(∇φ(0,0))`:
//! `⟨φ(x)φ(0)⟩ = ∫_0^∞ e^{−m²t} G_a(x,t) dt`.
//!
//! The walk runs at rate `∇*a∇` while the field advances by `clock` units of
//! its own time per unit of walk time.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mala::MalaChain;
use crate::env::{brownian_increments, gaussian_field_sample, CoefficientField, Layout, LangevinConfig, LangevinStepper, Potential};
use crate::error::{config, Result};
use crate::lattice::PeriodicCube;
use crate::parabolic::exponential_step;
use crate::rng::{par_indexed, SeedRecord};
use crate::stats::{integrated_autocorrelation_time, Estimate};

#[derive(Clone, Debug)]
pub struct CorrelationSpec {
    pub cube: PeriodicCube,
    pub potential: Potential,
    pub mass: f64,
    pub offsets: Vec<Vec<i64>>,
    /// Recorded invariant-measure states; each also seeds one environment.
    pub samples: usize,
    /// Independent chains; `samples` is split evenly between them.
    pub chains: usize,
    /// Sampler moves between recorded states (MALA proposals, or units of
    /// `mala_step` field time for the exact Gaussian sampler).
    pub thinning: usize,
    pub burn_in: usize,
    pub mala_step: f64,
    /// Walk-time length of one frozen coefficient slice.
    pub walk_dt: f64,
    /// Field time per unit of walk time.
    pub clock: f64,
    /// Langevin steps per coefficient slice.
    pub substeps: usize,
    /// Target bound on the neglected part of the time integral.
    pub tail_tol: f64,
}

impl CorrelationSpec {
    pub fn new(cube: PeriodicCube, potential: Potential, mass: f64, offsets: Vec<Vec<i64>>, samples: usize) -> Self {
        let step = MalaChain::default_step(cube.dim(), &potential, mass);
        let relax = 2.0 / (step * mass * mass);
        let thinning = if relax.is_finite() { relax.ceil().max(1.0) as usize } else { 1 };
        Self {
            cube,
            potential,
            mass,
            offsets,
            samples,
            chains: 16,
            thinning,
            burn_in: 10 * thinning,
            mala_step: step,
            walk_dt: 0.02,
            clock: 2.0,
            substeps: 2,
            tail_tol: 1e-9,
        }
    }

    fn field_dt(&self) -> f64 {
        self.walk_dt * self.clock / self.substeps as f64
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(config("m", format!("mass must be positive, got {}", self.mass)));
        }
        if self.offsets.iter().any(|x| x.len() != self.cube.dim()) {
            return Err(config("offsets", format!("each offset needs {} coordinates", self.cube.dim())));
        }
        if self.chains == 0 || self.samples < self.chains {
            return Err(config("samples", format!("need at least one sample per chain ({} chains)", self.chains)));
        }
        if self.thinning == 0 || self.substeps == 0 {
            return Err(config("thinning", "thinning and substeps must be at least 1"));
        }
        if !(self.walk_dt > 0.0 && self.clock > 0.0 && self.tail_tol > 0.0) {
            return Err(config("dt", "walk step, clock and tail tolerance must be positive"));
        }
        let cfg = LangevinConfig::new(self.potential, self.mass, self.field_dt(), 0);
        cfg.validate(self.cube.dim())
    }
}

/// One offset of the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub offset: Vec<i64>,
    /// Invariant-measure estimate of `⟨φ(x)φ(0)⟩`.
    pub lhs: Estimate,
    /// `∫ e^{−m²t} G_a(x,t) dt` averaged over environments.
    pub rhs: Estimate,
    pub difference: f64,
    /// Combined standard error of the difference.
    pub sigma: f64,
    /// `⟨∇_jφ(x)φ(0)⟩` for each direction `j`.
    pub gradient: Vec<Estimate>,
}

impl CorrelationRow {
    pub fn z(&self) -> f64 {
        if self.sigma == 0.0 {
            if self.difference == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.difference.abs() / self.sigma
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub potential: Potential,
    pub mass: f64,
    pub rows: Vec<CorrelationRow>,
    pub samples: usize,
    /// Longest walk horizon used before the tail bound was met.
    pub horizon: f64,
    /// Largest bound on the truncated time integral.
    pub remainder_bound: f64,
    /// Largest integrated autocorrelation time of the recorded series.
    pub autocorrelation_time: f64,
    /// MALA acceptance rate (NaN for the exact Gaussian sampler).
    pub acceptance: f64,
    /// Set when a chain is too short for a reliable standard error.
    pub flagged: bool,
}

impl CorrelationTable {
    pub fn max_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z()).fold(0.0, f64::max)
    }

    /// Every row within `k` combined standard errors, and no flag raised.
    pub fn passes(&self, k: f64) -> bool {
        !self.flagged && self.rows.iter().all(|r| r.z() <= k)
    }
}

/// The Laplace-transformed walk for one environment history.
pub(crate) struct Resolvent {
    pub values: Vec<f64>,
    pub horizon: f64,
    pub remainder: f64,
}

/// Slices built at once before the walk consumes them.
const SLICE_CHUNK: usize = 64;

/// `∫_0^∞ e^{−m²t}G(·,t)dt` from the origin with the field started at
/// `initial`. Within a slice the coefficient is frozen and the step is exact.
/// With `rng = None` the field is held fixed.
///
/// The run stops at the first slice boundary `T` where
/// `‖w(T)‖₂/(m² + λμ₁) < tail_tol`, with `w = e^{−m²T}(G − 1/V)` and `μ₁` the
/// spectral gap of the cube Laplacian, or where `e^{−m²T} < 1e−12`. The mean
/// part of the tail is added exactly (`Σ_x G = 1`); the other part is bounded
/// by `‖w(T)‖₂/(m² + λμ₁)` pointwise.
pub(crate) fn resolvent_walk(spec: &CorrelationSpec, initial: &[f64], mut rng: Option<&mut ChaCha8Rng>) -> Result<Resolvent> {
    let cube = &spec.cube;
    let (n, d) = (cube.volume(), cube.dim());
    let window = spec.potential.window();
    let m2 = spec.mass * spec.mass;
    let gap = 4.0 * (std::f64::consts::PI / cube.side() as f64).sin().powi(2);
    let decay = m2 + window.lambda() * gap;
    let field_dt = spec.field_dt();
    let mut stepper = LangevinStepper::new(cube, spec.potential, spec.mass, field_dt);
    let mut phi = initial.to_vec();
    let mut inc = vec![0.0; n];
    let mut u = vec![0.0; n];
    u[cube.origin()] = 1.0;
    let mut acc = vec![0.0; n];
    let mut t = 0.0;
    let mut data = vec![0.0; SLICE_CHUNK * n * d];
    loop {
        for s in 0..SLICE_CHUNK {
            let out = &mut data[s * n * d..(s + 1) * n * d];
            for x in 0..n {
                for j in 0..d {
                    out[x * d + j] = spec.potential.d2(phi[cube.up(j, x)] - phi[x]);
                }
            }
            if let Some(r) = rng.as_deref_mut() {
                for _ in 0..spec.substeps {
                    brownian_increments(r, field_dt, &mut inc);
                    stepper.step(&mut phi, &inc);
                }
            }
        }
        let field = CoefficientField::from_data(cube.clone(), 0.0, spec.walk_dt, window, Layout::Diagonal, data.clone())?;
        for s in 0..SLICE_CHUNK {
            exponential_step(&field, s, spec.walk_dt, m2, &mut u, Some(&mut acc));
            t += spec.walk_dt;
            let mean = u.iter().sum::<f64>() / n as f64;
            let w = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
            let remainder = w / decay;
            if remainder < spec.tail_tol || (-m2 * t).exp() < 1e-12 {
                let tail = mean / m2;
                let values = acc.iter().map(|a| a + tail).collect();
                return Ok(Resolvent { values, horizon: t, remainder });
            }
        }
    }
}

/// Translation-averaged `(1/V)Σ_y φ(y+x)φ(y)` and its gradient variants.
fn products(cube: &PeriodicCube, phi: &[f64], offset: &[i64], out_value: &mut f64, out_grad: &mut [f64]) {
    let n = cube.volume();
    let d = cube.dim();
    let shift = cube.index(offset);
    let mut v = 0.0;
    let mut g = vec![0.0; d];
    for y in 0..n {
        let xy = cube.translate(y, shift);
        v += phi[xy] * phi[y];
        for (j, gj) in g.iter_mut().enumerate() {
            *gj += (phi[cube.up(j, xy)] - phi[xy]) * phi[y];
        }
    }
    *out_value = v / n as f64;
    for (o, gj) in out_grad.iter_mut().zip(g) {
        *o = gj / n as f64;
    }
}

/// Per-chain series: `[offset][state]` values, gradients, and rhs.
struct ChainSeries {
    lhs: Vec<Vec<f64>>,
    grad: Vec<Vec<Vec<f64>>>,
    rhs: Vec<Vec<f64>>,
    horizon: f64,
    remainder: f64,
    acceptance: f64,
}

fn run_chain(spec: &CorrelationSpec, chain: usize, len: usize, seed: SeedRecord, rhs_fixed: Option<&[f64]>) -> Result<ChainSeries> {
    let cube = &spec.cube;
    let d = cube.dim();
    let k = spec.offsets.len();
    let origin_index: Vec<usize> = spec.offsets.iter().map(|o| cube.index(o)).collect();
    let mut lhs = vec![Vec::with_capacity(len); k];
    let mut grad = vec![vec![Vec::with_capacity(len); d]; k];
    let mut rhs = vec![Vec::with_capacity(len); k];
    let mut horizon: f64 = 0.0;
    let mut remainder: f64 = 0.0;
    let mut record = |phi: &[f64], state: usize| -> Result<()> {
        let mut gbuf = vec![0.0; d];
        for (i, off) in spec.offsets.iter().enumerate() {
            let mut v = 0.0;
            products(cube, phi, off, &mut v, &mut gbuf);
            lhs[i].push(v);
            for j in 0..d {
                grad[i][j].push(gbuf[j]);
            }
        }
        match rhs_fixed {
            Some(values) => {
                for (i, &x) in origin_index.iter().enumerate() {
                    rhs[i].push(values[x]);
                }
            }
            None => {
                let stream = (spec.chains + chain * len + state) as u64;
                let mut rng = seed.child(stream).rng();
                let r = resolvent_walk(spec, phi, Some(&mut rng))?;
                horizon = horizon.max(r.horizon);
                remainder = remainder.max(r.remainder);
                for (i, &x) in origin_index.iter().enumerate() {
                    rhs[i].push(r.values[x]);
                }
            }
        }
        Ok(())
    };
    let acceptance = for_each_state(spec, chain, len, seed, &mut record)?;
    Ok(ChainSeries { lhs, grad, rhs, horizon, remainder, acceptance })
}

/// Feeds `len` thinned invariant-measure states of chain `chain` to `record`
/// and returns the MALA acceptance rate (NaN for the exact Gaussian sampler).
pub(crate) fn for_each_state(
    spec: &CorrelationSpec,
    chain: usize,
    len: usize,
    seed: SeedRecord,
    record: &mut dyn FnMut(&[f64], usize) -> Result<()>,
) -> Result<f64> {
    let cube = &spec.cube;
    if spec.potential == (Potential::Quadratic { c: 1.0 }) {
        let spacing = spec.mala_step * spec.thinning as f64;
        let traj = gaussian_field_sample(cube, spec.mass, spacing, len, seed.child(chain as u64))?;
        for s in 0..len {
            record(traj.slice(s), s)?;
        }
        return Ok(f64::NAN);
    }
    let mut state = MalaChain::new(cube, spec.potential, spec.mass, spec.mala_step, &vec![0.0; cube.volume()])?;
    let mut rng = seed.child(chain as u64).rng();
    for _ in 0..spec.burn_in {
        state.step(&mut rng);
    }
    for s in 0..len {
        for _ in 0..spec.thinning {
            state.step(&mut rng);
        }
        record(state.state(), s)?;
    }
    Ok(state.acceptance())
}

/// Pools per-chain IAT-corrected estimates: the mean of chain means with
/// standard errors added in quadrature.
fn pool(per_chain: &[Estimate]) -> Estimate {
    let c = per_chain.len() as f64;
    let mean = per_chain.iter().map(|e| e.mean).sum::<f64>() / c;
    let se = per_chain.iter().map(|e| e.se * e.se).sum::<f64>().sqrt() / c;
    Estimate { mean, se, n: per_chain.iter().map(|e| e.n).sum() }
}

fn series_estimate(xs: &[f64]) -> Estimate {
    if xs.iter().all(|v| *v == xs[0]) {
        return Estimate { mean: xs[0], se: 0.0, n: xs.len() };
    }
    Estimate::from_series(xs)
}

/// Both sides of the identity at every requested offset.
///
/// For quadratic `V` the coefficient is constant and the right side is one
/// deterministic computation; otherwise every recorded state starts an
/// independent Langevin environment.
pub fn correlation_identity_check(spec: &CorrelationSpec, seed: SeedRecord) -> Result<CorrelationTable> {
    spec.validate()?;
    let len = spec.samples / spec.chains;
    let quadratic = matches!(spec.potential, Potential::Quadratic { .. });
    let fixed = if quadratic {
        Some(resolvent_walk(spec, &vec![0.0; spec.cube.volume()], None)?)
    } else {
        None
    };
    let chains: Vec<Result<ChainSeries>> =
        par_indexed(spec.chains, |c| run_chain(spec, c, len, seed, fixed.as_ref().map(|r| r.values.as_slice())));
    let chains: Vec<ChainSeries> = chains.into_iter().collect::<Result<_>>()?;
    let d = spec.cube.dim();
    let mut rows = Vec::with_capacity(spec.offsets.len());
    let mut tau: f64 = 0.5;
    for (i, off) in spec.offsets.iter().enumerate() {
        let lhs = pool(&chains.iter().map(|c| series_estimate(&c.lhs[i])).collect::<Vec<_>>());
        let rhs = pool(&chains.iter().map(|c| series_estimate(&c.rhs[i])).collect::<Vec<_>>());
        let gradient =
            (0..d).map(|j| pool(&chains.iter().map(|c| series_estimate(&c.grad[i][j])).collect::<Vec<_>>())).collect();
        for c in &chains {
            tau = tau.max(integrated_autocorrelation_time(&c.lhs[i]));
            if !quadratic {
                tau = tau.max(integrated_autocorrelation_time(&c.rhs[i]));
            }
        }
        rows.push(CorrelationRow {
            offset: off.clone(),
            difference: lhs.mean - rhs.mean,
            sigma: (lhs.se * lhs.se + rhs.se * rhs.se).sqrt(),
            lhs,
            rhs,
            gradient,
        });
    }
    let (horizon, remainder_bound) = match &fixed {
        Some(r) => (r.horizon, r.remainder),
        None => (
            chains.iter().map(|c| c.horizon).fold(0.0, f64::max),
            chains.iter().map(|c| c.remainder).fold(0.0, f64::max),
        ),
    };
    let acc: Vec<f64> = chains.iter().map(|c| c.acceptance).filter(|a| a.is_finite()).collect();
    let acceptance = if acc.is_empty() { f64::NAN } else { acc.iter().sum::<f64>() / acc.len() as f64 };
    Ok(CorrelationTable {
        potential: spec.potential,
        mass: spec.mass,
        rows,
        samples: len * spec.chains,
        horizon,
        remainder_bound,
        autocorrelation_time: tau,
        acceptance,
        flagged: spec.chains < 2 || len < 8 || len as f64 <= 20.0 * tau,
    })
}

/// The deterministic right side for a constant coefficient `c` (quadratic
/// `V = c|z|²/2`) at every site of the cube.
pub fn quadratic_resolvent(cube: &PeriodicCube, c: f64, mass: f64, tail_tol: f64) -> Result<Vec<f64>> {
    let potential = Potential::quadratic(c)?;
    let mut spec = CorrelationSpec::new(cube.clone(), potential, mass, Vec::new(), 1);
    spec.chains = 1;
    spec.tail_tol = tail_tol;
    spec.walk_dt = 0.25 / (4.0 * cube.dim() as f64 * c + mass * mass);
    spec.validate()?;
    Ok(resolvent_walk(&spec, &vec![0.0; cube.volume()], None)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Infinite-lattice `(∇*∇ + m²)^{-1}(x, 0)` in one dimension:
    /// `r^{|x|}/√(m²(m²+4))` with `r = (2 + m² − √(m²(m²+4)))/2`.
    fn line_green(x: i64, m: f64) -> f64 {
        let m2 = m * m;
        let s = (m2 * (m2 + 4.0)).sqrt();
        let r = (2.0 + m2 - s) / 2.0;
        r.powi(x.abs() as i32) / s
    }

    #[test]
    fn quadratic_rhs_matches_closed_form() {
        let cube = PeriodicCube::new(1, 40).unwrap();
        let g = quadratic_resolvent(&cube, 1.0, 1.0, 1e-12).unwrap();
        assert!((g[0] - 1.0 / 5f64.sqrt()).abs() < 1e-9, "{}", g[0]);
        for x in 1..6 {
            assert!((g[x] - line_green(x as i64, 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_identity_in_one_dimension() {
        let cube = PeriodicCube::new(1, 32).unwrap();
        let p = Potential::quadratic(1.0).unwrap();
        let offsets = vec![vec![0], vec![1], vec![-1], vec![3]];
        let spec = CorrelationSpec::new(cube, p, 1.0, offsets, 2000);
        let t = correlation_identity_check(&spec, SeedRecord::new(11, 0)).unwrap();
        assert!(!t.flagged);
        for r in &t.rows {
            let exact = line_green(r.offset[0], 1.0);
            assert!((r.rhs.mean - exact).abs() < 1e-6);
            assert!(r.lhs.z_against_value(exact) < 3.5, "{r:?}");
        }
        assert!(t.rows[1].lhs.z_against(&t.rows[2].lhs) < 3.5);
    }

    #[test]
    fn dipole_identity_small_cube() {
        let cube = PeriodicCube::new(1, 8).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let spec = CorrelationSpec::new(cube, p, 1.0, vec![vec![0], vec![1], vec![2]], 400);
        let t = correlation_identity_check(&spec, SeedRecord::new(2, 0)).unwrap();
        assert!(t.remainder_bound < 1e-8);
        assert!(t.max_z() < 4.0, "{t:?}");
    }

    #[test]
    fn rejects_missing_mass_and_bad_offsets() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let p = Potential::quadratic(1.0).unwrap();
        let spec = CorrelationSpec::new(cube.clone(), p, 0.0, vec![vec![0, 0]], 32);
        assert!(correlation_identity_check(&spec, SeedRecord::new(0, 0)).is_err());
        let spec = CorrelationSpec::new(cube, p, 1.0, vec![vec![0]], 32);
        assert!(correlation_identity_check(&spec, SeedRecord::new(0, 0)).is_err());
    }
}
