//! Large-scale decay of the difference between the field's two-point function
//! and the continuum homogenized Green's function, and of the averaged
//! parabolic kernel against the homogenized Gaussian.
//!
//! Both comparisons are made on the same periodic cube: the continuum kernels
//! are periodized, so finite-volume effects cancel to leading order.

use serde::{Deserialize, Serialize};

use super::correlation::{for_each_state, resolvent_walk, CorrelationSpec};
use crate::env::Potential;
use crate::error::{config, Error, Result};
use crate::homogenize::{avg_greens_mc, rate_fit, EnvironmentSpec, RateModel, RateReport};
use crate::lattice::{hom_gaussian_kernel, PeriodicCube};
use crate::matrix::SymMatrix;
use crate::quad::gauss_legendre;
use crate::rng::{par_indexed, SeedRecord};
use crate::stats::{Estimate, LinearFit};

fn check_periodic_args(a: &SymMatrix, side: usize, x: &[f64]) -> Result<()> {
    if x.len() != a.dim() {
        return Err(config("x", format!("point has {} coordinates, matrix is {}x{}", x.len(), a.dim(), a.dim())));
    }
    if side < 2 {
        return Err(config("L", "side must be at least 2"));
    }
    a.inverse_pd().map(|_| ())
}

/// All integer vectors in `[−r, r]^d`.
fn box_points(d: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out.into_iter().flat_map(|p| (-r..=r).map(move |c| [p.clone(), vec![c]].concat())).collect();
    }
    out
}

/// Periodized `Σ_n K_t(x + nL)` of the homogenized Gaussian kernel.
pub fn periodic_hom_heat_kernel(a: &SymMatrix, side: usize, x: &[f64], t: f64) -> Result<f64> {
    check_periodic_args(a, side, x)?;
    let upper = a.eigenvalues().into_iter().fold(0.0, f64::max);
    let reach = (160.0 * upper * t).sqrt();
    let r = (reach / side as f64).ceil() as i64 + 1;
    let l = side as f64;
    let mut total = 0.0;
    for n in box_points(a.dim(), r) {
        let y: Vec<f64> = x.iter().zip(&n).map(|(xi, ni)| xi + *ni as f64 * l).collect();
        total += hom_gaussian_kernel(&y, t, a)?;
    }
    Ok(total)
}

/// Periodized massive continuum Green's function of `−div(a∇) + m²` on the
/// torus of side `L`, by an Ewald split of `∫_0^∞ e^{−m²t} K_t dt` at `t₀`:
/// image sum below, Fourier sum above.
fn periodic_hom_greens_split(a: &SymMatrix, side: usize, mass: f64, x: &[f64], t0: f64) -> Result<f64> {
    let d = a.dim();
    let inv = a.inverse_pd()?;
    let eig = a.eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), e| (l.min(*e), h.max(*e)));
    let l = side as f64;
    let m2 = mass * mass;
    let two_pi = 2.0 * std::f64::consts::PI;

    // Fourier part: L^{−d} Σ_k e^{ik·x} e^{−(k·ak + m²)t₀}/(k·ak + m²).
    let j_max = (45.0 * l * l / (4.0 * std::f64::consts::PI * std::f64::consts::PI * lo * t0)).sqrt().ceil() as i64;
    let mut fourier = 0.0;
    for j in box_points(d, j_max) {
        let k: Vec<f64> = j.iter().map(|&c| two_pi * c as f64 / l).collect();
        let e = a.quad_form(&k) + m2;
        let phase: f64 = k.iter().zip(x).map(|(ki, xi)| ki * xi).sum();
        fourier += phase.cos() * (-e * t0).exp() / e;
    }
    fourier /= l.powi(d as i32);

    // Image part on a log-t grid.
    let r = ((180.0 * hi * t0).sqrt() / l).ceil() as i64 + 1;
    let images: Vec<f64> = box_points(d, r)
        .into_iter()
        .map(|n| {
            let y: Vec<f64> = x.iter().zip(&n).map(|(xi, ni)| xi + *ni as f64 * l).collect();
            inv.quad_form(&y)
        })
        .collect();
    let q_min = images.iter().copied().fold(f64::INFINITY, f64::min);
    if q_min == 0.0 {
        return Err(Error::Domain("the Green's function is singular at lattice translates of the origin".into()));
    }
    let norm = (4.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0) / a.determinant().sqrt();
    let (s_lo, s_hi) = ((q_min / 400.0).ln(), t0.ln());
    let panels = (((s_hi - s_lo) / 0.5).ceil() as usize).max(1);
    let width = (s_hi - s_lo) / panels as f64;
    let mut real = 0.0;
    for p in 0..panels {
        let (ss, ws) = gauss_legendre(12, s_lo + p as f64 * width, s_lo + (p + 1) as f64 * width);
        for (s, w) in ss.iter().zip(ws) {
            let t = s.exp();
            let kernel: f64 = images.iter().map(|q| (-q / (4.0 * t)).exp()).sum();
            real += w * t * (-m2 * t).exp() * norm * t.powf(-(d as f64) / 2.0) * kernel;
        }
    }
    Ok(real + fourier)
}

/// Periodized massive continuum Green's function of `−div(a∇) + m²`,
/// `Σ_k e^{ik·x}/(L^d(k·ak + m²))` over `k ∈ (2π/L)Z^d`.
pub fn periodic_hom_greens(a: &SymMatrix, side: usize, mass: f64, x: &[f64]) -> Result<f64> {
    check_periodic_args(a, side, x)?;
    if a.dim() < 2 {
        return Err(Error::Unsupported("the periodized continuum Green's function is used for d ≥ 2 only".into()));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(config("m", format!("mass must be positive, got {mass}")));
    }
    let hi = a.eigenvalues().into_iter().fold(0.0, f64::max);
    let t0 = (side * side) as f64 / (4.0 * std::f64::consts::PI * hi);
    periodic_hom_greens_split(a, side, mass, x, t0)
}

/// Which derivative of the two-point function is compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayLevel {
    /// `C(x)` against `Γ(x)`; decay `|x|^{−(d−2+α)}`. Needs `d ≥ 3`.
    Value,
    /// `C(x+e) − C(x)`; decay `|x|^{−(d−1+α)}`.
    Gradient,
    /// `C(x+e) − 2C(x) + C(x−e)`; decay `|x|^{−(d+α)}`.
    Second,
}

impl DecayLevel {
    fn offset(self, d: usize) -> f64 {
        d as f64
            - match self {
                Self::Value => 2.0,
                Self::Gradient => 1.0,
                Self::Second => 0.0,
            }
    }

    /// Distance from the origin at which the observable at scale `s` sits.
    fn scale(self, s: i64) -> f64 {
        match self {
            Self::Gradient => s as f64 + 0.5,
            _ => s as f64,
        }
    }

    /// The observable along `±e_j`, averaged over all `2d` such directions.
    fn observe(self, d: usize, s: i64, f: &mut dyn FnMut(&[i64]) -> f64) -> f64 {
        let mut total = 0.0;
        for j in 0..d {
            for sign in [-1i64, 1] {
                let mut at = |k: i64| {
                    let mut p = vec![0i64; d];
                    p[j] = sign * k;
                    f(&p)
                };
                total += match self {
                    Self::Value => at(s),
                    Self::Gradient => at(s + 1) - at(s),
                    Self::Second => at(s + 1) - 2.0 * at(s) + at(s - 1),
                };
            }
        }
        total / (2 * d) as f64
    }
}

/// Low Fourier modes used to extract the effective stiffness: one axis at
/// `2π/L`, two axes at `2π/L`, one axis at `4π/L`.
fn stiffness_modes(d: usize) -> Vec<Vec<Vec<i64>>> {
    let single = |k: i64| (0..d).map(|j| (0..d).map(|i| if i == j { k } else { 0 }).collect()).collect::<Vec<Vec<i64>>>();
    let pairs: Vec<Vec<i64>> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .map(|(i, j)| (0..d).map(|c| if c == i || c == j { 1 } else { 0 }).collect())
        .collect();
    vec![single(1), pairs, single(2)]
}

fn symbol(side: usize, mode: &[i64]) -> f64 {
    mode.iter().map(|&k| 4.0 * (std::f64::consts::PI * k as f64 / side as f64).sin().powi(2)).sum()
}

#[derive(Clone, Debug)]
pub struct DecaySpec {
    pub cube: PeriodicCube,
    pub potential: Potential,
    /// Mass ladder for the `m → 0` extrapolation (linear in `m²`).
    pub masses: Vec<f64>,
    /// Geometric ladder of axis distances.
    pub scales: Vec<i64>,
    pub levels: Vec<DecayLevel>,
    /// Environments per mass; ignored for quadratic `V`.
    pub environments: usize,
    pub chains: usize,
    pub walk_dt: f64,
    pub clock: f64,
    pub substeps: usize,
    pub tail_tol: f64,
    /// Points whose difference is below `floor_sigma` standard errors are dropped.
    pub floor_sigma: f64,
}

impl DecaySpec {
    pub fn new(cube: PeriodicCube, potential: Potential, masses: Vec<f64>, scales: Vec<i64>) -> Self {
        let levels = if cube.dim() >= 3 { vec![DecayLevel::Value, DecayLevel::Gradient] } else { vec![DecayLevel::Gradient] };
        Self {
            cube,
            potential,
            masses,
            scales,
            levels,
            environments: 256,
            chains: 8,
            walk_dt: 0.05,
            clock: 2.0,
            substeps: 1,
            tail_tol: 1e-8,
            floor_sigma: 3.0,
        }
    }

    fn correlation_spec(&self, mass: f64) -> CorrelationSpec {
        let mut c = CorrelationSpec::new(self.cube.clone(), self.potential, mass, Vec::new(), self.environments);
        c.chains = self.chains;
        c.walk_dt = self.walk_dt;
        c.clock = self.clock;
        c.substeps = self.substeps;
        c.tail_tol = self.tail_tol;
        c
    }

    fn validate(&self) -> Result<()> {
        let d = self.cube.dim();
        if d < 2 {
            return Err(config("d", "the decay check needs d ≥ 2"));
        }
        if self.levels.contains(&DecayLevel::Value) && d == 2 {
            return Err(Error::Unsupported("value-level comparison diverges in d = 2; use gradients".into()));
        }
        if self.masses.is_empty() || self.masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(config("m", "need at least one positive mass"));
        }
        if self.scales.len() < 4 || self.scales.iter().any(|s| *s < 1) {
            return Err(config("scales", "need at least four positive distances"));
        }
        let far = self.scales.iter().copied().max().unwrap_or(0) + 1;
        if 3 * far > self.cube.side() as i64 {
            return Err(config("scales", format!("distance {far} exceeds a third of the side {}", self.cube.side())));
        }
        if self.levels.contains(&DecayLevel::Second) && self.scales.contains(&1) {
            return Err(config("scales", "the second-difference level needs distances of at least 2"));
        }
        if self.levels.is_empty() {
            return Err(config("levels", "need at least one level"));
        }
        for &m in &self.masses {
            self.correlation_spec(m).validate()?;
        }
        Ok(())
    }

    /// Observables per environment: for each level and scale, then the
    /// averaged structure factor of each stiffness mode.
    fn observables(&self, c: &[f64]) -> Vec<f64> {
        let cube = &self.cube;
        let d = cube.dim();
        let mut at = |p: &[i64]| c[cube.index(p)];
        let mut out = Vec::new();
        for level in &self.levels {
            for &s in &self.scales {
                out.push(level.observe(d, s, &mut at));
            }
        }
        let two_pi = 2.0 * std::f64::consts::PI / cube.side() as f64;
        for modes in stiffness_modes(d) {
            let mut total = 0.0;
            for mode in &modes {
                for (x, v) in c.iter().enumerate() {
                    let phase: f64 = cube.coords(x).iter().zip(mode).map(|(xi, k)| two_pi * (*xi * *k) as f64).sum();
                    total += phase.cos() * v;
                }
            }
            out.push(total / modes.len() as f64);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDecay {
    pub level: DecayLevel,
    pub scales: Vec<f64>,
    /// `[mass][scale]` differences, correlation minus homogenized kernel.
    pub by_mass: Vec<Vec<Estimate>>,
    /// Linear extrapolation in `m²` to zero mass.
    pub extrapolated: Vec<Estimate>,
    pub rate: RateReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub masses: Vec<f64>,
    /// Isotropic homogenized coefficient at each mass (small-`k` limit of the
    /// effective stiffness) and its `m → 0` extrapolation.
    pub stiffness_by_mass: Vec<Estimate>,
    pub a_hom: Estimate,
    pub levels: Vec<LevelDecay>,
    /// Largest bound on the truncated time integrals.
    pub remainder_bound: f64,
}

impl DecayReport {
    pub fn level(&self, level: DecayLevel) -> Option<&LevelDecay> {
        self.levels.iter().find(|l| l.level == level)
    }

    /// Every level fits a positive excess exponent with a positive lower bound.
    pub fn positive(&self) -> bool {
        self.levels.iter().all(|l| l.rate.positive())
    }
}

/// Weights `c_i` with `Σ c_i y_i` the intercept of a least-squares line in `h`.
fn intercept_weights(h: &[f64]) -> Vec<f64> {
    let n = h.len() as f64;
    if h.len() == 1 {
        return vec![1.0];
    }
    let mean = h.iter().sum::<f64>() / n;
    let sxx: f64 = h.iter().map(|v| (v - mean).powi(2)).sum();
    h.iter().map(|v| 1.0 / n - mean * (v - mean) / sxx).collect()
}

/// Averaged Green's-function route to `C(x) = ⟨φ(x)φ(0)⟩` at one mass: mean
/// and standard error of every observable, and the largest tail bound.
fn mass_moments(spec: &DecaySpec, mass: f64, seed: SeedRecord) -> Result<(Vec<Estimate>, f64)> {
    let cs = spec.correlation_spec(mass);
    if matches!(spec.potential, Potential::Quadratic { .. }) {
        let r = resolvent_walk(&cs, &vec![0.0; spec.cube.volume()], None)?;
        let obs = spec.observables(&r.values);
        return Ok((obs.into_iter().map(|v| Estimate { mean: v, se: 0.0, n: 1 }).collect(), r.remainder));
    }
    let len = spec.environments / spec.chains;
    if len < 2 {
        return Err(config("samples", "need at least two environments per chain"));
    }
    let per_chain: Vec<Result<(Vec<Vec<f64>>, f64)>> = par_indexed(spec.chains, |chain| {
        let mut rows = Vec::with_capacity(len);
        let mut worst: f64 = 0.0;
        let mut record = |phi: &[f64], state: usize| -> Result<()> {
            let stream = (spec.chains + chain * len + state) as u64;
            let mut rng = seed.child(stream).rng();
            let r = resolvent_walk(&cs, phi, Some(&mut rng))?;
            worst = worst.max(r.remainder);
            rows.push(spec.observables(&r.values));
            Ok(())
        };
        for_each_state(&cs, chain, len, seed, &mut record)?;
        Ok((rows, worst))
    });
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for r in per_chain {
        let (mut chunk, w) = r?;
        rows.append(&mut chunk);
        worst = worst.max(w);
    }
    let k = rows[0].len();
    let est = (0..k).map(|i| Estimate::from_samples(&rows.iter().map(|r| r[i]).collect::<Vec<_>>())).collect();
    Ok((est, worst))
}

/// `|C − Γ_{a_hom}|` at each level against distance after `m → 0` extrapolation,
/// with `a_hom` from the effective stiffness `(1/S(k) − m²)/μ(k)` extrapolated
/// linearly in `μ(k)` over the lowest modes and then in `m²`.
///
/// Environments for different masses use disjoint seed families.
pub fn thm13_decay_check(spec: &DecaySpec, seed: SeedRecord) -> Result<DecayReport> {
    spec.validate()?;
    let d = spec.cube.dim();
    let side = spec.cube.side();
    let n_obs = spec.levels.len() * spec.scales.len();
    let mut moments = Vec::new();
    let mut remainder_bound: f64 = 0.0;
    let family = (spec.chains * (spec.environments + 1)) as u64;
    for (i, &m) in spec.masses.iter().enumerate() {
        let (est, rem) = mass_moments(spec, m, SeedRecord::new(seed.master, seed.stream.wrapping_add(i as u64 * family)))?;
        remainder_bound = remainder_bound.max(rem);
        moments.push(est);
    }

    let mus: Vec<f64> = stiffness_modes(d).iter().map(|modes| symbol(side, &modes[0])).collect();
    let mut stiffness_by_mass = Vec::new();
    for (est, &m) in moments.iter().zip(&spec.masses) {
        let q: Vec<(f64, f64)> = est[n_obs..]
            .iter()
            .zip(&mus)
            .map(|(s, mu)| ((1.0 / s.mean - m * m) / mu, s.se / (s.mean * s.mean * mu)))
            .collect();
        let w = intercept_weights(&mus);
        let mean: f64 = w.iter().zip(&q).map(|(c, (v, _))| c * v).sum();
        let se = w.iter().zip(&q).map(|(c, (_, s))| (c * s).powi(2)).sum::<f64>().sqrt();
        stiffness_by_mass.push(Estimate { mean, se, n: est[0].n });
    }
    let h: Vec<f64> = spec.masses.iter().map(|m| m * m).collect();
    let cw = intercept_weights(&h);
    let a_mean: f64 = cw.iter().zip(&stiffness_by_mass).map(|(c, e)| c * e.mean).sum();
    let a_se = cw.iter().zip(&stiffness_by_mass).map(|(c, e)| (c * e.se).powi(2)).sum::<f64>().sqrt();
    if !(a_mean > 0.0) {
        return Err(Error::Domain(format!("effective stiffness extrapolated to {a_mean}")));
    }
    let a_hom = Estimate { mean: a_mean, se: a_se, n: stiffness_by_mass.iter().map(|e| e.n).sum() };

    let mut levels = Vec::new();
    for (li, &level) in spec.levels.iter().enumerate() {
        let mut by_mass = Vec::new();
        // ∂/∂a of the homogenized observable, per mass and scale.
        let mut sens = Vec::new();
        for (mi, &m) in spec.masses.iter().enumerate() {
            let mut row = Vec::new();
            let mut srow = Vec::new();
            for (si, &s) in spec.scales.iter().enumerate() {
                let obs = moments[mi][li * spec.scales.len() + si];
                let gamma = |a: f64| -> Result<f64> {
                    let am = SymMatrix::scaled_identity(d, a);
                    let mut err = None;
                    let mut f = |p: &[i64]| {
                        let x: Vec<f64> = p.iter().map(|&c| c as f64).collect();
                        periodic_hom_greens(&am, side, m, &x).unwrap_or_else(|e| {
                            err = Some(e);
                            f64::NAN
                        })
                    };
                    let v = level.observe(d, s, &mut f);
                    err.map_or(Ok(v), Err)
                };
                let g = gamma(a_mean)?;
                let da = 1e-4 * a_mean;
                srow.push((gamma(a_mean + da)? - gamma(a_mean - da)?) / (2.0 * da));
                row.push(Estimate { mean: obs.mean - g, se: obs.se, n: obs.n });
            }
            by_mass.push(row);
            sens.push(srow);
        }
        let mut extrapolated = Vec::new();
        for si in 0..spec.scales.len() {
            let mean: f64 = cw.iter().zip(&by_mass).map(|(c, r)| c * r[si].mean).sum();
            let stat: f64 = cw.iter().zip(&by_mass).map(|(c, r)| (c * r[si].se).powi(2)).sum();
            let coef: f64 = cw.iter().zip(&sens).map(|(c, r)| c * r[si]).sum();
            let se = (stat + (coef * a_se).powi(2)).sqrt();
            extrapolated.push(Estimate { mean, se, n: by_mass[0][si].n });
        }
        let scales: Vec<f64> = spec.scales.iter().map(|&s| level.scale(s)).collect();
        let diffs: Vec<f64> = extrapolated.iter().map(|e| e.mean.abs()).collect();
        let floor: Vec<f64> = extrapolated.iter().map(|e| spec.floor_sigma * e.se).collect();
        let rate = rate_fit(&scales, &diffs, RateModel::Elliptic { offset: level.offset(d) }, Some(&floor))?;
        levels.push(LevelDecay { level, scales, by_mass, extrapolated, rate });
    }
    Ok(DecayReport { masses: spec.masses.clone(), stiffness_by_mass, a_hom, levels, remainder_bound })
}

/// Per-coordinate variance of the centered coordinate on `Z_L` under a
/// periodized normal of variance `s2`.
fn wrapped_variance(side: usize, s2: f64) -> f64 {
    let l = side as i64;
    let images = ((40.0 * s2).sqrt() / side as f64).ceil() as i64 + 1;
    let (mut num, mut den) = (0.0, 0.0);
    for c in -(l / 2) + 1..=l / 2 {
        let mut w = 0.0;
        for n in -images..=images {
            let y = (c + n * l) as f64;
            w += (-y * y / (2.0 * s2)).exp();
        }
        num += (c * c) as f64 * w;
        den += w;
    }
    num / den
}

/// Inverts [`wrapped_variance`] by bisection in `log s2`.
fn unwrap_variance(side: usize, v: f64) -> Result<f64> {
    let saturated = wrapped_variance(side, 1e6);
    if !(v > 0.0 && v < 0.999 * saturated) {
        return Err(Error::Domain(format!("spread {v} is saturated on a side-{side} torus")));
    }
    let (mut lo, mut hi) = (1e-6f64, 1e6f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if wrapped_variance(side, mid) < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicDecayReport {
    pub times: Vec<f64>,
    /// Per-coordinate spread `σ²(t)`, unwrapped from the torus.
    pub spread: Vec<f64>,
    /// Isotropic `a_hom` from the slope of `σ²` over the last two times.
    pub a_hom: f64,
    pub sup_difference: Vec<f64>,
    /// Largest standard error of `G_a(·,t)` over the cube.
    pub max_se: Vec<f64>,
    pub rate: RateReport,
}

/// `sup_x |G_a(x,t) − G_{a_hom}(x,t)|` against `s = Λt + 1`, with the
/// homogenized Gaussian periodized on the same cube. Points below
/// `floor_sigma·max_se` are dropped.
pub fn parabolic_decay_check(
    env: &EnvironmentSpec,
    times: &[f64],
    samples: usize,
    floor_sigma: f64,
    seed: SeedRecord,
) -> Result<ParabolicDecayReport> {
    if times.len() < 4 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(config("t", "need at least four increasing times"));
    }
    let cube = &env.cube;
    let d = cube.dim();
    let g = avg_greens_mc(env, times, samples, seed)?;
    let mut spread = Vec::new();
    for k in 0..times.len() {
        let msd: f64 = (0..cube.volume())
            .map(|x| cube.centered(x).iter().map(|c| (c * c) as f64).sum::<f64>() * g.mean[k][x])
            .sum();
        spread.push(unwrap_variance(cube.side(), msd / d as f64)?);
    }
    let n = times.len();
    let a = (spread[n - 1] - spread[n - 2]) / (2.0 * (times[n - 1] - times[n - 2]));
    if !(a > 0.0) {
        return Err(Error::Domain(format!("spread slope gives a_hom = {a}")));
    }
    let ah = SymMatrix::scaled_identity(d, a);
    let mut sup_difference = Vec::new();
    let mut max_se = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let mut sup: f64 = 0.0;
        for x in 0..cube.volume() {
            let c: Vec<f64> = cube.centered(x).iter().map(|&v| v as f64).collect();
            sup = sup.max((g.mean[k][x] - periodic_hom_heat_kernel(&ah, cube.side(), &c, t)?).abs());
        }
        sup_difference.push(sup);
        max_se.push(g.se[k].iter().copied().fold(0.0, f64::max));
    }
    let upper = env.potential.window().upper();
    let scales: Vec<f64> = times.iter().map(|t| upper * t + 1.0).collect();
    let floor: Vec<f64> = max_se.iter().map(|s| floor_sigma * s).collect();
    let rate = rate_fit(&scales, &sup_difference, RateModel::Parabolic { offset: d as f64 }, Some(&floor))?;
    Ok(ParabolicDecayReport { times: times.to_vec(), spread, a_hom: a, sup_difference, max_se, rate })
}

/// Least-squares slope of `log|y|` against `log x`, used to compare levels.
pub fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    LinearFit::fit(&lx, &ly).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ewald_split_is_independent_of_t0() {
        let a = SymMatrix::diagonal(&[0.8, 1.3]);
        for x in [[1.0, 0.0], [3.0, 2.0], [7.0, -5.0]] {
            let p = periodic_hom_greens_split(&a, 16, 0.3, &x, 5.0).unwrap();
            let q = periodic_hom_greens_split(&a, 16, 0.3, &x, 40.0).unwrap();
            assert!((p - q).abs() < 1e-11 * p.abs().max(1.0), "{x:?}: {p} {q}");
        }
    }

    #[test]
    fn large_torus_recovers_yukawa_kernel() {
        let a = SymMatrix::scaled_identity(3, 0.7);
        let (m, r) = (1.2, 2.0);
        let g = periodic_hom_greens(&a, 40, m, &[r, 0.0, 0.0]).unwrap();
        let exact = (-(m / 0.7f64.sqrt()) * r).exp() / (4.0 * std::f64::consts::PI * 0.7 * r);
        assert!((g - exact).abs() < 1e-12, "{g} {exact}");
    }

    #[test]
    fn heat_kernel_images_sum_to_one() {
        let a = SymMatrix::scaled_identity(2, 0.9);
        let side = 6;
        let total: f64 = (0..6)
            .flat_map(|i| (0..6).map(move |j| [i as f64, j as f64]))
            .map(|x| periodic_hom_heat_kernel(&a, side, &x, 3.0).unwrap())
            .sum();
        // Riemann sum of a periodic Gaussian with spread well above the spacing.
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn wrapped_variance_round_trip() {
        for s2 in [0.5, 3.0, 12.0] {
            let v = wrapped_variance(16, s2);
            assert!((unwrap_variance(16, v).unwrap() - s2).abs() < 1e-8 * s2);
        }
        assert!(unwrap_variance(8, 100.0).is_err());
    }

    #[test]
    fn quadratic_difference_is_discretization_error() {
        let cube = PeriodicCube::new(3, 24).unwrap();
        let p = Potential::quadratic(1.0).unwrap();
        let mut spec = DecaySpec::new(cube, p, vec![0.3, 0.2], vec![2, 3, 4, 5, 6]);
        spec.tail_tol = 1e-11;
        let r = thm13_decay_check(&spec, SeedRecord::new(0, 0)).unwrap();
        assert!((r.a_hom.mean - 1.0).abs() < 1e-6, "{:?}", r.a_hom);
        for l in &r.levels {
            assert!(l.rate.alpha_lower >= 1.0 - 0.3, "{:?}: {:?}", l.level, l.rate);
        }
        let v = &r.level(DecayLevel::Value).unwrap().rate;
        let g = &r.level(DecayLevel::Gradient).unwrap().rate;
        assert!(v.alpha_lower <= g.alpha_upper && g.alpha_lower <= v.alpha_upper, "{v:?} {g:?}");
    }

    #[test]
    fn two_dimensions_reject_value_level() {
        let cube = PeriodicCube::new(2, 16).unwrap();
        let p = Potential::quadratic(1.0).unwrap();
        let mut spec = DecaySpec::new(cube, p, vec![0.3], vec![2, 3, 4, 5]);
        spec.levels = vec![DecayLevel::Value];
        assert!(matches!(thm13_decay_check(&spec, SeedRecord::new(0, 0)), Err(Error::Unsupported(_))));
    }
}
