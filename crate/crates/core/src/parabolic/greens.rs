//! The backward Green's function of `∂_s u = ½∇*a∇u`, `u(·,t) = δ_x`, on the
//! periodic cube and on a free box in `Z^d` with the environment extended
//! periodically.
//!
//! One backward step from `s_{i+1}` to `s_i` applies `S_i = I − (Δ/2)∇*a_i∇`.
//! `S_i` is symmetric and annihilates nothing but preserves constants, so both
//! sum rules hold exactly; for diagonal `a` and `Δ ≤ 1/(dΛ)` its entries are
//! nonnegative.

use crate::env::CoefficientField;
use crate::error::{config, Error, Result};
use crate::lattice::{BoxField, PeriodicCube};

use super::forward::check_step;

/// `G(y, s_i; x, t)` for all `y` in the cube and `s_start ≤ i ≤ t_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct GreensTable {
    cube: PeriodicCube,
    source: usize,
    t_index: usize,
    s_start: usize,
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl GreensTable {
    pub fn source(&self) -> usize {
        self.source
    }

    pub fn t_index(&self) -> usize {
        self.t_index
    }

    pub fn s_start(&self) -> usize {
        self.s_start
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn cube(&self) -> &PeriodicCube {
        &self.cube
    }

    /// Values at `s_i`; `None` outside the stored range (the table is zero for `s > t`).
    pub fn slice(&self, i: usize) -> Option<&[f64]> {
        if i < self.s_start || i > self.t_index {
            return None;
        }
        let n = self.cube.volume();
        let k = i - self.s_start;
        Some(&self.values[k * n..(k + 1) * n])
    }

    pub fn at(&self, y: usize, i: usize) -> f64 {
        if i > self.t_index {
            return 0.0;
        }
        self.slice(i).map_or(f64::NAN, |s| s[y])
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|Σ_y G(y, s_i; x, t) − 1|` over stored times.
    pub fn column_sum_deviation(&self) -> f64 {
        self.values
            .chunks(self.cube.volume())
            .map(|s| (s.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves backward from `t_index` down to `s_start`.
pub fn greens_backward(a: &CoefficientField, source: usize, t_index: usize, s_start: usize) -> Result<GreensTable> {
    let cube = a.cube();
    cube.check(source)?;
    check_backward(a, t_index, s_start)?;
    let n = cube.volume();
    let steps = t_index - s_start;
    let mut values = vec![0.0; (steps + 1) * n];
    let mut u = vec![0.0; n];
    u[source] = 1.0;
    let mut ku = vec![0.0; n];
    values[steps * n..].copy_from_slice(&u);
    for i in (s_start..t_index).rev() {
        backward_step(a, i, &mut u, &mut ku);
        let k = i - s_start;
        values[k * n..(k + 1) * n].copy_from_slice(&u);
    }
    Ok(GreensTable { cube: cube.clone(), source, t_index, s_start, t0: a.t0(), dt: a.dt(), values })
}

pub(crate) fn check_backward(a: &CoefficientField, t_index: usize, s_start: usize) -> Result<()> {
    if s_start > t_index {
        return Err(config("s_start", format!("start {s_start} exceeds terminal index {t_index}")));
    }
    if !a.is_time_independent() && t_index > a.n_times() {
        return Err(config("t_index", format!("terminal index {t_index} beyond {} coefficient slices", a.n_times())));
    }
    check_step(a.cube().dim(), a.window().upper(), 0.5, a.dt())
}

/// `u ← S_i u`.
pub(crate) fn backward_step(a: &CoefficientField, i: usize, u: &mut [f64], ku: &mut [f64]) {
    a.apply(i, u, ku);
    let h = 0.5 * a.dt();
    for (v, k) in u.iter_mut().zip(ku.iter()) {
        *v -= h * k;
    }
}

/// Maximum deviations of both sum rules over every source and stored time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumRules {
    /// `max |Σ_y G(y,s;x,t) − 1|`.
    pub over_y: f64,
    /// `max |Σ_x G(y,s;x,t) − 1|`.
    pub over_x: f64,
    /// Smallest entry seen.
    pub min_value: f64,
}

/// Checks both sum rules from the full propagator (one solve per source).
pub fn greens_sum_rules(a: &CoefficientField, t_index: usize, s_start: usize) -> Result<SumRules> {
    let n = a.cube().volume();
    let steps = t_index - s_start.min(t_index);
    let mut row = vec![0.0; (steps + 1) * n];
    let mut over_y = 0.0f64;
    let mut min_value = f64::INFINITY;
    for x in 0..n {
        let g = greens_backward(a, x, t_index, s_start)?;
        over_y = over_y.max(g.column_sum_deviation());
        min_value = min_value.min(g.min_value());
        for (r, v) in row.iter_mut().zip(&g.values) {
            *r += v;
        }
    }
    let over_x = row.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    Ok(SumRules { over_y, over_x, min_value })
}

/// Geometry of a free box `[-R, R]^d` around a source, padded by one zero shell,
/// with each point mapped to its periodic environment site.
#[derive(Clone, Debug)]
pub struct BoxOperator {
    dim: usize,
    radius: i64,
    padded_side: usize,
    strides: Vec<usize>,
    sites: Vec<usize>,
    interior: Vec<usize>,
}

impl BoxOperator {
    pub fn new(cube: &PeriodicCube, center: usize, radius: i64) -> Self {
        let dim = cube.dim();
        let padded_side = (2 * radius + 3) as usize;
        let total = padded_side.pow(dim as u32);
        let mut strides = vec![1usize; dim];
        for j in (0..dim.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * padded_side;
        }
        let c = cube.coords(center);
        let mut sites = vec![0usize; total];
        let mut interior = Vec::new();
        let mut p = vec![0i64; dim];
        for (idx, site) in sites.iter_mut().enumerate() {
            let mut rem = idx;
            let mut inside = true;
            for j in (0..dim).rev() {
                let o = (rem % padded_side) as i64 - radius - 1;
                rem /= padded_side;
                inside &= o.abs() <= radius;
                p[j] = c[j] + o;
            }
            *site = cube.index(&p);
            if inside {
                interior.push(idx);
            }
        }
        Self { dim, radius, padded_side, strides, sites, interior }
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn padded_len(&self) -> usize {
        self.sites.len()
    }

    /// Padded index of the offset `o` from the center.
    pub fn padded_index(&self, o: &[i64]) -> usize {
        o.iter()
            .zip(&self.strides)
            .map(|(&x, &s)| (x + self.radius + 1) as usize * s)
            .sum()
    }

    /// `out = ∇*a_i∇u` at interior points, with `u = 0` on the padding shell.
    pub fn apply(&self, a: &CoefficientField, i: usize, u: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let diag = a.layout() == crate::env::Layout::Diagonal;
        let slice = a.slice(i);
        let flux = |p: usize, j: usize| -> f64 {
            let s = self.sites[p];
            if diag {
                slice[s * d + j] * (u[p + self.strides[j]] - u[p])
            } else {
                (0..d).map(|k| slice[s * d * d + j * d + k] * (u[p + self.strides[k]] - u[p])).sum()
            }
        };
        for &p in &self.interior {
            let mut acc = 0.0;
            for j in 0..d {
                acc += flux(p - self.strides[j], j) - flux(p, j);
            }
            out[p] = acc;
        }
    }

    /// Copies interior values into a [`BoxField`].
    pub fn extract(&self, u: &[f64]) -> BoxField {
        let mut f = BoxField::zeros(self.dim, self.radius);
        for (k, &p) in self.interior.iter().enumerate() {
            f.values_mut()[k] = u[p];
        }
        f
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_offset(&self, k: usize) -> Vec<i64> {
        let side = (2 * self.radius + 1) as usize;
        let mut rem = k;
        let mut o = vec![0i64; self.dim];
        for j in (0..self.dim).rev() {
            o[j] = (rem % side) as i64 - self.radius;
            rem /= side;
        }
        o
    }

    pub fn padded_side(&self) -> usize {
        self.padded_side
    }
}

/// Backward stepping of one terminal delta on a free box.
pub struct BoxBackward<'a> {
    op: &'a BoxOperator,
    u: Vec<f64>,
    ku: Vec<f64>,
}

impl<'a> BoxBackward<'a> {
    pub fn new(op: &'a BoxOperator, offset: &[i64]) -> Self {
        let mut u = vec![0.0; op.padded_len()];
        u[op.padded_index(offset)] = 1.0;
        Self { op, u, ku: vec![0.0; op.padded_len()] }
    }

    pub fn step(&mut self, a: &CoefficientField, i: usize) {
        self.op.apply(a, i, &self.u, &mut self.ku);
        let h = 0.5 * a.dt();
        for &p in &self.op.interior {
            self.u[p] -= h * self.ku[p];
        }
    }

    /// Values on the padded grid (zero on the shell).
    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn field(&self) -> BoxField {
        self.op.extract(&self.u)
    }
}

/// Radius beyond which the walk with jump rates at most `Λ/2` per direction
/// carries less than `tol` mass after time `tau`, by a Chernoff bound.
pub fn box_radius_for(dim: usize, upper: f64, tau: f64, tol: f64) -> i64 {
    let mut r = 1i64;
    loop {
        let best = (1..400)
            .map(|k| {
                let th = k as f64 * 0.025;
                -th * r as f64 + upper * tau * (th.cosh() - 1.0)
            })
            .fold(f64::INFINITY, f64::min);
        if (2.0 * dim as f64).ln() + best < tol.ln() {
            return r;
        }
        r += 1;
    }
}

/// Green's function on a free box: slices for `s_start ≤ i ≤ t_index`.
#[derive(Clone, Debug)]
pub struct BoxGreens {
    pub center: usize,
    pub s_start: usize,
    pub t_index: usize,
    pub slices: Vec<BoxField>,
    /// Largest absolute mass on the outer shell over all slices.
    pub boundary_mass: f64,
}

pub fn greens_backward_box(
    a: &CoefficientField,
    source: usize,
    t_index: usize,
    s_start: usize,
    radius: i64,
) -> Result<BoxGreens> {
    a.cube().check(source)?;
    check_backward(a, t_index, s_start)?;
    let op = BoxOperator::new(a.cube(), source, radius);
    let mut solver = BoxBackward::new(&op, &vec![0; a.cube().dim()]);
    let mut slices = vec![solver.field()];
    for i in (s_start..t_index).rev() {
        solver.step(a, i);
        slices.push(solver.field());
    }
    slices.reverse();
    let boundary_mass = slices.iter().map(BoxField::boundary_mass).fold(0.0, f64::max);
    Ok(BoxGreens { center: source, s_start, t_index, slices, boundary_mass })
}

/// Folds a box field centered at `center` onto the cube:
/// `G_Q(y) = Σ_n G(y + Ln)`.
pub fn periodize(field: &BoxField, cube: &PeriodicCube, center: usize) -> Vec<f64> {
    let c = cube.coords(center);
    let mut out = vec![0.0; cube.volume()];
    for (k, v) in field.values().iter().enumerate() {
        let o = field.point(k);
        let p: Vec<i64> = o.iter().zip(&c).map(|(a, b)| a + b).collect();
        out[cube.index(&p)] += v;
    }
    out
}

/// Periodizes a free-box Green's function, refusing if the box was too small.
pub fn periodic_greens(g: &BoxGreens, a: &CoefficientField, tol: f64) -> Result<GreensTable> {
    if g.boundary_mass > tol {
        return Err(Error::Integrity(format!(
            "truncation box too small: boundary mass {:.3e} exceeds {tol:.1e}",
            g.boundary_mass
        )));
    }
    let cube = a.cube();
    let mut values = Vec::with_capacity(g.slices.len() * cube.volume());
    for s in &g.slices {
        values.extend(periodize(s, cube, g.center));
    }
    Ok(GreensTable {
        cube: cube.clone(),
        source: g.center,
        t_index: g.t_index,
        s_start: g.s_start,
        t0: a.t0(),
        dt: a.dt(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{coefficient_field, langevin_simulate, CoefficientMap, LangevinConfig, Potential};
    use crate::lattice::heat_kernel;
    use crate::matrix::SymMatrix;
    use crate::rng::SeedRecord;

    fn dipole_env(side: usize, steps: usize, seed: u64) -> CoefficientField {
        let cube = PeriodicCube::new(2, side).unwrap();
        let p = Potential::dipole(1.0, 0.3).unwrap();
        let mut cfg = LangevinConfig::new(p, 1.0, 0.1, steps);
        cfg.burn_in = 100;
        let t = langevin_simulate(&cube, &cfg, SeedRecord::new(seed, 0)).unwrap();
        coefficient_field(&t, &CoefficientMap::HessianOfGradient(p)).unwrap()
    }

    #[test]
    fn constant_coefficients_reduce_to_heat_kernel() {
        let cube = PeriodicCube::new(1, 64).unwrap();
        let c = 0.8;
        let dt = 0.005;
        let a = CoefficientField::constant(&cube, &SymMatrix::scaled_identity(1, c)).unwrap().with_time_grid(0.0, dt);
        let g = greens_backward(&a, 0, 400, 0).unwrap();
        for y in 0..64 {
            let exact = heat_kernel(&cube.centered(y), c * 2.0 / 2.0).unwrap();
            assert!((g.at(y, 0) - exact).abs() < 1e-3, "{} vs {exact}", g.at(y, 0));
        }
        assert_eq!(g.slice(400).unwrap()[0], 1.0);
        assert_eq!(g.at(3, 401), 0.0);
    }

    #[test]
    fn sum_rules_and_positivity_on_dipole_environment() {
        let a = dipole_env(8, 20, 4);
        let r = greens_sum_rules(&a, 20, 0).unwrap();
        assert!(r.over_x < 1e-12 && r.over_y < 1e-12);
        assert!(r.min_value >= 0.0);
    }

    #[test]
    fn semigroup_property() {
        let a = dipole_env(6, 12, 2);
        let n = a.cube().volume();
        let g_full = greens_backward(&a, 5, 12, 0).unwrap();
        let g_late = greens_backward(&a, 5, 12, 6).unwrap();
        for y in 0..n {
            let mut composed = 0.0;
            for z in 0..n {
                composed += greens_backward(&a, z, 6, 0).unwrap().at(y, 0) * g_late.at(z, 6);
            }
            assert!((composed - g_full.at(y, 0)).abs() < 1e-13);
        }
    }

    #[test]
    fn box_periodization_matches_periodic_solve() {
        let a = dipole_env(8, 30, 9);
        let radius = box_radius_for(2, a.window().upper(), 30.0 * a.dt(), 1e-13);
        let b = greens_backward_box(&a, 10, 30, 0, radius).unwrap();
        let gq = periodic_greens(&b, &a, 1e-12).unwrap();
        let direct = greens_backward(&a, 10, 30, 0).unwrap();
        for i in 0..=30 {
            for y in 0..64 {
                assert!((gq.at(y, i) - direct.at(y, i)).abs() < 1e-12);
            }
        }
        let tiny = greens_backward_box(&a, 10, 30, 0, 1).unwrap();
        assert!(periodic_greens(&tiny, &a, 1e-12).is_err());
    }
}
