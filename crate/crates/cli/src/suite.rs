//! The acceptance battery: one check per criterion, sized as specified.

use std::fmt;
use std::time::Instant;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use latthom::env::{CoefficientField, CoefficientMap, Layout, Potential};
use latthom::field::{
    correlation_identity_check, malliavin_refinement, parabolic_decay_check, poincare_variance_check, quadratic_resolvent,
    thm13_decay_check, CorrelationSpec, DecayLevel, DecaySpec, Functional, MalliavinSpec, PoincareSpec,
};
use latthom::homogenize::{
    a_hom_extract, contraction_ratio, default_eta_ladder, fourier_laplace_check, neumann_series_q, q_estimate,
    t_operator_spectral, EnvironmentSpec, QMatrix, SampleGrid, Sampler,
};
use latthom::lattice::{heat_kernel, heat_kernel_box};
use latthom::parabolic::{aronson_fit, aronson_sample, damped_perturbation_terms, damped_resolvent, greens_sum_rules, SpaceTimeField};
use latthom::rng::{par_indexed, SeedRecord};
use latthom::sde::{
    action_concavity_scan, feynman_kac_estimate, path_action_hessian_probe, pathwise_em_error, stationary_moments_check,
    time_average_estimate, ConvexPotential, MomentsSpec,
};
use latthom::stats::Estimate;
use latthom::{EllipticityPair, PeriodicCube, Result, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Fast,
    Full,
}

impl std::str::FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fast" => Ok(Self::Fast),
            "full" => Ok(Self::Full),
            _ => Err(format!("tier must be `fast` or `full`, got `{s}`")),
        }
    }
}

/// A deliberate defect for negative-path testing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    None,
    /// One coefficient of each random environment is set to `2Λ`.
    CoefficientOutsideWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<28} {}  ({:.1} s)  {}",
            self.id,
            self.title,
            if self.pass { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    /// Cheapest tier that runs this criterion.
    pub tier: Tier,
    check: fn(Fault) -> Result<(bool, String)>,
}

pub const CRITERIA: [Criterion; 13] = [
    Criterion { id: 1, title: "heat-kernel oracle", tier: Tier::Fast, check: c1_heat_kernel },
    Criterion { id: 2, title: "Green's sum rules", tier: Tier::Fast, check: c2_sum_rules },
    Criterion { id: 3, title: "Aronson constant", tier: Tier::Full, check: c3_aronson },
    Criterion { id: 4, title: "damped resolvent bound", tier: Tier::Fast, check: c4_resolvent_bound },
    Criterion { id: 5, title: "perturbation decay", tier: Tier::Fast, check: c5_perturbation },
    Criterion { id: 6, title: "cell-problem oracle", tier: Tier::Fast, check: c6_cell_problem },
    Criterion { id: 7, title: "method equivalence", tier: Tier::Fast, check: c7_equivalence },
    Criterion { id: 8, title: "Fourier-Laplace consistency", tier: Tier::Fast, check: c8_fourier_laplace },
    Criterion { id: 9, title: "correlation identity", tier: Tier::Full, check: c9_correlation },
    Criterion { id: 10, title: "Malliavin identity", tier: Tier::Fast, check: c10_malliavin },
    Criterion { id: 11, title: "Poincare ratio", tier: Tier::Full, check: c11_poincare },
    Criterion { id: 12, title: "finite-dimensional diffusion", tier: Tier::Fast, check: c12_sde },
    Criterion { id: 13, title: "empirical decay rates", tier: Tier::Full, check: c13_rates },
];

fn find(id: u8) -> &'static Criterion {
    CRITERIA.iter().find(|c| c.id == id).expect("criterion ids are 1..=13")
}

/// Runs one criterion; library errors count as failures.
pub fn run_criterion(id: u8, fault: Fault) -> Outcome {
    let c = find(id);
    let start = Instant::now();
    let (pass, detail) = match (c.check)(fault) {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome { id, title: c.title, pass, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Runs every criterion in `tier` (the full tier includes the fast one),
/// calling `report` after each.
pub fn verify_suite(tier: Tier, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    CRITERIA
        .iter()
        .filter(|c| tier == Tier::Full || c.tier == Tier::Fast)
        .map(|c| {
            let o = run_criterion(c.id, Fault::None);
            report(&o);
            o
        })
        .collect()
}

fn dipole_env(d: usize, side: usize, amp: f64, slices: usize, walk_dt: f64, seed: SeedRecord, fault: Fault) -> Result<CoefficientField> {
    let p = Potential::dipole(1.0, amp)?;
    let spec = EnvironmentSpec {
        cube: PeriodicCube::new(d, side)?,
        potential: p,
        mass: 1.0,
        map: CoefficientMap::HessianOfGradient(p),
        sampler: Sampler::Langevin,
        walk_dt,
        clock: 1.0,
        substeps: 1,
    };
    let mut a = spec.coefficients(slices, seed)?;
    if fault == Fault::CoefficientOutsideWindow {
        let bad = 2.0 * a.window().upper();
        a.poke_unchecked(a.data().len() / 2, bad);
    }
    Ok(a)
}

fn c1_heat_kernel(_: Fault) -> Result<(bool, String)> {
    let times = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    let mut sup: f64 = 0.0;
    let mut mass: f64 = 0.0;
    for d in [1, 2] {
        for (t, field) in times.iter().zip(heat_kernel_box(d, &times)?) {
            mass = mass.max((field.sum() - 1.0).abs());
            for k in 0..field.values().len() {
                let x = field.point(k);
                sup = sup.max((field.values()[k] - heat_kernel(&x, *t)?).abs());
            }
        }
    }
    Ok((sup < 1e-10 && mass < 1e-10, format!("sup error {sup:.2e}, mass defect {mass:.2e}")))
}

fn c2_sum_rules(fault: Fault) -> Result<(bool, String)> {
    let results: Vec<Result<(f64, f64, f64)>> = par_indexed(20, |i| {
        let a = dipole_env(2, 16, 0.3, 41, 0.1, SeedRecord::new(2002, i as u64), fault)?;
        a.validate()?;
        let r = greens_sum_rules(&a, 40, 0)?;
        Ok((r.over_y, r.over_x, r.min_value))
    });
    let (mut y, mut x, mut lo) = (0.0f64, 0.0f64, f64::INFINITY);
    for r in results {
        let (a, b, c) = r?;
        y = y.max(a);
        x = x.max(b);
        lo = lo.min(c);
    }
    Ok((y < 1e-8 && x < 1e-8 && lo >= 0.0, format!("max |sum_y - 1| {y:.2e}, max |sum_x - 1| {x:.2e}, min G {lo:.2e}")))
}

fn c3_aronson(fault: Fault) -> Result<(bool, String)> {
    let samples: Vec<Result<_>> = par_indexed(100, |i| {
        let a = dipole_env(2, 16, 0.3, 61, 0.1, SeedRecord::new(2003, i as u64), fault)?;
        a.validate()?;
        aronson_sample(&a, 0, 60, 0)
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let r = aronson_fit(&samples, 2, 2.0);
    Ok((
        r.passes,
        format!(
            "C(50) {:.4}, C(100) {:.4}, change {:.2}%; lags with scale >= 2: C(50) {:.4}, C(100) {:.4}, change {:.2}%",
            r.c_hat_half,
            r.c_hat,
            100.0 * r.relative_change,
            r.c_hat_lagged_half,
            r.c_hat_lagged,
            100.0 * r.lagged_change
        ),
    ))
}

fn c4_resolvent_bound(fault: Fault) -> Result<(bool, String)> {
    let results: Vec<Result<(f64, bool)>> = par_indexed(100, |i| {
        let seed = SeedRecord::new(2004, i as u64);
        let a = dipole_env(2, 8, 0.3, 41, 0.1, seed, fault)?;
        a.validate()?;
        let mut rng = seed.child(1 << 32).rng();
        let m: f64 = rng.random_range(0.3..2.0);
        let values: Vec<f64> = (0..41 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = SpaceTimeField::from_values(a.cube(), a.t0(), a.dt(), values);
        let v = damped_resolvent(&a, m, &g)?.v;
        let ratio = v.l2_norm() / (2.0 / (m * m) * g.l2_norm());
        Ok((ratio, ratio <= 1.0))
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = results.iter().filter(|r| !r.1).count();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    Ok((violations == 0, format!("{violations} violations in 100 pairs, max ||v||/(2m^-2||g||) = {worst:.3}")))
}

fn c5_perturbation(fault: Fault) -> Result<(bool, String)> {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_geometric: f64 = 0.0;
    let mut last: f64 = 0.0;
    let mut contrast = 0.0;
    for i in 0..4u64 {
        let a = dipole_env(2, 8, 0.3, 41, 0.1, SeedRecord::new(2005, i), fault)?;
        a.validate()?;
        contrast = a.window().contrast();
        let mut g = SpaceTimeField::zeros(a.cube(), a.t0(), a.dt(), 41);
        let mut rng = ChaCha8Rng::seed_from_u64(50 + i);
        for j in 20..41 {
            g.slice_mut(j).iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let p = damped_perturbation_terms(&a, 1.0, &g, 30)?;
        for n in 0..=6 {
            worst_ratio = worst_ratio.max(p.term_norms[n + 1] / p.term_norms[n]);
            worst_geometric = worst_geometric.max(p.residuals[n + 1] / p.residuals[n]);
        }
        last = last.max(p.residuals[30] / p.direct.l2_norm());
    }
    let bound = contrast + 0.05;
    Ok((
        worst_ratio <= bound && worst_geometric <= bound && last < 1e-10,
        format!("max term ratio {worst_ratio:.3}, max residual ratio {worst_geometric:.3} (bound {bound:.3}), final relative residual {last:.1e}"),
    ))
}

fn c6_cell_problem(_: Fault) -> Result<(bool, String)> {
    let cube = PeriodicCube::new(1, 8)?;
    let data: Vec<f64> = (0..8).map(|x| if x % 2 == 0 { 1.0 } else { 4.0 }).collect();
    let a = CoefficientField::from_data(cube, 0.0, 1.0, EllipticityPair::new(1.0, 4.0)?, Layout::Diagonal, data)?;
    let qs = default_eta_ladder(4.0)
        .into_iter()
        .map(|eta| q_estimate(std::slice::from_ref(&a), &[0.0], eta))
        .collect::<Result<Vec<QMatrix>>>()?;
    let h = a_hom_extract(&qs)?;
    let rel = (h.matrix.get(0, 0) - 1.6).abs() / 1.6;
    let cube = PeriodicCube::new(2, 4)?;
    let c = SymMatrix::new(2, vec![1.7, 0.2, 0.2, 1.1])?;
    let k = CoefficientField::constant(&cube, &c)?;
    let mut exact: f64 = 0.0;
    for xi in [[0.0, 0.0], [0.5, -0.25], [1.2, 0.7]] {
        for eta in [0.01, 0.1, 1.0] {
            let q = q_estimate(std::slice::from_ref(&k), &xi, eta)?;
            for j in 0..2 {
                for l in 0..2 {
                    exact = exact.max((q.entry(j, l) - c.get(j, l)).norm());
                }
            }
        }
    }
    Ok((rel < 0.01 && exact < 1e-12, format!("two-phase a_hom {:.5} (rel {:.2e}), constant error {exact:.1e}", h.matrix.get(0, 0), rel)))
}

fn c7_equivalence(_: Fault) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2007);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut cases = 0;
    for (d, side, slices) in [(1usize, 8usize, 4usize), (2, 4, 3)] {
        let cube = PeriodicCube::new(d, side)?;
        let data: Vec<f64> = (0..d * cube.volume() * slices).map(|_| rng.random_range(0.8..1.2)).collect();
        let a = CoefficientField::from_data(cube, 0.0, 0.3, EllipticityPair::new(0.8, 1.2)?, Layout::Diagonal, data)?;
        let xis: Vec<Vec<f64>> = if d == 1 { vec![vec![0.0], vec![0.9]] } else { vec![vec![0.0, 0.0], vec![0.6, -0.3]] };
        for xi in &xis {
            for eta in [0.2, 0.5] {
                let s = neumann_series_q(std::slice::from_ref(&a), xi, eta, 30)?;
                let q = q_estimate(std::slice::from_ref(&a), xi, eta)?;
                for e in 0..d * d {
                    let diff = (C::new(s.q.re[e], s.q.im[e]) - C::new(q.re[e], q.im[e])).norm();
                    worst_excess = worst_excess.max(diff - (s.tail_bound + 1e-9));
                }
                cases += 1;
            }
        }
    }
    let grid = SampleGrid { cube: PeriodicCube::new(2, 4)?, n_times: 3, dt: 0.5 };
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..100 {
        let g: Vec<C> = (0..grid.vector_len()).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let xi = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let eta = rng.random_range(0.01..2.0);
        let tg = t_operator_spectral(&grid, 1.2, &xi, eta, &g)?;
        worst_ratio = worst_ratio.max(contraction_ratio(&grid, &g, &tg));
    }
    Ok((
        worst_excess <= 0.0 && worst_ratio <= 1.0 + 1e-6,
        format!("{cases} (xi, eta) cases, worst |dq| - tolerance {worst_excess:.1e}; max ||Tg||/||g|| {worst_ratio:.6}"),
    ))
}

fn c8_fourier_laplace(_: Fault) -> Result<(bool, String)> {
    let a = SymMatrix::new(2, vec![1.2, 0.3, 0.3, 0.8])?;
    let modes: Vec<Vec<i64>> = (0..4).flat_map(|i| (-3..=4).map(move |j| vec![i, j])).collect();
    let rows = fourier_laplace_check(&a, 8, &modes, &[0.1, 0.5, 2.0])?;
    let worst = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("{} (xi, eta) points, max error {worst:.2e}", rows.len())))
}

fn c9_correlation(_: Fault) -> Result<(bool, String)> {
    let cube = PeriodicCube::new(1, 32)?;
    let exact = quadratic_resolvent(&cube, 1.0, 1.0, 1e-14)?;
    let det = (exact[0] - 1.0 / 5f64.sqrt()).abs();
    let offsets = vec![vec![0], vec![1], vec![2], vec![3]];
    let q = CorrelationSpec::new(cube.clone(), Potential::quadratic(1.0)?, 1.0, offsets, 10_000);
    let tq = correlation_identity_check(&q, SeedRecord::new(2009, 0))?;
    let mut rhs_err: f64 = 0.0;
    let mut lhs_z: f64 = 0.0;
    for r in &tq.rows {
        let e = exact[cube.index(&r.offset)];
        rhs_err = rhs_err.max((r.rhs.mean - e).abs());
        lhs_z = lhs_z.max(r.lhs.z_against_value(e));
    }
    let cube2 = PeriodicCube::new(2, 8)?;
    let offsets: Vec<Vec<i64>> = vec![vec![0, 0], vec![1, 0], vec![2, 0], vec![3, 0], vec![4, 0], vec![1, 1], vec![2, 1], vec![2, 2]];
    let dspec = CorrelationSpec::new(cube2, Potential::dipole(1.0, 0.2)?, 0.5, offsets, 10_000);
    let td = correlation_identity_check(&dspec, SeedRecord::new(2009, 1))?;
    let pass = det < 1e-4 && rhs_err < 1e-4 && lhs_z <= 3.0 && !tq.flagged && td.passes(3.0);
    Ok((
        pass,
        format!(
            "quadratic: G(0) - 1/sqrt5 = {det:.1e}, rhs error {rhs_err:.1e}, lhs max z {lhs_z:.2}; dipole: max z {:.2} over {} offsets",
            td.max_z(),
            td.rows.len()
        ),
    ))
}

fn c10_malliavin(_: Fault) -> Result<(bool, String)> {
    let cube = PeriodicCube::new(2, 6)?;
    let spec = MalliavinSpec::new(cube, Potential::dipole(1.0, 0.3)?, 1.0, vec![1, 0], 0.3, vec![2, 1], 0.8);
    let r = malliavin_refinement(&spec, SeedRecord::new(2010, 0))?;
    Ok((
        r.coarse.rel_error < 1e-3 && (r.ratio - 0.5).abs() <= 0.1,
        format!("relative error {:.2e} at dt, {:.2e} at dt/2, ratio {:.3}", r.coarse.rel_error, r.fine.rel_error, r.ratio),
    ))
}

fn c11_poincare(_: Fault) -> Result<(bool, String)> {
    let cube = PeriodicCube::new(2, 4)?;
    let weights: Vec<f64> = (0..16).map(|x| if x % 3 == 0 { 1.0 } else { -0.5 }).collect();
    let spec = PoincareSpec {
        cube,
        potential: Potential::dipole(1.0, 0.3)?,
        mass: 1.0,
        dt: 0.05,
        horizon: 2.0,
        samples: 10_000,
        functionals: vec![
            Functional::Tanh { site: vec![0, 0] },
            Functional::Linear { weights },
            Functional::Square { site: vec![1, 2] },
        ],
    };
    let rows = poincare_variance_check(&spec, SeedRecord::new(2011, 0))?;
    let detail = rows.iter().map(|r| format!("{} {:.3}±{:.3}", r.functional, r.ratio, r.ratio_se)).collect::<Vec<_>>().join(", ");
    Ok((rows.iter().all(|r| r.passes(3.0)), format!("ratios {detail}")))
}

fn c12_sde(_: Fault) -> Result<(bool, String)> {
    let mut notes = Vec::new();
    let mut pass = true;
    let configs = [
        (SymMatrix::diagonal(&[2.0]), vec![0.0], vec![0.0, 1.0]),
        (SymMatrix::diagonal(&[1.0, 4.0]), vec![1.0, 1.0], vec![0.0, 0.5, 2.0]),
        (SymMatrix::new(2, vec![2.0, 0.5, 0.5, 1.0])?, vec![0.3, -0.4], vec![0.0, 1.0]),
    ];
    let mut moment_checks = 0;
    for (i, (a, b, lags)) in configs.into_iter().enumerate() {
        let r = stationary_moments_check(&MomentsSpec::new(a, b, lags, 20_000), SeedRecord::new(2012, i as u64))?;
        pass &= r.passes();
        moment_checks += r.verdicts.len();
    }
    notes.push(format!("{moment_checks} moment verdicts"));

    let a = SymMatrix::new(2, vec![1.0, 0.3, 0.3, 2.0])?;
    let quad = ConvexPotential::quadratic(a, vec![0.5, -0.2])?;
    let conv = pathwise_em_error(&quad, &[0.04, 0.02, 0.01], 4.0, 32, 24, SeedRecord::new(2012, 10))?;
    pass &= conv.ratios.iter().all(|q| (q - 0.5).abs() <= 0.1);
    notes.push(format!("EM error ratios {:?}", conv.ratios.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>()));

    let w = ConvexPotential::cosine_perturbed(SymMatrix::identity(1), 0.3)?;
    let f = |x: &[f64]| x[0].cos();
    let fk = feynman_kac_estimate(&w, &f, 8.0, 0.01, 20_000, SeedRecord::new(2012, 20))?;
    let ta = time_average_estimate(&w, &f, 0.01, 10_000.0, 20.0, SeedRecord::new(2012, 21))?;
    let z = fk.as_estimate().z_against(&ta);
    let harmonic = ConvexPotential::quadratic(SymMatrix::identity(1), vec![0.0])?;
    let fk2 = feynman_kac_estimate(&harmonic, &|x: &[f64]| x[0] * x[0], 8.0, 0.01, 20_000, SeedRecord::new(2012, 22))?;
    let z2 = Estimate { mean: fk2.estimate, se: fk2.se, n: fk2.paths }.z_against_value(1.0);
    pass &= z <= 3.0 && z2 <= 3.0 && !fk.flagged && !fk2.flagged;
    notes.push(format!("FK vs time average z {z:.2}, <phi^2> z {z2:.2}"));

    let quad_scan = action_concavity_scan(&quad, 60, 0.25, 20, 6.0, 1.0, 1e-9, SeedRecord::new(2012, 30))?;
    let cos_scan = action_concavity_scan(&w, 200, 0.1, 40, 6.0, 0.3, 1e-9, SeedRecord::new(2012, 31))?;
    let level = path_action_hessian_probe(&w, &vec![vec![4.7]; 201], 0.1, 1e-9)?;
    let sym = quad_scan.probes.iter().chain(&cos_scan.probes).map(|p| p.symmetry_error).fold(0.0, f64::max);
    pass &= quad_scan.log_concave() && cos_scan.negative_paths > 0 && !level.log_concave && sym <= 1e-12;
    notes.push(format!(
        "action min eigenvalue quadratic {:.2e}, perturbed {:.2e} ({} of 40 paths negative)",
        quad_scan.min_eigenvalue, cos_scan.min_eigenvalue, cos_scan.negative_paths
    ));
    Ok((pass, notes.join("; ")))
}

fn c13_rates(_: Fault) -> Result<(bool, String)> {
    let p = Potential::dipole(1.0, 0.4)?;
    let env = EnvironmentSpec {
        cube: PeriodicCube::new(3, 16)?,
        potential: p,
        mass: 1.0,
        map: CoefficientMap::HessianOfGradient(p),
        sampler: Sampler::Langevin,
        walk_dt: 0.05,
        clock: 1.0,
        substeps: 1,
    };
    let par = parabolic_decay_check(&env, &[1.0, 2.0, 4.0, 8.0, 16.0], 128, 3.0, SeedRecord::new(2013, 0))?;
    let cube = PeriodicCube::new(2, 32)?;
    let mut spec = DecaySpec::new(cube, Potential::dipole(1.0, 0.2)?, vec![0.4, 0.3, 0.2], vec![1, 2, 3, 4, 6, 8]);
    spec.environments = 64;
    spec.levels = vec![DecayLevel::Gradient];
    let ell = thm13_decay_check(&spec, SeedRecord::new(2013, 1))?;
    let g = ell.level(DecayLevel::Gradient).expect("gradient level requested");
    Ok((
        par.rate.positive() && ell.positive(),
        format!(
            "parabolic d=3: alpha {:.2} [{:.2}, {:.2}]; elliptic d=2 gradient: alpha {:.2} [{:.2}, {:.2}], a_hom {:.4}±{:.4}",
            par.rate.alpha, par.rate.alpha_lower, par.rate.alpha_upper, g.rate.alpha, g.rate.alpha_lower, g.rate.alpha_upper,
            ell.a_hom.mean, ell.a_hom.se
        ),
    ))
}
