//! One function per experiment kind: resolved configuration in, table and
//! verdicts out. Sample-level work is fanned out with `par_indexed`, which
//! returns results in sample order.

use serde::Serialize;
use serde_json::{json, Value};

use latthom::env::{coefficient_field, langevin_simulate, CoefficientField, CoefficientMap, LangevinConfig, Potential};
use latthom::field::{
    correlation_identity_check, malliavin_refinement, poincare_variance_check, quadratic_resolvent, thm13_decay_check,
    CorrelationSpec, DecaySpec, Functional, MalliavinSpec, PoincareSpec,
};
use latthom::homogenize::{
    a_hom_extract, avg_greens_mc, corrector_solve, default_eta_ladder, q_estimate, rate_fit, EnvironmentSpec, QMatrix,
    RateModel, Sampler,
};
use latthom::lattice::{heat_kernel, heat_kernel_box};
use latthom::parabolic::{greens_backward, greens_sum_rules};
use latthom::rng::{par_indexed, SeedRecord};
use latthom::sde::{
    action_concavity_scan, feynman_kac_estimate, pathwise_em_error, stationary_moments_check, time_average_estimate,
    ConvexPotential, MomentsSpec, Verdict,
};
use latthom::{Error, PeriodicCube, Result, SymMatrix};

use crate::config::{ExperimentConfig, Kind};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    /// Floats with 17 significant digits; no locale dependence.
    pub fn render(&self) -> String {
        match self {
            Self::F(v) => format!("{v:.16e}"),
            Self::I(v) => v.to_string(),
            Self::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::F(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Self::I(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::S(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.to_string(), pass, detail }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Artifact {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub checks: Vec<Check>,
    /// Written as `<kind>.json` when present.
    pub json: Option<Value>,
}

impl Artifact {
    fn with_columns(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Self::default() }
    }

    fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }
}

macro_rules! row {
    ($($c:expr),* $(,)?) => { vec![$(Cell::from($c)),*] };
}

fn coord_columns(d: usize, prefix: &str) -> Vec<String> {
    (0..d).map(|j| format!("{prefix}{j}")).collect()
}

fn with_coords(mut columns: Vec<String>, at: usize, coords: Vec<String>) -> Vec<String> {
    columns.splice(at..at, coords);
    columns
}

fn coords(p: &[i64]) -> Vec<Cell> {
    p.iter().map(|&c| Cell::I(c)).collect()
}

fn cube(cfg: &ExperimentConfig) -> Result<PeriodicCube> {
    PeriodicCube::new(cfg.usize("d").map_err(|_| Error::Config { field: "d", reason: "must be positive".into() })?, cfg.usize("L").expect("validated"))
}

fn potential(cfg: &ExperimentConfig) -> Result<Potential> {
    match cfg.word("potential") {
        "quadratic" => Potential::quadratic(cfg.f64("c")),
        _ => Potential::dipole(cfg.f64("c"), cfg.f64("a")),
    }
}

fn count(cfg: &ExperimentConfig, key: &'static str) -> Result<usize> {
    cfg.usize(key).map_err(|_| Error::Config { field: key, reason: "must be a non-negative integer".into() })
}

fn environment(cfg: &ExperimentConfig) -> Result<EnvironmentSpec> {
    let p = potential(cfg)?;
    let sampler = match cfg.values().get("sampler").map(String::as_str) {
        Some("gaussian") => Sampler::Gaussian,
        _ => Sampler::Langevin,
    };
    Ok(EnvironmentSpec {
        cube: cube(cfg)?,
        potential: p,
        mass: cfg.f64("m"),
        map: CoefficientMap::HessianOfGradient(p),
        sampler,
        walk_dt: cfg.f64("walk_dt"),
        clock: cfg.f64("clock"),
        substeps: 1,
    })
}

fn seed(cfg: &ExperimentConfig, stream: u64) -> SeedRecord {
    SeedRecord::new(cfg.seed, stream)
}

fn twist(cfg: &ExperimentConfig, d: usize) -> Result<Vec<f64>> {
    let xi = cfg.f64_list("xi").expect("xi is a plain list");
    if xi.len() != d {
        return Err(Error::Config { field: "xi", reason: format!("need {d} components, got {}", xi.len()) });
    }
    Ok(xi)
}

fn samples(env: &EnvironmentSpec, slices: usize, n: usize, seed: SeedRecord) -> Result<Vec<CoefficientField>> {
    par_indexed(n, |i| env.coefficients(slices, seed.child(i as u64))).into_iter().collect()
}

fn q_rows(out: &mut Artifact, q: &QMatrix, label: Cell) {
    for j in 0..q.dim {
        for k in 0..q.dim {
            let e = j * q.dim + k;
            out.row(vec![label.clone(), q.eta.into(), j.into(), k.into(), q.re[e].into(), q.im[e].into(), q.se_re[e].into(), q.se_im[e].into()]);
        }
    }
}

pub fn compute(cfg: &ExperimentConfig) -> Result<Artifact> {
    match cfg.kind {
        Kind::HeatKernel => heat_kernel_table(cfg),
        Kind::SampleEnv => sample_env(cfg),
        Kind::Greens => greens(cfg),
        Kind::Corrector => corrector(cfg),
        Kind::QMatrix => qmatrix(cfg),
        Kind::AHom => ahom(cfg),
        Kind::AvgGreens => avg_greens(cfg),
        Kind::RateFit => rate(cfg),
        Kind::Correlate => correlate(cfg),
        Kind::Thm13 => thm13(cfg),
        Kind::Malliavin => malliavin(cfg),
        Kind::Poincare => poincare(cfg),
        Kind::SdeAppendix => sde_appendix(cfg),
    }
}

fn heat_kernel_table(cfg: &ExperimentConfig) -> Result<Artifact> {
    let d = count(cfg, "d")?;
    let radius = count(cfg, "radius")? as i64;
    let times = cfg.f64_list("t").expect("plain list");
    let columns = with_coords(vec!["t".into(), "solver".into(), "oracle".into(), "abs_error".into()], 1, coord_columns(d, "x"));
    let mut out = Artifact { columns, ..Artifact::default() };
    let mut sup: f64 = 0.0;
    let mut mass: f64 = 0.0;
    for (t, field) in times.iter().zip(heat_kernel_box(d, &times)?) {
        mass = mass.max((field.sum() - 1.0).abs());
        for k in 0..field.values().len() {
            let x = field.point(k);
            let oracle = heat_kernel(&x, *t)?;
            let err = (field.values()[k] - oracle).abs();
            sup = sup.max(err);
            if x.iter().all(|c| c.abs() <= radius) {
                let mut r = vec![Cell::F(*t)];
                r.extend(coords(&x));
                r.extend(row![field.values()[k], oracle, err]);
                out.row(r);
            }
        }
    }
    out.checks.push(Check::new("kernel_oracle", sup < 1e-10, format!("sup error {sup:.3e}")));
    out.checks.push(Check::new("mass", mass < 1e-10, format!("max |sum - 1| {mass:.3e}")));
    Ok(out)
}

fn sample_env(cfg: &ExperimentConfig) -> Result<Artifact> {
    let cube = cube(cfg)?;
    let p = potential(cfg)?;
    let mut lc = LangevinConfig::new(p, cfg.f64("m"), cfg.f64("dt"), count(cfg, "steps")?);
    lc.stride = count(cfg, "stride")?.max(1);
    let traj = langevin_simulate(&cube, &lc, seed(cfg, 0))?;
    let columns = with_coords(vec!["i".into(), "time".into(), "phi".into()], 2, coord_columns(cube.dim(), "x"));
    let mut out = Artifact { columns, ..Artifact::default() };
    for i in 0..traj.n_times() {
        for x in 0..cube.volume() {
            let mut r = row![i, traj.time(i)];
            r.extend(coords(&cube.coords(x)));
            r.push(traj.at(x, i).into());
            out.row(r);
        }
    }
    out.checks.push(Check::new("finite", traj.is_finite(), format!("{} slices", traj.n_times())));
    let coeff = coefficient_field(&traj, &CoefficientMap::HessianOfGradient(p)).and_then(|a| a.validate());
    out.checks.push(Check::new("coefficients_in_window", coeff.is_ok(), coeff.err().map_or_else(|| "ok".into(), |e| e.to_string())));
    Ok(out)
}

fn greens(cfg: &ExperimentConfig) -> Result<Artifact> {
    let env = environment(cfg)?;
    let steps = count(cfg, "steps")?;
    let a = env.coefficients(steps + 1, seed(cfg, 0))?;
    a.validate()?;
    let cube = a.cube().clone();
    let g = greens_backward(&a, cube.origin(), steps, 0)?;
    let columns = with_coords(vec!["i".into(), "s".into(), "G".into()], 2, coord_columns(cube.dim(), "y"));
    let mut out = Artifact { columns, ..Artifact::default() };
    for i in 0..=steps {
        for y in 0..cube.volume() {
            let mut r = row![i, g.time(i)];
            r.extend(coords(&cube.coords(y)));
            r.push(g.at(y, i).into());
            out.row(r);
        }
    }
    let rules = greens_sum_rules(&a, steps, 0)?;
    out.checks.push(Check::new(
        "sum_rules",
        rules.over_y < 1e-8 && rules.over_x < 1e-8,
        format!("max |sum_y - 1| {:.3e}, max |sum_x - 1| {:.3e}", rules.over_y, rules.over_x),
    ));
    out.checks.push(Check::new("nonnegative", rules.min_value >= 0.0, format!("min G {:.3e}", rules.min_value)));
    Ok(out)
}

fn corrector(cfg: &ExperimentConfig) -> Result<Artifact> {
    let env = environment(cfg)?;
    let a = env.coefficients(count(cfg, "slices")?, seed(cfg, 0))?;
    let xi = twist(cfg, a.cube().dim())?;
    let phi = corrector_solve(&a, &xi, cfg.f64("eta"))?;
    let cube = a.cube().clone();
    let columns = with_coords(vec!["k".into(), "i".into(), "re".into(), "im".into()], 2, coord_columns(cube.dim(), "x"));
    let mut out = Artifact { columns, ..Artifact::default() };
    for (k, comp) in phi.components.iter().enumerate() {
        for i in 0..a.n_times() {
            for x in 0..cube.volume() {
                let v = comp[i * cube.volume() + x];
                let mut r = row![k, i];
                r.extend(coords(&cube.coords(x)));
                r.extend(row![v.re, v.im]);
                out.row(r);
            }
        }
    }
    out.checks.push(Check::new("residual", phi.residual < 1e-10, format!("relative residual {:.3e}", phi.residual)));
    out.checks.push(Check::new(
        "energy_bound",
        phi.energy.holds(),
        format!("energy {:.6e} vs bound {:.6e}", phi.energy.energy, phi.energy.bound),
    ));
    Ok(out)
}

const Q_COLUMNS: [&str; 8] = ["stage", "eta", "j", "k", "re", "im", "se_re", "se_im"];

fn qmatrix(cfg: &ExperimentConfig) -> Result<Artifact> {
    let env = environment(cfg)?;
    let xi = twist(cfg, env.cube.dim())?;
    let a = samples(&env, count(cfg, "slices")?, count(cfg, "samples")?, seed(cfg, 0))?;
    let q = q_estimate(&a, &xi, cfg.f64("eta"))?;
    let mut out = Artifact::with_columns(&Q_COLUMNS);
    q_rows(&mut out, &q, "q".into());
    let window = env.potential.window();
    out.checks.push(Check::new(
        "within_window",
        q.within_window(&window, 3.0),
        format!("symmetrized eigenvalues {:?} in [{}, {}] up to 3 se", q.symmetrized().eigenvalues(), window.lambda(), window.upper()),
    ));
    Ok(out)
}

fn ahom(cfg: &ExperimentConfig) -> Result<Artifact> {
    let env = environment(cfg)?;
    let d = env.cube.dim();
    let xi = twist(cfg, d)?;
    let window = env.potential.window();
    let etas = cfg.f64_list("etas").unwrap_or_else(|| default_eta_ladder(window.upper()));
    let a = samples(&env, count(cfg, "slices")?, count(cfg, "samples")?, seed(cfg, 0))?;
    let qs = etas.iter().map(|&eta| q_estimate(&a, &xi, eta)).collect::<Result<Vec<_>>>()?;
    let h = a_hom_extract(&qs)?;
    let mut out = Artifact::with_columns(&Q_COLUMNS);
    for q in &qs {
        q_rows(&mut out, q, "q".into());
    }
    for j in 0..d {
        for k in 0..d {
            let e = j * d + k;
            out.row(row!["a_hom", 0.0, j, k, h.matrix.get(j, k), 0.0, h.statistical[e], h.spread[e]]);
        }
    }
    out.checks.push(Check::new(
        "a_hom_in_window",
        h.matrix.within(&window, h.uncertainty()),
        format!("eigenvalues {:?}, uncertainty {:.3e}", h.matrix.eigenvalues(), h.uncertainty()),
    ));
    out.checks.push(Check::new("monotone_ladder", !h.flagged, format!("{} ladder values", h.etas.len())));
    Ok(out)
}

fn avg_greens(cfg: &ExperimentConfig) -> Result<Artifact> {
    let env = environment(cfg)?;
    let times = cfg.f64_list("times").expect("plain list");
    let t = avg_greens_mc(&env, &times, count(cfg, "samples")?, seed(cfg, 0))?;
    let cube = env.cube.clone();
    let columns = with_coords(vec!["t".into(), "mean".into(), "se".into()], 1, coord_columns(cube.dim(), "x"));
    let mut out = Artifact { columns, ..Artifact::default() };
    for (k, time) in t.times.iter().enumerate() {
        for x in 0..cube.volume() {
            let mut r = row![*time];
            r.extend(coords(&cube.centered(x)));
            r.extend(row![t.mean[k][x], t.se[k][x]]);
            out.row(r);
        }
    }
    out.checks.push(Check::new("mass", t.mass_deviation < 1e-8, format!("max |sum - 1| {:.3e}", t.mass_deviation)));
    Ok(out)
}

fn rate(cfg: &ExperimentConfig) -> Result<Artifact> {
    let scales = cfg.f64_list("scales").expect("plain list");
    let values = cfg.f64_list("values").expect("plain list");
    if scales.len() != values.len() {
        return Err(Error::Config { field: "values", reason: format!("{} values for {} scales", values.len(), scales.len()) });
    }
    let floor = cfg.f64_list("floor");
    let offset = cfg.f64("offset");
    let model = match cfg.word("model") {
        "parabolic" => RateModel::Parabolic { offset },
        "elliptic" => RateModel::Elliptic { offset },
        _ => RateModel::Power,
    };
    let r = rate_fit(&scales, &values, model, floor.as_deref())?;
    let mut out = Artifact::with_columns(&["scale", "value", "residual"]);
    for ((s, v), e) in r.scales.iter().zip(&r.values).zip(&r.residuals) {
        out.row(row![*s, *v, *e]);
    }
    out.checks.push(Check::new(
        "positive_exponent",
        r.positive(),
        format!("alpha {:.4} [{:.4}, {:.4}]{}", r.alpha, r.alpha_lower, r.alpha_upper, if r.noise_dominated { ", noise dominated" } else { "" }),
    ));
    out.json = Some(json!({ "report": r }));
    Ok(out)
}

fn correlate(cfg: &ExperimentConfig) -> Result<Artifact> {
    let cube = cube(cfg)?;
    let p = potential(cfg)?;
    let m = cfg.f64("m");
    let offsets = cfg.points("offsets");
    if let Some(bad) = offsets.iter().find(|o| o.len() != cube.dim()) {
        return Err(Error::Config { field: "offsets", reason: format!("offset {bad:?} needs {} coordinates", cube.dim()) });
    }
    let spec = CorrelationSpec::new(cube.clone(), p, m, offsets, count(cfg, "samples")?);
    let t = correlation_identity_check(&spec, seed(cfg, 0))?;
    let exact = match p {
        Potential::Quadratic { c } => Some(quadratic_resolvent(&cube, c, m, 1e-14)?),
        _ => None,
    };
    let columns = with_coords(
        ["lhs", "lhs_se", "rhs", "rhs_se", "difference", "sigma", "z", "exact"].map(String::from).to_vec(),
        0,
        coord_columns(cube.dim(), "x"),
    );
    let mut out = Artifact { columns, ..Artifact::default() };
    let mut rhs_err: f64 = 0.0;
    for r in &t.rows {
        let e = exact.as_ref().map_or(f64::NAN, |v| v[cube.index(&r.offset)]);
        if exact.is_some() {
            rhs_err = rhs_err.max((r.rhs.mean - e).abs());
        }
        let mut cells = coords(&r.offset);
        cells.extend(row![r.lhs.mean, r.lhs.se, r.rhs.mean, r.rhs.se, r.difference, r.sigma, r.z(), e]);
        out.row(cells);
    }
    out.checks.push(Check::new("identity_3sigma", t.passes(3.0), format!("max z {:.3}, acceptance {:.3}", t.max_z(), t.acceptance)));
    if exact.is_some() {
        out.checks.push(Check::new("rhs_exact", rhs_err < 1e-4, format!("max |rhs - exact| {rhs_err:.3e}")));
    }
    Ok(out)
}

fn thm13(cfg: &ExperimentConfig) -> Result<Artifact> {
    let cube = cube(cfg)?;
    let mut spec = DecaySpec::new(cube, potential(cfg)?, cfg.f64_list("masses").expect("plain list"), cfg.i64_list("scales"));
    spec.environments = count(cfg, "environments")?;
    let r = thm13_decay_check(&spec, seed(cfg, 0))?;
    let mut out = Artifact::with_columns(&["level", "mass", "scale", "mean", "se"]);
    for l in &r.levels {
        let name = serde_json::to_value(l.level).expect("serializable").as_str().unwrap_or_default().to_string();
        for (mass, row) in r.masses.iter().zip(&l.by_mass) {
            for (s, e) in l.scales.iter().zip(row) {
                out.row(row![name.clone(), *mass, *s, e.mean, e.se]);
            }
        }
        for (s, e) in l.scales.iter().zip(&l.extrapolated) {
            out.row(row![name.clone(), 0.0, *s, e.mean, e.se]);
        }
        out.checks.push(Check::new(
            &format!("{name}_exponent"),
            l.rate.positive(),
            format!("alpha {:.4} [{:.4}, {:.4}]", l.rate.alpha, l.rate.alpha_lower, l.rate.alpha_upper),
        ));
    }
    out.json = Some(json!({ "a_hom": r.a_hom, "remainder_bound": r.remainder_bound, "rates": r.levels.iter().map(|l| &l.rate).collect::<Vec<_>>() }));
    Ok(out)
}

fn malliavin(cfg: &ExperimentConfig) -> Result<Artifact> {
    let cube = cube(cfg)?;
    let mut spec =
        MalliavinSpec::new(cube, potential(cfg)?, cfg.f64("m"), cfg.i64_list("y"), cfg.f64("s"), cfg.i64_list("x"), cfg.f64("t"));
    spec.dt = cfg.f64("dt");
    spec.delta = cfg.f64("delta");
    let r = malliavin_refinement(&spec, seed(cfg, 0))?;
    let mut out = Artifact::with_columns(&["dt", "finite_difference", "formula", "rel_error"]);
    for (dt, rep) in [(spec.dt, r.coarse), (spec.dt / 2.0, r.fine)] {
        out.row(row![dt, rep.fd_value, rep.formula_value, rep.rel_error]);
    }
    out.checks.push(Check::new("relative_error", r.coarse.rel_error < 1e-3, format!("{:.3e} at dt", r.coarse.rel_error)));
    out.checks.push(Check::new("first_order", (r.ratio - 0.5).abs() <= 0.1, format!("error ratio {:.4}", r.ratio)));
    Ok(out)
}

fn poincare(cfg: &ExperimentConfig) -> Result<Artifact> {
    let cube = cube(cfg)?;
    let d = cube.dim();
    let weights: Vec<f64> = (0..cube.volume()).map(|x| if x % 3 == 0 { 1.0 } else { -0.5 }).collect();
    let other: Vec<i64> = (0..d as i64).map(|j| j + 1).collect();
    let spec = PoincareSpec {
        potential: potential(cfg)?,
        mass: cfg.f64("m"),
        dt: cfg.f64("dt"),
        horizon: cfg.f64("T"),
        samples: count(cfg, "samples")?,
        functionals: vec![Functional::Tanh { site: vec![0; d] }, Functional::Linear { weights }, Functional::Square { site: other }],
        cube,
    };
    let rows = poincare_variance_check(&spec, seed(cfg, 0))?;
    let mut out = Artifact::with_columns(&["functional", "variance", "bound", "bound_se", "ratio", "ratio_se"]);
    for r in &rows {
        out.row(row![r.functional.clone(), r.variance, r.derivative_bound.mean, r.derivative_bound.se, r.ratio, r.ratio_se]);
        out.checks.push(Check::new(&r.functional, r.passes(3.0), format!("ratio {:.4} ± {:.4}", r.ratio, r.ratio_se)));
    }
    Ok(out)
}

fn sde_appendix(cfg: &ExperimentConfig) -> Result<Artifact> {
    let dt = cfg.f64("dt");
    let mut verdicts: Vec<Verdict> = Vec::new();
    let moment_cases = [
        (SymMatrix::diagonal(&[2.0]), vec![0.0], vec![0.0, 1.0]),
        (SymMatrix::diagonal(&[1.0, 4.0]), vec![1.0, 1.0], vec![0.0, 0.5, 2.0]),
    ];
    for (i, (a, b, lags)) in moment_cases.into_iter().enumerate() {
        let r = stationary_moments_check(&MomentsSpec::new(a, b, lags, count(cfg, "samples")?), seed(cfg, i as u64))?;
        verdicts.extend(r.verdicts.into_iter().map(|mut v| {
            v.name = format!("moments{i}/{}", v.name);
            v
        }));
    }
    let quad = ConvexPotential::quadratic(SymMatrix::new(2, vec![1.0, 0.3, 0.3, 2.0])?, vec![0.5, -0.2])?;
    let conv = pathwise_em_error(&quad, &[0.04, 0.02, 0.01], 4.0, 32, 24, seed(cfg, 10))?;
    for (k, q) in conv.ratios.iter().enumerate() {
        verdicts.push(Verdict { name: format!("em_ratio{k}"), estimate: *q, oracle: 0.5, sigma: 0.1, pass: (q - 0.5).abs() <= 0.1 });
    }
    let w = ConvexPotential::cosine_perturbed(SymMatrix::identity(1), cfg.f64("eps"))?;
    let f = |x: &[f64]| x[0].cos();
    let fk = feynman_kac_estimate(&w, &f, cfg.f64("T"), dt, count(cfg, "paths")?, seed(cfg, 20))?;
    let ta = time_average_estimate(&w, &f, dt, cfg.f64("duration"), 20.0, seed(cfg, 21))?;
    let sigma = (fk.se * fk.se + ta.se * ta.se).sqrt();
    verdicts.push(Verdict {
        name: "path_weight_vs_time_average".into(),
        estimate: fk.estimate,
        oracle: ta.mean,
        sigma,
        pass: (fk.estimate - ta.mean).abs() <= 3.0 * sigma && !fk.flagged,
    });
    let quad_scan = action_concavity_scan(&quad, 60, 0.25, 20, 6.0, 1.0, 1e-9, seed(cfg, 30))?;
    let cos_scan = action_concavity_scan(&w, 200, 0.1, 40, 6.0, 0.3, 1e-9, seed(cfg, 31))?;
    verdicts.push(Verdict {
        name: "action_concave_quadratic".into(),
        estimate: quad_scan.min_eigenvalue,
        oracle: 0.0,
        sigma: 0.0,
        pass: quad_scan.log_concave(),
    });
    verdicts.push(Verdict {
        name: "action_not_concave_perturbed".into(),
        estimate: cos_scan.min_eigenvalue,
        oracle: 0.0,
        sigma: 0.0,
        pass: cos_scan.negative_paths > 0,
    });
    let mut out = Artifact::with_columns(&["check", "estimate", "oracle", "sigma", "pass"]);
    for v in &verdicts {
        out.row(row![v.name.clone(), v.estimate, v.oracle, v.sigma, i64::from(v.pass)]);
        out.checks.push(Check::new(&v.name, v.pass, format!("{:.6e} vs {:.6e} (sigma {:.3e})", v.estimate, v.oracle, v.sigma)));
    }
    out.json = Some(json!({
        "verdicts": verdicts,
        "path_weight": { "estimate": fk.estimate, "se": fk.se, "ess": fk.ess, "paths": fk.paths, "flagged": fk.flagged },
        "em_errors": { "dts": conv.dts, "errors": conv.errors, "ratios": conv.ratios },
    }));
    Ok(out)
}
