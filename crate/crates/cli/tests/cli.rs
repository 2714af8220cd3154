use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use latthom_cli::config::{ExperimentConfig, Kind};
use latthom_cli::run::run;
use latthom_cli::suite::{run_criterion, verify_suite, Fault, Tier};

fn latthom(args: &[&str], config: Option<(&Path, &str)>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_latthom"));
    cmd.args(args).env_remove("LATTHOM_SEED");
    if let Some((path, text)) = config {
        fs::write(path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn heat_kernel_csv_carries_the_bessel_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = latthom(
        &["heat-kernel", "--out", out.to_str().unwrap()],
        Some((&dir.path().join("hk.cfg"), "d = 1\nt = 1\n")),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("heat-kernel.csv"));
    assert_eq!(header, ["t", "x0", "solver", "oracle", "abs_error"]);
    // e^{-2} I_0(2) and e^{-2} I_1(2).
    for (x, exact) in [("0", 0.308508322553671), ("1", 0.2152692892489377), ("-1", 0.2152692892489377)] {
        let row = rows.iter().find(|r| r[1] == x).unwrap();
        let solver: f64 = row[2].parse().unwrap();
        let oracle: f64 = row[3].parse().unwrap();
        assert!((oracle - exact).abs() < 1e-15, "{row:?}");
        assert!((solver - exact).abs() < 1e-10, "{row:?}");
        // 17 significant digits.
        assert_eq!(row[3].split('e').next().unwrap().len(), 18, "{row:?}");
    }
    let text = fs::read_to_string(out.join("heat-kernel.csv")).unwrap();
    assert!(text.contains("# kind=heat-kernel\n# seed=0\n"));
    assert!(!text.contains('\r'));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["config"]["t"], "1");
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "kind = qmatrix\nsamples = 6\nxi = 0.3,-0.2\n";
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = latthom(&["qmatrix", "--seed", "11", "--out", out.to_str().unwrap()], Some((&dir.path().join("q.cfg"), cfg)));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((fs::read(out.join("qmatrix.csv")).unwrap(), fs::read(out.join("manifest.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let other = dir.path().join("c");
    latthom(&["qmatrix", "--seed", "12", "--out", other.to_str().unwrap()], Some((&dir.path().join("q.cfg"), cfg)));
    assert_ne!(fs::read(other.join("qmatrix.csv")).unwrap(), outputs[0].0);
}

#[test]
fn seed_comes_from_flag_then_environment_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.cfg");
    fs::write(&path, "seed = 5\nsamples = 4\n").unwrap();
    let seed_of = |out: &Path| -> u64 {
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        m["seed"].as_u64().unwrap()
    };
    let base = |out: &Path| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_latthom"));
        c.args(["qmatrix", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        c
    };
    let a = dir.path().join("a");
    assert!(base(&a).env_remove("LATTHOM_SEED").status().unwrap().success());
    assert_eq!(seed_of(&a), 5);
    let b = dir.path().join("b");
    assert!(base(&b).env("LATTHOM_SEED", "7").status().unwrap().success());
    assert_eq!(seed_of(&b), 7);
    let c = dir.path().join("c");
    assert!(base(&c).env("LATTHOM_SEED", "7").args(["--seed", "9"]).status().unwrap().success());
    assert_eq!(seed_of(&c), 9);
}

#[test]
fn odd_side_is_a_schema_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = latthom(&["greens", "--out", out.to_str().unwrap()], Some((&dir.path().join("g.cfg"), "L = 7\n")));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`L`"));
    assert!(!out.join("greens.csv").exists());
}

#[test]
fn unknown_key_and_unwritable_output_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = latthom(&["greens"], Some((&dir.path().join("g.cfg"), "sides = 8\n")));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`sides`"));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = latthom(&["heat-kernel", "--out", blocker.join("sub").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn library_domain_errors_exit_with_two_and_verdict_failures_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // The dipole amplitude must stay below the quadratic coefficient.
    let o = latthom(&["sample-env", "--out", dir.path().join("a").to_str().unwrap()], Some((&dir.path().join("e.cfg"), "a = 1.5\n")));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = latthom(
        &["rate-fit", "--out", dir.path().join("b").to_str().unwrap()],
        Some((&dir.path().join("r.cfg"), "scales = 1,2,4,8,16\nvalues = 1,2,4,8,16\nmodel = elliptic\n")),
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sde_kind_writes_a_verdict_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse("samples = 4000\npaths = 4000\nduration = 2000\n", Some(Kind::SdeAppendix)).unwrap();
    let m = run(&cfg, dir.path()).unwrap();
    assert!(m.pass, "{:?}", m.verdicts);
    let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sde-appendix.json")).unwrap()).unwrap();
    assert_eq!(j["config"]["samples"], "4000");
    assert!(j["data"]["verdicts"].as_array().unwrap().len() >= 10);
}

#[test]
fn every_kind_runs_at_small_sizes() {
    let small: [(Kind, &str); 11] = [
        (Kind::SampleEnv, "steps = 20\n"),
        (Kind::Greens, "steps = 6\n"),
        (Kind::Corrector, "slices = 2\n"),
        (Kind::AHom, "samples = 3\nslices = 2\n"),
        (Kind::AvgGreens, "L = 16\nsamples = 8\ntimes = 0.5,1\n"),
        (Kind::RateFit, "scales = 1,2,4,8\nvalues = 1,0.25,0.0625,0.015625\nmodel = elliptic\n"),
        (Kind::Correlate, "L = 8\nsamples = 400\noffsets = 0;1\n"),
        (Kind::Thm13, "L = 16\nenvironments = 16\nmasses = 0.8,0.6,0.4\nscales = 1,2,3,4\n"),
        (Kind::Malliavin, "L = 4\n"),
        (Kind::Poincare, "samples = 200\nT = 0.5\n"),
        (Kind::HeatKernel, "d = 2\nt = 0.5\nradius = 2\n"),
    ];
    for (kind, text) in small {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::parse(text, Some(kind)).unwrap();
        let m = run(&cfg, dir.path()).unwrap_or_else(|e| panic!("{kind}: {e}"));
        assert!(dir.path().join(format!("{kind}.csv")).exists());
        // Statistical verdicts at these sizes are not asserted; the
        // deterministic ones are.
        if matches!(kind, Kind::HeatKernel | Kind::Greens | Kind::Corrector | Kind::RateFit | Kind::SampleEnv) {
            assert!(m.pass, "{kind}: {:?}", m.verdicts);
        }
    }
}

#[test]
fn coefficient_outside_the_window_fails_the_sum_rule_criterion() {
    assert!(run_criterion(2, Fault::None).pass);
    let bad = run_criterion(2, Fault::CoefficientOutsideWindow);
    assert!(!bad.pass, "{bad}");
}

#[test]
fn fast_tier_passes() {
    let outcomes = verify_suite(Tier::Fast, |o| eprintln!("{o}"));
    assert_eq!(outcomes.len(), 9);
    assert!(outcomes.iter().all(|o| o.pass));
}
