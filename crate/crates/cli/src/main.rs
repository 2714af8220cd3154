use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use latthom_cli::config::{ExperimentConfig, Kind, SEED_ENV};
use latthom_cli::run::{run, RunError};
use latthom_cli::suite::{verify_suite, Tier};

#[derive(Parser)]
#[command(name = "latthom", version, about = "Random-environment homogenization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the file and the environment.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    #[command(name = "heat-kernel")]
    HeatKernel(RunArgs),
    #[command(name = "sample-env")]
    SampleEnv(RunArgs),
    Greens(RunArgs),
    Corrector(RunArgs),
    Qmatrix(RunArgs),
    Ahom(RunArgs),
    #[command(name = "avg-greens")]
    AvgGreens(RunArgs),
    #[command(name = "rate-fit")]
    RateFit(RunArgs),
    Correlate(RunArgs),
    Thm13(RunArgs),
    Malliavin(RunArgs),
    Poincare(RunArgs),
    #[command(name = "sde-appendix")]
    SdeAppendix(RunArgs),
    /// Runs the acceptance battery and prints one line per criterion.
    Verify {
        #[arg(long, default_value = "fast")]
        tier: Tier,
    },
}

fn experiment(kind: Kind, args: RunArgs) -> Result<u8, RunError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| latthom_cli::config::ConfigError::new("config", format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse(&text, Some(kind))?;
    if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.seed = s.parse().map_err(|_| latthom_cli::config::ConfigError::new(SEED_ENV, format!("expected a u64, got `{s}`")))?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    eprint!("{}", cfg.canonical());
    let manifest = run(&cfg, &args.out)?;
    for v in &manifest.verdicts {
        println!("{:<36} {}  {}", v.name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    Ok(manifest.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Verify { tier } => {
            let outcomes = verify_suite(tier, |o| println!("{o}"));
            let failed = outcomes.iter().filter(|o| !o.pass).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            return ExitCode::from(u8::from(failed > 0));
        }
        Command::HeatKernel(a) => (Kind::HeatKernel, a),
        Command::SampleEnv(a) => (Kind::SampleEnv, a),
        Command::Greens(a) => (Kind::Greens, a),
        Command::Corrector(a) => (Kind::Corrector, a),
        Command::Qmatrix(a) => (Kind::QMatrix, a),
        Command::Ahom(a) => (Kind::AHom, a),
        Command::AvgGreens(a) => (Kind::AvgGreens, a),
        Command::RateFit(a) => (Kind::RateFit, a),
        Command::Correlate(a) => (Kind::Correlate, a),
        Command::Thm13(a) => (Kind::Thm13, a),
        Command::Malliavin(a) => (Kind::Malliavin, a),
        Command::Poincare(a) => (Kind::Poincare, a),
        Command::SdeAppendix(a) => (Kind::SdeAppendix, a),
    };
    match experiment(kind, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
