//! Every acceptance criterion at its declared size and tolerance.

use std::process::ExitCode;

use latthom_cli::suite::{verify_suite, Tier};

fn main() -> ExitCode {
    let outcomes = verify_suite(Tier::Full, |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
