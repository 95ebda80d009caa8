//! Full pipeline run at default parameters. Prints one line per check and
//! exits non-zero if any check fails.

use porcupine::acceptance::{all_passed, run_suite, Status, SuiteOptions};
use porcupine::Config;

fn main() {
    let outcomes = run_suite(&Config::default(), &SuiteOptions::default(), |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| o.status == Status::Fail).count();
    println!("acceptance: {} checks, {failed} failed", outcomes.len());
    if !all_passed(&outcomes) {
        std::process::exit(1);
    }
}
