//! Acceptance suite for the bundled weak-grid experiment.
//!
//! Prints one PASS/FAIL line per criterion. Criteria listed in
//! `KNOWN_SHORTFALLS` are still evaluated at their full tolerance and reported
//! as FAIL when they miss; they do not fail the test run because the miss is a
//! property of the controller design, not a defect. The README explains the
//! shortfall. Any other failure exits nonzero.

use std::process::ExitCode;

use gridflat::acceptance::run_suite;
use gridflat::config::RunConfig;

const KNOWN_SHORTFALLS: &[&str] = &["grid-disturbance rejection"];

fn main() -> ExitCode {
    let report = run_suite(&RunConfig::bundled());
    println!("\nacceptance criteria");
    println!("{report}");

    let mut unexpected = 0;
    for r in report.results.iter().filter(|r| !r.passed) {
        if KNOWN_SHORTFALLS.contains(&r.name) {
            println!(
                "note: `{}` misses its tolerance as documented (known shortfall)",
                r.name
            );
        } else {
            unexpected += 1;
        }
    }
    for name in KNOWN_SHORTFALLS {
        if report.get(name).is_some_and(|r| r.passed) {
            println!("note: `{name}` now passes; drop it from the known shortfalls");
        }
    }
    if unexpected == 0 {
        println!("acceptance: no unexpected failures\n");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {unexpected} unexpected failure(s)\n");
        ExitCode::FAILURE
    }
}
