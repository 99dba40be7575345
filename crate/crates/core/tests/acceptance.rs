//! Runs every acceptance criterion and prints one line per criterion.
//! Built without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use probsum_core::acceptance::{RunContext, CRITERIA, DEFAULT_SEED};

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are passed through; honour a filter
    // by matching criterion keys.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for c in CRITERIA {
            println!("{}: test", c.key);
        }
        return ExitCode::SUCCESS;
    }
    let ctx = RunContext::new(DEFAULT_SEED);
    let mut failed = Vec::new();
    for c in CRITERIA.iter().filter(|c| args.is_empty() || args.iter().any(|a| c.key.contains(a.as_str()))) {
        let r = c.run(&ctx);
        println!("{}", r.line());
        if !r.passed {
            failed.push(r.id);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {:?}", failed);
        ExitCode::FAILURE
    }
}
