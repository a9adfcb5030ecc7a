//! Acceptance suite: one line per criterion, exit status 1 if any fails.

use hdflow::suite::{run_criterion, DEFAULT_SEED};

fn main() {
    let seed = std::env::var("HDFLOW_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED);
    println!("acceptance suite, seed {seed}");
    let mut failed = 0;
    for id in 1..=10 {
        let r = run_criterion(id, seed);
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
