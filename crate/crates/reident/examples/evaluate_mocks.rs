//! Evaluates several backends over one synthetic corpus and prints a small
//! leaderboard: the oracle mock (upper bound), both guessing baselines
//! (floor), and a constant-wrong mock (zero).
//!
//! Run with: cargo run --example evaluate_mocks

use reident::harness::{run, Registry, RunConfig};
use reident::synthetic::wiki_corpus;

fn main() {
    let registry = Registry::with_defaults();
    let corpus = wiki_corpus(60, 11);

    println!(
        "{:<20} {:>7} {:>7} {:>7} {:>7}",
        "backend", "PNMS", "LNMS", "NLD", "W-PNMS"
    );
    for backend in [
        "mock:oracle",
        "baseline:majority",
        "baseline:random",
        "mock:wrong",
    ] {
        let config = RunConfig::new(backend);
        let report = run(&config, &corpus, &registry).unwrap();
        let s = report.scores.expect("labeled corpus");
        println!(
            "{backend:<20} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            s.pnms, s.lnms, s.nld, s.w_pnms
        );
    }
}
