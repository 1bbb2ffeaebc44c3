//! Sweeps the input-length dimension with a backend whose accuracy is a
//! step function of the visible characters, and prints the resulting
//! monotone score curve as CSV.
//!
//! Run with: cargo run --example input_length_sweep

use reident::harness::{sweep, sweep_csv, Registry, RunConfig};
use reident::synthetic::wiki_corpus;

fn main() {
    let registry = Registry::with_defaults();
    let corpus = wiki_corpus(40, 5);

    // the mock answers correctly once it sees at least 1200 characters
    let configs: Vec<RunConfig> = [250, 500, 1000, 2000, 4000]
        .into_iter()
        .map(|max_chars| RunConfig::new("mock:step:1200").with_max_chars(max_chars))
        .collect();

    let results = sweep(&configs, &corpus, &registry);
    print!("{}", sweep_csv(&configs, &results));

    let pnms: Vec<f64> = results
        .iter()
        .map(|r| r.as_ref().unwrap().scores.as_ref().unwrap().pnms)
        .collect();
    let monotone = pnms.windows(2).all(|w| w[1] >= w[0]);
    println!("\nPNMS curve: {pnms:?}");
    println!("non-decreasing in input length: {monotone}");
}
