//! Shows the calibration floors: on a corpus whose targets share no token
//! with the name pools both baselines score exactly zero, and the random
//! baseline is reproducible from its seed.
//!
//! Run with: cargo run --example baseline_floor

use reident::baselines::{majority_names, random_names, NamePool};
use reident::harness::{run, report_json, Registry, RunConfig};
use reident::synthetic::{disjoint_corpus, overlap_corpus};

fn main() {
    let pool = NamePool::bundled_random();
    println!("random pool sample (seed 7):  {:?}", random_names(&pool, 7, 5).unwrap());
    println!("random pool sample (seed 7):  {:?}", random_names(&pool, 7, 5).unwrap());
    let majority = NamePool::bundled_majority();
    println!("majority pairings:            {:?}\n", majority_names(&majority, 5).unwrap());

    let registry = Registry::with_defaults();
    let disjoint = disjoint_corpus(200, 3);
    for mode in ["baseline:random", "baseline:majority"] {
        let report = run(&RunConfig::new(mode), &disjoint, &registry).unwrap();
        let s = report.scores.unwrap();
        println!(
            "{mode} on token-disjoint targets: PNMS={} LNMS={} (exact zeros expected)",
            s.pnms, s.lnms
        );
    }

    let overlap = overlap_corpus(200, 3, &pool);
    let report = run(&RunConfig::new("baseline:random"), &overlap, &registry).unwrap();
    let s = report.scores.unwrap();
    println!(
        "\nbaseline:random on half-overlapping targets: PNMS={:.4} (non-zero by construction)",
        s.pnms
    );

    let a = report_json(&run(&RunConfig::new("baseline:random"), &overlap, &registry).unwrap());
    let b = report_json(&run(&RunConfig::new("baseline:random"), &overlap, &registry).unwrap());
    println!("two runs with one seed are byte-identical: {}", a == b);
}
