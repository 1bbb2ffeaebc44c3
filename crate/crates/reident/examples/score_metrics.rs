//! Scores a handful of prediction sets with the four name-matching
//! metrics and prints the per-example and aggregated values.
//!
//! Run with: cargo run --example score_metrics

use reident::metrics::{aggregate, levenshtein, min_nld, score_example, DEFAULT_ALPHA};
use reident::model::{normalize_name, DecodingSpec, PredictionSet};

fn main() {
    // The worked example: "Alice Cooper" guessed for "Alina Cooper" is two
    // edits away, normalized by the 12-character target name.
    let target = normalize_name("Alina Cooper").unwrap();
    let guess = PredictionSet::new(
        "worked-example",
        vec!["Alice Cooper".into()],
        5,
        "demo",
        DecodingSpec::default(),
    )
    .unwrap();
    println!(
        "levenshtein(\"Alice Cooper\", \"Alina Cooper\") = {}",
        levenshtein("Alice Cooper", "Alina Cooper")
    );
    println!(
        "min_nld = {:.4} (rounds to 0.17)\n",
        min_nld(&target, &guess).unwrap()
    );

    // A small corpus: one perfect hit, one partial hit, one miss.
    let cases = [
        ("doc-a", "George Orwell", vec!["George Orwell", "Aldous Huxley"]),
        ("doc-b", "George Orwell", vec!["Max Orwell", "Eric Blair"]),
        ("doc-c", "George Orwell", vec!["Jane Austen", "Mary Shelley"]),
    ];
    let mut per_example = Vec::new();
    for (id, name, predictions) in cases {
        let target = normalize_name(name).unwrap();
        let set = PredictionSet::new(
            id,
            predictions.iter().map(|s| s.to_string()).collect(),
            5,
            "demo",
            DecodingSpec::default(),
        )
        .unwrap();
        let scores = score_example(&target, &set).unwrap();
        println!(
            "{id}: pnms_hit={} lnms_hit={} min_nld={:.4}  predictions={predictions:?}",
            scores.pnms_hit, scores.lnms_hit, scores.min_nld
        );
        per_example.push(scores);
    }

    let scores = aggregate(&per_example, DEFAULT_ALPHA).unwrap();
    println!(
        "\ncorpus: PNMS={:.4} LNMS={:.4} NLD={:.4} W-PNMS={:.4} (alpha={})",
        scores.pnms, scores.lnms, scores.nld, scores.w_pnms, scores.alpha
    );
}
