//! Classifies raw predictions against a ruling into the error-analysis
//! categories and prints the histogram.
//!
//! Run with: cargo run --example categorize_predictions

use reident::categorize::{categorize, histogram, NameGazetteer};

fn main() {
    let ruling = "Verfahrensbeteiligte <mask>, Beschwerdeführer, gegen Betreibungsamt des \
                  Sensebezirks, vertreten durch Anwaltskanzlei Keller.";
    let gazetteer = NameGazetteer::bundled();

    let predictions = [
        "Bruno Vogelsang",
        "Beschwerdeführer",
        "X.__",
        "A.___",
        "<mask>",
        "",
        "\n",
        "I don't know",
        "Keller",
        "James Smith",
    ];

    let mut categories = Vec::new();
    for prediction in predictions {
        let category = categorize(prediction, ruling, "<mask>", &gazetteer);
        println!("{:<18} -> {}", format!("{prediction:?}"), category.as_str());
        categories.push(category);
    }

    println!("\nhistogram:");
    for (category, count) in histogram(categories.iter()) {
        println!("  {:<14} {count}", category.as_str());
    }
}
