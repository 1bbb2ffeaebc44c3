//! Runs the corpus-construction pipeline on one raw page: length filter,
//! entity masking against the page title, early-mask validation and a
//! sentence-level paraphrase pass.
//!
//! Run with: cargo run --example mask_corpus

use reident::masking::{
    process_record, split_sentences, EntitySpan, MaskingOptions, RawRecord, SpanLabel,
};

fn main() {
    let opening = "Gertrude Scharff Goldhaber was a nuclear physicist. \
                   She married Maurice Goldhaber in 1939. ";
    let mut text = opening.to_owned();
    while text.chars().count() <= 4000 {
        text.push_str(
            "The laboratory archives preserve notebooks from those years. \
             Colleagues recalled long discussions in the seminar room. ",
        );
    }

    // spans as a NER tagger would emit them (character offsets)
    let record = RawRecord {
        id: "goldhaber".into(),
        title: "Gertrude Scharff Goldhaber".into(),
        text,
        spans: vec![
            EntitySpan {
                start: 0,
                end: 26,
                surface: "Gertrude Scharff Goldhaber".into(),
                label: SpanLabel::Person,
            },
            EntitySpan {
                start: 64,
                end: 81,
                surface: "Maurice Goldhaber".into(),
                label: SpanLabel::Person,
            },
        ],
    };

    // a toy paraphraser that rewrites each sentence
    let provider = |sentence: &str| Ok(format!("In other words: {sentence}"));

    let (doc, report) = process_record(&record, &MaskingOptions::default(), Some(&provider)).unwrap();
    let doc = doc.expect("record passes every filter");

    println!("masked {} entity spans\n", report.masked_count);
    println!("masked text starts:\n  {}\n", &doc.masked_text[..120]);
    let para = doc.paraphrased_text.as_deref().unwrap();
    println!("paraphrased text starts:\n  {}\n", &para[..140]);
    println!(
        "original has {} sentences, paraphrase has {}",
        split_sentences(doc.original_text.as_deref().unwrap()).len(),
        split_sentences(para).len()
    );
}
