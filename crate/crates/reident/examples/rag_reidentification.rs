//! The retrieval-augmented attack on a synthetic linkage scenario: the
//! masked ruling can only be re-identified by combining clues spread over
//! three news articles. With the clue articles indexed the pipeline names
//! the person at rank 1; with only unrelated articles it misses.
//!
//! Run with: cargo run --example rag_reidentification

use reident::backends::{mock::HashEmbedderMock, resolve_backend, BackendSpec};
use reident::rag::{chunk_articles, ChunkIndex, RagPipeline, DEFAULT_CHUNK_SIZE};
use reident::synthetic::linkage_fixture;

fn main() {
    let fixture = linkage_fixture();
    println!("ruling:\n  {}\n", fixture.ruling.masked_text);
    println!("hidden target: {}\n", fixture.target.full_name);

    let embedder = HashEmbedderMock::new(256);
    let summarizer_spec = BackendSpec::for_locator("mock:lead:2");
    let summarizer = resolve_backend(&summarizer_spec).unwrap();
    let responder_spec = BackendSpec::for_locator("mock:context_chain");
    let responder = resolve_backend(&responder_spec).unwrap();
    let pipeline = RagPipeline::new(summarizer.as_ref(), responder.as_ref(), &embedder);

    // condition 1: the clue articles are in the index
    let index = ChunkIndex::build(
        chunk_articles(&fixture.all_articles(), DEFAULT_CHUNK_SIZE),
        &embedder,
    )
    .unwrap();
    let outcome = pipeline.reidentify(&fixture.ruling, &index).unwrap();
    println!("with clue articles indexed:");
    println!("  summary: {}", outcome.summary);
    for r in &outcome.retrieved {
        println!("  rank {}: {} (cosine {:.3})", r.rank, r.chunk_id, r.similarity);
    }
    println!("  candidates: {:?}\n", outcome.predictions.predictions);

    // condition 2: only unrelated articles are in the index
    let index = ChunkIndex::build(
        chunk_articles(&fixture.unrelated_articles, DEFAULT_CHUNK_SIZE),
        &embedder,
    )
    .unwrap();
    let outcome = pipeline.reidentify(&fixture.ruling, &index).unwrap();
    println!("with only unrelated articles indexed:");
    println!("  candidates: {:?}", outcome.predictions.predictions);
}
