//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The reference benchmark numbers of the original study require corpora
//! and hosted models that are not reproducible at desk scale; these
//! criteria instead pin the arithmetic identities, the property contracts,
//! and the end-to-end shape behavior that the toolkit guarantees.

use std::collections::HashMap;

use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reident::backends::mock::HashEmbedderMock;
use reident::backends::{resolve_backend, BackendSpec, Embedder, PredictRequest};
use reident::baselines::NamePool;
use reident::harness::{run, sweep, Registry, RunConfig, TextVariant};
use reident::metrics::{
    aggregate, levenshtein, min_nld, pnms_match, score_example, MetricScores, PerExampleScores,
    DEFAULT_ALPHA,
};
use reident::model::{normalize_name, DecodingSpec, PredictionSet};
use reident::rag::{
    chunk_articles, compose_reidentification_prompt, cosine_similarity, query, Chunk, ChunkIndex,
    DEFAULT_CHUNK_SIZE,
};
use reident::synthetic::{disjoint_corpus, linkage_fixture, overlap_corpus, wiki_corpus};

/// Independent edit-distance oracle: memoized top-down recursion.
fn recursive_levenshtein(a: &str, b: &str) -> usize {
    fn go(a: &[char], b: &[char], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        let key = (a.len(), b.len());
        if let Some(&d) = memo.get(&key) {
            return d;
        }
        let d = if a[0] == b[0] {
            go(&a[1..], &b[1..], memo)
        } else {
            1 + go(&a[1..], &b[1..], memo)
                .min(go(&a[1..], b, memo))
                .min(go(a, &b[1..], memo))
        };
        memo.insert(key, d);
        d
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    go(&a, &b, &mut HashMap::new())
}

fn prediction_set(doc: &str, predictions: Vec<String>) -> PredictionSet {
    let n = predictions.len().max(1);
    PredictionSet::new(doc, predictions, n, "test", DecodingSpec::default()).unwrap()
}

#[test]
fn criterion_1_nld_worked_example() {
    let target = normalize_name("Alina Cooper").unwrap();
    let set = prediction_set("c1", vec!["Alice Cooper".into()]);
    let got = min_nld(&target, &set).unwrap();
    assert!(
        (got - 0.1667).abs() <= 1e-4 + 1e-12,
        "min_nld = {got}, expected 0.1667 +/- 0.0001"
    );
    // the reported two-decimal figure truncates to 0.16
    assert_eq!((got * 100.0).floor() / 100.0, 0.16);
    println!("ACCEPTANCE C1 PASS - NLD worked example: {got:.4} (reported 0.16)");
}

#[test]
fn criterion_2_w_pnms_consistency() {
    let rows = [
        (0.35, 0.25, 0.29),
        (0.33, 0.24, 0.27),
        (0.33, 0.22, 0.26),
        (0.28, 0.19, 0.22),
    ];
    for (pnms, lnms, reported) in rows {
        let scores = MetricScores::from_rates(pnms, lnms, 0.5, DEFAULT_ALPHA, 100).unwrap();
        assert!(
            (scores.w_pnms - reported).abs() <= 0.005 + 1e-12,
            "({pnms},{lnms}) -> {} but reported {reported}",
            scores.w_pnms
        );
    }
    println!("ACCEPTANCE C2 PASS - W-PNMS reproduces all four reported rows within 0.005");
}

#[test]
fn criterion_3_inverse_consistency() {
    // solve w = a*p + (1-a)*l for l given w = 0.65, p = 0.71
    let pnms = 0.71;
    let w_reported = 0.65;
    let lnms = (w_reported - DEFAULT_ALPHA * pnms) / (1.0 - DEFAULT_ALPHA);
    assert!((lnms - 0.618).abs() < 1e-3, "implied lnms = {lnms}");

    let direct = MetricScores::from_rates(pnms, lnms, 0.17, DEFAULT_ALPHA, 1000).unwrap();
    assert!((direct.w_pnms - w_reported).abs() <= 0.005 + 1e-12);

    // the same rates realized as boolean hits over 1000 examples
    let examples: Vec<PerExampleScores> = (0..1000)
        .map(|i| PerExampleScores {
            document_id: format!("d{i}"),
            pnms_hit: i < 710,
            lnms_hit: i < 618,
            min_nld: 0.17,
        })
        .collect();
    let agg = aggregate(&examples, DEFAULT_ALPHA).unwrap();
    assert!(
        (agg.w_pnms - w_reported).abs() <= 0.005 + 1e-12,
        "aggregated w_pnms = {}",
        agg.w_pnms
    );
    println!(
        "ACCEPTANCE C3 PASS - implied LNMS {lnms:.4}, aggregate reproduces W-PNMS {:.4}",
        agg.w_pnms
    );
}

#[test]
fn criterion_4_metric_property_suite() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let letters: Vec<char> = ('a'..='z').collect();
    let random_token = |rng: &mut ChaCha8Rng, max_len: usize| -> String {
        let len = rng.random_range(1..=max_len);
        (0..len).map(|_| *letters.choose(rng).unwrap()).collect()
    };

    for i in 0..10_000 {
        // random target of 1..4 parts and a random prediction set
        let part_count = rng.random_range(1..=4);
        let name: Vec<String> = (0..part_count).map(|_| random_token(&mut rng, 6)).collect();
        let target = normalize_name(&name.join(" ")).unwrap();
        let pred_count = rng.random_range(1..=5);
        let predictions: Vec<String> = (0..pred_count)
            .map(|_| {
                let words = rng.random_range(0..=3);
                (0..words)
                    .map(|_| random_token(&mut rng, 6))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();

        // monotonicity in n
        let base = prediction_set("d", predictions.clone());
        let mut extended_preds = predictions.clone();
        extended_preds.push(random_token(&mut rng, 8));
        let extended = prediction_set("d", extended_preds);
        let s0 = score_example(&target, &base).unwrap();
        let s1 = score_example(&target, &extended).unwrap();
        assert!(s1.pnms_hit >= s0.pnms_hit, "iteration {i}");
        assert!(s1.lnms_hit >= s0.lnms_hit, "iteration {i}");
        assert!(s1.min_nld <= s0.min_nld + 1e-12, "iteration {i}");

        // w-pnms bounds
        let pnms: f64 = rng.random_range(0.0..=1.0);
        let lnms: f64 = rng.random_range(0.0..=1.0);
        let alpha: f64 = rng.random_range(0.0..=1.0);
        let scores = MetricScores::from_rates(pnms, lnms, 0.4, alpha, 7).unwrap();
        assert!(scores.w_pnms >= pnms.min(lnms) - 1e-12);
        assert!(scores.w_pnms <= pnms.max(lnms) + 1e-12);
        assert!((scores.w_pnms - (alpha * pnms + (1.0 - alpha) * lnms)).abs() < 1e-9);

        // case invariance
        let upper = normalize_name(&target.full_name.to_uppercase()).unwrap();
        for p in &predictions {
            assert_eq!(pnms_match(&target, p), pnms_match(&target, &p.to_uppercase()));
            assert_eq!(pnms_match(&target, p), pnms_match(&upper, p));
        }

        // Levenshtein metric axioms against the recursive oracle (<= 8 chars)
        let a = random_token(&mut rng, 8);
        let b = random_token(&mut rng, 8);
        let c = random_token(&mut rng, 8);
        let ab = levenshtein(&a, &b);
        assert_eq!(ab, recursive_levenshtein(&a, &b), "oracle mismatch");
        assert_eq!(ab, levenshtein(&b, &a), "symmetry");
        assert_eq!(ab == 0, a == b, "identity");
        assert!(ab <= levenshtein(&a, &c) + levenshtein(&c, &b), "triangle");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30s");
    println!("ACCEPTANCE C4 PASS - 10,000 property instances in {elapsed:?}");
}

#[test]
fn criterion_5_retrieval_oracle_equivalence() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let embedder = HashEmbedderMock::new(64);
    let vocabulary = [
        "court", "ruling", "verdict", "appeal", "bank", "francs", "zurich", "bern", "case",
        "charity", "prison", "fraud", "news", "article", "witness", "sentence",
    ];

    for round in 0..100 {
        let chunk_count = rng.random_range(1..=100);
        let texts: Vec<String> = (0..chunk_count)
            .map(|_| {
                let words = rng.random_range(1..=12);
                (0..words)
                    .map(|_| *vocabulary.choose(&mut rng).unwrap())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = embedder.embed(&refs).unwrap();
        let chunks: Vec<Chunk> = vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| Chunk {
                id: format!("c{i:03}"),
                article_id: "a".into(),
                text: texts[i].clone(),
                vector: Some(v),
            })
            .collect();
        let index = ChunkIndex::from_embedded(chunks.clone()).unwrap();

        let query_words = rng.random_range(1..=8);
        let query_text: String = (0..query_words)
            .map(|_| *vocabulary.choose(&mut rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ");
        let query_vector = embedder.embed(&[&query_text]).unwrap().remove(0);
        let k = rng.random_range(1..=10usize);
        let got = query(&index, &query_vector, k).unwrap();

        // oracle: full sort of every similarity, ties by chunk id
        let mut full: Vec<(f64, String)> = chunks
            .iter()
            .map(|c| {
                let sim = cosine_similarity(&query_vector, c.vector.as_ref().unwrap()).unwrap();
                (sim, c.id.clone())
            })
            .collect();
        full.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));

        assert_eq!(got.len(), k.min(chunk_count), "round {round}");
        for (result, (sim, id)) in got.iter().zip(full.iter()) {
            assert_eq!(&result.chunk_id, id, "round {round}");
            assert!((result.similarity - sim).abs() < 1e-12, "round {round}");
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, budget 10s");
    println!("ACCEPTANCE C5 PASS - 100 random indices match the full-sort oracle ({elapsed:?})");
}

#[test]
fn criterion_6_linkage_fixture_end_to_end() {
    let started = std::time::Instant::now();
    let fixture = linkage_fixture();
    let embedder = HashEmbedderMock::new(256);
    let summarizer = resolve_backend(&BackendSpec::for_locator("mock:lead:2")).unwrap();
    let responder = resolve_backend(&BackendSpec::for_locator("mock:context_chain")).unwrap();

    // the summary the pipeline will use, for composing single-chunk prompts
    let summary = reident::rag::summarize_ruling(&fixture.ruling, summarizer.as_ref()).unwrap();
    let decoding = DecodingSpec::default();

    // exhaustive check: no single chunk suffices
    let all_chunks = chunk_articles(&fixture.all_articles(), DEFAULT_CHUNK_SIZE);
    for chunk in &all_chunks {
        let prompt = compose_reidentification_prompt(
            &summary,
            &[chunk.text.as_str()],
            &fixture.ruling.mask_token,
        );
        let req = PredictRequest {
            document_id: &fixture.ruling.id,
            doc_text: &summary,
            prompt: &prompt,
            mask_token: &fixture.ruling.mask_token,
            target: Some(&fixture.target),
            top_n: 5,
            decoding: &decoding,
            run_seed: 0,
        };
        let response = responder.raw_candidates(&req).unwrap();
        for candidate in &response.candidates {
            assert!(
                !pnms_match(&fixture.target, candidate),
                "single chunk {} must not re-identify, got {candidate:?}",
                chunk.id
            );
        }
    }

    // full pipeline: planted name at rank 1
    let index = ChunkIndex::build(all_chunks, &embedder).unwrap();
    let pipeline =
        reident::rag::RagPipeline::new(summarizer.as_ref(), responder.as_ref(), &embedder);
    let outcome = pipeline.reidentify(&fixture.ruling, &index).unwrap();
    assert_eq!(
        outcome.predictions.predictions.first().map(String::as_str),
        Some(fixture.target.full_name.as_str()),
        "aggregated context must re-identify at rank 1"
    );
    let scores = score_example(&fixture.target, &outcome.predictions).unwrap();
    assert!(scores.pnms_hit && scores.lnms_hit);
    assert_eq!(scores.min_nld, 0.0);

    // unrelated-only index: a miss
    let unrelated = ChunkIndex::build(
        chunk_articles(&fixture.unrelated_articles, DEFAULT_CHUNK_SIZE),
        &embedder,
    )
    .unwrap();
    let outcome = pipeline.reidentify(&fixture.ruling, &unrelated).unwrap();
    let scores = score_example(&fixture.target, &outcome.predictions).unwrap();
    assert!(!scores.pnms_hit, "unrelated context must miss");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 5, "took {elapsed:?}, budget 5s");
    println!("ACCEPTANCE C6 PASS - linkage scenario: single chunks fail, aggregation hits, unrelated misses ({elapsed:?})");
}

fn choose(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..k {
        num *= u128::from(n - i);
        den *= u128::from(i + 1);
    }
    (num / den) as f64 + ((num % den) as f64 / den as f64)
}

#[test]
fn criterion_7_baseline_floor_and_expectation() {
    let started = std::time::Instant::now();
    let registry = Registry::with_defaults();
    let n = 5usize;

    // floor: token-disjoint targets score exactly zero for both baselines
    let disjoint = disjoint_corpus(1000, 123);
    for backend in ["baseline:random", "baseline:majority"] {
        let mut config = RunConfig::new(backend);
        config.seed = 99;
        let report = run(&config, &disjoint, &registry).unwrap();
        let scores = report.scores.unwrap();
        assert_eq!(scores.pnms, 0.0, "{backend} PNMS must be exactly 0");
        assert_eq!(scores.lnms, 0.0, "{backend} LNMS must be exactly 0");
    }

    // expectation: measured PNMS within 3 binomial standard deviations of
    // the closed form derived from pool membership
    let pool = NamePool::bundled_random();
    let corpus = overlap_corpus(1000, 77, &pool);
    let first_total = pool.first_names.len() as u64;
    let last_total = pool.last_names.len() as u64;

    // validity of the decomposition match("f l") = match(f) or match(l),
    // verified by brute force on a subsample
    for doc in corpus.iter().take(40) {
        let target = doc.target.as_ref().unwrap();
        for f in &pool.first_names {
            for l in &pool.last_names {
                let whole = pnms_match(target, &format!("{f} {l}"));
                let parts = pnms_match(target, f) || pnms_match(target, l);
                assert_eq!(whole, parts, "decomposition fails for {f} {l}");
            }
        }
    }

    let mut expected_sum = 0.0f64;
    let mut variance_sum = 0.0f64;
    for doc in &corpus {
        let target = doc.target.as_ref().unwrap();
        let a = pool
            .first_names
            .iter()
            .filter(|f| pnms_match(target, f))
            .count() as u64;
        let b = pool
            .last_names
            .iter()
            .filter(|l| pnms_match(target, l))
            .count() as u64;
        let p_no_hit = (choose(first_total - a, n as u64) / choose(first_total, n as u64))
            * (choose(last_total - b, n as u64) / choose(last_total, n as u64));
        let p = 1.0 - p_no_hit;
        expected_sum += p;
        variance_sum += p * (1.0 - p);
    }
    let expected = expected_sum / corpus.len() as f64;
    let sigma = (variance_sum / (corpus.len() as f64).powi(2)).sqrt();

    let mut config = RunConfig::new("baseline:random");
    config.seed = 4242;
    config.top_n = n;
    let report = run(&config, &corpus, &registry).unwrap();
    let measured = report.scores.unwrap().pnms;
    assert!(
        (measured - expected).abs() <= 3.0 * sigma + 1e-12,
        "measured {measured:.5} vs expected {expected:.5} (3 sigma = {:.5})",
        3.0 * sigma
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, budget 10s");
    println!(
        "ACCEPTANCE C7 PASS - zero floor exact; random PNMS {measured:.4} within 3 sigma of {expected:.4} ({elapsed:?})"
    );
}

#[test]
fn criterion_8_pipeline_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let mut lines = String::new();
    for doc in wiki_corpus(25, 31) {
        lines.push_str(&serde_json::to_string(&doc).unwrap());
        lines.push('\n');
    }
    std::fs::write(&corpus_path, &lines).unwrap();

    let mut outputs = Vec::new();
    for run_idx in 0..2 {
        let out = dir.path().join(format!("report_{run_idx}.json"));
        let code = reident::cli::dispatch([
            "reident",
            "evaluate",
            "--corpus",
            corpus_path.to_str().unwrap(),
            "--backend",
            "baseline:random",
            "--seed",
            "9",
            "--top-n",
            "5",
            "--max-chars",
            "1000",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "evaluate run {run_idx} failed");
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "report JSON must be byte-identical");
    println!(
        "ACCEPTANCE C8 PASS - two identical evaluate runs produced byte-identical reports ({} bytes)",
        outputs[0].len()
    );
}

#[test]
fn criterion_9_shape_contracts_replace_absolute_scores() {
    // The study's absolute benchmark numbers need the original 10K-page
    // sample, the 7.7K rulings and large hosted models; at desk scale this
    // suite pins arithmetic and property contracts instead (criteria 1-8)
    // and checks the sweep machinery's shape guarantees here.
    let registry = Registry::with_defaults();
    let mut corpus = wiki_corpus(50, 13);
    for doc in &mut corpus {
        doc.paraphrased_text = Some(doc.masked_text.clone());
    }

    // monotone non-decreasing input-length curve under a step-function mock
    let configs: Vec<RunConfig> = [500usize, 1000, 2000, 4000]
        .into_iter()
        .map(|m| RunConfig::new("mock:step:1200").with_max_chars(m))
        .collect();
    let results = sweep(&configs, &corpus, &registry);
    let curve: Vec<f64> = results
        .iter()
        .map(|r| r.as_ref().unwrap().scores.as_ref().unwrap().pnms)
        .collect();
    assert!(
        curve.windows(2).all(|w| w[1] >= w[0]),
        "PNMS curve not monotone: {curve:?}"
    );
    assert!(curve.last().unwrap() > curve.first().unwrap());

    // original vs paraphrased rows cover the same corpus
    let mut original = RunConfig::new("mock:oracle");
    original.text_variant = TextVariant::Original;
    let mut paraphrased = RunConfig::new("mock:oracle");
    paraphrased.text_variant = TextVariant::Paraphrased;
    let a = run(&original, &corpus, &registry).unwrap();
    let b = run(&paraphrased, &corpus, &registry).unwrap();
    assert_eq!(a.per_example.len(), b.per_example.len());

    println!(
        "ACCEPTANCE C9 PASS - absolute benchmark scores are out of desk-scale reach by design; \
         shape contracts hold (monotone curve {curve:?})"
    );
}
