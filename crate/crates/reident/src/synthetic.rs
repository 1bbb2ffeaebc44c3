//! Deterministic synthetic fixtures for calibration, demos and tests.
//!
//! Real corpora with ground truth are expensive to obtain, so the toolkit
//! ships generators whose answers are known by construction: a linkage
//! scenario where a person is only identifiable by aggregating several news
//! articles, and masked corpora whose targets overlap the baseline name
//! pools in a controlled way.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::NamePool;
use crate::model::{
    normalize_name, DocumentKind, MaskedDocument, TargetIdentity, DEFAULT_MASK_TOKEN,
};
use crate::rag::NewsArticle;

/// The planted identity of the linkage scenario.
pub const LINKAGE_TARGET: &str = "Bruno Vogelsang";

/// A ruling plus news articles where re-identification requires combining
/// clues across articles: one article ties the case number to an alias,
/// another ties the alias to the person, a third corroborates the facts.
/// No single article supports the identification on its own.
pub struct LinkageFixture {
    pub ruling: MaskedDocument,
    pub target: TargetIdentity,
    pub clue_articles: Vec<NewsArticle>,
    pub unrelated_articles: Vec<NewsArticle>,
}

impl LinkageFixture {
    /// Clue articles followed by the unrelated ones.
    pub fn all_articles(&self) -> Vec<NewsArticle> {
        let mut all = self.clue_articles.clone();
        all.extend(self.unrelated_articles.clone());
        all
    }
}

pub fn linkage_fixture() -> LinkageFixture {
    let target = normalize_name(LINKAGE_TARGET).expect("valid name");
    let ruling = MaskedDocument::new(
        "ruling-6B_1099",
        "Case 6B_1099/2019: <mask> appealed the verdict of the cantonal court concerning \
         the embezzling of 4.2 million francs from a Zurich charity foundation. The federal \
         court sentenced <mask> to six years and confirmed the verdict. The appeal filed by \
         <mask> is dismissed and the costs of the proceedings are charged to <mask>.",
        DEFAULT_MASK_TOKEN,
        Some(target.clone()),
        DocumentKind::Ruling,
    )
    .expect("fixture ruling is valid");

    let clue_articles = vec![
        NewsArticle {
            article_id: "clue-case-alias".into(),
            text: "The federal court published its decision in case 6B_1099/2019 on Tuesday. \
                   Reporters confirmed that the appellant in 6B_1099/2019 is the financier \
                   known as \"Silberfuchs\" in Zurich banking circles. The verdict of six \
                   years for embezzling charity foundation francs was confirmed by the court."
                .into(),
        },
        NewsArticle {
            article_id: "clue-alias-name".into(),
            text: "\"Silberfuchs\" is the alias of Bruno Vogelsang, a Zurich financier who \
                   managed charity foundation funds for a decade. Colleagues describe him as \
                   reclusive. The foundation collapsed after the embezzling of millions of \
                   francs came to light."
                .into(),
        },
        NewsArticle {
            article_id: "clue-verdict-city".into(),
            text: "A Zurich charity foundation lost 4.2 million francs to embezzling over \
                   several years. The trial before the cantonal court ended with a sentence \
                   of six years, later confirmed on appeal. The newspaper did not name the \
                   accused."
                .into(),
        },
    ];

    let unrelated_articles = vec![
        ("unrelated-weather", "Heavy snowfall blanketed the alpine villages overnight. Road crews cleared passes by morning and lifts opened on schedule."),
        ("unrelated-football", "The home side equalized in stoppage time after a corner kick. Fans celebrated a point that keeps relegation worries at bay."),
        ("unrelated-gardening", "Late frosts can damage young tomato plants. Gardeners protect seedlings with fleece until mid May."),
        ("unrelated-transit", "A new tram line opens next spring, cutting commutes across the river district. Night service will follow in autumn."),
        ("unrelated-cooking", "Chestnut season brings vermicelles back to pastry shops. Chefs recommend pairing the dessert with whipped cream."),
        ("unrelated-astronomy", "Stargazers gathered on the ridge to watch the meteor shower peak. Clear skies rewarded those who stayed past midnight."),
        ("unrelated-markets", "Dairy exports rose for a third consecutive quarter. Producers credit steady demand for aged cheese abroad."),
        ("unrelated-music", "An open-air festival announced its lineup with forty acts across three stages. Early tickets sold out within hours."),
    ]
    .into_iter()
    .map(|(id, text)| NewsArticle {
        article_id: id.into(),
        text: text.into(),
    })
    .collect();

    LinkageFixture {
        ruling,
        target,
        clue_articles,
        unrelated_articles,
    }
}

/// Letters that never occur consecutively in the bundled pool names;
/// encoding target parts with them keeps the parts token-disjoint from
/// every pool name.
const CONSONANTS: &[u8] = b"zqxvjkw";

fn consonant_code(mut i: usize) -> String {
    let mut code = String::new();
    for _ in 0..3 {
        code.push(CONSONANTS[i % CONSONANTS.len()] as char);
        i /= CONSONANTS.len();
    }
    code
}

/// A target name sharing no usable token with the bundled pools.
pub fn disjoint_target(i: usize) -> TargetIdentity {
    let first = format!("Zq{}", consonant_code(i));
    let last = format!("Xv{}", consonant_code(i / 7));
    normalize_name(&format!("{first} {last}")).expect("valid synthetic name")
}

fn masked_doc(id: String, target: TargetIdentity, filler_seed: u64) -> MaskedDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(filler_seed);
    let topics = [
        "studied the glacier flows",
        "chaired the village council",
        "restored old clockworks",
        "catalogued beetle species",
        "mapped the railway tunnels",
        "translated early manuscripts",
    ];
    let topic = topics[rng.random_range(0..topics.len())];
    let year = 1900 + rng.random_range(0..100);
    let text = format!(
        "<mask> {topic} for many years. Born in {year}, <mask> later moved to the capital \
         and continued the work until retirement. Contemporaries wrote about the quiet \
         determination of <mask> in letters and journals."
    );
    MaskedDocument::new(id, text, DEFAULT_MASK_TOKEN, Some(target), DocumentKind::Wikipedia)
        .expect("synthetic document is valid")
}

/// A corpus whose targets share no token with the baseline pools; both
/// baselines must score exactly zero on it.
pub fn disjoint_corpus(n: usize, seed: u64) -> Vec<MaskedDocument> {
    (0..n)
        .map(|i| masked_doc(format!("disjoint-{i:05}"), disjoint_target(i), seed ^ i as u64))
        .collect()
}

/// A corpus where even-indexed targets are pairings of pool names (hits are
/// possible) and odd-indexed targets are disjoint (hits are impossible).
/// The exact hit probability is computable from pool membership.
pub fn overlap_corpus(n: usize, seed: u64, pool: &NamePool) -> Vec<MaskedDocument> {
    (0..n)
        .map(|i| {
            let target = if i % 2 == 0 {
                let f = &pool.first_names[i % pool.first_names.len()];
                let l = &pool.last_names[(i * 7 + 3) % pool.last_names.len()];
                normalize_name(&format!("{f} {l}")).expect("valid name")
            } else {
                disjoint_target(i)
            };
            masked_doc(format!("overlap-{i:05}"), target, seed ^ i as u64)
        })
        .collect()
}

/// A long-text corpus for input-length sweeps: every document carries an
/// early mask and several thousand characters of filler, so truncation at
/// the usual lengths changes only how much of the page a backend sees.
pub fn wiki_corpus(n: usize, seed: u64) -> Vec<MaskedDocument> {
    let pool = NamePool::bundled_random();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let f = &pool.first_names[rng.random_range(0..pool.first_names.len())];
            let l = &pool.last_names[rng.random_range(0..pool.last_names.len())];
            let target = normalize_name(&format!("{f} {l}")).expect("valid name");
            let mut text = "<mask> was a noted figure of the period. Early in life <mask> \
                 left home to study, and the career that followed spanned several decades."
                .to_owned();
            while text.chars().count() < 5000 {
                text.push_str(
                    " The archive preserves lecture notes, travel diaries and a long \
                     correspondence with colleagues across the continent. Later papers \
                     describe field work, committee duties and the slow revision of a \
                     major monograph.",
                );
            }
            MaskedDocument::new(
                format!("wiki-{i:05}"),
                text,
                DEFAULT_MASK_TOKEN,
                Some(target),
                DocumentKind::Wikipedia,
            )
            .expect("synthetic document is valid")
        })
        .collect()
}
