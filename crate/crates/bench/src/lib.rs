//! Deterministic synthetic inputs for the pipeline benchmarks.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tmhc_core::similarity::SimilarityMatrix;
use tmhc_core::xtm::TopicMapDoc;

const WORDS: [&str; 24] = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu", "nu", "xi", "omicron", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi",
    "psi", "omega",
];

/// Construct sets drawn from a fixed vocabulary, a few per level.
pub fn synthetic_docs(n: usize, seed: u64) -> Vec<TopicMapDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut topics = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=4) {
                topics.insert(WORDS[rng.gen_range(0..WORDS.len())].to_string());
            }
            let mut tags = BTreeSet::new();
            for topic in topics.clone() {
                for _ in 0..rng.gen_range(0..=3) {
                    tags.insert((topic.clone(), WORDS[rng.gen_range(0..WORDS.len())].to_string()));
                }
            }
            let mut tag_values = BTreeSet::new();
            for (_, tag) in tags.clone() {
                for _ in 0..rng.gen_range(0..=2) {
                    tag_values.insert((tag.clone(), WORDS[rng.gen_range(0..WORDS.len())].to_string()));
                }
            }
            TopicMapDoc::new(format!("doc{i}"), topics, tags, tag_values).expect("valid doc")
        })
        .collect()
}

/// A dense random symmetric similarity matrix with unit diagonal.
pub fn synthetic_matrix(n: usize, seed: u64) -> SimilarityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0f64; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in 0..i {
            let v = rng.gen_range(0.0..1.0);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityMatrix::from_values((0..n).map(|i| format!("doc{i}")).collect(), values)
        .expect("valid matrix")
}
