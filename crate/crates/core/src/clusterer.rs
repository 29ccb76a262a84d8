//! Clustering algorithms: hierarchical agglomerative clustering over a
//! similarity matrix, plus the document-vector baselines (tf-idf + cosine
//! and bisecting k-means).
//!
//! Everything here is deterministic. HAC breaks similarity ties by the
//! lexicographically smallest `(left, right)` node-id pair, and bisecting
//! k-means is driven entirely by a seeded RNG.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::similarity::SimilarityMatrix;
use crate::text::tokenize;

/// Inter-cluster similarity rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// Maximum pairwise similarity.
    Single,
    /// Minimum pairwise similarity.
    Complete,
    /// Mean pairwise similarity.
    #[default]
    Average,
}

impl FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Self::Single),
            "complete" => Ok(Self::Complete),
            "average" => Ok(Self::Average),
            other => Err(format!("unknown linkage: {other} (expected single, complete, or average)")),
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::Complete => "complete",
            Self::Average => "average",
        })
    }
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k out of range: {k} (n = {n})")]
    KOutOfRange { k: usize, n: usize },
    #[error("dendrogram json: {0}")]
    Json(String),
    #[error("invalid clustering: {0}")]
    InvalidClustering(String),
}

/// One agglomeration step. `left` is the merged cluster containing the
/// smallest leaf; node ids `0..n-1` are leaves, `n..2n-2` are merge results
/// in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub similarity: f64,
}

/// The ordered merge list produced by [`hac`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dendrogram serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClusterError> {
        serde_json::from_str(s).map_err(|e| ClusterError::Json(e.to_string()))
    }
}

/// A flat partition: `assignments[i]` is the cluster id of document `i`,
/// cluster ids dense in `0..k` with no empty cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub k: usize,
}

impl Clustering {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self, ClusterError> {
        let mut seen = vec![false; k];
        for &c in &assignments {
            if c >= k {
                return Err(ClusterError::InvalidClustering(format!(
                    "cluster id {c} out of range for k = {k}"
                )));
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(ClusterError::InvalidClustering("empty cluster".into()));
        }
        Ok(Self { assignments, k })
    }

    /// Member indices per cluster, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k];
        for (i, &c) in self.assignments.iter().enumerate() {
            members[c].push(i);
        }
        members
    }
}

// ---------------------------------------------------------------------------
// Hierarchical agglomerative clustering
// ---------------------------------------------------------------------------

struct ActiveCluster {
    node_id: usize,
    /// Ascending leaf indices; `members[0]` is the smallest leaf.
    members: Vec<usize>,
}

/// Linkage between two clusters, recomputed from the base matrix.
///
/// For average linkage the accumulation order is part of the contract: the
/// cluster holding the globally smaller leaf is iterated in the outer loop,
/// members ascending, so any correct reimplementation sums in the same order
/// and reproduces the value bit for bit.
fn linkage_value(m: &SimilarityMatrix, linkage: Linkage, a: &[usize], b: &[usize]) -> f64 {
    match linkage {
        Linkage::Single => {
            let mut best = f64::NEG_INFINITY;
            for &i in a {
                for &j in b {
                    best = best.max(m.get(i, j));
                }
            }
            best
        }
        Linkage::Complete => {
            let mut worst = f64::INFINITY;
            for &i in a {
                for &j in b {
                    worst = worst.min(m.get(i, j));
                }
            }
            worst
        }
        Linkage::Average => {
            let (first, second) = if a[0] < b[0] { (a, b) } else { (b, a) };
            let mut sum = 0.0;
            for &i in first {
                for &j in second {
                    sum += m.get(i, j);
                }
            }
            sum / (a.len() * b.len()) as f64
        }
    }
}

/// Greedy agglomeration: repeatedly merge the most similar pair of active
/// clusters under the chosen linkage. Ties go to the lexicographically
/// smallest `(left, right)` node-id pair, where `left` is the cluster
/// containing the smaller leaf.
pub fn hac(matrix: &SimilarityMatrix, linkage: Linkage) -> Dendrogram {
    let n = matrix.n();
    let mut dendrogram = Dendrogram { n_leaves: n, merges: Vec::new() };
    if n < 2 {
        return dendrogram;
    }

    let mut active: Vec<ActiveCluster> = (0..n)
        .map(|i| ActiveCluster { node_id: i, members: vec![i] })
        .collect();
    // links[p][q] for q < p: linkage between active slots p and q
    let mut links: Vec<Vec<f64>> = (0..n).map(|i| (0..i).map(|j| matrix.get(i, j)).collect()).collect();

    for step in 0..n - 1 {
        // pick the best active pair
        let mut best: Option<(usize, usize, f64, (usize, usize))> = None;
        for p in 1..active.len() {
            for q in 0..p {
                let sim = links[p][q];
                let (a, b) = (&active[p], &active[q]);
                let pair = if a.members[0] < b.members[0] {
                    (a.node_id, b.node_id)
                } else {
                    (b.node_id, a.node_id)
                };
                let better = match best {
                    None => true,
                    Some((_, _, best_sim, best_pair)) => {
                        sim > best_sim || (sim == best_sim && pair < best_pair)
                    }
                };
                if better {
                    best = Some((p, q, sim, pair));
                }
            }
        }
        let (p, q, sim, (left, right)) = best.expect("at least one active pair");
        dendrogram.merges.push(Merge { left, right, similarity: sim });

        // merge slots p and q (p > q) into a new cluster
        let hi = active.swap_remove(p);
        let lo = active.swap_remove(q);
        remove_slot(&mut links, p);
        remove_slot(&mut links, q);

        let mut members = Vec::with_capacity(lo.members.len() + hi.members.len());
        merge_sorted(&lo.members, &hi.members, &mut members);
        let merged = ActiveCluster { node_id: n + step, members };

        let mut row = Vec::with_capacity(active.len());
        for other in &active {
            row.push(linkage_value(matrix, linkage, &merged.members, &other.members));
        }
        active.push(merged);
        links.push(row);
    }

    dendrogram
}

/// Drop slot `idx` from the ragged lower-triangular table, preserving the
/// `swap_remove` slot order used for the active list.
fn remove_slot(links: &mut Vec<Vec<f64>>, idx: usize) {
    let moved = links.pop().expect("non-empty table");
    if idx != links.len() {
        // the popped slot takes over position idx
        links[idx][..idx].copy_from_slice(&moved[..idx]);
        for x in idx + 1..links.len() {
            links[x][idx] = moved[x];
        }
    }
}

fn merge_sorted(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Cut a dendrogram into `k` clusters by undoing the last `k - 1` merges.
/// Cluster ids are assigned by each cluster's smallest leaf.
pub fn cut(dendrogram: &Dendrogram, k: usize) -> Result<Clustering, ClusterError> {
    let n = dendrogram.n_leaves;
    if k < 1 || k > n {
        return Err(ClusterError::KOutOfRange { k, n });
    }
    let used = n - k;
    // parent pointers over node ids; nodes not merged within `used` steps stay roots
    let mut parent: Vec<usize> = (0..n + used).collect();
    for (step, merge) in dendrogram.merges.iter().take(used).enumerate() {
        parent[merge.left] = n + step;
        parent[merge.right] = n + step;
    }
    let root_of = |mut x: usize| {
        while parent[x] != x {
            x = parent[x];
        }
        x
    };
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for leaf in 0..n {
        clusters.entry(root_of(leaf)).or_default().push(leaf);
    }
    // order clusters by smallest contained leaf
    let mut groups: Vec<Vec<usize>> = clusters.into_values().collect();
    groups.sort_by_key(|g| g[0]);
    let mut assignments = vec![0usize; n];
    for (cluster_id, group) in groups.iter().enumerate() {
        for &leaf in group {
            assignments[leaf] = cluster_id;
        }
    }
    Clustering::new(assignments, groups.len())
}

// ---------------------------------------------------------------------------
// Document-vector baseline
// ---------------------------------------------------------------------------

/// A sparse tf-idf vector with terms in sorted order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DocVector {
    weights: BTreeMap<String, f64>,
}

impl DocVector {
    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(t, &w)| (t.as_str(), w))
    }

    fn norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Merge-join dot product in sorted term order, so `dot(a, b)` and
    /// `dot(b, a)` are bit-identical.
    fn dot(&self, other: &Self) -> f64 {
        let mut sum = 0.0;
        let mut left = self.weights.iter().peekable();
        let mut right = other.weights.iter().peekable();
        while let (Some((lt, lw)), Some((rt, rw))) = (left.peek(), right.peek()) {
            match lt.cmp(rt) {
                std::cmp::Ordering::Less => {
                    left.next();
                }
                std::cmp::Ordering::Greater => {
                    right.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += **lw * **rw;
                    left.next();
                    right.next();
                }
            }
        }
        sum
    }
}

/// Standard English function words removed before tf-idf weighting.
pub fn default_stopwords() -> BTreeSet<String> {
    [
        "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "had", "has",
        "have", "he", "her", "his", "if", "in", "is", "it", "its", "of", "on", "or", "said",
        "she", "that", "the", "their", "they", "this", "to", "was", "were", "which", "will",
        "with",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

/// Tf-idf vectors over lowercased alphanumeric tokens.
///
/// Weight is `tf * ln(n / df)`; terms appearing in every document get weight
/// zero and are dropped from the sparse form.
pub fn tfidf_vectorize(corpus: &Corpus, stopwords: &BTreeSet<String>) -> Vec<DocVector> {
    let n = corpus.len();
    let token_lists: Vec<Vec<String>> = corpus
        .documents()
        .iter()
        .map(|d| tokenize(&d.text).into_iter().filter(|t| !stopwords.contains(t)).collect())
        .collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tokens in &token_lists {
        let distinct: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
        for term in distinct {
            *df.entry(term).or_insert(0) += 1;
        }
    }

    token_lists
        .iter()
        .map(|tokens| {
            let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
            for term in tokens {
                *tf.entry(term).or_insert(0) += 1;
            }
            let weights = tf
                .into_iter()
                .filter_map(|(term, count)| {
                    let idf = ((n as f64) / (df[term] as f64)).ln();
                    let w = count as f64 * idf;
                    (w > 0.0).then(|| (term.to_string(), w))
                })
                .collect();
            DocVector { weights }
        })
        .collect()
}

/// Cosine similarity in `[0, 1]`; zero when either vector has zero norm.
pub fn cosine(a: &DocVector, b: &DocVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

/// Cosine similarity matrix for a vectorized corpus.
pub fn cosine_matrix(doc_ids: Vec<String>, vectors: &[DocVector]) -> Result<SimilarityMatrix, crate::similarity::SimilarityError> {
    let n = vectors.len();
    let mut values = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = if i == j {
                if vectors[i].is_empty() { 0.0 } else { 1.0 }
            } else {
                cosine(&vectors[i], &vectors[j])
            };
        }
    }
    SimilarityMatrix::from_values(doc_ids, values)
}

// ---------------------------------------------------------------------------
// Bisecting k-means
// ---------------------------------------------------------------------------

/// Normalized mean of the member vectors; zero vector if the mean is zero.
fn centroid(vectors: &[DocVector], members: &[usize]) -> DocVector {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for &m in members {
        for (term, w) in vectors[m].terms() {
            *sums.entry(term.to_string()).or_insert(0.0) += w;
        }
    }
    let count = members.len() as f64;
    let mut mean = DocVector {
        weights: sums.into_iter().map(|(t, s)| (t, s / count)).collect(),
    };
    let norm = mean.norm();
    if norm > 0.0 {
        for w in mean.weights.values_mut() {
            *w /= norm;
        }
    }
    mean
}

/// One 2-means run from two seed documents. Returns the split and its mean
/// doc-to-centroid similarity, or `None` if a side went empty.
fn two_means(
    vectors: &[DocVector],
    members: &[usize],
    seed_a: usize,
    seed_b: usize,
) -> Option<(Vec<usize>, Vec<usize>, f64)> {
    let mut c0 = vectors[seed_a].clone();
    let mut c1 = vectors[seed_b].clone();
    let mut sides = vec![0u8; members.len()];
    for _ in 0..64 {
        let mut changed = false;
        for (idx, &m) in members.iter().enumerate() {
            // ties go to the first centroid
            let side = if cosine(&vectors[m], &c0) >= cosine(&vectors[m], &c1) { 0 } else { 1 };
            if sides[idx] != side {
                sides[idx] = side;
                changed = true;
            }
        }
        let a: Vec<usize> = members.iter().zip(&sides).filter(|(_, &s)| s == 0).map(|(&m, _)| m).collect();
        let b: Vec<usize> = members.iter().zip(&sides).filter(|(_, &s)| s == 1).map(|(&m, _)| m).collect();
        if a.is_empty() || b.is_empty() {
            return None;
        }
        c0 = centroid(vectors, &a);
        c1 = centroid(vectors, &b);
        if !changed {
            let quality = (a.iter().map(|&m| cosine(&vectors[m], &c0)).sum::<f64>()
                + b.iter().map(|&m| cosine(&vectors[m], &c1)).sum::<f64>())
                / members.len() as f64;
            return Some((a, b, quality));
        }
    }
    None
}

/// Bisecting k-means: repeatedly 2-split the largest cluster until `k`
/// clusters exist. Each split tries `trials` seeded restarts and keeps the
/// one with the highest mean intra-cluster centroid similarity; if every
/// restart collapses (indistinguishable vectors), the first member is split
/// off alone. Fully deterministic for a given seed.
pub fn bisecting_kmeans(
    vectors: &[DocVector],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<Clustering, ClusterError> {
    let n = vectors.len();
    if k < 1 || k > n {
        return Err(ClusterError::KOutOfRange { k, n });
    }
    let trials = trials.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clusters: Vec<Vec<usize>> = vec![(0..n).collect()];

    while clusters.len() < k {
        // largest cluster; ties by smallest contained doc index
        let target = (0..clusters.len())
            .max_by(|&a, &b| {
                clusters[a]
                    .len()
                    .cmp(&clusters[b].len())
                    .then(clusters[b][0].cmp(&clusters[a][0]))
            })
            .expect("at least one cluster");
        let members = clusters.swap_remove(target);

        let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
        for _ in 0..trials {
            let i = rng.gen_range(0..members.len());
            let mut j = rng.gen_range(0..members.len() - 1);
            if j >= i {
                j += 1;
            }
            if let Some((a, b, quality)) = two_means(vectors, &members, members[i], members[j]) {
                if best.as_ref().is_none_or(|(_, _, q)| quality > *q) {
                    best = Some((a, b, quality));
                }
            }
        }
        let (a, b) = match best {
            Some((a, b, _)) => (a, b),
            None => (vec![members[0]], members[1..].to_vec()),
        };
        clusters.push(a);
        clusters.push(b);
    }

    clusters.sort_by_key(|c| c[0]);
    let mut assignments = vec![0usize; n];
    for (cluster_id, members) in clusters.iter().enumerate() {
        for &m in members {
            assignments[m] = cluster_id;
        }
    }
    Clustering::new(assignments, k)
}
