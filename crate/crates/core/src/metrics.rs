//! Clustering quality: F-measure, purity, and entropy over a class-by-cluster
//! contingency table.
//!
//! With `c_ij` the number of documents of class `i` in cluster `j`, `n_i` the
//! class totals and `c_j` the cluster totals:
//!
//! * `prec(i, j) = c_ij / c_j`, `rec(i, j) = c_ij / n_i`, and
//!   `F(i, j)` their harmonic mean; the overall F-measure is the
//!   class-weighted maximum `F = sum_i (n_i / n) max_j F(i, j)`.
//! * `purity(j) = max_i c_ij / c_j`, weighted by cluster size over
//!   `N = sum_j c_j`.
//! * entropy per cluster is the class-distribution entropy
//!   `-sum_i p log p` with `p = c_ij / c_j`, weighted by `c_j / N`.
//!
//! Entropy defaults to log base 2 (a 50/50 binary cluster scores exactly 1);
//! natural log is selectable, and reports state the base used.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::clusterer::Clustering;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no gold label for doc: {0}")]
    MissingGoldLabel(String),
    #[error("invalid contingency table: {0}")]
    InvalidTable(String),
    #[error("doc ids and assignments differ in length: {ids} vs {assignments}")]
    LengthMismatch { ids: usize, assignments: usize },
}

/// Class-by-cluster counts plus their marginals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>, // counts[class][cluster]
    class_totals: Vec<usize>,
    cluster_totals: Vec<usize>,
    n: usize,
}

impl ContingencyTable {
    /// Build from raw counts. Every class row and cluster column must be
    /// non-empty, and the table must be rectangular.
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self, MetricsError> {
        if counts.is_empty() || counts[0].is_empty() {
            return Err(MetricsError::InvalidTable("no classes or clusters".into()));
        }
        let n_clusters = counts[0].len();
        if counts.iter().any(|row| row.len() != n_clusters) {
            return Err(MetricsError::InvalidTable("ragged rows".into()));
        }
        let class_totals: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
        let mut cluster_totals = vec![0usize; n_clusters];
        for row in &counts {
            for (j, &c) in row.iter().enumerate() {
                cluster_totals[j] += c;
            }
        }
        if class_totals.contains(&0) {
            return Err(MetricsError::InvalidTable("empty class".into()));
        }
        if cluster_totals.contains(&0) {
            return Err(MetricsError::InvalidTable("empty cluster".into()));
        }
        let n = class_totals.iter().sum();
        Ok(Self { counts, class_totals, cluster_totals, n })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn clusters(&self) -> usize {
        self.cluster_totals.len()
    }

    pub fn count(&self, class: usize, cluster: usize) -> usize {
        self.counts[class][cluster]
    }

    pub fn class_total(&self, class: usize) -> usize {
        self.class_totals[class]
    }

    pub fn cluster_total(&self, cluster: usize) -> usize {
        self.cluster_totals[cluster]
    }

    /// Total documents; equals the sum of cluster totals.
    pub fn n(&self) -> usize {
        self.n
    }
}

/// Cross-tabulate a clustering against gold labels.
///
/// `doc_ids[i]` names document `i` of the clustering; every clustered
/// document must have a gold class. Class rows are ordered by sorted label.
pub fn contingency(
    clustering: &Clustering,
    doc_ids: &[String],
    gold: &BTreeMap<String, String>,
) -> Result<ContingencyTable, MetricsError> {
    if doc_ids.len() != clustering.assignments.len() {
        return Err(MetricsError::LengthMismatch {
            ids: doc_ids.len(),
            assignments: clustering.assignments.len(),
        });
    }
    let mut class_index: BTreeMap<&str, usize> = BTreeMap::new();
    for id in doc_ids {
        let class = gold
            .get(id)
            .ok_or_else(|| MetricsError::MissingGoldLabel(id.clone()))?;
        let next = class_index.len();
        class_index.entry(class).or_insert(next);
    }
    let mut counts = vec![vec![0usize; clustering.k]; class_index.len()];
    for (id, &cluster) in doc_ids.iter().zip(&clustering.assignments) {
        let class = class_index[gold[id].as_str()];
        counts[class][cluster] += 1;
    }
    ContingencyTable::from_counts(counts)
}

/// Overall F-measure: the class-weighted best per-cluster F score.
pub fn f_measure(table: &ContingencyTable) -> f64 {
    let n = table.n() as f64;
    let mut total = 0.0;
    for i in 0..table.classes() {
        let n_i = table.class_total(i) as f64;
        let mut best = 0.0f64;
        for j in 0..table.clusters() {
            let c_ij = table.count(i, j) as f64;
            let prec = c_ij / table.cluster_total(j) as f64;
            let rec = c_ij / n_i;
            let f = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
            best = best.max(f);
        }
        total += (n_i / n) * best;
    }
    total
}

/// Cluster-size-weighted majority-class fraction.
pub fn purity(table: &ContingencyTable) -> f64 {
    let n = table.n() as f64;
    let mut total = 0.0;
    for j in 0..table.clusters() {
        let c_j = table.cluster_total(j) as f64;
        let max_ij = (0..table.classes()).map(|i| table.count(i, j)).max().unwrap_or(0) as f64;
        total += (c_j / n) * (max_ij / c_j);
    }
    total
}

/// Logarithm base for [`entropy_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    Natural,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            Self::Two => x.log2(),
            Self::Natural => x.ln(),
        }
    }

    /// Base marker for reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::Two => "2",
            Self::Natural => "e",
        }
    }
}

/// Cluster-size-weighted class entropy, log base 2.
pub fn entropy(table: &ContingencyTable) -> f64 {
    entropy_with(table, LogBase::Two)
}

pub fn entropy_with(table: &ContingencyTable, base: LogBase) -> f64 {
    let n = table.n() as f64;
    let mut total = 0.0;
    for j in 0..table.clusters() {
        let c_j = table.cluster_total(j) as f64;
        let mut cluster_entropy = 0.0;
        for i in 0..table.classes() {
            let c_ij = table.count(i, j);
            if c_ij > 0 {
                let p = c_ij as f64 / c_j;
                cluster_entropy -= p * base.log(p);
            }
        }
        total += (c_j / n) * cluster_entropy;
    }
    total
}
