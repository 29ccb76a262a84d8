//! Topic-map document similarity.
//!
//! Two documents are compared level by level: common topics, common
//! `(topic, tag)` pairs, and common `(tag, value)` pairs. The score is the
//! total number of common constructs divided by the total construct count,
//! where the per-level totals are union sizes by default, giving
//! `sim(d, d) = 1` and a range of `[0, 1]`. The alternative `sum`
//! denominator (both documents' set sizes added, capping self-similarity at
//! 0.5) stays available for experimentation via [`Denominator::Sum`].
//!
//! A pair of documents with no constructs at all scores 0, not 1: nothing is
//! known about them, and scoring them as identical would glue every empty
//! document into one cluster.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::xtm::TopicMapDoc;

/// Magic bytes of the binary matrix format.
pub const TMSM_MAGIC: &[u8; 4] = b"TMSM";

/// How the per-level totals in the denominator are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Denominator {
    /// Union of both documents' construct sets (the default).
    #[default]
    Union,
    /// Sum of both documents' set sizes.
    Sum,
}

impl FromStr for Denominator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "union" => Ok(Self::Union),
            "sum" => Ok(Self::Sum),
            other => Err(format!("unknown denominator: {other} (expected union or sum)")),
        }
    }
}

impl fmt::Display for Denominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Union => "union",
            Self::Sum => "sum",
        })
    }
}

/// Per-level common and total construct counts for one document pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimilarityBreakdown {
    pub common_topics: usize,
    pub common_tags: usize,
    pub common_values: usize,
    pub total_topics: usize,
    pub total_tags: usize,
    pub total_values: usize,
}

impl SimilarityBreakdown {
    /// Sum of commons over sum of totals; 0 when both documents are empty.
    pub fn score(&self) -> f64 {
        let common = self.common_topics + self.common_tags + self.common_values;
        let total = self.total_topics + self.total_tags + self.total_values;
        if total == 0 {
            0.0
        } else {
            common as f64 / total as f64
        }
    }
}

fn level_counts<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>, denominator: Denominator) -> (usize, usize) {
    let common = a.intersection(b).count();
    let total = match denominator {
        Denominator::Union => a.len() + b.len() - common,
        Denominator::Sum => a.len() + b.len(),
    };
    (common, total)
}

/// Similarity of a document pair under the default union denominator.
pub fn sim_pair(a: &TopicMapDoc, b: &TopicMapDoc) -> (f64, SimilarityBreakdown) {
    sim_pair_with(Denominator::Union, a, b)
}

/// Similarity of a document pair under an explicit denominator mode.
pub fn sim_pair_with(
    denominator: Denominator,
    a: &TopicMapDoc,
    b: &TopicMapDoc,
) -> (f64, SimilarityBreakdown) {
    let (common_topics, total_topics) = level_counts(&a.topics, &b.topics, denominator);
    let (common_tags, total_tags) = level_counts(&a.tags, &b.tags, denominator);
    let (common_values, total_values) = level_counts(&a.tag_values, &b.tag_values, denominator);
    let breakdown = SimilarityBreakdown {
        common_topics,
        common_tags,
        common_values,
        total_topics,
        total_tags,
        total_values,
    };
    (breakdown.score(), breakdown)
}

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("duplicate doc id: {0}")]
    DuplicateDocId(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("matrix csv: {0}")]
    Csv(String),
    #[error("matrix binary: {0}")]
    Binary(String),
}

/// A symmetric pairwise similarity matrix with its document ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    doc_ids: Vec<String>,
    values: Vec<f64>, // row-major n x n
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    /// Build a matrix from precomputed values (tests and file loading).
    pub fn from_values(doc_ids: Vec<String>, values: Vec<f64>) -> Result<Self, SimilarityError> {
        let n = doc_ids.len();
        if values.len() != n * n {
            return Err(SimilarityError::Csv(format!(
                "expected {} values for {} docs, found {}",
                n * n,
                n,
                values.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for id in &doc_ids {
            if !seen.insert(id.clone()) {
                return Err(SimilarityError::DuplicateDocId(id.clone()));
            }
        }
        Ok(Self { doc_ids, values })
    }

    /// CSV form: header row of doc ids, then `n` rows of `n` full-precision
    /// values.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SimilarityError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.doc_ids).map_err(|e| SimilarityError::Csv(e.to_string()))?;
        let n = self.n();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| self.get(i, j).to_string()).collect();
            w.write_record(&row).map_err(|e| SimilarityError::Csv(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SimilarityError> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut records = r.records();
        let header = match records.next() {
            Some(rec) => rec.map_err(|e| SimilarityError::Csv(e.to_string()))?,
            None => return Err(SimilarityError::Csv("empty matrix file".into())),
        };
        let doc_ids: Vec<String> = header.iter().map(str::to_string).collect();
        let n = doc_ids.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(|e| SimilarityError::Csv(e.to_string()))?;
            if rec.len() != n {
                return Err(SimilarityError::Csv(format!(
                    "row {} has {} cells, expected {n}",
                    i + 1,
                    rec.len()
                )));
            }
            for cell in rec.iter() {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| SimilarityError::Csv(format!("bad number: {cell}")))?;
                values.push(v);
            }
        }
        Self::from_values(doc_ids, values)
    }

    /// Binary form: `TMSM` magic, u32 little-endian `n`, then the upper
    /// triangle (diagonal included) row-major as little-endian f64.
    ///
    /// The format carries no ids; [`SimilarityMatrix::read_tmsm`] assigns
    /// positional ids `"0"`, `"1"`, ...
    pub fn write_tmsm<W: Write>(&self, mut writer: W) -> Result<(), SimilarityError> {
        writer.write_all(TMSM_MAGIC)?;
        let n = self.n();
        writer.write_all(&u32::try_from(n).map_err(|_| SimilarityError::Binary("matrix too large".into()))?.to_le_bytes())?;
        for i in 0..n {
            for j in i..n {
                writer.write_all(&self.get(i, j).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_tmsm<R: Read>(mut reader: R) -> Result<Self, SimilarityError> {
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if &magic != TMSM_MAGIC {
            return Err(SimilarityError::Binary("bad magic".into()));
        }
        let mut n_bytes = [0u8; 4];
        reader.read_exact(&mut n_bytes)?;
        let n = u32::from_le_bytes(n_bytes) as usize;
        let mut values = vec![0.0f64; n * n];
        let mut buf = [0u8; 8];
        for i in 0..n {
            for j in i..n {
                reader.read_exact(&mut buf)?;
                let v = f64::from_le_bytes(buf);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        let doc_ids = (0..n).map(|i| i.to_string()).collect();
        Self::from_values(doc_ids, values)
    }
}

/// Pairwise similarity matrix under the default union denominator.
pub fn build_matrix(docs: &[TopicMapDoc]) -> Result<SimilarityMatrix, SimilarityError> {
    build_matrix_with(Denominator::Union, docs)
}

/// Pairwise similarity matrix under an explicit denominator mode.
///
/// Rows are computed in parallel; every cell is an independent pure function
/// of the two documents, so the result is bit-identical to the sequential
/// n-squared loop.
pub fn build_matrix_with(
    denominator: Denominator,
    docs: &[TopicMapDoc],
) -> Result<SimilarityMatrix, SimilarityError> {
    let mut seen = BTreeSet::new();
    for doc in docs {
        if !seen.insert(doc.doc_id.clone()) {
            return Err(SimilarityError::DuplicateDocId(doc.doc_id.clone()));
        }
    }
    let n = docs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| sim_pair_with(denominator, &docs[i], &docs[j]).0).collect())
        .collect();
    let mut values = Vec::with_capacity(n * n);
    for row in rows {
        values.extend(row);
    }
    SimilarityMatrix::from_values(docs.iter().map(|d| d.doc_id.clone()).collect(), values)
}
