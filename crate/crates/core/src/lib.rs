//! Topic-map based document clustering (TMHC).
//!
//! Documents are reduced to three levels of topic-map constructs (topics,
//! topic-tags, and tag-values), and pairwise similarity is the overlap of
//! those construct sets. Hierarchical agglomerative clustering over the
//! similarity matrix produces the final grouping, which is scored with
//! F-measure, purity, and entropy against gold labels.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`corpus`]: load labeled document collections (text dir, JSONL, lenient
//!   Reuters-style SGML).
//! * [`extractor`]: gazetteer-based construct extraction from raw text.
//! * [`xtm`]: XML Topic Maps (XTM 1.0) parsing, serialization, and the
//!   construct-extraction profile.
//! * [`similarity`]: the topic-map similarity measure and the pairwise
//!   matrix.
//! * [`clusterer`]: HAC plus the tf-idf/cosine and bisecting k-means
//!   baselines.
//! * [`metrics`]: F-measure, purity, and entropy over a contingency table.
//! * [`bench`]: multi-dataset, multi-algorithm comparison harness.

pub mod bench;
pub mod clusterer;
pub mod corpus;
pub mod extractor;
pub mod metrics;
pub mod similarity;
pub mod text;
pub mod xtm;

pub use clusterer::{Clustering, Dendrogram, DocVector, Linkage};
pub use corpus::{Corpus, Document};
pub use extractor::{ExtractionReport, Gazetteer};
pub use metrics::ContingencyTable;
pub use similarity::{Denominator, SimilarityBreakdown, SimilarityMatrix};
pub use xtm::{TopicMapDoc, XtmTopicMap};
