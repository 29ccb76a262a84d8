//! Multi-dataset, multi-algorithm comparison harness.
//!
//! A run is described by a small TOML config:
//!
//! ```toml
//! seed = 42
//! linkage = "average"          # single | complete | average
//! gazetteer = "gazetteer.tsv"  # required when algorithms includes "tmhc"
//! denominator = "union"        # union | sum
//! algorithms = ["tmhc", "dvm_hac", "bkm"]
//! k = "gold"                   # "gold" (cluster count = gold class count) or an integer
//!
//! [[dataset]]
//! name = "planted"
//! loader = "jsonl"             # jsonl | text_dir | sgml
//! path = "planted.jsonl"
//! # labels = "labels.tsv"      # text_dir only
//! # keep_unlabeled = true      # sgml only
//! ```
//!
//! Relative paths resolve against the config file's directory. Every
//! `dataset x algorithm` cell produces one result row; loader or algorithm
//! failures become error rows and the run continues. Rendered outputs are
//! deterministic: rerunning the same config reproduces them byte for byte,
//! which is why the serialized `raw.json` and `raw.csv` carry no wall-clock
//! timings (those stay on the in-memory rows and the progress output).

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::clusterer::{
    bisecting_kmeans, cosine_matrix, cut, default_stopwords, hac, tfidf_vectorize, Clustering,
    Linkage,
};
use crate::corpus::{self, Corpus};
use crate::extractor::{extract, load_gazetteer, Gazetteer};
use crate::metrics::{contingency, entropy, f_measure, purity};
use crate::similarity::{build_matrix_with, Denominator};
use crate::xtm::TopicMapDoc;

/// Restarts per bisecting k-means split.
pub const DEFAULT_BKM_TRIALS: usize = 5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algorithm {
    /// Topic-map extraction, similarity matrix, HAC.
    Tmhc,
    /// Tf-idf vectors, cosine matrix, HAC.
    DvmHac,
    /// Tf-idf vectors, bisecting k-means.
    Bkm,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tmhc => "tmhc",
            Self::DvmHac => "dvm_hac",
            Self::Bkm => "bkm",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tmhc" => Ok(Self::Tmhc),
            "dvm_hac" => Ok(Self::DvmHac),
            "bkm" => Ok(Self::Bkm),
            other => Err(format!("unknown algorithm: {other} (expected tmhc, dvm_hac, or bkm)")),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the cluster count is chosen per dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KPolicy {
    /// Cut to the number of distinct gold classes.
    GoldClassCount,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoaderKind {
    TextDir,
    Jsonl,
    Sgml,
}

impl FromStr for LoaderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text_dir" => Ok(Self::TextDir),
            "jsonl" => Ok(Self::Jsonl),
            "sgml" => Ok(Self::Sgml),
            other => Err(format!("unknown loader: {other} (expected text_dir, jsonl, or sgml)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub name: String,
    pub loader: LoaderKind,
    pub path: PathBuf,
    /// Labels file, `text_dir` only.
    pub labels: Option<PathBuf>,
    /// Keep SGML records without topics, `sgml` only.
    pub keep_unlabeled: bool,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetSpec>,
    pub algorithms: Vec<Algorithm>,
    pub k_policy: KPolicy,
    pub seed: u64,
    pub linkage: Linkage,
    pub gazetteer: Option<PathBuf>,
    pub denominator: Denominator,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    linkage: Option<String>,
    gazetteer: Option<String>,
    denominator: Option<String>,
    algorithms: Vec<String>,
    k: Option<RawK>,
    #[serde(default)]
    dataset: Vec<RawDataset>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawK {
    Fixed(usize),
    Named(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: String,
    loader: String,
    path: String,
    labels: Option<String>,
    keep_unlabeled: Option<bool>,
}

impl BenchConfig {
    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let content = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&content, base)
    }

    /// Parse a config; relative paths resolve against `base_dir`.
    pub fn from_toml_str(content: &str, base_dir: &Path) -> Result<Self, BenchError> {
        let raw: RawConfig =
            toml::from_str(content).map_err(|e| BenchError::Config(e.to_string()))?;

        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };

        let mut algorithms = Vec::new();
        for name in &raw.algorithms {
            let alg: Algorithm = name.parse().map_err(BenchError::Config)?;
            if algorithms.contains(&alg) {
                return Err(BenchError::Config(format!("duplicate algorithm: {alg}")));
            }
            algorithms.push(alg);
        }
        if algorithms.is_empty() {
            return Err(BenchError::Config("at least one algorithm required".into()));
        }

        let mut datasets = Vec::new();
        let mut names = BTreeSet::new();
        for ds in &raw.dataset {
            if !names.insert(ds.name.clone()) {
                return Err(BenchError::Config(format!("duplicate dataset name: {}", ds.name)));
            }
            datasets.push(DatasetSpec {
                name: ds.name.clone(),
                loader: ds.loader.parse().map_err(BenchError::Config)?,
                path: resolve(&ds.path),
                labels: ds.labels.as_deref().map(resolve),
                keep_unlabeled: ds.keep_unlabeled.unwrap_or(false),
            });
        }
        if datasets.is_empty() {
            return Err(BenchError::Config("at least one dataset required".into()));
        }

        let k_policy = match raw.k {
            None => KPolicy::GoldClassCount,
            Some(RawK::Fixed(k)) if k >= 1 => KPolicy::Fixed(k),
            Some(RawK::Fixed(k)) => {
                return Err(BenchError::Config(format!("fixed k must be >= 1, got {k}")))
            }
            Some(RawK::Named(s)) if s == "gold" => KPolicy::GoldClassCount,
            Some(RawK::Named(s)) => {
                return Err(BenchError::Config(format!("k must be \"gold\" or an integer, got {s:?}")))
            }
        };

        let linkage = match &raw.linkage {
            None => Linkage::Average,
            Some(s) => s.parse().map_err(BenchError::Config)?,
        };
        let denominator = match &raw.denominator {
            None => Denominator::Union,
            Some(s) => s.parse().map_err(BenchError::Config)?,
        };
        let gazetteer = raw.gazetteer.as_deref().map(resolve);
        if algorithms.contains(&Algorithm::Tmhc) && gazetteer.is_none() {
            return Err(BenchError::Config("tmhc requires a gazetteer path".into()));
        }

        Ok(Self {
            datasets,
            algorithms,
            k_policy,
            seed: raw.seed.unwrap_or(0),
            linkage,
            gazetteer,
            denominator,
        })
    }
}

/// Metrics for one successful `dataset x algorithm` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMetrics {
    pub f_measure: f64,
    pub purity: f64,
    pub entropy: f64,
    pub doc_count: usize,
    pub k: usize,
    /// Clustering stage only (matrix construction through the cut); loading
    /// and representation building are excluded. Not serialized.
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub outcome: Result<RowMetrics, String>,
}

/// All rows of a run, sorted by dataset then algorithm name.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
}

/// Run every `dataset x algorithm` cell. Failures never abort the run; they
/// become error rows.
pub fn run_bench(config: &BenchConfig) -> BenchResult {
    let gazetteer: Option<Result<Gazetteer, String>> = if config.algorithms.contains(&Algorithm::Tmhc) {
        config.gazetteer.as_deref().map(|p| load_gazetteer(p).map_err(|e| e.to_string()))
    } else {
        None
    };

    let mut rows = Vec::new();
    for dataset in &config.datasets {
        let corpus = load_dataset(dataset);
        for &algorithm in &config.algorithms {
            let outcome = match &corpus {
                Err(e) => Err(e.clone()),
                Ok(corpus) => run_cell(config, algorithm, corpus, gazetteer.as_ref()),
            };
            rows.push(BenchRow { dataset: dataset.name.clone(), algorithm, outcome });
        }
    }
    rows.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then_with(|| a.algorithm.as_str().cmp(b.algorithm.as_str()))
    });
    BenchResult { rows }
}

fn load_dataset(spec: &DatasetSpec) -> Result<Corpus, String> {
    let result = match spec.loader {
        LoaderKind::TextDir => corpus::load_text_dir(&spec.path, spec.labels.as_deref(), true),
        LoaderKind::Jsonl => corpus::load_jsonl(&spec.path, true),
        LoaderKind::Sgml => {
            corpus::load_sgml_lenient(&spec.path, spec.keep_unlabeled).map(|load| load.corpus)
        }
    };
    result.map_err(|e| format!("load {}: {e}", spec.name))
}

fn run_cell(
    config: &BenchConfig,
    algorithm: Algorithm,
    corpus: &Corpus,
    gazetteer: Option<&Result<Gazetteer, String>>,
) -> Result<RowMetrics, String> {
    let k = match config.k_policy {
        KPolicy::Fixed(k) => k,
        KPolicy::GoldClassCount => {
            let k = corpus.classes().len();
            if k == 0 {
                return Err("dataset has no gold labels".into());
            }
            k
        }
    };

    let (clustering, wall_time) = match algorithm {
        Algorithm::Tmhc => {
            let gaz = gazetteer
                .ok_or_else(|| "gazetteer not configured".to_string())?
                .as_ref()
                .map_err(|e| format!("gazetteer: {e}"))?;
            let docs: Vec<TopicMapDoc> =
                corpus.documents().iter().map(|d| extract(d, gaz).0).collect();
            let start = Instant::now();
            let matrix = build_matrix_with(config.denominator, &docs).map_err(|e| e.to_string())?;
            let clustering = cut(&hac(&matrix, config.linkage), k).map_err(|e| e.to_string())?;
            (clustering, start.elapsed())
        }
        Algorithm::DvmHac => {
            let vectors = tfidf_vectorize(corpus, &default_stopwords());
            let start = Instant::now();
            let matrix = cosine_matrix(corpus.doc_ids(), &vectors).map_err(|e| e.to_string())?;
            let clustering = cut(&hac(&matrix, config.linkage), k).map_err(|e| e.to_string())?;
            (clustering, start.elapsed())
        }
        Algorithm::Bkm => {
            let vectors = tfidf_vectorize(corpus, &default_stopwords());
            let start = Instant::now();
            let clustering = bisecting_kmeans(&vectors, k, DEFAULT_BKM_TRIALS, config.seed)
                .map_err(|e| e.to_string())?;
            (clustering, start.elapsed())
        }
    };

    score(&clustering, corpus, wall_time)
}

fn score(clustering: &Clustering, corpus: &Corpus, wall_time: Duration) -> Result<RowMetrics, String> {
    let table =
        contingency(clustering, &corpus.doc_ids(), &corpus.gold_map()).map_err(|e| e.to_string())?;
    Ok(RowMetrics {
        f_measure: f_measure(&table),
        purity: purity(&table),
        entropy: entropy(&table),
        doc_count: corpus.len(),
        k: clustering.k,
        wall_time,
    })
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    FMeasure,
    Purity,
    Entropy,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::FMeasure, Metric::Purity, Metric::Entropy];

    pub fn key(self) -> &'static str {
        match self {
            Self::FMeasure => "f_measure",
            Self::Purity => "purity",
            Self::Entropy => "entropy",
        }
    }

    /// Output file stem (`fmeasure.csv` etc).
    pub fn file_stem(self) -> &'static str {
        match self {
            Self::FMeasure => "fmeasure",
            Self::Purity => "purity",
            Self::Entropy => "entropy",
        }
    }

    fn pick(self, m: &RowMetrics) -> f64 {
        match self {
            Self::FMeasure => m.f_measure,
            Self::Purity => m.purity,
            Self::Entropy => m.entropy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
    Markdown,
}

fn table_axes(result: &BenchResult) -> (Vec<String>, Vec<Algorithm>) {
    let datasets: BTreeSet<String> = result.rows.iter().map(|r| r.dataset.clone()).collect();
    let mut algorithms: Vec<Algorithm> = result
        .rows
        .iter()
        .map(|r| r.algorithm)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    algorithms.sort_by_key(|a| a.as_str());
    (datasets.into_iter().collect(), algorithms)
}

fn cell(result: &BenchResult, dataset: &str, algorithm: Algorithm, metric: Metric) -> Option<f64> {
    result
        .rows
        .iter()
        .find(|r| r.dataset == dataset && r.algorithm == algorithm)
        .and_then(|r| r.outcome.as_ref().ok())
        .map(|m| metric.pick(m))
}

/// One metric as a table: rows are datasets, columns are algorithms.
/// Markdown rounds to 2 decimals; csv and json keep full precision. Error
/// cells render empty in csv, `error` in markdown, and `null` in json.
pub fn render_metric_table(result: &BenchResult, metric: Metric, format: TableFormat) -> String {
    let (datasets, algorithms) = table_axes(result);
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["dataset".to_string()];
            header.extend(algorithms.iter().map(|a| a.as_str().to_string()));
            w.write_record(&header).expect("csv write");
            for dataset in &datasets {
                let mut record = vec![dataset.clone()];
                for &alg in &algorithms {
                    record.push(
                        cell(result, dataset, alg, metric)
                            .map(|v| v.to_string())
                            .unwrap_or_default(),
                    );
                }
                w.write_record(&record).expect("csv write");
            }
            String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8 csv")
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| dataset |");
            for alg in &algorithms {
                out.push_str(&format!(" {alg} |"));
            }
            out.push('\n');
            out.push_str("|---|");
            for _ in &algorithms {
                out.push_str("---|");
            }
            out.push('\n');
            for dataset in &datasets {
                out.push_str(&format!("| {dataset} |"));
                for &alg in &algorithms {
                    match cell(result, dataset, alg, metric) {
                        Some(v) => out.push_str(&format!(" {v:.2} |")),
                        None => out.push_str(" error |"),
                    }
                }
                out.push('\n');
            }
            out
        }
        TableFormat::Json => {
            let rows: Vec<serde_json::Value> = datasets
                .iter()
                .map(|dataset| {
                    let values: serde_json::Map<String, serde_json::Value> = algorithms
                        .iter()
                        .map(|&alg| {
                            let v = cell(result, dataset, alg, metric)
                                .map_or(serde_json::Value::Null, |v| json!(v));
                            (alg.as_str().to_string(), v)
                        })
                        .collect();
                    json!({ "dataset": dataset, "values": values })
                })
                .collect();
            let table = json!({
                "metric": metric.key(),
                "algorithms": algorithms.iter().map(|a| a.as_str()).collect::<Vec<_>>(),
                "rows": rows,
            });
            serde_json::to_string_pretty(&table).expect("json table")
        }
    }
}

/// All three metric tables in one stream.
pub fn render_tables(result: &BenchResult, format: TableFormat) -> String {
    match format {
        TableFormat::Json => {
            let tables: Vec<serde_json::Value> = Metric::ALL
                .iter()
                .map(|&m| {
                    serde_json::from_str(&render_metric_table(result, m, format))
                        .expect("table json")
                })
                .collect();
            serde_json::to_string_pretty(&tables).expect("json tables")
        }
        TableFormat::Csv | TableFormat::Markdown => {
            let mut out = String::new();
            for (i, &metric) in Metric::ALL.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                if format == TableFormat::Markdown {
                    out.push_str(&format!("## {}\n\n", metric.key()));
                } else {
                    out.push_str(&format!("# {}\n", metric.key()));
                }
                out.push_str(&render_metric_table(result, metric, format));
            }
            out
        }
    }
}

/// Full result rows as JSON (without wall-clock timings, so reruns are
/// byte-identical).
pub fn to_raw_json(result: &BenchResult) -> String {
    let rows: Vec<serde_json::Value> = result
        .rows
        .iter()
        .map(|row| match &row.outcome {
            Ok(m) => json!({
                "dataset": row.dataset,
                "algorithm": row.algorithm.as_str(),
                "f_measure": m.f_measure,
                "purity": m.purity,
                "entropy": m.entropy,
                "doc_count": m.doc_count,
                "k": m.k,
            }),
            Err(e) => json!({
                "dataset": row.dataset,
                "algorithm": row.algorithm.as_str(),
                "error": e,
            }),
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "rows": rows })).expect("raw json")
}

/// Flat per-cell report: one CSV row per `dataset x algorithm` with all
/// three metrics at full precision.
pub fn to_raw_csv(result: &BenchResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "algorithm", "k", "f_measure", "purity", "entropy", "doc_count", "error"])
        .expect("csv write");
    for row in &result.rows {
        let record = match &row.outcome {
            Ok(m) => vec![
                row.dataset.clone(),
                row.algorithm.as_str().to_string(),
                m.k.to_string(),
                m.f_measure.to_string(),
                m.purity.to_string(),
                m.entropy.to_string(),
                m.doc_count.to_string(),
                String::new(),
            ],
            Err(e) => vec![
                row.dataset.clone(),
                row.algorithm.as_str().to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.clone(),
            ],
        };
        w.write_record(&record).expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8 csv")
}

/// Write `fmeasure.{csv,md}`, `purity.{csv,md}`, `entropy.{csv,md}`,
/// `raw.csv`, and `raw.json` under `out_dir`.
pub fn write_outputs(result: &BenchResult, out_dir: &Path) -> Result<(), BenchError> {
    let io_err = |path: &Path, source: io::Error| BenchError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    for metric in Metric::ALL {
        for (format, ext) in [(TableFormat::Csv, "csv"), (TableFormat::Markdown, "md")] {
            let path = out_dir.join(format!("{}.{ext}", metric.file_stem()));
            fs::write(&path, render_metric_table(result, metric, format))
                .map_err(|e| io_err(&path, e))?;
        }
    }
    let raw_csv = out_dir.join("raw.csv");
    fs::write(&raw_csv, to_raw_csv(result)).map_err(|e| io_err(&raw_csv, e))?;
    let raw = out_dir.join("raw.json");
    let mut content = to_raw_json(result);
    content.push('\n');
    fs::write(&raw, content).map_err(|e| io_err(&raw, e))?;
    Ok(())
}
