//! `tmhc`: topic-map document clustering pipeline.
//!
//! The subcommands mirror the pipeline stages, with inspectable files
//! between them: `extract` writes one XTM file per document, `similarity`
//! turns an XTM directory into a matrix, `cluster` cuts a dendrogram into a
//! `doc_id,cluster_id` CSV, `evaluate` scores a clustering against gold
//! labels, and `bench` runs the whole comparison harness from a config file.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use tmhc_core::bench::{run_bench, write_outputs, BenchConfig};
use tmhc_core::clusterer::{cut, hac, Clustering, Linkage};
use tmhc_core::corpus::{load_jsonl, load_sgml_lenient, load_text_dir, read_labels, Corpus};
use tmhc_core::extractor::{emit_xtm, extract, load_gazetteer};
use tmhc_core::metrics::{contingency, entropy_with, f_measure, purity, LogBase};
use tmhc_core::similarity::{build_matrix_with, Denominator, SimilarityMatrix, TMSM_MAGIC};
use tmhc_core::xtm::{extract_tm_doc, parse_xtm, serialize_xtm, ParseMode, TopicMapDoc};

#[derive(Parser)]
#[command(name = "tmhc", version, about = "Topic-map based document clustering")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract topic-map constructs from a corpus into XTM files.
    Extract(ExtractArgs),
    /// Build a pairwise similarity matrix from an XTM directory.
    Similarity(SimilarityArgs),
    /// Cluster documents from a matrix or an XTM directory.
    Cluster(ClusterArgs),
    /// Score a clustering against gold labels.
    Evaluate(EvaluateArgs),
    /// Run the multi-dataset, multi-algorithm comparison harness.
    Bench(BenchArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("corpus").required(true).args(["text_dir", "jsonl", "sgml"])))]
struct CorpusArgs {
    /// Directory of text files, one document per file.
    #[arg(long, value_name = "DIR")]
    text_dir: Option<PathBuf>,
    /// Labels file (`id<TAB>class` lines) for --text-dir.
    #[arg(long, value_name = "FILE", requires = "text_dir")]
    labels: Option<PathBuf>,
    /// JSONL corpus: one object per line with id, text, optional class.
    #[arg(long, value_name = "FILE")]
    jsonl: Option<PathBuf>,
    /// Reuters-style SGML file.
    #[arg(long, value_name = "FILE")]
    sgml: Option<PathBuf>,
    /// Keep SGML records that have no topics.
    #[arg(long, requires = "sgml")]
    keep_unlabeled: bool,
    /// Allow documents with empty text.
    #[arg(long)]
    lenient: bool,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus, CliError> {
        let corpus = if let Some(dir) = &self.text_dir {
            load_text_dir(dir, self.labels.as_deref(), self.lenient)
        } else if let Some(path) = &self.jsonl {
            load_jsonl(path, self.lenient)
        } else if let Some(path) = &self.sgml {
            return load_sgml_lenient(path, self.keep_unlabeled)
                .map(|load| load.corpus)
                .map_err(input);
        } else {
            unreachable!("clap enforces the corpus group");
        };
        corpus.map_err(input)
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Gazetteer TSV driving the extraction.
    #[arg(long, value_name = "FILE")]
    gazetteer: PathBuf,
    /// Output directory for the XTM files and report.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SimilarityArgs {
    /// Directory of XTM files, one document per file.
    #[arg(long, value_name = "DIR")]
    xtm_dir: PathBuf,
    /// Output directory for matrix.csv (and matrix.tmsm with --binary).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Denominator mode for the similarity measure.
    #[arg(long, default_value = "union")]
    denominator: String,
    /// Also write the compact binary matrix form.
    #[arg(long)]
    binary: bool,
    /// Reject malformed XTM instead of skipping with warnings.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["matrix", "xtm_dir"])))]
struct ClusterArgs {
    /// Similarity matrix file (csv or tmsm binary).
    #[arg(long, value_name = "FILE")]
    matrix: Option<PathBuf>,
    /// Directory of XTM files to build the matrix from.
    #[arg(long, value_name = "DIR")]
    xtm_dir: Option<PathBuf>,
    /// Number of clusters; defaults to the gold class count when --labels is given.
    #[arg(long)]
    k: Option<usize>,
    /// Labels file used to default k to the gold class count.
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// Linkage rule: single, complete, or average.
    #[arg(long, default_value = "average")]
    linkage: String,
    /// Denominator mode when building the matrix from XTM files.
    #[arg(long, default_value = "union")]
    denominator: String,
    /// Output directory for clusters.csv and dendrogram.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Clustering CSV (`doc_id,cluster_id`).
    #[arg(long, value_name = "FILE")]
    clustering: PathBuf,
    /// Gold labels file (`id<TAB>class` lines).
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    /// Entropy logarithm base: 2 or e.
    #[arg(long, default_value = "2")]
    entropy_base: String,
    /// Also write the metric JSON to a file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Bench config TOML.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output directory for the metric tables and raw.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

enum CliError {
    /// Bad input or arguments: exit 2.
    Input(String),
    /// Environment failures (output io): exit 1.
    Internal(String),
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Extract(args) => cmd_extract(args, cli.quiet),
        Command::Similarity(args) => cmd_similarity(args, cli.quiet),
        Command::Cluster(args) => cmd_cluster(args, cli.quiet),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Bench(args) => cmd_bench(args, cli.quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Doc ids become file names; anything outside `[A-Za-z0-9._-]` is replaced
/// and collisions get a numeric suffix.
fn xtm_file_name(id: &str, used: &mut std::collections::BTreeSet<String>) -> String {
    let base: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    let mut name = format!("{base}.xtm");
    let mut i = 1;
    while !used.insert(name.clone()) {
        i += 1;
        name = format!("{base}-{i}.xtm");
    }
    name
}

fn cmd_extract(args: &ExtractArgs, quiet: bool) -> Result<(), CliError> {
    let corpus = args.corpus.load()?;
    let gazetteer = load_gazetteer(&args.gazetteer).map_err(input)?;
    fs::create_dir_all(&args.out).map_err(|e| write_err(&args.out, e))?;

    let mut reports = Vec::with_capacity(corpus.len());
    let mut used = std::collections::BTreeSet::new();
    for doc in corpus.documents() {
        let (tm, report) = extract(doc, &gazetteer);
        let map = emit_xtm(&tm).map_err(input)?;
        let path = args.out.join(xtm_file_name(&doc.id, &mut used));
        fs::write(&path, serialize_xtm(&map)).map_err(|e| write_err(&path, e))?;
        reports.push(report);
    }
    let report_path = args.out.join("report.json");
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    fs::write(&report_path, json + "\n").map_err(|e| write_err(&report_path, e))?;

    if !quiet {
        println!("extracted {} documents into {}", corpus.len(), args.out.display());
    }
    Ok(())
}

/// Load every `*.xtm` file of a directory in name order.
fn read_xtm_dir(dir: &Path, mode: ParseMode, quiet: bool) -> Result<Vec<TopicMapDoc>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| input(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|ext| ext == "xtm"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(input(format!("no .xtm files in {}", dir.display())));
    }
    let mut docs = Vec::with_capacity(files.len());
    for path in &files {
        let bytes = fs::read(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
        let parsed = parse_xtm(&bytes, mode)
            .map_err(|e| input(format!("{}: {e}", path.display())))?;
        if !quiet {
            for warning in &parsed.warnings {
                eprintln!("warning: {}: {warning}", path.display());
            }
        }
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        docs.push(extract_tm_doc(&parsed.map, &id, mode).map_err(|e| input(format!("{}: {e}", path.display())))?);
    }
    Ok(docs)
}

fn parse_denominator(s: &str) -> Result<Denominator, CliError> {
    s.parse().map_err(input)
}

fn cmd_similarity(args: &SimilarityArgs, quiet: bool) -> Result<(), CliError> {
    let mode = if args.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let docs = read_xtm_dir(&args.xtm_dir, mode, quiet)?;
    let denominator = parse_denominator(&args.denominator)?;
    let matrix = build_matrix_with(denominator, &docs).map_err(input)?;

    fs::create_dir_all(&args.out).map_err(|e| write_err(&args.out, e))?;
    let csv_path = args.out.join("matrix.csv");
    let mut csv_bytes = Vec::new();
    matrix.write_csv(&mut csv_bytes).map_err(input)?;
    fs::write(&csv_path, csv_bytes).map_err(|e| write_err(&csv_path, e))?;
    if args.binary {
        let bin_path = args.out.join("matrix.tmsm");
        let mut bin = Vec::new();
        matrix.write_tmsm(&mut bin).map_err(input)?;
        fs::write(&bin_path, bin).map_err(|e| write_err(&bin_path, e))?;
    }
    if !quiet {
        println!("similarity matrix for {} documents written to {}", matrix.n(), args.out.display());
    }
    Ok(())
}

fn load_matrix(path: &Path) -> Result<SimilarityMatrix, CliError> {
    let bytes = fs::read(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    let matrix = if bytes.starts_with(TMSM_MAGIC) {
        SimilarityMatrix::read_tmsm(&bytes[..])
    } else {
        SimilarityMatrix::read_csv(&bytes[..])
    };
    matrix.map_err(|e| input(format!("{}: {e}", path.display())))
}

fn cmd_cluster(args: &ClusterArgs, quiet: bool) -> Result<(), CliError> {
    let matrix = if let Some(path) = &args.matrix {
        load_matrix(path)?
    } else {
        let docs = read_xtm_dir(args.xtm_dir.as_deref().expect("clap group"), ParseMode::Lenient, quiet)?;
        build_matrix_with(parse_denominator(&args.denominator)?, &docs).map_err(input)?
    };

    let k = match (args.k, &args.labels) {
        (Some(k), _) => k,
        (None, Some(labels_path)) => {
            let labels = read_labels(labels_path).map_err(input)?;
            let classes: std::collections::BTreeSet<&String> = labels.values().collect();
            if classes.is_empty() {
                return Err(input("labels file holds no classes"));
            }
            classes.len()
        }
        (None, None) => return Err(input("--k is required when no --labels file is given")),
    };

    let linkage: Linkage = args.linkage.parse().map_err(input)?;
    let dendrogram = hac(&matrix, linkage);
    let clustering = cut(&dendrogram, k).map_err(input)?;

    fs::create_dir_all(&args.out).map_err(|e| write_err(&args.out, e))?;
    let clusters_path = args.out.join("clusters.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["doc_id", "cluster_id"]).expect("csv");
    for (id, cluster) in matrix.doc_ids().iter().zip(&clustering.assignments) {
        w.write_record([id.as_str(), &cluster.to_string()]).expect("csv");
    }
    let csv_bytes = w.into_inner().expect("csv flush");
    fs::write(&clusters_path, csv_bytes).map_err(|e| write_err(&clusters_path, e))?;

    let dendro_path = args.out.join("dendrogram.json");
    fs::write(&dendro_path, dendrogram.to_json() + "\n").map_err(|e| write_err(&dendro_path, e))?;

    if !quiet {
        println!(
            "clustered {} documents into {} clusters ({} linkage) under {}",
            matrix.n(),
            clustering.k,
            linkage,
            args.out.display()
        );
    }
    Ok(())
}

fn read_clustering_csv(path: &Path) -> Result<(Vec<String>, Clustering), CliError> {
    let bytes = fs::read(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(&bytes[..]);
    let mut ids = Vec::new();
    let mut raw_clusters = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| input(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(input(format!("{}: expected doc_id,cluster_id rows", path.display())));
        }
        ids.push(record[0].to_string());
        let cluster: usize = record[1]
            .parse()
            .map_err(|_| input(format!("{}: bad cluster id {:?}", path.display(), &record[1])))?;
        raw_clusters.push(cluster);
    }
    if ids.is_empty() {
        return Err(input(format!("{}: empty clustering", path.display())));
    }
    // densify cluster ids in ascending order of the originals
    let distinct: std::collections::BTreeSet<usize> = raw_clusters.iter().copied().collect();
    let dense: std::collections::BTreeMap<usize, usize> =
        distinct.into_iter().enumerate().map(|(dense, raw)| (raw, dense)).collect();
    let assignments: Vec<usize> = raw_clusters.into_iter().map(|c| dense[&c]).collect();
    let clustering = Clustering::new(assignments, dense.len()).map_err(input)?;
    Ok((ids, clustering))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let (ids, clustering) = read_clustering_csv(&args.clustering)?;
    let gold = read_labels(&args.labels).map_err(input)?;
    let base = match args.entropy_base.as_str() {
        "2" => LogBase::Two,
        "e" => LogBase::Natural,
        other => return Err(input(format!("entropy base must be 2 or e, got {other}"))),
    };
    let table = contingency(&clustering, &ids, &gold).map_err(input)?;
    let report = serde_json::json!({
        "f_measure": f_measure(&table),
        "purity": purity(&table),
        "entropy": entropy_with(&table, base),
        "entropy_log_base": base.label(),
        "k": clustering.k,
        "n": ids.len(),
    });
    let text = serde_json::to_string_pretty(&report).expect("report json");
    println!("{text}");
    if let Some(out) = &args.out {
        fs::write(out, text + "\n").map_err(|e| write_err(out, e))?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs, quiet: bool) -> Result<(), CliError> {
    let config = BenchConfig::from_file(&args.config).map_err(input)?;
    let result = run_bench(&config);
    if !quiet {
        for row in &result.rows {
            match &row.outcome {
                Ok(m) => println!(
                    "{} {}: f={:.4} purity={:.4} entropy={:.4} (n={}, k={}, {:?})",
                    row.dataset, row.algorithm, m.f_measure, m.purity, m.entropy, m.doc_count, m.k, m.wall_time
                ),
                Err(e) => println!("{} {}: error: {e}", row.dataset, row.algorithm),
            }
        }
    }
    write_outputs(&result, &args.out).map_err(|e| write_err(&args.out, e))?;
    if result.rows.iter().all(|r| r.outcome.is_err()) {
        return Err(input("every dataset x algorithm cell failed".to_string()));
    }
    Ok(())
}
