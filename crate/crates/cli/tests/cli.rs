//! End-to-end subcommand tests against the built binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tmhc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tmhc"))
}

fn run(args: &[&str]) -> Output {
    tmhc().args(args).output().expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

const GAZETTEER: &str = "cricket\tsports\tcricket\nelection\tpolitics\telection\nVALUE\tcricket\tpakistan\n";
const CORPUS: &str = r#"{"id":"s1","text":"cricket in pakistan","class":"sports"}
{"id":"s2","text":"more cricket and cricket","class":"sports"}
{"id":"p1","text":"an election update","class":"politics"}
"#;

struct Fixture {
    _tmp: TempDir,
    dir: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = TempDir::new().unwrap();
        let dir = tmp.path().to_path_buf();
        fs::write(dir.join("corpus.jsonl"), CORPUS).unwrap();
        fs::write(dir.join("gazetteer.tsv"), GAZETTEER).unwrap();
        fs::write(dir.join("labels.tsv"), "s1\tsports\ns2\tsports\np1\tpolitics\n").unwrap();
        Self { _tmp: tmp, dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.join(name).display().to_string()
    }
}

#[test]
fn extract_writes_xtm_files_and_report() {
    let fx = Fixture::new();
    let out = run(&[
        "extract",
        "--jsonl", &fx.path("corpus.jsonl"),
        "--gazetteer", &fx.path("gazetteer.tsv"),
        "--out", &fx.path("xtm"),
        "--quiet",
    ]);
    assert_exit(&out, 0);
    for name in ["s1.xtm", "s2.xtm", "p1.xtm", "report.json"] {
        assert!(fx.dir.join("xtm").join(name).exists(), "{name} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fx.dir.join("xtm/report.json")).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 3);
}

#[test]
fn extract_missing_gazetteer_exits_2() {
    let fx = Fixture::new();
    let missing = fx.path("nope.tsv");
    let out = run(&[
        "extract",
        "--jsonl", &fx.path("corpus.jsonl"),
        "--gazetteer", &missing,
        "--out", &fx.path("xtm"),
    ]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tsv"));
}

#[test]
fn extract_empty_corpus_is_ok() {
    let fx = Fixture::new();
    fs::write(fx.dir.join("empty.jsonl"), "").unwrap();
    let out = run(&[
        "extract",
        "--jsonl", &fx.path("empty.jsonl"),
        "--gazetteer", &fx.path("gazetteer.tsv"),
        "--out", &fx.path("xtm-empty"),
        "--quiet",
    ]);
    assert_exit(&out, 0);
    let report = fs::read_to_string(fx.dir.join("xtm-empty/report.json")).unwrap();
    assert_eq!(report.trim(), "[]");
}

fn extract_fixture(fx: &Fixture) {
    let out = run(&[
        "extract",
        "--jsonl", &fx.path("corpus.jsonl"),
        "--gazetteer", &fx.path("gazetteer.tsv"),
        "--out", &fx.path("xtm"),
        "--quiet",
    ]);
    assert_exit(&out, 0);
}

#[test]
fn similarity_writes_matrix_forms() {
    let fx = Fixture::new();
    extract_fixture(&fx);
    let out = run(&[
        "similarity",
        "--xtm-dir", &fx.path("xtm"),
        "--out", &fx.path("sim"),
        "--binary",
        "--quiet",
    ]);
    assert_exit(&out, 0);
    let csv = fs::read_to_string(fx.dir.join("sim/matrix.csv")).unwrap();
    // ids sorted by file name: p1, s1, s2; identical docs s1/s2 share cricket constructs
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "p1,s1,s2");
    assert_eq!(lines.len(), 4);
    let bin = fs::read(fx.dir.join("sim/matrix.tmsm")).unwrap();
    assert_eq!(&bin[..4], b"TMSM");
}

#[test]
fn cluster_from_xtm_dir_and_from_matrix_agree() {
    let fx = Fixture::new();
    extract_fixture(&fx);
    let out = run(&[
        "cluster",
        "--xtm-dir", &fx.path("xtm"),
        "--k", "2",
        "--out", &fx.path("c1"),
        "--quiet",
    ]);
    assert_exit(&out, 0);
    let clusters = fs::read_to_string(fx.dir.join("c1/clusters.csv")).unwrap();
    assert_eq!(clusters.lines().count(), 4); // header + 3 docs
    assert!(fx.dir.join("c1/dendrogram.json").exists());

    let sim = run(&["similarity", "--xtm-dir", &fx.path("xtm"), "--out", &fx.path("sim"), "--quiet"]);
    assert_exit(&sim, 0);
    let out2 = run(&[
        "cluster",
        "--matrix", &fx.path("sim/matrix.csv"),
        "--k", "2",
        "--out", &fx.path("c2"),
        "--quiet",
    ]);
    assert_exit(&out2, 0);
    let from_matrix = fs::read_to_string(fx.dir.join("c2/clusters.csv")).unwrap();
    assert_eq!(clusters, from_matrix);
}

#[test]
fn cluster_k_defaults_to_gold_class_count_with_labels() {
    let fx = Fixture::new();
    extract_fixture(&fx);
    let out = run(&[
        "cluster",
        "--xtm-dir", &fx.path("xtm"),
        "--labels", &fx.path("labels.tsv"),
        "--out", &fx.path("c3"),
        "--quiet",
    ]);
    assert_exit(&out, 0);
    let clusters = fs::read_to_string(fx.dir.join("c3/clusters.csv")).unwrap();
    let distinct: std::collections::BTreeSet<&str> =
        clusters.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(distinct.len(), 2);
}

#[test]
fn cluster_k_too_large_exits_2() {
    let fx = Fixture::new();
    extract_fixture(&fx);
    let out = run(&[
        "cluster",
        "--xtm-dir", &fx.path("xtm"),
        "--k", "7",
        "--out", &fx.path("c4"),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn cluster_without_k_or_labels_exits_2() {
    let fx = Fixture::new();
    extract_fixture(&fx);
    let out = run(&["cluster", "--xtm-dir", &fx.path("xtm"), "--out", &fx.path("c5")]);
    assert_exit(&out, 2);
}

#[test]
fn cluster_runs_are_deterministic() {
    let fx = Fixture::new();
    extract_fixture(&fx);
    for out_dir in ["d1", "d2"] {
        let out = run(&[
            "cluster",
            "--xtm-dir", &fx.path("xtm"),
            "--k", "2",
            "--out", &fx.path(out_dir),
            "--quiet",
        ]);
        assert_exit(&out, 0);
    }
    for name in ["clusters.csv", "dendrogram.json"] {
        assert_eq!(
            fs::read(fx.dir.join("d1").join(name)).unwrap(),
            fs::read(fx.dir.join("d2").join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn evaluate_perfect_and_mixed_fixtures() {
    let fx = Fixture::new();
    fs::write(
        fx.dir.join("perfect.csv"),
        "doc_id,cluster_id\ns1,0\ns2,0\np1,1\n",
    )
    .unwrap();
    let out = run(&["evaluate", "--clustering", &fx.path("perfect.csv"), "--labels", &fx.path("labels.tsv")]);
    assert_exit(&out, 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["f_measure"], 1.0);
    assert_eq!(report["purity"], 1.0);
    assert_eq!(report["entropy"], 0.0);
    assert_eq!(report["entropy_log_base"], "2");

    // the {a,a,b},{b,b} fixture
    fs::write(
        fx.dir.join("labels5.tsv"),
        "d1\ta\nd2\ta\nd3\tb\nd4\tb\nd5\tb\n",
    )
    .unwrap();
    fs::write(
        fx.dir.join("mixed.csv"),
        "doc_id,cluster_id\nd1,0\nd2,0\nd3,0\nd4,1\nd5,1\n",
    )
    .unwrap();
    let out = run(&["evaluate", "--clustering", &fx.path("mixed.csv"), "--labels", &fx.path("labels5.tsv")]);
    assert_exit(&out, 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["f_measure"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert!((report["purity"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert!((report["entropy"].as_f64().unwrap() - 0.5510).abs() < 1e-4);
}

#[test]
fn evaluate_unlabeled_doc_exits_2() {
    let fx = Fixture::new();
    fs::write(fx.dir.join("c.csv"), "doc_id,cluster_id\ns1,0\nmystery,0\n").unwrap();
    let out = run(&["evaluate", "--clustering", &fx.path("c.csv"), "--labels", &fx.path("labels.tsv")]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery"));
}

fn planted_fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/planted")
}

#[test]
fn bench_writes_tables() {
    let tmp = TempDir::new().unwrap();
    let config = planted_fixture_dir().join("bench.toml");
    let out = run(&[
        "bench",
        "--config", &config.display().to_string(),
        "--out", &tmp.path().join("out").display().to_string(),
        "--quiet",
    ]);
    assert_exit(&out, 0);
    for name in ["fmeasure.csv", "fmeasure.md", "purity.csv", "purity.md", "entropy.csv", "entropy.md", "raw.csv", "raw.json"] {
        assert!(tmp.path().join("out").join(name).exists(), "{name} missing");
    }
    let raw: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/raw.json")).unwrap()).unwrap();
    assert_eq!(raw["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn bench_missing_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "bench",
        "--config", &tmp.path().join("none.toml").display().to_string(),
        "--out", &tmp.path().join("out").display().to_string(),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn unknown_flag_exits_2_and_help_exits_0() {
    let out = run(&["cluster", "--bogus-flag"]);
    assert_exit(&out, 2);
    for sub in ["extract", "similarity", "cluster", "evaluate", "bench"] {
        let out = run(&[sub, "--help"]);
        assert_exit(&out, 0);
        assert!(!out.stdout.is_empty());
    }
}
