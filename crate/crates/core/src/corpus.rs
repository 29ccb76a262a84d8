//! Labeled document collections and their on-disk formats.
//!
//! Three loaders produce the same [`Corpus`] shape:
//!
//! * [`load_text_dir`]: one file per document, optional `id<TAB>class`
//!   labels file.
//! * [`load_jsonl`]: one JSON object per line with keys `id`, `text`,
//!   optional `class`.
//! * [`load_sgml_lenient`]: Reuters-21578-style `<REUTERS>` records, parsed
//!   without the DTD.
//!
//! Document text is kept raw (bytes decoded as UTF-8 with replacement); all
//! normalization happens later in the extractor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One document: a unique id, its raw body, and an optional gold class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(rename = "class", skip_serializing_if = "Option::is_none", default)]
    pub gold_class: Option<String>,
}

/// An ordered, immutable document collection.
///
/// Document order is the load order and is stable. `classes` is the set of
/// distinct gold labels present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    classes: BTreeSet<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty doc id")]
    EmptyId,
    #[error("duplicate doc id: {0}")]
    DuplicateId(String),
    #[error("empty text for doc: {0} (use lenient mode to allow)")]
    EmptyText(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("missing label for ids: {}", ids.join(", "))]
    MissingLabels { ids: Vec<String> },
    #[error("unmatched label id: {}", ids.join(", "))]
    UnmatchedLabelIds { ids: Vec<String> },
    #[error("labels line {line}: {msg}")]
    LabelsLine { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    JsonlLine { line: usize, msg: String },
    #[error("no SGML records")]
    NoSgmlRecords,
}

impl Corpus {
    /// Build a corpus, checking id uniqueness.
    pub fn new(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        let mut classes = BTreeSet::new();
        for doc in &documents {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId);
            }
            if !seen.insert(doc.id.clone()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
            if let Some(class) = &doc.gold_class {
                classes.insert(class.clone());
            }
        }
        Ok(Self { documents, classes })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// Distinct gold class labels present in the corpus.
    pub fn classes(&self) -> &BTreeSet<String> {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Document ids in corpus order.
    pub fn doc_ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }

    /// Gold labels as an id -> class map.
    pub fn gold_map(&self) -> BTreeMap<String, String> {
        self.documents
            .iter()
            .filter_map(|d| d.gold_class.clone().map(|c| (d.id.clone(), c)))
            .collect()
    }

    fn check_texts(&self, lenient: bool) -> Result<(), CorpusError> {
        if lenient {
            return Ok(());
        }
        for doc in &self.documents {
            if doc.text.is_empty() {
                return Err(CorpusError::EmptyText(doc.id.clone()));
            }
        }
        Ok(())
    }
}

fn read_to_string_lossy(path: &Path) -> Result<String, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Parse a labels file: one `id<TAB>class` per line, `#` comments ignored.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, String>, CorpusError> {
    let content = read_to_string_lossy(path)?;
    let mut labels = BTreeMap::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, class) = line.split_once('\t').ok_or(CorpusError::LabelsLine {
            line: line_no,
            msg: "expected id<TAB>class".into(),
        })?;
        if id.is_empty() || class.is_empty() {
            return Err(CorpusError::LabelsLine {
                line: line_no,
                msg: "empty id or class".into(),
            });
        }
        if labels.insert(id.to_string(), class.to_string()).is_some() {
            return Err(CorpusError::LabelsLine {
                line: line_no,
                msg: format!("duplicate label id: {id}"),
            });
        }
    }
    Ok(labels)
}

/// Load a directory of text files, one document per file.
///
/// Ids are file names without their extension; files are visited in
/// lexicographic name order. When `labels_path` is given, the labels file and
/// the directory must cover exactly the same ids.
pub fn load_text_dir(
    dir: &Path,
    labels_path: Option<&Path>,
    lenient: bool,
) -> Result<Corpus, CorpusError> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();

    let labels = labels_path.map(read_labels).transpose()?;

    let mut documents = Vec::with_capacity(files.len());
    for path in &files {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = read_to_string_lossy(path)?;
        let gold_class = labels.as_ref().and_then(|m| m.get(&id).cloned());
        documents.push(Document { id, text, gold_class });
    }

    if let Some(labels) = &labels {
        let doc_ids: BTreeSet<&str> = documents.iter().map(|d| d.id.as_str()).collect();
        let unmatched: Vec<String> = labels
            .keys()
            .filter(|id| !doc_ids.contains(id.as_str()))
            .cloned()
            .collect();
        if !unmatched.is_empty() {
            return Err(CorpusError::UnmatchedLabelIds { ids: unmatched });
        }
        let missing: Vec<String> = documents
            .iter()
            .filter(|d| d.gold_class.is_none())
            .map(|d| d.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(CorpusError::MissingLabels { ids: missing });
        }
    }

    let corpus = Corpus::new(documents)?;
    corpus.check_texts(lenient)?;
    Ok(corpus)
}

#[derive(Deserialize)]
struct JsonlRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    class: Option<String>,
}

/// Load a JSONL corpus: one object per line with `id`, `text`, optional `class`.
pub fn load_jsonl(path: &Path, lenient: bool) -> Result<Corpus, CorpusError> {
    let content = read_to_string_lossy(path)?;
    let mut documents = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::JsonlLine {
                line: line_no,
                msg: format!("invalid json: {e}"),
            })?;
        let id = record.id.ok_or(CorpusError::JsonlLine {
            line: line_no,
            msg: "missing id".into(),
        })?;
        let text = record.text.ok_or(CorpusError::JsonlLine {
            line: line_no,
            msg: "missing text".into(),
        })?;
        documents.push(Document { id, text, gold_class: record.class });
    }
    let corpus = Corpus::new(documents)?;
    corpus.check_texts(lenient)?;
    Ok(corpus)
}

/// Serialize a corpus as JSONL; `load_jsonl` of the output reproduces the corpus.
pub fn save_jsonl(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let mut out = String::new();
    for doc in corpus.documents() {
        // Document serialization cannot fail: all fields are strings.
        let line = serde_json::to_string(doc).expect("document serializes");
        let _ = writeln!(out, "{line}");
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Result of an SGML load: the corpus plus a count of skipped records.
#[derive(Debug)]
pub struct SgmlLoad {
    pub corpus: Corpus,
    /// Truncated or unidentifiable records that were skipped with a warning.
    pub skipped_records: usize,
}

/// Load a Reuters-21578-style SGML file without requiring the DTD.
///
/// One document per `<REUTERS>` record: id from the `NEWID` attribute, text
/// from `<BODY>`, gold class from the first `<TOPICS><D>` entry. Records with
/// no topics are dropped unless `keep_unlabeled` is set. Unknown tags are
/// skipped and unescaped entities are tolerated.
pub fn load_sgml_lenient(path: &Path, keep_unlabeled: bool) -> Result<SgmlLoad, CorpusError> {
    let content = read_to_string_lossy(path)?;
    parse_sgml(&content, keep_unlabeled)
}

fn parse_sgml(content: &str, keep_unlabeled: bool) -> Result<SgmlLoad, CorpusError> {
    // Reuters tags are uppercase; search a lowercased shadow so offsets into
    // the original text stay valid (ASCII lowering is length-preserving).
    let lower = content.to_ascii_lowercase();
    let mut documents = Vec::new();
    let mut skipped = 0usize;
    let mut found_any = false;
    let mut pos = 0usize;

    while let Some(start_rel) = lower[pos..].find("<reuters") {
        found_any = true;
        let start = pos + start_rel;
        let Some(end_rel) = lower[start..].find("</reuters>") else {
            // Truncated final record.
            skipped += 1;
            break;
        };
        let end = start + end_rel;
        let record = &content[start..end];
        let record_lower = &lower[start..end];
        pos = end + "</reuters>".len();

        let Some(id) = attr_value(record, record_lower, "newid") else {
            skipped += 1;
            continue;
        };

        let topics = element_body(record, record_lower, "topics")
            .map(|(body, body_lower)| d_entries(body, body_lower))
            .unwrap_or_default();
        if topics.is_empty() && !keep_unlabeled {
            continue;
        }

        let text = element_body(record, record_lower, "body")
            .map(|(body, _)| decode_entities(body))
            .unwrap_or_default();

        documents.push(Document {
            id,
            text,
            gold_class: topics.into_iter().next(),
        });
    }

    if !found_any {
        return Err(CorpusError::NoSgmlRecords);
    }
    Ok(SgmlLoad {
        corpus: Corpus::new(documents)?,
        skipped_records: skipped,
    })
}

/// Value of `name="..."` inside the record's opening tag.
fn attr_value(record: &str, record_lower: &str, name: &str) -> Option<String> {
    let tag_end = record_lower.find('>')?;
    let open_lower = &record_lower[..tag_end];
    let needle = format!("{name}=\"");
    let val_start = open_lower.find(&needle)? + needle.len();
    let val_len = record[val_start..tag_end].find('"')?;
    Some(record[val_start..val_start + val_len].to_string())
}

/// Content between `<tag...>` and `</tag>`, with its lowercased shadow.
fn element_body<'a>(
    record: &'a str,
    record_lower: &'a str,
    tag: &str,
) -> Option<(&'a str, &'a str)> {
    let open = format!("<{tag}");
    let close = format!("</{tag}>");
    let open_at = record_lower.find(&open)?;
    let content_start = open_at + record_lower[open_at..].find('>')? + 1;
    let content_len = record_lower[content_start..].find(&close)?;
    Some((
        &record[content_start..content_start + content_len],
        &record_lower[content_start..content_start + content_len],
    ))
}

/// All `<D>...</D>` entries, entity-decoded.
fn d_entries(body: &str, body_lower: &str) -> Vec<String> {
    let mut entries = Vec::new();
    let mut pos = 0usize;
    while let Some(open_rel) = body_lower[pos..].find("<d>") {
        let start = pos + open_rel + 3;
        let Some(len) = body_lower[start..].find("</d>") else {
            break;
        };
        entries.push(decode_entities(&body[start..start + len]));
        pos = start + len + 4;
    }
    entries
}

/// Lenient entity decoding: known entities and numeric references are
/// resolved; anything else (including bare `&`) passes through unchanged.
fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        match decode_one_entity(tail) {
            Some((ch, consumed)) => {
                out.push(ch);
                rest = &tail[consumed..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_one_entity(tail: &str) -> Option<(char, usize)> {
    let semi = tail.find(';')?;
    if semi > 12 {
        return None;
    }
    let name = &tail[1..semi];
    let ch = match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        _ => {
            let code = name.strip_prefix('#')?;
            let value = if let Some(hex) = code.strip_prefix(['x', 'X']) {
                u32::from_str_radix(hex, 16).ok()?
            } else {
                code.parse::<u32>().ok()?
            };
            char::from_u32(value)?
        }
    };
    Some((ch, semi + 1))
}
