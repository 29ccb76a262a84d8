//! Gazetteer-based construct extraction.
//!
//! The deterministic, offline stand-in for an external topic-extraction
//! service: a curated phrase table maps whole-word matches in the document
//! text to `(topic, tag)` pairs, and value rules attach `(tag, value)` pairs
//! whenever the value phrase occurs while its tag is present. Matching runs
//! over [`crate::text::normalize`]d text, so repeated mentions count once and
//! case or spacing differences do not matter.
//!
//! Gazetteer files are TSV with two line shapes:
//!
//! ```text
//! pattern<TAB>topic<TAB>tag       # entry: phrase -> (topic, tag)
//! VALUE<TAB>tag<TAB>pattern       # value rule: phrase -> (tag, value)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. The `VALUE` marker is
//! matched exactly (uppercase).

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use aho_corasick::AhoCorasick;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::Document;
use crate::text::normalize;
use crate::xtm::{OccurrenceKind, TopicMapDoc, XtmError, XtmOccurrence, XtmTopic, XtmTopicMap};

/// One phrase-to-construct mapping.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GazetteerEntry {
    pub pattern: String,
    pub topic: String,
    pub tag: String,
}

/// A value phrase for a tag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ValueRule {
    pub tag: String,
    pub pattern: String,
}

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("conflicting pattern: {0}")]
    ConflictingPattern(String),
    #[error("empty gazetteer field")]
    EmptyField,
    #[error("pattern matcher: {0}")]
    Matcher(String),
}

/// An immutable phrase table plus its compiled matcher.
///
/// Entries and value rules are normalized, deduplicated, and kept in sorted
/// order, so two gazetteers built from the same rules behave identically.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    value_rules: Vec<ValueRule>,
    // patterns: entries first, then value rules
    matcher: AhoCorasick,
}

impl Gazetteer {
    /// Build a gazetteer from raw (unnormalized) rules.
    ///
    /// Exact duplicates collapse; the same pattern mapped to two different
    /// `(topic, tag)` pairs is an error.
    pub fn new(
        entries: impl IntoIterator<Item = (String, String, String)>,
        value_rules: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, GazetteerError> {
        let mut by_pattern: Vec<GazetteerEntry> = Vec::new();
        for (pattern, topic, tag) in entries {
            let entry = GazetteerEntry {
                pattern: normalize(&pattern),
                topic: normalize(&topic),
                tag: normalize(&tag),
            };
            if entry.pattern.is_empty() || entry.topic.is_empty() || entry.tag.is_empty() {
                return Err(GazetteerError::EmptyField);
            }
            by_pattern.push(entry);
        }
        by_pattern.sort();
        by_pattern.dedup();
        for pair in by_pattern.windows(2) {
            if pair[0].pattern == pair[1].pattern {
                return Err(GazetteerError::ConflictingPattern(pair[0].pattern.clone()));
            }
        }

        let mut values: Vec<ValueRule> = Vec::new();
        for (tag, pattern) in value_rules {
            let rule = ValueRule { tag: normalize(&tag), pattern: normalize(&pattern) };
            if rule.tag.is_empty() || rule.pattern.is_empty() {
                return Err(GazetteerError::EmptyField);
            }
            values.push(rule);
        }
        values.sort();
        values.dedup();

        let patterns: Vec<&str> = by_pattern
            .iter()
            .map(|e| e.pattern.as_str())
            .chain(values.iter().map(|v| v.pattern.as_str()))
            .collect();
        let matcher = AhoCorasick::new(&patterns).map_err(|e| GazetteerError::Matcher(e.to_string()))?;

        Ok(Self { entries: by_pattern, value_rules: values, matcher })
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn value_rules(&self) -> &[ValueRule] {
        &self.value_rules
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.value_rules.is_empty()
    }
}

/// Load a gazetteer from its TSV format.
pub fn load_gazetteer(path: &Path) -> Result<Gazetteer, GazetteerError> {
    let content = fs::read_to_string(path).map_err(|source| GazetteerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_gazetteer(&content)
}

pub(crate) fn parse_gazetteer(content: &str) -> Result<Gazetteer, GazetteerError> {
    let mut entries = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(GazetteerError::Line {
                line: line_no,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let nonempty = |s: &str| -> Result<(), GazetteerError> {
            if normalize(s).is_empty() {
                Err(GazetteerError::Line { line: line_no, msg: "empty field".into() })
            } else {
                Ok(())
            }
        };
        nonempty(fields[0])?;
        nonempty(fields[1])?;
        nonempty(fields[2])?;
        if fields[0] == "VALUE" {
            values.push((fields[1].to_string(), fields[2].to_string()));
        } else {
            entries.push((fields[0].to_string(), fields[1].to_string(), fields[2].to_string()));
        }
    }
    Gazetteer::new(entries, values)
}

/// Per-document extraction summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractionReport {
    pub doc_id: String,
    /// Gazetteer rules (entries plus applied value rules) that fired.
    pub matched_patterns: usize,
    pub distinct_topics: usize,
    pub distinct_tags: usize,
    pub distinct_values: usize,
}

/// Extract a document's construct sets by gazetteer matching.
///
/// A pattern matches only as a whole-word phrase: the characters adjacent to
/// the matched span must not be alphanumeric, so `cricket` does not fire
/// inside `cricketer`. Value rules apply only when their tag was produced by
/// some entry match.
pub fn extract(doc: &Document, gaz: &Gazetteer) -> (TopicMapDoc, ExtractionReport) {
    let text = normalize(&doc.text);
    let n_entries = gaz.entries.len();

    let mut matched_entries = BTreeSet::new();
    let mut matched_values = BTreeSet::new();
    for m in gaz.matcher.find_overlapping_iter(&text) {
        if !whole_word(&text, m.start(), m.end()) {
            continue;
        }
        let idx = m.pattern().as_usize();
        if idx < n_entries {
            matched_entries.insert(idx);
        } else {
            matched_values.insert(idx - n_entries);
        }
    }

    let mut topics = BTreeSet::new();
    let mut tags = BTreeSet::new();
    for &idx in &matched_entries {
        let entry = &gaz.entries[idx];
        topics.insert(entry.topic.clone());
        tags.insert((entry.topic.clone(), entry.tag.clone()));
    }
    let present_tags: BTreeSet<&str> = tags.iter().map(|(_, tag)| tag.as_str()).collect();

    let mut tag_values = BTreeSet::new();
    let mut applied_values = 0usize;
    for &idx in &matched_values {
        let rule = &gaz.value_rules[idx];
        if present_tags.contains(rule.tag.as_str()) {
            tag_values.insert((rule.tag.clone(), rule.pattern.clone()));
            applied_values += 1;
        }
    }

    let report = ExtractionReport {
        doc_id: doc.id.clone(),
        matched_patterns: matched_entries.len() + applied_values,
        distinct_topics: topics.len(),
        distinct_tags: tags.len(),
        distinct_values: tag_values.len(),
    };
    let tm = TopicMapDoc { doc_id: doc.id.clone(), topics, tags, tag_values };
    debug_assert!(tm.validate().is_ok());
    (tm, report)
}

fn whole_word(text: &str, start: usize, end: usize) -> bool {
    let before_ok = text[..start].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
    let after_ok = text[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
    before_ok && after_ok
}

/// Render a construct set as an XTM map following the extraction profile:
/// class-level topics for `topics`, instance topics for tags, and
/// `resourceData` occurrences for tag values.
///
/// [`crate::xtm::extract_tm_doc`] of the result reproduces `tm` exactly.
pub fn emit_xtm(tm: &TopicMapDoc) -> Result<XtmTopicMap, XtmError> {
    tm.validate()?;

    let mut used = BTreeSet::new();
    let mut assign_id = |prefix: &str, name: &str| -> String {
        let base: String = name
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { '-' })
            .collect();
        let mut candidate = format!("{prefix}-{base}");
        let mut i = 1usize;
        while !used.insert(candidate.clone()) {
            i += 1;
            candidate = format!("{prefix}-{base}-{i}");
        }
        candidate
    };

    let mut topics = Vec::new();
    let mut class_ids = std::collections::BTreeMap::new();
    for name in &tm.topics {
        let id = assign_id("topic", name);
        class_ids.insert(name.clone(), id.clone());
        let mut topic = XtmTopic::new(id);
        topic.base_names.push(name.clone());
        topics.push(topic);
    }

    let tag_names: BTreeSet<&String> = tm.tags.iter().map(|(_, tag)| tag).collect();
    for tag_name in tag_names {
        let mut topic = XtmTopic::new(assign_id("tag", tag_name));
        topic.base_names.push(tag_name.clone());
        // parents in topic-name order; tm.tags is sorted by (topic, tag)
        for (parent, tag) in &tm.tags {
            if tag == tag_name {
                topic.instance_of.push(class_ids[parent].clone());
            }
        }
        for (tag, value) in &tm.tag_values {
            if tag == tag_name {
                topic.occurrences.push(XtmOccurrence {
                    kind: OccurrenceKind::ResourceData,
                    value: value.clone(),
                    type_ref: None,
                });
            }
        }
        topics.push(topic);
    }

    XtmTopicMap::new(topics, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xtm::{extract_tm_doc, ParseMode};

    fn doc(id: &str, text: &str) -> Document {
        Document { id: id.into(), text: text.into(), gold_class: None }
    }

    fn cricket_gazetteer() -> Gazetteer {
        Gazetteer::new(
            vec![("cricket".into(), "sports".into(), "cricket".into())],
            vec![("cricket".into(), "pakistan".into())],
        )
        .unwrap()
    }

    #[test]
    fn parses_entry_and_value_lines() {
        let gaz = parse_gazetteer("cricket\tsports\tcricket\nVALUE\tcricket\tpakistan\n").unwrap();
        assert_eq!(gaz.entries().len(), 1);
        assert_eq!(gaz.value_rules().len(), 1);
    }

    #[test]
    fn conflicting_pattern_rejected() {
        let err = parse_gazetteer("cricket\tsports\tcricket\ncricket\tgames\tcricket\n").unwrap_err();
        assert_eq!(err.to_string(), "conflicting pattern: cricket");
        // exact duplicates are fine
        let gaz = parse_gazetteer("cricket\tsports\tcricket\ncricket\tsports\tcricket\n").unwrap();
        assert_eq!(gaz.entries().len(), 1);
    }

    #[test]
    fn empty_gazetteer() {
        let gaz = parse_gazetteer("").unwrap();
        assert!(gaz.is_empty());
        let (tm, report) = extract(&doc("d", "anything at all"), &gaz);
        assert!(tm.is_empty());
        assert_eq!(report.matched_patterns, 0);
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = parse_gazetteer("cricket\tsports\tcricket\nbroken line\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
    }

    #[test]
    fn extracts_three_levels() {
        let (tm, report) = extract(&doc("d1", "Cricket match in Pakistan"), &cricket_gazetteer());
        assert_eq!(tm.topics.iter().cloned().collect::<Vec<_>>(), vec!["sports"]);
        assert_eq!(
            tm.tags.iter().cloned().collect::<Vec<_>>(),
            vec![("sports".into(), "cricket".into())]
        );
        assert_eq!(
            tm.tag_values.iter().cloned().collect::<Vec<_>>(),
            vec![("cricket".into(), "pakistan".into())]
        );
        assert_eq!(report.matched_patterns, 2);
        assert_eq!(report.distinct_topics, 1);
    }

    #[test]
    fn empty_text_empty_doc() {
        let (tm, _) = extract(&doc("d", ""), &cricket_gazetteer());
        assert!(tm.is_empty());
    }

    #[test]
    fn whole_word_only() {
        let (tm, _) = extract(&doc("d", "a cricketer arrived"), &cricket_gazetteer());
        assert!(tm.is_empty());
        // punctuation and edges are boundaries
        let (tm, _) = extract(&doc("d", "Cricket, obviously"), &cricket_gazetteer());
        assert_eq!(tm.topics.len(), 1);
    }

    #[test]
    fn value_needs_its_tag_present() {
        // "pakistan" alone must not produce a tag value
        let (tm, report) = extract(&doc("d", "pakistan only"), &cricket_gazetteer());
        assert!(tm.tag_values.is_empty());
        assert_eq!(report.matched_patterns, 0);
    }

    #[test]
    fn multiword_and_overlapping_patterns() {
        let gaz = Gazetteer::new(
            vec![
                ("new york".into(), "geography".into(), "city".into()),
                ("york".into(), "geography".into(), "city".into()),
            ],
            vec![],
        )
        .unwrap();
        let (tm, _) = extract(&doc("d", "flights to New   York tonight"), &gaz);
        // both patterns fire: the phrase and the inner word
        assert_eq!(tm.tags.len(), 1);
        assert_eq!(tm.topics.len(), 1);
        let (tm2, _) = extract(&doc("d", "yorkshire"), &gaz);
        assert!(tm2.is_empty());
    }

    #[test]
    fn extraction_is_deterministic() {
        let gaz = cricket_gazetteer();
        let d = doc("d", "cricket in pakistan, cricket again");
        assert_eq!(extract(&d, &gaz), extract(&d, &gaz));
    }

    #[test]
    fn adding_entries_is_monotone() {
        let base = cricket_gazetteer();
        let bigger = Gazetteer::new(
            vec![
                ("cricket".into(), "sports".into(), "cricket".into()),
                ("match".into(), "sports".into(), "fixture".into()),
            ],
            vec![("cricket".into(), "pakistan".into())],
        )
        .unwrap();
        let d = doc("d", "cricket match in pakistan");
        let (tm_base, _) = extract(&d, &base);
        let (tm_big, _) = extract(&d, &bigger);
        assert!(tm_big.topics.is_superset(&tm_base.topics));
        assert!(tm_big.tags.is_superset(&tm_base.tags));
        assert!(tm_big.tag_values.is_superset(&tm_base.tag_values));
    }

    #[test]
    fn emit_xtm_round_trips_through_extraction() {
        let (tm, _) = extract(
            &doc("d1", "Cricket match in Pakistan"),
            &cricket_gazetteer(),
        );
        let map = emit_xtm(&tm).unwrap();
        let back = extract_tm_doc(&map, "d1", ParseMode::Strict).unwrap();
        assert_eq!(back, tm);
    }

    #[test]
    fn emit_xtm_empty_doc() {
        let map = emit_xtm(&TopicMapDoc::empty("d")).unwrap();
        assert!(map.topics().is_empty());
    }

    #[test]
    fn emit_xtm_handles_shared_tag_names_and_slug_collisions() {
        let mut topics = BTreeSet::new();
        topics.insert("sports".to_string());
        topics.insert("politics".to_string());
        let mut tags = BTreeSet::new();
        tags.insert(("sports".to_string(), "cricket team".to_string()));
        tags.insert(("politics".to_string(), "cricket team".to_string()));
        tags.insert(("sports".to_string(), "cricket-team".to_string()));
        let mut values = BTreeSet::new();
        values.insert(("cricket team".to_string(), "pakistan".to_string()));
        let tm = TopicMapDoc::new("d", topics, tags, values).unwrap();

        let map = emit_xtm(&tm).unwrap();
        let back = extract_tm_doc(&map, "d", ParseMode::Strict).unwrap();
        assert_eq!(back, tm);
    }
}
