//! XML Topic Maps (XTM 1.0) parsing, serialization, and construct extraction.
//!
//! The parser maps `<topic>`, `<baseName><baseNameString>`, `<instanceOf>`,
//! `<occurrence>`, and `<association>` elements into the domain types and
//! ignores everything else (`scope`, `variant`, `subjectIdentity`,
//! `mergeMap`, unknown elements). Strict mode rejects structural defects:
//! dangling topic references, missing topic ids, empty occurrence values,
//! and associations with fewer than two players. Lenient mode skips the
//! offending construct and records a warning.
//!
//! [`extract_tm_doc`] applies the toolkit's XTM profile to obtain the three
//! construct levels used for similarity:
//!
//! * a topic with no `instanceOf` is **class-level**; its base names become
//!   topics;
//! * a topic whose `instanceOf` points at a class-level topic is
//!   **tag-level**; it contributes a `(topic, tag)` pair per such parent;
//! * each `resourceData` occurrence on a tag-level topic contributes a
//!   `(tag, value)` pair.
//!
//! All extracted strings go through [`crate::text::normalize`].

use std::collections::{BTreeMap, BTreeSet};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::text::normalize;

pub const XTM_NAMESPACE: &str = "http://www.topicmaps.org/xtm/1.0/";
pub const XLINK_NAMESPACE: &str = "http://www.w3.org/1999/xlink";

/// How structural defects are handled during parsing and extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Reject dangling references and malformed constructs.
    Strict,
    /// Skip malformed constructs and record warnings.
    #[default]
    Lenient,
}

#[derive(Debug, Error)]
pub enum XtmError {
    #[error("xml error at byte {offset}: {msg}")]
    Xml { offset: u64, msg: String },
    #[error("expected topicMap root element")]
    NotTopicMap,
    #[error("topic without id at byte {offset}")]
    TopicWithoutId { offset: u64 },
    #[error("invalid topic id: {0:?}")]
    InvalidTopicId(String),
    #[error("duplicate topic id: {0}")]
    DuplicateTopicId(String),
    #[error("empty occurrence value on topic: {0}")]
    EmptyOccurrenceValue(String),
    #[error("association with fewer than 2 player refs at byte {offset}")]
    TooFewPlayers { offset: u64 },
    #[error("dangling ref: #{0}")]
    DanglingRef(String),
    #[error("no base name on topic: {0}")]
    MissingBaseName(String),
    #[error("invalid topic-map doc: {0}")]
    InvalidDoc(String),
}

/// An occurrence attached to a topic: inline data or an external reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XtmOccurrence {
    pub kind: OccurrenceKind,
    /// Inline character data or the reference URI.
    pub value: String,
    /// Topic id of the occurrence type, when given via `instanceOf`.
    pub type_ref: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccurrenceKind {
    ResourceData,
    ResourceRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XtmTopic {
    pub id: String,
    pub base_names: Vec<String>,
    /// Topic ids referenced by `<instanceOf>` elements, in document order.
    pub instance_of: Vec<String>,
    pub occurrences: Vec<XtmOccurrence>,
}

impl XtmTopic {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), base_names: Vec::new(), instance_of: Vec::new(), occurrences: Vec::new() }
    }
}

/// One association member: an optional role plus its players.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMember {
    pub role_ref: Option<String>,
    pub player_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct XtmAssociation {
    pub type_ref: Option<String>,
    pub members: Vec<AssociationMember>,
}

impl XtmAssociation {
    fn player_count(&self) -> usize {
        self.members.iter().map(|m| m.player_refs.len()).sum()
    }
}

/// A parsed topic map. Topics are kept sorted by id, which makes equality,
/// serialization, and round-trips canonical; associations keep their given
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct XtmTopicMap {
    topics: Vec<XtmTopic>,
    associations: Vec<XtmAssociation>,
}

impl XtmTopicMap {
    /// Build a map, validating ids, occurrence values, and member counts.
    pub fn new(
        mut topics: Vec<XtmTopic>,
        associations: Vec<XtmAssociation>,
    ) -> Result<Self, XtmError> {
        let mut seen = BTreeSet::new();
        for topic in &topics {
            if topic.id.trim().is_empty() || topic.id.contains(['#', ':', '/']) {
                return Err(XtmError::InvalidTopicId(topic.id.clone()));
            }
            if !seen.insert(topic.id.clone()) {
                return Err(XtmError::DuplicateTopicId(topic.id.clone()));
            }
            for occ in &topic.occurrences {
                if occ.value.is_empty() {
                    return Err(XtmError::EmptyOccurrenceValue(topic.id.clone()));
                }
            }
        }
        for assoc in &associations {
            if assoc.player_count() < 2 {
                return Err(XtmError::TooFewPlayers { offset: 0 });
            }
        }
        topics.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self { topics, associations })
    }

    pub fn topics(&self) -> &[XtmTopic] {
        &self.topics
    }

    pub fn associations(&self) -> &[XtmAssociation] {
        &self.associations
    }

    pub fn topic(&self, id: &str) -> Option<&XtmTopic> {
        self.topics
            .binary_search_by(|t| t.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.topics[i])
    }

    /// Local refs that do not resolve to a topic id in this map.
    ///
    /// Refs containing `:` or `/` are treated as external URIs and are not
    /// checked.
    pub fn dangling_refs(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.topics.iter().map(|t| t.id.as_str()).collect();
        let mut dangling = BTreeSet::new();
        let mut check = |r: &str| {
            if !r.contains([':', '/']) && !ids.contains(r) {
                dangling.insert(r.to_string());
            }
        };
        for topic in &self.topics {
            for r in &topic.instance_of {
                check(r);
            }
            for occ in &topic.occurrences {
                if let Some(r) = &occ.type_ref {
                    check(r);
                }
            }
        }
        for assoc in &self.associations {
            if let Some(r) = &assoc.type_ref {
                check(r);
            }
            for member in &assoc.members {
                if let Some(r) = &member.role_ref {
                    check(r);
                }
                for r in &member.player_refs {
                    check(r);
                }
            }
        }
        dangling.into_iter().collect()
    }
}

/// The outcome of a parse: the map plus lenient-mode warnings.
#[derive(Debug)]
pub struct XtmParse {
    pub map: XtmTopicMap,
    pub warnings: Vec<String>,
}

/// A document reduced to its three construct sets: topics, `(topic, tag)`
/// pairs, and `(tag, value)` pairs. All strings are normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicMapDoc {
    pub doc_id: String,
    pub topics: BTreeSet<String>,
    pub tags: BTreeSet<(String, String)>,
    pub tag_values: BTreeSet<(String, String)>,
}

impl TopicMapDoc {
    pub fn new(
        doc_id: impl Into<String>,
        topics: BTreeSet<String>,
        tags: BTreeSet<(String, String)>,
        tag_values: BTreeSet<(String, String)>,
    ) -> Result<Self, XtmError> {
        let doc = Self { doc_id: doc_id.into(), topics, tags, tag_values };
        doc.validate()?;
        Ok(doc)
    }

    pub fn empty(doc_id: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            topics: BTreeSet::new(),
            tags: BTreeSet::new(),
            tag_values: BTreeSet::new(),
        }
    }

    /// Check the internal consistency rules: strings normalized and
    /// non-empty, tag topics present in `topics`, value tags present among
    /// the tags.
    pub fn validate(&self) -> Result<(), XtmError> {
        let check_norm = |s: &str| -> Result<(), XtmError> {
            if s.is_empty() {
                return Err(XtmError::InvalidDoc("empty construct string".into()));
            }
            if normalize(s) != s {
                return Err(XtmError::InvalidDoc(format!("string not normalized: {s:?}")));
            }
            Ok(())
        };
        for t in &self.topics {
            check_norm(t)?;
        }
        let tag_names: BTreeSet<&str> = self.tags.iter().map(|(_, tag)| tag.as_str()).collect();
        for (topic, tag) in &self.tags {
            check_norm(topic)?;
            check_norm(tag)?;
            if !self.topics.contains(topic) {
                return Err(XtmError::InvalidDoc(format!("tag references unknown topic: {topic}")));
            }
        }
        for (tag, value) in &self.tag_values {
            check_norm(tag)?;
            check_norm(value)?;
            if !tag_names.contains(tag.as_str()) {
                return Err(XtmError::InvalidDoc(format!("value references unknown tag: {tag}")));
            }
        }
        Ok(())
    }

    /// Total number of constructs across all three levels.
    pub fn construct_count(&self) -> usize {
        self.topics.len() + self.tags.len() + self.tag_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.construct_count() == 0
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct XtmParser<'a> {
    reader: Reader<&'a [u8]>,
    mode: ParseMode,
    warnings: Vec<String>,
}

/// Parse an XTM 1.0 byte stream.
///
/// Unknown elements are ignored. In strict mode, dangling topic references
/// and malformed constructs are errors; in lenient mode they are skipped and
/// reported in [`XtmParse::warnings`].
pub fn parse_xtm(bytes: &[u8], mode: ParseMode) -> Result<XtmParse, XtmError> {
    let mut parser = XtmParser { reader: Reader::from_reader(bytes), mode, warnings: Vec::new() };
    let (topics, associations) = parser.parse_document()?;

    let topics = match mode {
        ParseMode::Strict => topics,
        ParseMode::Lenient => {
            // Keep the first topic per id; XtmTopicMap::new rejects repeats.
            let mut seen = BTreeSet::new();
            let mut kept = Vec::with_capacity(topics.len());
            for topic in topics {
                if seen.insert(topic.id.clone()) {
                    kept.push(topic);
                } else {
                    parser.warnings.push(format!("duplicate topic id: {} (kept first)", topic.id));
                }
            }
            kept
        }
    };

    let map = XtmTopicMap::new(topics, associations)?;
    let dangling = map.dangling_refs();
    if !dangling.is_empty() {
        match mode {
            ParseMode::Strict => return Err(XtmError::DanglingRef(dangling[0].clone())),
            ParseMode::Lenient => {
                for r in dangling {
                    parser.warnings.push(format!("dangling ref: #{r}"));
                }
            }
        }
    }
    Ok(XtmParse { map, warnings: parser.warnings })
}

impl<'a> XtmParser<'a> {
    fn xml_err(&self, e: impl std::fmt::Display) -> XtmError {
        XtmError::Xml { offset: self.reader.error_position(), msg: e.to_string() }
    }

    fn next_event(&mut self) -> Result<Event<'a>, XtmError> {
        self.reader.read_event().map_err(|e| {
            let offset = self.reader.error_position();
            XtmError::Xml { offset, msg: e.to_string() }
        })
    }

    fn skip_subtree(&mut self, start: &BytesStart) -> Result<(), XtmError> {
        let name = start.to_owned();
        self.reader.read_to_end(name.name()).map_err(|e| {
            let offset = self.reader.error_position();
            XtmError::Xml { offset, msg: e.to_string() }
        })?;
        Ok(())
    }

    fn attribute(&self, start: &BytesStart, name: &str) -> Result<Option<String>, XtmError> {
        let attr = start
            .try_get_attribute(name)
            .map_err(|e| self.xml_err(e))?;
        match attr {
            Some(attr) => {
                let value = attr.unescape_value().map_err(|e| self.xml_err(e))?;
                Ok(Some(value.into_owned()))
            }
            None => Ok(None),
        }
    }

    /// `xlink:href` (or bare `href`), with a leading `#` stripped.
    fn href(&self, start: &BytesStart) -> Result<Option<String>, XtmError> {
        let raw = match self.attribute(start, "xlink:href")? {
            Some(v) => Some(v),
            None => self.attribute(start, "href")?,
        };
        Ok(raw.map(|v| v.strip_prefix('#').map(str::to_string).unwrap_or(v)))
    }

    fn parse_document(&mut self) -> Result<(Vec<XtmTopic>, Vec<XtmAssociation>), XtmError> {
        loop {
            match self.next_event()? {
                Event::Start(e) if e.local_name().as_ref() == b"topicMap" => {
                    return self.parse_topic_map();
                }
                Event::Empty(e) if e.local_name().as_ref() == b"topicMap" => {
                    return Ok((Vec::new(), Vec::new()));
                }
                Event::Decl(_) | Event::Comment(_) | Event::DocType(_) | Event::PI(_) => {}
                Event::Text(t) => {
                    if !String::from_utf8_lossy(&t).trim().is_empty() {
                        return Err(XtmError::NotTopicMap);
                    }
                }
                Event::Eof => return Err(XtmError::NotTopicMap),
                _ => return Err(XtmError::NotTopicMap),
            }
        }
    }

    fn parse_topic_map(&mut self) -> Result<(Vec<XtmTopic>, Vec<XtmAssociation>), XtmError> {
        let mut topics = Vec::new();
        let mut associations = Vec::new();
        loop {
            match self.next_event()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"topic" => {
                        if let Some(topic) = self.parse_topic(&e)? {
                            topics.push(topic);
                        }
                    }
                    b"association" => {
                        if let Some(assoc) = self.parse_association()? {
                            associations.push(assoc);
                        }
                    }
                    _ => self.skip_subtree(&e)?,
                },
                Event::Empty(e) => match e.local_name().as_ref() {
                    b"topic" => {
                        if let Some(id) = self.topic_id(&e)? {
                            topics.push(XtmTopic::new(id));
                        }
                    }
                    b"association" => {
                        // An empty association has no players.
                        self.reject_association(self.reader.buffer_position())?;
                    }
                    _ => {}
                },
                Event::End(_) => return Ok((topics, associations)),
                Event::Eof => {
                    return Err(self.xml_err("unexpected end of file inside topicMap"));
                }
                _ => {}
            }
        }
    }

    fn topic_id(&mut self, start: &BytesStart) -> Result<Option<String>, XtmError> {
        match self.attribute(start, "id")? {
            Some(id) if !id.trim().is_empty() => Ok(Some(id)),
            _ => match self.mode {
                ParseMode::Strict => {
                    Err(XtmError::TopicWithoutId { offset: self.reader.buffer_position() })
                }
                ParseMode::Lenient => {
                    self.warnings.push("topic without id skipped".into());
                    Ok(None)
                }
            },
        }
    }

    fn parse_topic(&mut self, start: &BytesStart) -> Result<Option<XtmTopic>, XtmError> {
        let Some(id) = self.topic_id(start)? else {
            self.skip_subtree(start)?;
            return Ok(None);
        };
        let mut topic = XtmTopic::new(id);
        loop {
            match self.next_event()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"instanceOf" => {
                        if let Some(r) = self.parse_instance_of()? {
                            topic.instance_of.push(r);
                        }
                    }
                    b"baseName" => {
                        if let Some(name) = self.parse_base_name()? {
                            topic.base_names.push(name);
                        }
                    }
                    b"occurrence" => {
                        if let Some(occ) = self.parse_occurrence(&topic.id)? {
                            topic.occurrences.push(occ);
                        }
                    }
                    _ => self.skip_subtree(&e)?,
                },
                Event::End(_) => return Ok(Some(topic)),
                Event::Eof => return Err(self.xml_err("unexpected end of file inside topic")),
                _ => {}
            }
        }
    }

    /// First `topicRef` inside `<instanceOf>`; `subjectIndicatorRef` is ignored.
    fn parse_instance_of(&mut self) -> Result<Option<String>, XtmError> {
        let mut found = None;
        loop {
            match self.next_event()? {
                Event::Start(e) => {
                    if e.local_name().as_ref() == b"topicRef" && found.is_none() {
                        found = self.href(&e)?;
                    }
                    self.skip_subtree(&e)?;
                }
                Event::Empty(e) => {
                    if e.local_name().as_ref() == b"topicRef" && found.is_none() {
                        found = self.href(&e)?;
                    }
                }
                Event::End(_) => return Ok(found),
                Event::Eof => return Err(self.xml_err("unexpected end of file inside instanceOf")),
                _ => {}
            }
        }
    }

    fn parse_base_name(&mut self) -> Result<Option<String>, XtmError> {
        let mut name = None;
        loop {
            match self.next_event()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"baseNameString" => {
                        let text = self.read_text()?;
                        if name.is_none() {
                            name = Some(text);
                        }
                    }
                    _ => self.skip_subtree(&e)?,
                },
                Event::Empty(e) => {
                    if e.local_name().as_ref() == b"baseNameString" && name.is_none() {
                        name = Some(String::new());
                    }
                }
                Event::End(_) => return Ok(name),
                Event::Eof => return Err(self.xml_err("unexpected end of file inside baseName")),
                _ => {}
            }
        }
    }

    fn parse_occurrence(&mut self, topic_id: &str) -> Result<Option<XtmOccurrence>, XtmError> {
        let mut type_ref = None;
        let mut payload: Option<(OccurrenceKind, String)> = None;
        loop {
            match self.next_event()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"instanceOf" => {
                        if type_ref.is_none() {
                            type_ref = self.parse_instance_of()?;
                        } else {
                            self.skip_subtree(&e)?;
                        }
                    }
                    b"resourceData" => {
                        let text = self.read_text()?;
                        if payload.is_none() {
                            payload = Some((OccurrenceKind::ResourceData, text));
                        }
                    }
                    b"resourceRef" => {
                        let href = self.href(&e)?;
                        if payload.is_none() {
                            payload = Some((OccurrenceKind::ResourceRef, href.unwrap_or_default()));
                        }
                        self.skip_subtree(&e)?;
                    }
                    _ => self.skip_subtree(&e)?,
                },
                Event::Empty(e) => match e.local_name().as_ref() {
                    b"resourceData" => {
                        if payload.is_none() {
                            payload = Some((OccurrenceKind::ResourceData, String::new()));
                        }
                    }
                    b"resourceRef" => {
                        let href = self.href(&e)?;
                        if payload.is_none() {
                            payload = Some((OccurrenceKind::ResourceRef, href.unwrap_or_default()));
                        }
                    }
                    _ => {}
                },
                Event::End(_) => break,
                Event::Eof => return Err(self.xml_err("unexpected end of file inside occurrence")),
                _ => {}
            }
        }
        match payload {
            Some((kind, value)) if !value.is_empty() => {
                Ok(Some(XtmOccurrence { kind, value, type_ref }))
            }
            _ => match self.mode {
                ParseMode::Strict => Err(XtmError::EmptyOccurrenceValue(topic_id.to_string())),
                ParseMode::Lenient => {
                    self.warnings.push(format!("empty occurrence on topic {topic_id} skipped"));
                    Ok(None)
                }
            },
        }
    }

    fn parse_association(&mut self) -> Result<Option<XtmAssociation>, XtmError> {
        let mut assoc = XtmAssociation::default();
        loop {
            match self.next_event()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"instanceOf" => {
                        if assoc.type_ref.is_none() {
                            assoc.type_ref = self.parse_instance_of()?;
                        } else {
                            self.skip_subtree(&e)?;
                        }
                    }
                    b"member" => assoc.members.push(self.parse_member()?),
                    _ => self.skip_subtree(&e)?,
                },
                Event::Empty(e) => {
                    if e.local_name().as_ref() == b"member" {
                        assoc.members.push(AssociationMember { role_ref: None, player_refs: Vec::new() });
                    }
                }
                Event::End(_) => break,
                Event::Eof => return Err(self.xml_err("unexpected end of file inside association")),
                _ => {}
            }
        }
        if assoc.player_count() < 2 {
            self.reject_association(self.reader.buffer_position())?;
            return Ok(None);
        }
        Ok(Some(assoc))
    }

    fn reject_association(&mut self, offset: u64) -> Result<(), XtmError> {
        match self.mode {
            ParseMode::Strict => Err(XtmError::TooFewPlayers { offset }),
            ParseMode::Lenient => {
                self.warnings.push("association with fewer than 2 player refs skipped".into());
                Ok(())
            }
        }
    }

    fn parse_member(&mut self) -> Result<AssociationMember, XtmError> {
        let mut member = AssociationMember { role_ref: None, player_refs: Vec::new() };
        loop {
            match self.next_event()? {
                Event::Start(e) => match e.local_name().as_ref() {
                    b"roleSpec" => {
                        let role = self.parse_instance_of()?; // same shape: one topicRef inside
                        if member.role_ref.is_none() {
                            member.role_ref = role;
                        }
                    }
                    b"topicRef" => {
                        if let Some(r) = self.href(&e)? {
                            member.player_refs.push(r);
                        }
                        self.skip_subtree(&e)?;
                    }
                    _ => self.skip_subtree(&e)?,
                },
                Event::Empty(e) => {
                    if e.local_name().as_ref() == b"topicRef" {
                        if let Some(r) = self.href(&e)? {
                            member.player_refs.push(r);
                        }
                    }
                }
                Event::End(_) => return Ok(member),
                Event::Eof => return Err(self.xml_err("unexpected end of file inside member")),
                _ => {}
            }
        }
    }

    /// Character data until the current element's end tag, entities resolved.
    fn read_text(&mut self) -> Result<String, XtmError> {
        let mut out = String::new();
        loop {
            match self.next_event()? {
                Event::Text(t) => {
                    out.push_str(&t.unescape().map_err(|e| self.xml_err(e))?);
                }
                Event::CData(c) => {
                    out.push_str(&String::from_utf8_lossy(&c));
                }
                Event::Start(e) => self.skip_subtree(&e)?,
                Event::End(_) => return Ok(out),
                Event::Eof => return Err(self.xml_err("unexpected end of file inside text element")),
                _ => {}
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(ch),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Local ids become fragment refs; anything with `:` or `/` is written raw.
fn format_href(r: &str) -> String {
    if r.contains([':', '/']) {
        escape_attr(r)
    } else {
        format!("#{}", escape_attr(r))
    }
}

struct XmlBuilder {
    out: String,
    depth: usize,
}

impl XmlBuilder {
    fn line(&mut self, content: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(content);
        self.out.push('\n');
    }

    fn open(&mut self, tag: &str) {
        self.line(&format!("<{tag}>"));
        self.depth += 1;
    }

    fn close(&mut self, tag: &str) {
        self.depth -= 1;
        self.line(&format!("</{tag}>"));
    }

    fn topic_ref(&mut self, r: &str) {
        self.line(&format!("<topicRef xlink:href=\"{}\"/>", format_href(r)));
    }

    fn instance_of(&mut self, r: &str) {
        self.open("instanceOf");
        self.topic_ref(r);
        self.close("instanceOf");
    }
}

/// Serialize a map to XTM 1.0 bytes.
///
/// Output is deterministic: topics in id order (the map's canonical order),
/// everything else in stored order. `parse_xtm` of the output reproduces the
/// map exactly.
pub fn serialize_xtm(map: &XtmTopicMap) -> Vec<u8> {
    let mut xml = XmlBuilder { out: String::new(), depth: 0 };
    xml.line("<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    if map.topics().is_empty() && map.associations().is_empty() {
        xml.line(&format!("<topicMap xmlns=\"{XTM_NAMESPACE}\" xmlns:xlink=\"{XLINK_NAMESPACE}\"/>"));
        return xml.out.into_bytes();
    }
    xml.line(&format!("<topicMap xmlns=\"{XTM_NAMESPACE}\" xmlns:xlink=\"{XLINK_NAMESPACE}\">"));
    xml.depth += 1;

    for topic in map.topics() {
        let id = escape_attr(&topic.id);
        if topic.base_names.is_empty() && topic.instance_of.is_empty() && topic.occurrences.is_empty() {
            xml.line(&format!("<topic id=\"{id}\"/>"));
            continue;
        }
        xml.line(&format!("<topic id=\"{id}\">"));
        xml.depth += 1;
        for r in &topic.instance_of {
            xml.instance_of(r);
        }
        for name in &topic.base_names {
            xml.open("baseName");
            xml.line(&format!("<baseNameString>{}</baseNameString>", escape_text(name)));
            xml.close("baseName");
        }
        for occ in &topic.occurrences {
            xml.open("occurrence");
            if let Some(r) = &occ.type_ref {
                xml.instance_of(r);
            }
            match occ.kind {
                OccurrenceKind::ResourceData => {
                    xml.line(&format!("<resourceData>{}</resourceData>", escape_text(&occ.value)));
                }
                OccurrenceKind::ResourceRef => {
                    xml.line(&format!("<resourceRef xlink:href=\"{}\"/>", escape_attr(&occ.value)));
                }
            }
            xml.close("occurrence");
        }
        xml.depth -= 1;
        xml.line("</topic>");
    }

    for assoc in map.associations() {
        xml.open("association");
        if let Some(r) = &assoc.type_ref {
            xml.instance_of(r);
        }
        for member in &assoc.members {
            if member.role_ref.is_none() && member.player_refs.is_empty() {
                xml.line("<member/>");
                continue;
            }
            xml.open("member");
            if let Some(r) = &member.role_ref {
                xml.open("roleSpec");
                xml.topic_ref(r);
                xml.close("roleSpec");
            }
            for r in &member.player_refs {
                xml.topic_ref(r);
            }
            xml.close("member");
        }
        xml.close("association");
    }

    xml.depth -= 1;
    xml.line("</topicMap>");
    xml.out.into_bytes()
}

// ---------------------------------------------------------------------------
// Construct extraction
// ---------------------------------------------------------------------------

/// Apply the extraction profile to a parsed map.
///
/// A topic's name is its first base name with non-empty normalization. When
/// a tag-level topic (or its class-level parent) has no usable name, lenient
/// mode synthesizes one from the topic id and strict mode fails.
pub fn extract_tm_doc(
    map: &XtmTopicMap,
    doc_id: &str,
    mode: ParseMode,
) -> Result<TopicMapDoc, XtmError> {
    let by_id: BTreeMap<&str, &XtmTopic> = map.topics().iter().map(|t| (t.id.as_str(), t)).collect();
    let topic_name = |t: &XtmTopic| -> Option<String> {
        t.base_names.iter().map(|n| normalize(n)).find(|n| !n.is_empty())
    };
    let name_or_id = |t: &XtmTopic| -> Result<(String, bool), XtmError> {
        match topic_name(t) {
            Some(name) => Ok((name, false)),
            None => match mode {
                ParseMode::Strict => Err(XtmError::MissingBaseName(t.id.clone())),
                ParseMode::Lenient => Ok((normalize(&t.id), true)),
            },
        }
    };

    let mut topics = BTreeSet::new();
    let mut tags = BTreeSet::new();
    let mut tag_values = BTreeSet::new();

    for topic in map.topics() {
        if topic.instance_of.is_empty() {
            topics.extend(topic.base_names.iter().map(|n| normalize(n)).filter(|n| !n.is_empty()));
        }
    }

    for topic in map.topics() {
        if topic.instance_of.is_empty() {
            continue;
        }
        let mut tag_name = None;
        for r in &topic.instance_of {
            let Some(target) = by_id.get(r.as_str()) else {
                continue; // unresolved in lenient mode; strict parse already rejected it
            };
            if !target.instance_of.is_empty() {
                continue; // parent is itself tag-level; not part of the profile
            }
            let (parent, synthesized) = name_or_id(target)?;
            if synthesized {
                // Keep the TopicMapDoc invariant: tag topics appear in `topics`.
                topics.insert(parent.clone());
            }
            let tag = match &tag_name {
                Some(t) => t,
                None => {
                    let (t, _) = name_or_id(topic)?;
                    tag_name = Some(t);
                    tag_name.as_ref().unwrap()
                }
            };
            tags.insert((parent, tag.clone()));
        }
        if let Some(tag) = tag_name {
            for occ in &topic.occurrences {
                if occ.kind == OccurrenceKind::ResourceData {
                    let value = normalize(&occ.value);
                    if !value.is_empty() {
                        tag_values.insert((tag.clone(), value));
                    }
                }
            }
        }
    }

    TopicMapDoc::new(doc_id, topics, tags, tag_values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(xml: &str, mode: ParseMode) -> XtmParse {
        parse_xtm(xml.as_bytes(), mode).unwrap()
    }

    #[test]
    fn parses_single_topic_with_name() {
        let xml = r##"<?xml version="1.0"?>
<topicMap xmlns="http://www.topicmaps.org/xtm/1.0/" xmlns:xlink="http://www.w3.org/1999/xlink">
  <topic id="t1">
    <baseName><baseNameString>Sports</baseNameString></baseName>
  </topic>
</topicMap>"##;
        let parsed = parse_ok(xml, ParseMode::Strict);
        assert_eq!(parsed.map.topics().len(), 1);
        assert_eq!(parsed.map.topics()[0].base_names, vec!["Sports"]);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn dangling_ref_strict_vs_lenient() {
        let xml = r##"<topicMap>
  <topic id="t1"><instanceOf><topicRef xlink:href="#t9"/></instanceOf></topic>
</topicMap>"##;
        let err = parse_xtm(xml.as_bytes(), ParseMode::Strict).unwrap_err();
        assert_eq!(err.to_string(), "dangling ref: #t9");
        let parsed = parse_ok(xml, ParseMode::Lenient);
        assert_eq!(parsed.warnings, vec!["dangling ref: #t9"]);
        assert_eq!(parsed.map.topics()[0].instance_of, vec!["t9"]);
    }

    #[test]
    fn empty_topic_map() {
        for xml in ["<topicMap/>", "<topicMap></topicMap>"] {
            let parsed = parse_ok(xml, ParseMode::Strict);
            assert!(parsed.map.topics().is_empty());
            assert!(parsed.map.associations().is_empty());
        }
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let err = parse_xtm(b"<topicMap><topic id=\"a\">", ParseMode::Lenient).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("xml error at byte"), "{msg}");
    }

    #[test]
    fn attribute_order_and_whitespace_insensitive() {
        let a = r##"<topicMap><topic id="t"><occurrence><instanceOf><topicRef xlink:href="#t"/></instanceOf><resourceData>v</resourceData></occurrence></topic></topicMap>"##;
        let b = "<topicMap >\n  <topic  id=\"t\" >\n    <occurrence>\n      <instanceOf>\n        <topicRef  xlink:href=\"#t\" />\n      </instanceOf>\n      <resourceData>v</resourceData>\n    </occurrence>\n  </topic>\n</topicMap>\n";
        assert_eq!(parse_ok(a, ParseMode::Strict).map, parse_ok(b, ParseMode::Strict).map);
    }

    #[test]
    fn unknown_elements_ignored() {
        let xml = r##"<topicMap>
  <mergeMap xlink:href="other.xtm"/>
  <topic id="t1">
    <subjectIdentity><topicRef xlink:href="#nowhere"/></subjectIdentity>
    <baseName><baseNameString>A</baseNameString><scope><topicRef xlink:href="#nowhere2"/></scope></baseName>
  </topic>
</topicMap>"##;
        // refs inside ignored elements are not collected, so nothing dangles
        let parsed = parse_ok(xml, ParseMode::Strict);
        assert_eq!(parsed.map.topics()[0].base_names, vec!["A"]);
    }

    #[test]
    fn association_round_trip_and_player_rule() {
        let xml = r##"<topicMap>
  <topic id="a"/><topic id="b"/><topic id="r"/>
  <association>
    <member><roleSpec><topicRef xlink:href="#r"/></roleSpec><topicRef xlink:href="#a"/><topicRef xlink:href="#b"/></member>
  </association>
</topicMap>"##;
        let parsed = parse_ok(xml, ParseMode::Strict);
        assert_eq!(parsed.map.associations().len(), 1);
        assert_eq!(parsed.map.associations()[0].player_count(), 2);

        let bad = r##"<topicMap><topic id="a"/><association><member><topicRef xlink:href="#a"/></member></association></topicMap>"##;
        assert!(matches!(
            parse_xtm(bad.as_bytes(), ParseMode::Strict),
            Err(XtmError::TooFewPlayers { .. })
        ));
        let lenient = parse_ok(bad, ParseMode::Lenient);
        assert!(lenient.map.associations().is_empty());
        assert_eq!(lenient.warnings.len(), 1);
    }

    #[test]
    fn serializes_topics_in_id_order() {
        let map = XtmTopicMap::new(
            vec![XtmTopic::new("b"), XtmTopic::new("a")],
            vec![],
        )
        .unwrap();
        let xml = String::from_utf8(serialize_xtm(&map)).unwrap();
        let a_pos = xml.find("id=\"a\"").unwrap();
        let b_pos = xml.find("id=\"b\"").unwrap();
        assert!(a_pos < b_pos);
    }

    #[test]
    fn serialize_empty_map_is_minimal() {
        let map = XtmTopicMap::default();
        let xml = String::from_utf8(serialize_xtm(&map)).unwrap();
        assert!(xml.contains("<topicMap"));
        assert!(xml.ends_with("/>\n"));
        let reparsed = parse_xtm(xml.as_bytes(), ParseMode::Strict).unwrap();
        assert_eq!(reparsed.map, map);
    }

    #[test]
    fn round_trip_with_escaping_and_spaces() {
        let mut topic = XtmTopic::new("t1");
        topic.base_names.push("  A & B <c> ".into());
        topic.occurrences.push(XtmOccurrence {
            kind: OccurrenceKind::ResourceData,
            value: "x \"y\" & <z>".into(),
            type_ref: None,
        });
        topic.occurrences.push(XtmOccurrence {
            kind: OccurrenceKind::ResourceRef,
            value: "http://example.com/a?b=1&c=2".into(),
            type_ref: Some("t1".into()),
        });
        let map = XtmTopicMap::new(vec![topic], vec![]).unwrap();
        let bytes = serialize_xtm(&map);
        let reparsed = parse_xtm(&bytes, ParseMode::Strict).unwrap();
        assert_eq!(reparsed.map, map);
    }

    fn sports_cricket_map() -> XtmTopicMap {
        let mut sports = XtmTopic::new("sports");
        sports.base_names.push("Sports".into());
        let mut cricket = XtmTopic::new("cricket");
        cricket.base_names.push("Cricket".into());
        cricket.instance_of.push("sports".into());
        cricket.occurrences.push(XtmOccurrence {
            kind: OccurrenceKind::ResourceData,
            value: "Pakistan".into(),
            type_ref: None,
        });
        XtmTopicMap::new(vec![sports, cricket], vec![]).unwrap()
    }

    #[test]
    fn extract_three_levels() {
        let doc = extract_tm_doc(&sports_cricket_map(), "d1", ParseMode::Strict).unwrap();
        assert_eq!(doc.topics.iter().cloned().collect::<Vec<_>>(), vec!["sports"]);
        assert_eq!(
            doc.tags.iter().cloned().collect::<Vec<_>>(),
            vec![("sports".to_string(), "cricket".to_string())]
        );
        assert_eq!(
            doc.tag_values.iter().cloned().collect::<Vec<_>>(),
            vec![("cricket".to_string(), "pakistan".to_string())]
        );
        doc.validate().unwrap();
    }

    #[test]
    fn extract_empty_map() {
        let doc = extract_tm_doc(&XtmTopicMap::default(), "d", ParseMode::Strict).unwrap();
        assert!(doc.is_empty());
    }

    #[test]
    fn extract_two_occurrences_two_values() {
        let mut map = sports_cricket_map();
        let mut topics: Vec<XtmTopic> = map.topics().to_vec();
        topics
            .iter_mut()
            .find(|t| t.id == "cricket")
            .unwrap()
            .occurrences
            .push(XtmOccurrence {
                kind: OccurrenceKind::ResourceData,
                value: "Karachi".into(),
                type_ref: None,
            });
        map = XtmTopicMap::new(topics, vec![]).unwrap();
        let doc = extract_tm_doc(&map, "d", ParseMode::Strict).unwrap();
        assert_eq!(doc.tag_values.len(), 2);
    }

    #[test]
    fn extract_synthesizes_missing_names_in_lenient_mode() {
        // class topic with no base name
        let parent = XtmTopic::new("T9");
        let mut child = XtmTopic::new("cricket");
        child.base_names.push("Cricket".into());
        child.instance_of.push("T9".into());
        let map = XtmTopicMap::new(vec![parent, child], vec![]).unwrap();

        let err = extract_tm_doc(&map, "d", ParseMode::Strict).unwrap_err();
        assert_eq!(err.to_string(), "no base name on topic: T9");

        let doc = extract_tm_doc(&map, "d", ParseMode::Lenient).unwrap();
        assert!(doc.topics.contains("t9"));
        assert!(doc.tags.contains(&("t9".to_string(), "cricket".to_string())));
        doc.validate().unwrap();
    }

    #[test]
    fn extract_ignores_resource_refs_and_deep_chains() {
        let mut class = XtmTopic::new("c");
        class.base_names.push("Class".into());
        let mut tag = XtmTopic::new("t");
        tag.base_names.push("Tag".into());
        tag.instance_of.push("c".into());
        tag.occurrences.push(XtmOccurrence {
            kind: OccurrenceKind::ResourceRef,
            value: "http://example.com".into(),
            type_ref: None,
        });
        // third level: instanceOf points at a tag-level topic, so it is
        // neither class- nor tag-level and contributes nothing
        let mut third = XtmTopic::new("v");
        third.base_names.push("Deep".into());
        third.instance_of.push("t".into());
        third.occurrences.push(XtmOccurrence {
            kind: OccurrenceKind::ResourceData,
            value: "ignored".into(),
            type_ref: None,
        });
        let map = XtmTopicMap::new(vec![class, tag, third], vec![]).unwrap();
        let doc = extract_tm_doc(&map, "d", ParseMode::Strict).unwrap();
        assert_eq!(doc.topics.len(), 1);
        assert_eq!(doc.tags.len(), 1);
        assert!(doc.tag_values.is_empty());
    }

    #[test]
    fn duplicate_topic_id_rejected_strict_kept_first_lenient() {
        let xml = r##"<topicMap><topic id="a"><baseName><baseNameString>One</baseNameString></baseName></topic><topic id="a"/></topicMap>"##;
        assert!(matches!(
            parse_xtm(xml.as_bytes(), ParseMode::Strict),
            Err(XtmError::DuplicateTopicId(_))
        ));
        let parsed = parse_ok(xml, ParseMode::Lenient);
        assert_eq!(parsed.map.topics().len(), 1);
        assert_eq!(parsed.map.topics()[0].base_names, vec!["One"]);
    }

    #[test]
    fn topic_map_doc_validation() {
        let mut topics = BTreeSet::new();
        topics.insert("sports".to_string());
        let mut tags = BTreeSet::new();
        tags.insert(("sports".to_string(), "cricket".to_string()));
        let mut values = BTreeSet::new();
        values.insert(("cricket".to_string(), "pakistan".to_string()));
        TopicMapDoc::new("d", topics.clone(), tags.clone(), values.clone()).unwrap();

        // value referencing a tag that is not present
        let mut bad_values = BTreeSet::new();
        bad_values.insert(("hockey".to_string(), "x".to_string()));
        assert!(TopicMapDoc::new("d", topics.clone(), tags.clone(), bad_values).is_err());

        // unnormalized string
        let mut bad_topics = BTreeSet::new();
        bad_topics.insert("Sports".to_string());
        assert!(TopicMapDoc::new("d", bad_topics, BTreeSet::new(), BTreeSet::new()).is_err());
    }
}
