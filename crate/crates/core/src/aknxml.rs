//! Akoma Ntoso metadata fragments for classified paragraphs: the
//! `<classification>` keyword block, the `TLCConcept` references and the
//! `akn4un` proprietary confidence records.
//!
//! Attribute order is fixed: emitting, parsing and re-emitting is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::classifier::ClassificationResult;

pub const DEFAULT_SOURCE: &str = "#cirsfidUnibo";
pub const DICTIONARY: &str = "SDGIO";
const ONTOLOGY_BASE: &str = "/akn/ontology/concepts/un/sdg/sdgio/";

#[derive(Debug, Error)]
pub enum AknError {
    #[error("invalid eId {0:?}")]
    InvalidEId(String),
    #[error("sdg key {0:?} must start with \"goal_\"")]
    InvalidKey(String),
    #[error("entry {key}: refersTo {found:?} does not match its key")]
    ConceptMismatch { key: String, found: String },
    #[error("entry {key}: no confidence for paragraph {para}")]
    MissingConfidence { key: String, para: String },
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("<{element}> lacks attribute {attribute}")]
    MissingAttribute { element: String, attribute: String },
    #[error("bad confidence value {0:?}")]
    BadConfidence(String),
}

impl From<quick_xml::Error> for AknError {
    fn from(e: quick_xml::Error) -> Self {
        AknError::Xml(e.to_string())
    }
}

impl From<quick_xml::events::attributes::AttrError> for AknError {
    fn from(e: quick_xml::events::attributes::AttrError) -> Self {
        AknError::Xml(e.to_string())
    }
}

/// One classification keyword and the paragraphs it applies to.
#[derive(Debug, Clone, PartialEq)]
pub struct AknEntry {
    /// e.g. `goal_16` or `goal_5_5_2`
    pub sdg_key: String,
    /// Paragraph eIds without the leading `#`.
    pub paragraph_refs: Vec<String>,
    pub show_as: String,
    pub concept_ref: String,
    pub dictionary: String,
    pub confidences: BTreeMap<String, f64>,
}

impl AknEntry {
    /// Entry with display label, concept reference and dictionary derived from the key.
    pub fn new(
        sdg_key: impl Into<String>,
        paragraphs: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        let sdg_key = sdg_key.into();
        let suffix = key_suffix(&sdg_key).unwrap_or(&sdg_key).to_string();
        let mut paragraph_refs = Vec::new();
        let mut confidences = BTreeMap::new();
        for (para, confidence) in paragraphs {
            paragraph_refs.push(para.clone());
            confidences.insert(para, confidence);
        }
        AknEntry {
            show_as: format!("SDG {suffix}"),
            concept_ref: format!("#concept_sdg_{suffix}"),
            dictionary: DICTIONARY.to_string(),
            sdg_key,
            paragraph_refs,
            confidences,
        }
    }

    fn suffix(&self) -> &str {
        key_suffix(&self.sdg_key).unwrap_or(&self.sdg_key)
    }
}

fn key_suffix(key: &str) -> Option<&str> {
    key.strip_prefix("goal_")
}

fn is_valid_eid(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

#[derive(Debug, Clone, PartialEq)]
pub struct AknAnnotation {
    pub doc_source: String,
    pub entries: Vec<AknEntry>,
}

impl AknAnnotation {
    pub fn new(doc_source: impl Into<String>) -> Self {
        AknAnnotation {
            doc_source: doc_source.into(),
            entries: Vec::new(),
        }
    }

    /// Goal-level annotation from per-paragraph results; the confidence of a
    /// paragraph is the score its label was ranked by.
    pub fn from_results<'a, I>(doc_source: impl Into<String>, results: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a ClassificationResult)>,
    {
        let mut by_goal: BTreeMap<_, Vec<(String, f64)>> = BTreeMap::new();
        for (e_id, result) in results {
            for label in &result.labels {
                by_goal
                    .entry(label.sdg)
                    .or_default()
                    .push((e_id.to_string(), label.score));
            }
        }
        AknAnnotation {
            doc_source: doc_source.into(),
            entries: by_goal
                .into_iter()
                .map(|(sdg, paras)| AknEntry::new(format!("goal_{sdg}"), paras))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), AknError> {
        for entry in &self.entries {
            let suffix = key_suffix(&entry.sdg_key)
                .ok_or_else(|| AknError::InvalidKey(entry.sdg_key.clone()))?;
            if !is_valid_eid(&entry.sdg_key) || !is_valid_eid(suffix) {
                return Err(AknError::InvalidEId(entry.sdg_key.clone()));
            }
            if entry.concept_ref != format!("#concept_sdg_{suffix}") {
                return Err(AknError::ConceptMismatch {
                    key: entry.sdg_key.clone(),
                    found: entry.concept_ref.clone(),
                });
            }
            for para in &entry.paragraph_refs {
                if !is_valid_eid(para) {
                    return Err(AknError::InvalidEId(para.clone()));
                }
                if !entry.confidences.contains_key(para) {
                    return Err(AknError::MissingConfidence {
                        key: entry.sdg_key.clone(),
                        para: para.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// The `<classification>` block: one `<keyword>` per entry.
pub fn emit_classification(ann: &AknAnnotation) -> Result<String, AknError> {
    ann.validate()?;
    let mut out = String::new();
    writeln!(
        out,
        "<classification source=\"{}\">",
        escape(&ann.doc_source)
    )
    .unwrap();
    for e in &ann.entries {
        let href: Vec<String> = e.paragraph_refs.iter().map(|p| format!("#{p}")).collect();
        writeln!(
            out,
            "  <keyword eId=\"keyword_{}\" value=\"{}\" href=\"{}\" showAs=\"{}\" refersTo=\"{}\" dictionary=\"{}\"/>",
            e.suffix(),
            e.sdg_key,
            href.join(" "),
            escape(&e.show_as),
            e.concept_ref,
            escape(&e.dictionary),
        )
        .unwrap();
    }
    out.push_str("</classification>\n");
    Ok(out)
}

/// One `<TLCConcept>` per distinct key, inside a `<references>` block.
pub fn emit_tlc_concepts(ann: &AknAnnotation) -> Result<String, AknError> {
    ann.validate()?;
    let mut out = String::new();
    writeln!(out, "<references source=\"{}\">", escape(&ann.doc_source)).unwrap();
    let mut seen = Vec::new();
    for e in &ann.entries {
        if seen.contains(&e.sdg_key.as_str()) {
            continue;
        }
        seen.push(e.sdg_key.as_str());
        writeln!(
            out,
            "  <TLCConcept eId=\"concept_sdg_{}\" href=\"{ONTOLOGY_BASE}{}\" showAs=\"{}\"/>",
            e.suffix(),
            e.sdg_key,
            escape(&e.show_as),
        )
        .unwrap();
    }
    out.push_str("</references>\n");
    Ok(out)
}

/// The `<proprietary>` block: one `akn4un:source` per paragraph, holding a
/// `sdgTarget` per entry that references it. Paragraphs follow first appearance.
pub fn emit_proprietary(ann: &AknAnnotation) -> Result<String, AknError> {
    ann.validate()?;
    let mut paragraphs: Vec<&str> = Vec::new();
    for e in &ann.entries {
        for p in &e.paragraph_refs {
            if !paragraphs.contains(&p.as_str()) {
                paragraphs.push(p);
            }
        }
    }

    let mut out = String::new();
    writeln!(out, "<proprietary source=\"{}\">", escape(&ann.doc_source)).unwrap();
    for para in paragraphs {
        writeln!(out, "  <akn4un:source href=\"#{para}\">").unwrap();
        for e in ann
            .entries
            .iter()
            .filter(|e| e.paragraph_refs.iter().any(|p| p == para))
        {
            writeln!(
                out,
                "    <akn4un:sdgTarget value=\"{}\" confidence=\"{}\" name=\"{}\"/>",
                e.sdg_key,
                e.confidences[para],
                escape(&e.dictionary),
            )
            .unwrap();
        }
        out.push_str("  </akn4un:source>\n");
    }
    out.push_str("</proprietary>\n");
    Ok(out)
}

/// classification, then concepts, then proprietary.
pub fn emit_all(ann: &AknAnnotation) -> Result<String, AknError> {
    Ok([
        emit_classification(ann)?,
        emit_tlc_concepts(ann)?,
        emit_proprietary(ann)?,
    ]
    .concat())
}

fn attr(e: &BytesStart<'_>, name: &str) -> Result<String, AknError> {
    for a in e.attributes() {
        let a = a?;
        if a.key.as_ref() == name.as_bytes() {
            return Ok(a.unescape_value()?.into_owned());
        }
    }
    Err(AknError::MissingAttribute {
        element: String::from_utf8_lossy(e.name().as_ref()).into_owned(),
        attribute: name.to_string(),
    })
}

/// Reads back fragments produced by [`emit_all`] (or any subset of them).
pub fn parse(xml: &str) -> Result<AknAnnotation, AknError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);

    let mut ann = AknAnnotation::new(String::new());
    let mut current_para: Option<String> = None;
    // sdgTarget records seen before or without their keyword
    let mut pending: Vec<(String, String, f64, String)> = Vec::new();
    let mut depth = 0usize;

    loop {
        let (e, empty) = match reader.read_event()? {
            Event::Eof => break,
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                if e.name().as_ref() == b"akn4un:source" {
                    current_para = None;
                }
                continue;
            }
            _ => continue,
        };
        if !empty {
            depth += 1;
        }
        match e.name().as_ref() {
            b"classification" | b"proprietary" | b"references" => {
                ann.doc_source = attr(&e, "source")?;
            }
            b"keyword" => {
                let refs: Vec<String> = attr(&e, "href")?
                    .split_whitespace()
                    .map(|h| h.trim_start_matches('#').to_string())
                    .collect();
                ann.entries.push(AknEntry {
                    sdg_key: attr(&e, "value")?,
                    paragraph_refs: refs,
                    show_as: attr(&e, "showAs")?,
                    concept_ref: attr(&e, "refersTo")?,
                    dictionary: attr(&e, "dictionary")?,
                    confidences: BTreeMap::new(),
                });
            }
            b"akn4un:source" => {
                current_para = Some(attr(&e, "href")?.trim_start_matches('#').to_string());
            }
            b"akn4un:sdgTarget" => {
                let para = current_para
                    .clone()
                    .ok_or_else(|| AknError::Xml("sdgTarget outside akn4un:source".into()))?;
                let raw = attr(&e, "confidence")?;
                let confidence = raw
                    .parse::<f64>()
                    .map_err(|_| AknError::BadConfidence(raw))?;
                pending.push((attr(&e, "value")?, para, confidence, attr(&e, "name")?));
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(AknError::Xml("unclosed element".into()));
    }

    for (key, para, confidence, name) in pending {
        match ann.entries.iter_mut().find(|en| en.sdg_key == key) {
            Some(entry) => {
                entry.confidences.insert(para, confidence);
            }
            None => {
                // proprietary-only input: rebuild the entry from its records
                let mut entry = AknEntry::new(key, [(para, confidence)]);
                entry.dictionary = name;
                ann.entries.push(entry);
            }
        }
    }
    Ok(ann)
}
