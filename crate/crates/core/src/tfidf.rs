//! The SDG corpus and the fixed-dictionary TF-IDF model built over it.
//!
//! Weighting is raw term count times smoothed idf `ln((1+N)/(1+df)) + 1`, with
//! every vector L2-normalized at vectorization time.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{Preprocessor, ProcessedDocument};
use crate::{SdgId, CORPUS_SIZE};

const BUNDLED_DEFINITIONS: &str = include_str!("../data/sdg_definitions.json");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("SDG id {0} is defined more than once")]
    DuplicateSdgId(u32),
    #[error("SDG id {0} has no definition")]
    MissingSdgId(u32),
    #[error("SDG id {0} is outside 1..=17")]
    InvalidSdgId(u32),
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("reading definitions: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing definitions: {0}")]
    Json(#[from] serde_json::Error),
}

/// One goal's official title and description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdgDefinition {
    pub id: u32,
    pub title: String,
    pub description: String,
}

impl SdgDefinition {
    pub fn load_all(path: &Path) -> Result<Vec<SdgDefinition>, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The 17 official goal texts shipped with the crate.
    pub fn bundled() -> Vec<SdgDefinition> {
        serde_json::from_str(BUNDLED_DEFINITIONS).expect("bundled definitions are valid JSON")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Class,
    Bias,
}

#[derive(Debug, Clone)]
pub struct CorpusDocument {
    pub sdg: SdgId,
    pub kind: DocKind,
    /// Source text before preprocessing.
    pub text: String,
    pub processed: ProcessedDocument,
}

/// The 34 documents, interleaved `class_1, bias_1, class_2, bias_2, ...`.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<CorpusDocument>,
}

impl Corpus {
    pub fn build(defs: &[SdgDefinition]) -> Result<Corpus, CorpusError> {
        Self::build_with(defs, Preprocessor::shared())
    }

    pub fn build_with(defs: &[SdgDefinition], pp: &Preprocessor) -> Result<Corpus, CorpusError> {
        let mut by_id: BTreeMap<SdgId, &SdgDefinition> = BTreeMap::new();
        for def in defs {
            let id = SdgId::new(def.id).ok_or(CorpusError::InvalidSdgId(def.id))?;
            if by_id.insert(id, def).is_some() {
                return Err(CorpusError::DuplicateSdgId(def.id));
            }
        }
        if let Some(missing) = SdgId::all().find(|id| !by_id.contains_key(id)) {
            return Err(CorpusError::MissingSdgId(missing.get()));
        }

        let mut documents = Vec::with_capacity(CORPUS_SIZE);
        for (id, def) in by_id {
            let class_text = format!("{} {}", def.description, id.token());
            let bias_text = id.token();
            documents.push(CorpusDocument {
                sdg: id,
                kind: DocKind::Class,
                processed: pp.process(&class_text),
                text: class_text,
            });
            documents.push(CorpusDocument {
                sdg: id,
                kind: DocKind::Bias,
                processed: pp.process(&bias_text),
                text: bias_text,
            });
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[CorpusDocument] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.text.as_str())
    }

    pub fn class_index(sdg: SdgId) -> usize {
        2 * sdg.index()
    }

    pub fn bias_index(sdg: SdgId) -> usize {
        2 * sdg.index() + 1
    }
}

/// Sparse vector over vocabulary indices. Entries are sorted by index and never zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn from_entries<I: IntoIterator<Item = (usize, f64)>>(entries: I) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in entries {
            *merged.entry(i).or_insert(0.0) += v;
        }
        SparseVector {
            entries: merged.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        let mut sum = 0.0;
        while let (Some(&&(ia, va)), Some(&&(ib, vb))) = (a.peek(), b.peek()) {
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += va * vb;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for (_, v) in &mut self.entries {
                *v /= norm;
            }
        }
        self
    }
}

/// Cosine of two sparse vectors; 0 when either is empty.
pub fn sparse_cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    // rounding can push identical unit vectors a hair past 1
    (a.dot(b) / denom).clamp(-1.0, 1.0)
}

/// Vocabulary and idf fixed at build time, plus the normalized document vectors.
#[derive(Debug, Clone)]
pub struct TfIdfModel {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    doc_vectors: Vec<SparseVector>,
}

impl TfIdfModel {
    pub fn from_corpus(corpus: &Corpus) -> Result<Self, CorpusError> {
        let docs: Vec<&ProcessedDocument> =
            corpus.documents().iter().map(|d| &d.processed).collect();
        Self::fit(docs)
    }

    pub fn fit<'a, I>(docs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = &'a ProcessedDocument>,
    {
        let docs: Vec<&ProcessedDocument> = docs.into_iter().collect();
        if docs.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }

        let terms: BTreeSet<&str> = docs
            .iter()
            .flat_map(|d| d.tokens().iter().map(String::as_str))
            .collect();
        let vocabulary: BTreeMap<String, usize> = terms
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i))
            .collect();

        let mut df = vec![0usize; vocabulary.len()];
        for doc in &docs {
            let distinct: BTreeSet<usize> = doc.tokens().iter().map(|t| vocabulary[t]).collect();
            for i in distinct {
                df[i] += 1;
            }
        }
        let n = docs.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();

        let mut model = TfIdfModel {
            vocabulary,
            idf,
            doc_vectors: Vec::new(),
        };
        model.doc_vectors = docs.iter().map(|d| model.vectorize(d)).collect();
        Ok(model)
    }

    /// TF-IDF vector of `doc` against the fixed dictionary. Unknown tokens are ignored.
    pub fn vectorize(&self, doc: &ProcessedDocument) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for token in doc.tokens() {
            if let Some(&i) = self.vocabulary.get(token) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        SparseVector::from_entries(counts.into_iter().map(|(i, c)| (i, c * self.idf[i])))
            .normalized()
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&i| self.idf[i])
    }

    pub fn doc_vectors(&self) -> &[SparseVector] {
        &self.doc_vectors
    }

    pub fn dump(&self) -> ModelDump {
        let mut vocabulary = vec![String::new(); self.vocabulary.len()];
        for (t, &i) in &self.vocabulary {
            vocabulary[i] = t.clone();
        }
        ModelDump {
            format_version: ModelDump::FORMAT_VERSION,
            documents: self.doc_vectors.len(),
            vocabulary,
            idf: self.idf.clone(),
            doc_vectors: self.doc_vectors.clone(),
        }
    }
}

/// Inspection dump of a built model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDump {
    pub format_version: u32,
    pub documents: usize,
    /// Tokens in index order.
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub doc_vectors: Vec<SparseVector>,
}

impl ModelDump {
    pub const FORMAT_VERSION: u32 = 1;
}
