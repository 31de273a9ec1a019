//! Training-free multi-label classification of text paragraphs against the 17
//! Sustainable Development Goals.
//!
//! A query is compared with a fixed 34-document corpus (one class document and
//! one bias document per goal) through three similarities: TF-IDF cosine,
//! average-word-embedding cosine and sentence-encoder cosine. These are
//! combined, length-scaled, summed per goal, centered and thresholded into a
//! ranked label set. Embeddings are never computed in-process; they are read
//! from pre-computed cache files.

pub mod aknxml;
pub mod classifier;
pub mod cli;
pub mod embeddings;
pub mod metrics;
pub mod preprocess;
pub mod similarity;
pub mod tfidf;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of goals, i.e. classes excluding "no SDG".
pub const NUM_SDGS: usize = 17;

/// Corpus size: one class and one bias document per goal.
pub const CORPUS_SIZE: usize = 2 * NUM_SDGS;

/// A goal identifier in `1..=17`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SdgId(u8);

impl SdgId {
    pub fn new(id: u32) -> Option<Self> {
        (1..=NUM_SDGS as u32)
            .contains(&id)
            .then_some(SdgId(id as u8))
    }

    pub fn get(self) -> u32 {
        self.0 as u32
    }

    /// Zero-based position in per-goal vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < NUM_SDGS, "goal index {index} out of range");
        SdgId(index as u8 + 1)
    }

    pub fn all() -> impl Iterator<Item = SdgId> {
        (0..NUM_SDGS).map(SdgId::from_index)
    }

    /// The identifier token produced by normalization, e.g. `sdg5`.
    pub fn token(self) -> String {
        format!("sdg{}", self.0)
    }
}

impl fmt::Display for SdgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<u32> for SdgId {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        SdgId::new(value).ok_or_else(|| format!("SDG id {value} outside 1..=17"))
    }
}

impl From<SdgId> for u32 {
    fn from(id: SdgId) -> u32 {
        id.get()
    }
}
