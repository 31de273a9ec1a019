//! From combined similarity to a ranked label set.
//!
//! `w = c * (1 + log2(tokens))`, then per-goal sums of class and bias document
//! scores, centered by their mean, then thresholded (strictly) and ranked.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{EmbeddingError, EmbeddingTable, EncoderTag, SentenceCache};
use crate::preprocess::Preprocessor;
use crate::similarity::{self, CombineVariant, SimilarityBundle, TopicWeight};
use crate::tfidf::{Corpus, CorpusError, SdgDefinition, TfIdfModel};
use crate::{SdgId, NUM_SDGS};

/// Default decision threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("strategy {strategy} needs a {encoder} sentence cache, none loaded")]
    MissingCache {
        strategy: Strategy,
        encoder: EncoderTag,
    },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// The two combined-similarity variants and the three single-similarity baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    CdmDan,
    CdmTransformer,
    AweBaseline,
    UseDanBaseline,
    UseTransformerBaseline,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::CdmDan,
        Strategy::CdmTransformer,
        Strategy::AweBaseline,
        Strategy::UseDanBaseline,
        Strategy::UseTransformerBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::CdmDan => "cdm_dan",
            Strategy::CdmTransformer => "cdm_transformer",
            Strategy::AweBaseline => "awe_baseline",
            Strategy::UseDanBaseline => "use_dan_baseline",
            Strategy::UseTransformerBaseline => "use_transformer_baseline",
        }
    }

    /// Sentence cache the strategy reads, if any.
    pub fn encoder(self) -> Option<EncoderTag> {
        match self {
            Strategy::CdmDan | Strategy::UseDanBaseline => Some(EncoderTag::Dan),
            Strategy::CdmTransformer | Strategy::UseTransformerBaseline => {
                Some(EncoderTag::Transformer)
            }
            Strategy::AweBaseline => None,
        }
    }

    pub fn uses_tfidf(self) -> bool {
        matches!(self, Strategy::CdmDan | Strategy::CdmTransformer)
    }

    pub fn uses_topic_weight(self) -> bool {
        self.uses_tfidf()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

/// Knobs for the ablation variants of the combined similarity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub combine: CombineVariant,
    pub topic_weight: TopicWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub sdg: SdgId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub labels: Vec<Label>,
    pub is_unrelated: bool,
}

impl ClassificationResult {
    pub fn label_ids(&self) -> Vec<SdgId> {
        self.labels.iter().map(|l| l.sdg).collect()
    }
}

/// Every intermediate quantity of one classification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationState {
    /// Present for the combined strategies; baselines skip the bundle.
    pub bundle: Option<SimilarityBundle>,
    pub c: Vec<f64>,
    pub w: Vec<f64>,
    pub l: f64,
    /// Centered biased similarity, indexed by goal.
    pub b: Vec<f64>,
    pub m: f64,
}

impl ClassificationState {
    pub fn threshold(&self, threshold: f64) -> ClassificationResult {
        threshold_rank(&self.b, threshold)
    }
}

/// Binary log of the token count; 0 for empty input.
pub fn log_length(token_count: usize) -> f64 {
    if token_count == 0 {
        0.0
    } else {
        (token_count as f64).log2()
    }
}

pub fn log_length_scale(c: &[f64], token_count: usize) -> Vec<f64> {
    let factor = 1.0 + log_length(token_count);
    c.iter().map(|x| x * factor).collect()
}

/// Per-goal sum of class and bias document scores. `w` follows corpus order.
pub fn biased_similarity(w: &[f64]) -> Vec<f64> {
    assert_eq!(
        w.len(),
        2 * NUM_SDGS,
        "expected one score per corpus document"
    );
    SdgId::all()
        .map(|k| w[Corpus::class_index(k)] + w[Corpus::bias_index(k)])
        .collect()
}

pub fn center(b: &[f64]) -> (Vec<f64>, f64) {
    if b.is_empty() {
        return (Vec::new(), 0.0);
    }
    let m = b.iter().sum::<f64>() / b.len() as f64;
    (b.iter().map(|x| x - m).collect(), m)
}

/// Goals whose score is strictly above `threshold`, best first, ties by ascending id.
pub fn threshold_rank(scores: &[f64], threshold: f64) -> ClassificationResult {
    let mut labels: Vec<Label> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(i, &s)| Label {
            sdg: SdgId::from_index(i),
            score: s,
        })
        .collect();
    labels.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.sdg.cmp(&b.sdg)));
    ClassificationResult {
        is_unrelated: labels.is_empty(),
        labels,
    }
}

/// Everything a classification needs, loaded once and shared read-only.
#[derive(Debug)]
pub struct Models {
    pp: &'static Preprocessor,
    corpus: Corpus,
    tfidf: TfIdfModel,
    table: EmbeddingTable,
    corpus_awe: Vec<Vec<f64>>,
    caches: BTreeMap<EncoderTag, SentenceCache>,
}

impl Models {
    pub fn new(
        defs: &[SdgDefinition],
        table: EmbeddingTable,
        caches: impl IntoIterator<Item = SentenceCache>,
    ) -> Result<Self, ClassifyError> {
        let pp = Preprocessor::shared();
        let corpus = Corpus::build_with(defs, pp)?;
        let tfidf = TfIdfModel::from_corpus(&corpus)?;
        let corpus_awe = similarity::corpus_awe(&table, corpus.texts(), pp);
        Ok(Models {
            pp,
            corpus,
            tfidf,
            table,
            corpus_awe,
            caches: caches.into_iter().map(|c| (c.encoder(), c)).collect(),
        })
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        self.pp
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn tfidf(&self) -> &TfIdfModel {
        &self.tfidf
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn cache(&self, encoder: EncoderTag) -> Option<&SentenceCache> {
        self.caches.get(&encoder)
    }

    fn cache_for(&self, strategy: Strategy) -> Result<Option<&SentenceCache>, ClassifyError> {
        match strategy.encoder() {
            None => Ok(None),
            Some(encoder) => self
                .caches
                .get(&encoder)
                .map(Some)
                .ok_or(ClassifyError::MissingCache { strategy, encoder }),
        }
    }

    fn u(&self, cache: &SentenceCache, query: &str) -> Result<Vec<f64>, ClassifyError> {
        Ok(similarity::compute_u(
            cache,
            self.corpus.texts(),
            query,
            self.pp,
        )?)
    }

    /// Runs the pipeline up to the centered per-goal scores.
    pub fn score(
        &self,
        query: &str,
        strategy: Strategy,
        options: PipelineOptions,
    ) -> Result<ClassificationState, ClassifyError> {
        let cache = self.cache_for(strategy)?;
        let processed = self.pp.process(query);
        let g = similarity::g_from_vectors(
            &self.table,
            &self.corpus_awe,
            &self.pp.surface_tokens(query),
        );

        let (bundle, c) = if strategy.uses_tfidf() {
            let f = similarity::compute_f(&self.tfidf, &processed);
            let u = self.u(cache.expect("combined strategies read a cache"), query)?;
            let bundle = SimilarityBundle::assemble(f, g, u, options.topic_weight, options.combine);
            let c = bundle.c.clone();
            (Some(bundle), c)
        } else {
            // the single similarity takes the tf-idf slot and the shift slot alike
            let s = match cache {
                Some(cache) => self.u(cache, query)?,
                None => g,
            };
            (None, s.iter().map(|x| 2.0 * x).collect())
        };

        let l = log_length(processed.token_count());
        let w = log_length_scale(&c, processed.token_count());
        let (b, m) = center(&biased_similarity(&w));
        Ok(ClassificationState {
            bundle,
            c,
            w,
            l,
            b,
            m,
        })
    }

    pub fn classify(
        &self,
        query: &str,
        strategy: Strategy,
        threshold: f64,
        options: PipelineOptions,
    ) -> Result<ClassificationResult, ClassifyError> {
        Ok(self.score(query, strategy, options)?.threshold(threshold))
    }
}
