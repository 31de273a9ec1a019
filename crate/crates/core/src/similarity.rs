//! Per-query similarity vectors against the corpus and their combination.
//!
//! `f` is TF-IDF cosine, `g` average-word-embedding cosine, `u` sentence-encoder
//! cosine, `r` the topic weight derived from `g`, and `c` the combined score.

use serde::{Deserialize, Serialize};

use crate::embeddings::{dense_cosine, EmbeddingError, EmbeddingTable, SentenceCache};
use crate::preprocess::{Preprocessor, ProcessedDocument};
use crate::tfidf::{sparse_cosine, TfIdfModel};

/// Which paradigmatic term is added to `f` before topic weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineVariant {
    /// `c = (f + u) * r`
    #[default]
    Formula,
    /// `c = (f + g) * r`
    Prose,
}

/// How `r` is derived from `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicWeight {
    #[default]
    SquareOfMean,
    MeanOfSquares,
}

/// Similarity of one query against every corpus document, index-aligned with the corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityBundle {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub u: Vec<f64>,
    pub r: f64,
    pub c: Vec<f64>,
}

impl SimilarityBundle {
    pub fn assemble(
        f: Vec<f64>,
        g: Vec<f64>,
        u: Vec<f64>,
        weight: TopicWeight,
        variant: CombineVariant,
    ) -> Self {
        let r = compute_r(&g, weight);
        let c = combine(&f, &u, &g, r, variant);
        SimilarityBundle { f, g, u, r, c }
    }
}

pub fn compute_f(model: &TfIdfModel, query: &ProcessedDocument) -> Vec<f64> {
    let q = model.vectorize(query);
    model
        .doc_vectors()
        .iter()
        .map(|d| sparse_cosine(&q, d))
        .collect()
}

/// Average word embeddings of each corpus text, over normalized surface tokens.
pub fn corpus_awe<'a, I>(
    table: &EmbeddingTable,
    corpus_texts: I,
    pp: &Preprocessor,
) -> Vec<Vec<f64>>
where
    I: IntoIterator<Item = &'a str>,
{
    corpus_texts
        .into_iter()
        .map(|t| table.awe(&pp.surface_tokens(t)))
        .collect()
}

/// `g` from precomputed corpus vectors and the query's surface tokens.
pub fn g_from_vectors<S: AsRef<str>>(
    table: &EmbeddingTable,
    corpus_vectors: &[Vec<f64>],
    query_tokens: &[S],
) -> Vec<f64> {
    let q = table.awe(query_tokens);
    corpus_vectors
        .iter()
        .map(|d| dense_cosine(&q, d).expect("awe vectors share the table dimension"))
        .collect()
}

pub fn compute_g<'a, I>(
    table: &EmbeddingTable,
    corpus_texts: I,
    query_text: &str,
    pp: &Preprocessor,
) -> Vec<f64>
where
    I: IntoIterator<Item = &'a str>,
{
    let corpus = corpus_awe(table, corpus_texts, pp);
    g_from_vectors(table, &corpus, &pp.surface_tokens(query_text))
}

/// `u` from cached sentence vectors. Texts are looked up through the
/// normalized encoder surface.
pub fn compute_u<'a, I>(
    cache: &SentenceCache,
    corpus_texts: I,
    query_text: &str,
    pp: &Preprocessor,
) -> Result<Vec<f64>, EmbeddingError>
where
    I: IntoIterator<Item = &'a str>,
{
    let q = cache.sentence_embedding(&pp.encoder_text(query_text))?;
    corpus_texts
        .into_iter()
        .map(|t| dense_cosine(q, cache.sentence_embedding(&pp.encoder_text(t))?))
        .collect()
}

pub fn compute_r(g: &[f64], weight: TopicWeight) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    let n = g.len() as f64;
    match weight {
        TopicWeight::SquareOfMean => {
            let mean = g.iter().sum::<f64>() / n;
            mean * mean
        }
        TopicWeight::MeanOfSquares => g.iter().map(|x| x * x).sum::<f64>() / n,
    }
}

pub fn combine(f: &[f64], u: &[f64], g: &[f64], r: f64, variant: CombineVariant) -> Vec<f64> {
    let shift = match variant {
        CombineVariant::Formula => u,
        CombineVariant::Prose => g,
    };
    assert_eq!(
        f.len(),
        shift.len(),
        "similarity vectors must be index-aligned"
    );
    f.iter().zip(shift).map(|(a, b)| (a + b) * r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EncoderTag;

    #[test]
    fn r_examples() {
        assert_eq!(compute_r(&[0.0; 34], TopicWeight::SquareOfMean), 0.0);
        assert_eq!(compute_r(&[1.0; 34], TopicWeight::SquareOfMean), 1.0);
        assert!((compute_r(&[0.3; 34], TopicWeight::SquareOfMean) - 0.09).abs() < 1e-12);
        let g = [0.5, -0.5];
        assert_eq!(compute_r(&g, TopicWeight::SquareOfMean), 0.0);
        assert_eq!(compute_r(&g, TopicWeight::MeanOfSquares), 0.25);
    }

    #[test]
    fn combine_examples() {
        assert_eq!(
            combine(
                &[0.0; 3],
                &[0.0; 3],
                &[0.7; 3],
                0.5,
                CombineVariant::Formula
            ),
            [0.0; 3]
        );
        assert_eq!(
            combine(&[1.0], &[1.0], &[0.0], 0.25, CombineVariant::Formula),
            [0.5]
        );
        assert_eq!(
            combine(
                &[0.3, 1.0],
                &[0.9, -1.0],
                &[0.1, 0.2],
                0.0,
                CombineVariant::Formula
            ),
            [0.0, 0.0]
        );
        assert_eq!(
            combine(&[1.0], &[0.0], &[1.0], 0.5, CombineVariant::Prose),
            [1.0]
        );
    }

    #[test]
    fn g_toy_orthogonal() {
        let table = EmbeddingTable::read("2\ncat\t1 0\ndog\t0 1\n".as_bytes()).unwrap();
        let pp = Preprocessor::shared();
        assert_eq!(compute_g(&table, ["dog", "cat"], "cat", pp), [0.0, 1.0]);
        assert_eq!(compute_g(&table, ["dog"], "xyzzy", pp), [0.0]);
    }

    #[test]
    fn u_hand_placed_vectors() {
        let pp = Preprocessor::shared();
        let mut cache = SentenceCache::new(2, EncoderTag::Dan);
        cache.insert("query", vec![1.0, 0.0]).unwrap();
        cache.insert("doc a", vec![0.6, 0.8]).unwrap();
        let u = compute_u(&cache, ["doc a", "query"], "query", pp).unwrap();
        assert!((u[0] - 0.6).abs() < 1e-12);
        assert!((u[1] - 1.0).abs() < 1e-12);
        assert!(matches!(
            compute_u(&cache, ["missing"], "query", pp),
            Err(EmbeddingError::CacheMiss(_))
        ));
    }
}
