//! Synthetic embedding fixtures shared by the integration suites.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdgtag::embeddings::{text_digest, EmbeddingTable, EncoderTag, SentenceCache};
use sdgtag::metrics::AnnotatedParagraph;
use sdgtag::preprocess::Preprocessor;
use sdgtag::tfidf::{Corpus, SdgDefinition};
use sdgtag::{SdgId, CORPUS_SIZE};

/// Extra dimensions beyond the orthonormal corpus block, used for query vectors.
pub const QUERY_DIMS: usize = 8;

pub fn corpus_texts() -> Vec<String> {
    let corpus = Corpus::build(&SdgDefinition::bundled()).unwrap();
    corpus.texts().map(String::from).collect()
}

/// Every surface token of `texts` maps to `[1, small distinct offset]`, so all
/// average word embeddings point almost the same way and `r` stays close to 1.
pub fn near_parallel_table<'a>(texts: impl IntoIterator<Item = &'a str>) -> EmbeddingTable {
    let pp = Preprocessor::shared();
    let tokens: BTreeSet<String> = texts
        .into_iter()
        .flat_map(|t| pp.surface_tokens(t))
        .collect();
    let mut table = EmbeddingTable::new(2);
    for (i, tok) in tokens.into_iter().enumerate() {
        table.insert(tok, vec![1.0, (i + 1) as f64 * 1e-4]).unwrap();
    }
    table
}

/// Every surface token of `texts` maps to a seeded random vector in `[-1, 1]^dim`.
pub fn random_table<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    dim: usize,
    seed: u64,
) -> EmbeddingTable {
    let pp = Preprocessor::shared();
    let tokens: BTreeSet<String> = texts
        .into_iter()
        .flat_map(|t| pp.surface_tokens(t))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim);
    for tok in tokens {
        table
            .insert(tok, (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
    }
    table
}

/// Corpus text `j` maps to basis vector `e_j`; every other text gets a seeded
/// random unit vector. Keys are the encoder surface of each text.
pub fn orthonormal_cache<'a>(
    encoder: EncoderTag,
    queries: impl IntoIterator<Item = &'a str>,
    seed: u64,
) -> SentenceCache {
    let pp = Preprocessor::shared();
    let dim = CORPUS_SIZE + QUERY_DIMS;
    let mut cache = SentenceCache::new(dim, encoder);
    for (j, text) in corpus_texts().iter().enumerate() {
        let mut v = vec![0.0; dim];
        v[j] = 1.0;
        cache.insert(&pp.encoder_text(text), v).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for q in queries {
        let key = pp.encoder_text(q);
        if cache.contains_digest(&text_digest(&key)) {
            continue;
        }
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        cache
            .insert(&key, v.into_iter().map(|x| x / norm).collect())
            .unwrap();
    }
    cache
}

pub fn paragraph(source_id: &str, text: &str, labels: &[u32]) -> AnnotatedParagraph {
    AnnotatedParagraph {
        source_id: source_id.to_string(),
        text: text.to_string(),
        labels: labels.iter().map(|&i| SdgId::new(i).unwrap()).collect(),
        e_id: None,
    }
}

/// A small annotated dataset mixing goal texts, partial goal texts and off-topic text.
pub fn sample_dataset() -> Vec<AnnotatedParagraph> {
    let defs = SdgDefinition::bundled();
    let mut out = Vec::new();
    for (i, d) in defs.iter().enumerate() {
        let words: Vec<&str> = d.description.split_whitespace().take(12 + i).collect();
        out.push(paragraph(
            &format!("doc{}", i % 3),
            &words.join(" "),
            &[d.id],
        ));
    }
    out.push(paragraph("doc0", "The committee adjourned at noon.", &[]));
    out.push(paragraph(
        "doc1",
        "Goal 16 and the 17th sdg on partnerships.",
        &[16, 17],
    ));
    out.push(paragraph(
        "doc2",
        "Clean water, sanitation and affordable energy for all.",
        &[6, 7],
    ));
    out.push(paragraph("doc2", "", &[]));
    out
}

pub fn write_jsonl(path: &Path, rows: &[AnnotatedParagraph]) {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).unwrap());
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

/// Paths of the synthetic word table and both sentence caches written into `dir`.
pub struct FixtureFiles {
    pub word_table: PathBuf,
    pub dan_cache: PathBuf,
    pub transformer_cache: PathBuf,
}

/// Writes a word table covering the corpus and `queries`, and caches of both
/// encoders holding every corpus text and every query.
pub fn write_fixture(dir: &Path, queries: &[AnnotatedParagraph]) -> FixtureFiles {
    let texts = corpus_texts();
    let all = texts
        .iter()
        .map(String::as_str)
        .chain(queries.iter().map(|q| q.text.as_str()));
    let table = random_table(all, 6, 7);
    let files = FixtureFiles {
        word_table: dir.join("words.txt"),
        dan_cache: dir.join("dan.tsv"),
        transformer_cache: dir.join("transformer.tsv"),
    };
    let mut buf = Vec::new();
    table.write(&mut buf).unwrap();
    fs::write(&files.word_table, buf).unwrap();
    for (encoder, path, seed) in [
        (EncoderTag::Dan, &files.dan_cache, 11),
        (EncoderTag::Transformer, &files.transformer_cache, 13),
    ] {
        let cache = orthonormal_cache(encoder, queries.iter().map(|q| q.text.as_str()), seed);
        let mut buf = Vec::new();
        cache.write(&mut buf).unwrap();
        fs::write(path, buf).unwrap();
    }
    files
}
