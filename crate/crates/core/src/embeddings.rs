//! File-backed word and sentence embedding stores.
//!
//! Word table format: first line is the dimension, then one
//! `token<TAB>f1 f2 ... fd` row per word. Sentence cache format: first line is
//! `dimension<TAB>encoder_tag`, then one `sha256-hex<TAB>f1 ... fd` row per
//! text, keyed by [`text_digest`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("bad header: {0:?}")]
    BadHeader(String),
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: value is not a finite decimal number")]
    BadValue { line: usize },
    #[error("line {line}: malformed digest")]
    BadDigest { line: usize },
    #[error("token {0:?} appears more than once")]
    DuplicateToken(String),
    #[error("digest {0} appears more than once with different vectors")]
    DuplicateDigest(String),
    #[error("vectors of length {0} and {1} cannot be compared")]
    LengthMismatch(usize, usize),
    #[error("sentence cache has no entry for digest {0}")]
    CacheMiss(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sentence encoder family a cache was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderTag {
    Dan,
    Transformer,
}

impl EncoderTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderTag::Dan => "dan",
            EncoderTag::Transformer => "transformer",
        }
    }
}

impl fmt::Display for EncoderTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dan" => Ok(EncoderTag::Dan),
            "transformer" => Ok(EncoderTag::Transformer),
            other => Err(format!("unknown encoder tag {other:?}")),
        }
    }
}

/// Whitespace-canonical form of a text: trimmed, internal runs collapsed to one space.
pub fn canonical_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercase hex SHA-256 of the canonical text.
pub fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(canonical_text(text).as_bytes()))
}

fn parse_values(line: usize, body: &str, expected: usize) -> Result<Vec<f64>, EmbeddingError> {
    let values = body
        .split_whitespace()
        .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or(EmbeddingError::BadValue { line })?;
    if values.len() != expected {
        return Err(EmbeddingError::DimensionMismatch {
            line,
            expected,
            found: values.len(),
        });
    }
    Ok(values)
}

/// Splits a row into key and value list at the first tab, or the first space
/// when the row has no tab.
fn split_row(row: &str) -> (&str, &str) {
    row.split_once('\t')
        .or_else(|| row.split_once(' '))
        .unwrap_or((row, ""))
}

fn write_values<W: Write>(out: &mut W, values: &[f64]) -> io::Result<()> {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.write_all(b" ")?;
        }
        write!(out, "{v}")?;
    }
    writeln!(out)
}

/// Token to vector lookup for average word embeddings.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        Self::read(BufReader::new(std::fs::File::open(path)?))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let dimension = header
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| EmbeddingError::BadHeader(header.clone()))?;

        let mut table = Self::new(dimension);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let row = line.trim_end_matches('\r');
            if row.trim().is_empty() {
                continue;
            }
            let (token, body) = split_row(row);
            let values = parse_values(i + 2, body, dimension)?;
            if table.vectors.insert(token.to_string(), values).is_some() {
                return Err(EmbeddingError::DuplicateToken(token.to_string()));
            }
        }
        Ok(table)
    }

    pub fn insert(
        &mut self,
        token: impl Into<String>,
        vector: Vec<f64>,
    ) -> Result<(), EmbeddingError> {
        let token = token.into();
        if vector.len() != self.dimension {
            return Err(EmbeddingError::LengthMismatch(self.dimension, vector.len()));
        }
        if self.vectors.contains_key(&token) {
            return Err(EmbeddingError::DuplicateToken(token));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    /// Rows sorted by token.
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.dimension)?;
        let sorted: BTreeMap<_, _> = self.vectors.iter().collect();
        for (token, values) in sorted {
            write!(out, "{token}\t")?;
            write_values(&mut out, values)?;
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Mean over token instances of the known vectors. Unknown tokens are
    /// skipped; no known tokens gives the zero vector.
    pub fn awe<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut sum = vec![0.0; self.dimension];
        let mut hits = 0usize;
        for vector in tokens.iter().filter_map(|t| self.get(t.as_ref())) {
            for (s, v) in sum.iter_mut().zip(vector) {
                *s += v;
            }
            hits += 1;
        }
        if hits > 0 {
            let n = hits as f64;
            sum.iter_mut().for_each(|s| *s /= n);
        }
        sum
    }
}

/// Pre-computed sentence-encoder vectors keyed by canonical text digest.
#[derive(Debug, Clone)]
pub struct SentenceCache {
    dimension: usize,
    encoder: EncoderTag,
    entries: HashMap<String, Vec<f64>>,
}

impl SentenceCache {
    pub fn new(dimension: usize, encoder: EncoderTag) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self {
            dimension,
            encoder,
            entries: HashMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        Self::read(BufReader::new(std::fs::File::open(path)?))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let bad_header = || EmbeddingError::BadHeader(header.clone());
        let (dim, tag) = header.trim().split_once('\t').ok_or_else(bad_header)?;
        let dimension = dim
            .parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(bad_header)?;
        let encoder = tag.trim().parse::<EncoderTag>().map_err(|_| bad_header())?;

        let mut cache = Self::new(dimension, encoder);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let row = line.trim_end_matches('\r');
            if row.trim().is_empty() {
                continue;
            }
            let lineno = i + 2;
            let (digest, body) = split_row(row);
            if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(EmbeddingError::BadDigest { line: lineno });
            }
            let digest = digest.to_ascii_lowercase();
            let values = parse_values(lineno, body, dimension)?;
            match cache.entries.get(&digest) {
                Some(existing) if *existing != values => {
                    return Err(EmbeddingError::DuplicateDigest(digest))
                }
                Some(_) => {}
                None => {
                    cache.entries.insert(digest, values);
                }
            }
        }
        Ok(cache)
    }

    /// Rows sorted by digest.
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}\t{}", self.dimension, self.encoder)?;
        let sorted: BTreeMap<_, _> = self.entries.iter().collect();
        for (digest, values) in sorted {
            write!(out, "{digest}\t")?;
            write_values(&mut out, values)?;
        }
        Ok(())
    }

    pub fn insert(&mut self, text: &str, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.len() != self.dimension {
            return Err(EmbeddingError::LengthMismatch(self.dimension, vector.len()));
        }
        self.entries.insert(text_digest(text), vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn encoder(&self) -> EncoderTag {
        self.encoder
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_digest(&self, digest: &str) -> bool {
        self.entries.contains_key(digest)
    }

    /// Cached vector for `text`; a miss means the exporter has to be rerun.
    pub fn sentence_embedding(&self, text: &str) -> Result<&[f64], EmbeddingError> {
        let digest = text_digest(text);
        self.entries
            .get(&digest)
            .map(Vec::as_slice)
            .ok_or(EmbeddingError::CacheMiss(digest))
    }
}

/// Cosine of two dense vectors; 0 when either has zero norm.
pub fn dense_cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::LengthMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let denom = na.sqrt() * nb.sqrt();
    if denom == 0.0 || !denom.is_finite() {
        return Ok(0.0);
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Result<EmbeddingTable, EmbeddingError> {
        EmbeddingTable::read(text.as_bytes())
    }

    #[test]
    fn load_word_table() {
        let t = table("3\ncat\t1 0 0\ndog\t0 1 0\n").unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("dog"), Some(&[0.0, 1.0, 0.0][..]));
        // space-separated rows are accepted too
        let t = table("3\ncat 1 0 0\ndog 0 1 0").unwrap();
        assert_eq!(t.get("cat"), Some(&[1.0, 0.0, 0.0][..]));
    }

    #[test]
    fn word_table_errors() {
        assert!(matches!(
            table("3\ncat\t1 0\n"),
            Err(EmbeddingError::DimensionMismatch {
                line: 2,
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(table("x\n"), Err(EmbeddingError::BadHeader(_))));
        assert!(matches!(table(""), Err(EmbeddingError::BadHeader(_))));
        assert!(matches!(
            table("1\na\t1\na\t2\n"),
            Err(EmbeddingError::DuplicateToken(t)) if t == "a"
        ));
        assert!(matches!(
            table("1\na\tnan\n"),
            Err(EmbeddingError::BadValue { line: 2 })
        ));
    }

    #[test]
    fn empty_body_is_valid() {
        let t = table("4\n").unwrap();
        assert!(t.is_empty());
        assert_eq!(t.awe(&["cat"]), vec![0.0; 4]);
    }

    #[test]
    fn awe_examples() {
        let t = table("3\ncat\t1 0 0\ndog\t0 1 0\n").unwrap();
        assert_eq!(t.awe(&["cat"]), [1.0, 0.0, 0.0]);
        assert_eq!(t.awe(&["cat", "dog"]), [0.5, 0.5, 0.0]);
        assert_eq!(t.awe(&["xyzzy"]), [0.0, 0.0, 0.0]);
        assert_eq!(t.awe::<&str>(&[]), [0.0, 0.0, 0.0]);
        // multiplicity counts
        assert_eq!(t.awe(&["cat", "cat", "dog"]), [2.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert_eq!(t.awe(&["cat", "cat", "dog", "dog"]), t.awe(&["cat", "dog"]));
    }

    #[test]
    fn digest_canonicalizes_whitespace() {
        assert_eq!(text_digest("end poverty  "), text_digest(" end \t poverty"));
        assert_ne!(text_digest("end poverty"), text_digest("end  hunger"));
        // sha256("abc")
        assert_eq!(
            text_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sentence_cache_lookup() {
        let body = format!(
            "2\tdan\n{}\t1 0\n{}\t0.6 0.8\n",
            text_digest("a b"),
            text_digest("c")
        );
        let cache = SentenceCache::read(body.as_bytes()).unwrap();
        assert_eq!(cache.encoder(), EncoderTag::Dan);
        assert_eq!(cache.sentence_embedding("a b ").unwrap(), [1.0, 0.0]);
        let u = dense_cosine(
            cache.sentence_embedding("a b").unwrap(),
            cache.sentence_embedding("c").unwrap(),
        )
        .unwrap();
        assert!((u - 0.6).abs() < 1e-12);
        assert!(matches!(
            cache.sentence_embedding("zzz"),
            Err(EmbeddingError::CacheMiss(d)) if d == text_digest("zzz")
        ));
    }

    #[test]
    fn sentence_cache_errors() {
        assert!(matches!(
            SentenceCache::read("2\tbert\n".as_bytes()),
            Err(EmbeddingError::BadHeader(_))
        ));
        assert!(matches!(
            SentenceCache::read("2\tdan\nabc\t1 0\n".as_bytes()),
            Err(EmbeddingError::BadDigest { line: 2 })
        ));
        let d = text_digest("x");
        let conflicting = format!("1\tdan\n{d}\t1\n{d}\t2\n");
        assert!(matches!(
            SentenceCache::read(conflicting.as_bytes()),
            Err(EmbeddingError::DuplicateDigest(_))
        ));
        let repeated = format!("1\tdan\n{d}\t1\n{d}\t1\n");
        assert_eq!(SentenceCache::read(repeated.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn cache_write_roundtrip() {
        let mut cache = SentenceCache::new(3, EncoderTag::Transformer);
        cache.insert("one", vec![0.1, -2.5, 1e-17]).unwrap();
        cache.insert("two", vec![1.0 / 3.0, 0.0, 7.0]).unwrap();
        let mut buf = Vec::new();
        cache.write(&mut buf).unwrap();
        let back = SentenceCache::read(buf.as_slice()).unwrap();
        assert_eq!(
            back.sentence_embedding("two").unwrap(),
            [1.0 / 3.0, 0.0, 7.0]
        );
        assert_eq!(back.sentence_embedding("one").unwrap(), [0.1, -2.5, 1e-17]);
    }

    #[test]
    fn cosine_examples() {
        assert!((dense_cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(dense_cosine(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        let c = dense_cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(dense_cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(dense_cosine(&[1.0], &[1.0, 0.0]).is_err());
    }
}
