//! Evaluation over annotated paragraphs: label ranking average precision,
//! support-weighted F1, and the Best-Ranked (BR) accuracy and weighted F1.
//!
//! An empty label set stands for "no SDG", which participates as an 18th
//! label in the F1 and BR statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{threshold_rank, ClassifyError, Models, PipelineOptions, Strategy};
use crate::{SdgId, NUM_SDGS};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples to evaluate")]
    EmptyDataset,
    #[error("{0} truth rows but {1} prediction rows")]
    LengthMismatch(usize, usize),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub type LabelSet = BTreeSet<SdgId>;

/// One of the 18 evaluation classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvalLabel {
    NoSdg,
    Sdg(SdgId),
}

impl EvalLabel {
    pub const COUNT: usize = NUM_SDGS + 1;

    pub fn index(self) -> usize {
        match self {
            EvalLabel::NoSdg => 0,
            EvalLabel::Sdg(id) => id.get() as usize,
        }
    }

    pub fn from_index(index: usize) -> Self {
        match index {
            0 => EvalLabel::NoSdg,
            i => EvalLabel::Sdg(SdgId::from_index(i - 1)),
        }
    }

    /// Label set with the empty set mapped to `{NoSdg}`.
    pub fn expand(labels: &LabelSet) -> BTreeSet<EvalLabel> {
        if labels.is_empty() {
            [EvalLabel::NoSdg].into()
        } else {
            labels.iter().map(|&id| EvalLabel::Sdg(id)).collect()
        }
    }
}

impl fmt::Display for EvalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalLabel::NoSdg => f.write_str("no_sdg"),
            EvalLabel::Sdg(id) => write!(f, "{id}"),
        }
    }
}

/// A dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedParagraph {
    pub source_id: String,
    pub text: String,
    #[serde(default)]
    pub labels: LabelSet,
    /// Paragraph element id for markup output; derived from position when absent.
    #[serde(default, rename = "eId", skip_serializing_if = "Option::is_none")]
    pub e_id: Option<String>,
}

/// Reads a JSON Lines dataset. Blank lines are skipped.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<AnnotatedParagraph>, MetricsError> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| MetricsError::BadRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_dataset(path: &Path) -> Result<Vec<AnnotatedParagraph>, MetricsError> {
    read_dataset(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lrap {
    pub value: f64,
    /// Samples with an empty truth set, left out of the average.
    pub excluded: usize,
}

fn sample_lrap(truth: &LabelSet, scores: &[f64]) -> f64 {
    let mut total = 0.0;
    for label in truth {
        let s = scores[label.index()];
        let rank = scores.iter().filter(|&&x| x >= s).count();
        let above = truth.iter().filter(|t| scores[t.index()] >= s).count();
        total += above as f64 / rank as f64;
    }
    total / truth.len() as f64
}

/// Label ranking average precision over per-goal score vectors.
pub fn lrap(truth: &[LabelSet], scores: &[Vec<f64>]) -> Result<Lrap, MetricsError> {
    if truth.len() != scores.len() {
        return Err(MetricsError::LengthMismatch(truth.len(), scores.len()));
    }
    let included: Vec<f64> = truth
        .iter()
        .zip(scores)
        .filter(|(t, _)| !t.is_empty())
        .map(|(t, s)| sample_lrap(t, s))
        .collect();
    if included.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    Ok(Lrap {
        value: included.iter().sum::<f64>() / included.len() as f64,
        excluded: truth.len() - included.len(),
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Confusion {
    fn f1(self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    fn support(self) -> usize {
        self.tp + self.fn_
    }
}

fn confusions(
    truth: &[BTreeSet<EvalLabel>],
    predicted: &[BTreeSet<EvalLabel>],
) -> [Confusion; EvalLabel::COUNT] {
    let mut table = [Confusion::default(); EvalLabel::COUNT];
    for (t, p) in truth.iter().zip(predicted) {
        for label in t.union(p) {
            let cell = &mut table[label.index()];
            match (t.contains(label), p.contains(label)) {
                (true, true) => cell.tp += 1,
                (true, false) => cell.fn_ += 1,
                (false, true) => cell.fp += 1,
                (false, false) => unreachable!(),
            }
        }
    }
    table
}

fn weighted_f1_expanded(truth: &[BTreeSet<EvalLabel>], predicted: &[BTreeSet<EvalLabel>]) -> f64 {
    let table = confusions(truth, predicted);
    let support: usize = table.iter().map(|c| c.support()).sum();
    if support == 0 {
        return 0.0;
    }
    table
        .iter()
        .map(|c| c.f1() * c.support() as f64)
        .sum::<f64>()
        / support as f64
}

/// One-vs-rest F1 per label averaged with true-support weights.
pub fn weighted_f1(truth: &[LabelSet], predicted: &[LabelSet]) -> Result<f64, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let t: Vec<_> = truth.iter().map(EvalLabel::expand).collect();
    let p: Vec<_> = predicted.iter().map(EvalLabel::expand).collect();
    Ok(weighted_f1_expanded(&t, &p))
}

/// Best-ranked true label: the highest-ranked prediction that is also true,
/// otherwise a uniformly drawn true label.
pub fn best_ranked<R: Rng + ?Sized>(truth: &LabelSet, ranked: &[SdgId], rng: &mut R) -> EvalLabel {
    let truth = EvalLabel::expand(truth);
    let ranked = expand_ranked(ranked);
    if let Some(hit) = ranked.iter().find(|l| truth.contains(l)) {
        return *hit;
    }
    let pick = rng.gen_range(0..truth.len());
    *truth.iter().nth(pick).expect("index within set")
}

fn expand_ranked(ranked: &[SdgId]) -> Vec<EvalLabel> {
    if ranked.is_empty() {
        vec![EvalLabel::NoSdg]
    } else {
        ranked.iter().map(|&id| EvalLabel::Sdg(id)).collect()
    }
}

/// The (true, predicted) pair scored by the BR statistics. The prediction is
/// the best-ranked label itself when it was predicted, otherwise the top prediction.
pub fn best_ranked_pair<R: Rng + ?Sized>(
    truth: &LabelSet,
    ranked: &[SdgId],
    rng: &mut R,
) -> (EvalLabel, EvalLabel) {
    let chosen = best_ranked(truth, ranked, rng);
    let ranked = expand_ranked(ranked);
    let predicted = if ranked.contains(&chosen) {
        chosen
    } else {
        ranked[0]
    };
    (chosen, predicted)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrStats {
    pub accuracy: f64,
    pub weighted_f1: f64,
}

pub fn br_statistics(
    truth: &[LabelSet],
    ranked: &[Vec<SdgId>],
    seed: u64,
) -> Result<BrStats, MetricsError> {
    if truth.len() != ranked.len() {
        return Err(MetricsError::LengthMismatch(truth.len(), ranked.len()));
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, p): (Vec<_>, Vec<_>) = truth
        .iter()
        .zip(ranked)
        .map(|(t, r)| best_ranked_pair(t, r, &mut rng))
        .unzip();
    let correct = t.iter().zip(&p).filter(|(a, b)| a == b).count();
    let singleton = |v: Vec<EvalLabel>| {
        v.into_iter()
            .map(|l| BTreeSet::from([l]))
            .collect::<Vec<_>>()
    };
    Ok(BrStats {
        accuracy: correct as f64 / truth.len() as f64,
        weighted_f1: weighted_f1_expanded(&singleton(t), &singleton(p)),
    })
}

/// Share of label occurrences per group; an empty set counts as one "no SDG" occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub no_sdg: f64,
    pub sdg16: f64,
    pub sdg17: f64,
    pub remaining: f64,
}

pub fn class_distribution(truth: &[LabelSet]) -> Result<ClassDistribution, MetricsError> {
    let mut counts = [0usize; 4];
    for labels in truth {
        if labels.is_empty() {
            counts[0] += 1;
        }
        for id in labels {
            match id.get() {
                16 => counts[1] += 1,
                17 => counts[2] += 1,
                _ => counts[3] += 1,
            }
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(MetricsError::EmptyDataset);
    }
    let frac = |c: usize| c as f64 / total as f64;
    Ok(ClassDistribution {
        no_sdg: frac(counts[0]),
        sdg16: frac(counts[1]),
        sdg17: frac(counts[2]),
        remaining: frac(counts[3]),
    })
}

pub fn per_class_support(truth: &[LabelSet]) -> BTreeMap<String, usize> {
    let mut support = vec![0usize; EvalLabel::COUNT];
    for labels in truth {
        for l in EvalLabel::expand(labels) {
            support[l.index()] += 1;
        }
    }
    support
        .into_iter()
        .enumerate()
        .filter(|(_, n)| *n > 0)
        .map(|(i, n)| (EvalLabel::from_index(i).to_string(), n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub strategy: Strategy,
    pub threshold: f64,
    pub rng_seed: u64,
    pub samples: usize,
    /// Absent when no sample carries a goal label.
    pub lrap: Option<f64>,
    pub lrap_excluded: usize,
    pub weighted_f1: f64,
    pub br_accuracy: f64,
    pub br_weighted_f1: f64,
    /// Total number of predicted goal labels across samples.
    pub predicted_labels: usize,
    pub per_class_support: BTreeMap<String, usize>,
    pub class_distribution: ClassDistribution,
}

/// Centered per-goal scores of every paragraph, computed on `workers` threads.
/// Output order follows input order.
pub fn score_dataset(
    models: &Models,
    dataset: &[AnnotatedParagraph],
    strategy: Strategy,
    options: PipelineOptions,
    workers: usize,
) -> Result<Vec<Vec<f64>>, MetricsError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let scores = pool.install(|| {
        dataset
            .par_iter()
            .map(|p| models.score(&p.text, strategy, options).map(|s| s.b))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(scores)
}

/// All metrics for one threshold given precomputed scores.
pub fn report_from_scores(
    dataset: &[AnnotatedParagraph],
    scores: &[Vec<f64>],
    strategy: Strategy,
    threshold: f64,
    seed: u64,
) -> Result<EvalReport, MetricsError> {
    if dataset.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let truth: Vec<LabelSet> = dataset.iter().map(|p| p.labels.clone()).collect();
    let ranked: Vec<Vec<SdgId>> = scores
        .iter()
        .map(|s| threshold_rank(s, threshold).label_ids())
        .collect();
    let predicted: Vec<LabelSet> = ranked.iter().map(|r| r.iter().copied().collect()).collect();

    let (lrap_value, lrap_excluded) = match lrap(&truth, scores) {
        Ok(l) => (Some(l.value), l.excluded),
        Err(MetricsError::EmptyDataset) => (None, truth.len()),
        Err(e) => return Err(e),
    };
    let br = br_statistics(&truth, &ranked, seed)?;

    Ok(EvalReport {
        strategy,
        threshold,
        rng_seed: seed,
        samples: dataset.len(),
        lrap: lrap_value,
        lrap_excluded,
        weighted_f1: weighted_f1(&truth, &predicted)?,
        br_accuracy: br.accuracy,
        br_weighted_f1: br.weighted_f1,
        predicted_labels: ranked.iter().map(Vec::len).sum(),
        per_class_support: per_class_support(&truth),
        class_distribution: class_distribution(&truth)?,
    })
}

pub fn evaluate(
    models: &Models,
    dataset: &[AnnotatedParagraph],
    strategy: Strategy,
    threshold: f64,
    options: PipelineOptions,
    seed: u64,
    workers: usize,
) -> Result<EvalReport, MetricsError> {
    let scores = score_dataset(models, dataset, strategy, options, workers)?;
    report_from_scores(dataset, &scores, strategy, threshold, seed)
}
