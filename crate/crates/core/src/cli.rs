//! Command-line front end: `build`, `preflight`, `classify`, `evaluate`,
//! `sweep` and `emit-akn`.
//!
//! Settings resolve as flags, then `SDGTAG_*` environment variables, then the
//! JSON config file, then built-in defaults. Exit codes: 0 ok, 1 usage,
//! 2 data error, 3 sentence cache incomplete.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aknxml::{self, AknAnnotation};
use crate::classifier::{
    ClassificationResult, ClassifyError, Label, Models, PipelineOptions, Strategy,
    DEFAULT_THRESHOLD,
};
use crate::embeddings::{text_digest, EmbeddingError, EmbeddingTable, EncoderTag, SentenceCache};
use crate::metrics::{self, AnnotatedParagraph, EvalReport, MetricsError};
use crate::similarity::{CombineVariant, TopicWeight};
use crate::tfidf::{Corpus, CorpusError, SdgDefinition, TfIdfModel};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("sentence cache incomplete: {} text(s) missing", .0.len())]
    CacheIncomplete(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::CacheIncomplete(_) => 3,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::CacheMiss(d) => CliError::CacheIncomplete(vec![d]),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::MissingCache { .. } => CliError::Usage(e.to_string()),
            ClassifyError::Embedding(e) => e.into(),
            ClassifyError::Corpus(e) => e.into(),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Classify(e) => e.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sdgtag",
    version,
    about = "Multi-label SDG classification of text paragraphs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config file
    #[arg(long, global = true, env = "SDGTAG_CONFIG")]
    pub config: Option<PathBuf>,
    /// SDG definitions JSON; the bundled official texts when omitted
    #[arg(long, global = true, env = "SDGTAG_DEFS")]
    pub defs: Option<PathBuf>,
    #[arg(long, global = true, env = "SDGTAG_WORD_TABLE")]
    pub word_table: Option<PathBuf>,
    #[arg(long, global = true, env = "SDGTAG_DAN_CACHE")]
    pub dan_cache: Option<PathBuf>,
    #[arg(long, global = true, env = "SDGTAG_TRANSFORMER_CACHE")]
    pub transformer_cache: Option<PathBuf>,
    #[arg(long, global = true, env = "SDGTAG_STRATEGY")]
    pub strategy: Option<Strategy>,
    #[arg(
        long,
        global = true,
        env = "SDGTAG_THRESHOLD",
        allow_negative_numbers = true
    )]
    pub threshold: Option<f64>,
    #[arg(long, global = true, env = "SDGTAG_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "SDGTAG_WORKERS")]
    pub workers: Option<usize>,
    /// formula: (F+U)*R, prose: (F+G)*R
    #[arg(long, global = true, env = "SDGTAG_COMBINE_VARIANT", value_parser = parse_combine)]
    pub combine_variant: Option<CombineVariant>,
    /// square_of_mean or mean_of_squares
    #[arg(long, global = true, env = "SDGTAG_R_VARIANT", value_parser = parse_topic_weight)]
    pub r_variant: Option<TopicWeight>,
}

fn parse_combine(s: &str) -> Result<CombineVariant, String> {
    match s {
        "formula" => Ok(CombineVariant::Formula),
        "prose" => Ok(CombineVariant::Prose),
        _ => Err(format!("expected formula or prose, got {s:?}")),
    }
}

fn parse_topic_weight(s: &str) -> Result<TopicWeight, String> {
    match s {
        "square_of_mean" => Ok(TopicWeight::SquareOfMean),
        "mean_of_squares" => Ok(TopicWeight::MeanOfSquares),
        _ => Err(format!(
            "expected square_of_mean or mean_of_squares, got {s:?}"
        )),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the TF-IDF model and write its dump plus the corpus digest list
    Build {
        #[arg(long)]
        out: PathBuf,
    },
    /// List every text digest the sentence caches must hold
    Preflight {
        /// JSONL paragraphs ({"source_id","text",...})
        #[arg(long)]
        texts: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify JSONL paragraphs into JSONL results
    Classify {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to stdout
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write markup fragments per source document into this directory
        #[arg(long)]
        akn: Option<PathBuf>,
    },
    /// Score an annotated dataset at one threshold
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate strategies across thresholds
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        thresholds: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write markup fragments from classify output
    EmitAkn {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Config file contents; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sdg_defs_path: Option<PathBuf>,
    pub word_table_path: Option<PathBuf>,
    #[serde(default)]
    pub sentence_cache_paths: BTreeMap<EncoderTag, PathBuf>,
    pub strategy: Option<Strategy>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub combine_variant: Option<CombineVariant>,
    pub r_variant: Option<TopicWeight>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sdg_defs_path: Option<PathBuf>,
    pub word_table_path: Option<PathBuf>,
    pub sentence_cache_paths: BTreeMap<EncoderTag, PathBuf>,
    pub strategy: Strategy,
    pub threshold: f64,
    pub seed: u64,
    pub workers: usize,
    pub options: PipelineOptions,
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<Self, CliError> {
        let (file, base) = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
                let file: ConfigFile = serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
                (
                    file,
                    path.parent().map(Path::to_path_buf).unwrap_or_default(),
                )
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        let rel = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let mut caches: BTreeMap<EncoderTag, PathBuf> = file
            .sentence_cache_paths
            .into_iter()
            .map(|(k, v)| (k, rel(v)))
            .collect();
        if let Some(p) = &args.dan_cache {
            caches.insert(EncoderTag::Dan, p.clone());
        }
        if let Some(p) = &args.transformer_cache {
            caches.insert(EncoderTag::Transformer, p.clone());
        }

        let threshold = args
            .threshold
            .or(file.threshold)
            .unwrap_or(DEFAULT_THRESHOLD);
        if !threshold.is_finite() {
            return Err(CliError::Usage("threshold must be finite".into()));
        }
        let workers = args
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }

        Ok(RunConfig {
            sdg_defs_path: args.defs.clone().or(file.sdg_defs_path.map(rel)),
            word_table_path: args.word_table.clone().or(file.word_table_path.map(rel)),
            sentence_cache_paths: caches,
            strategy: args.strategy.or(file.strategy).unwrap_or(Strategy::CdmDan),
            threshold,
            seed: args.seed.or(file.seed).unwrap_or(0),
            workers,
            options: PipelineOptions {
                combine: args
                    .combine_variant
                    .or(file.combine_variant)
                    .unwrap_or_default(),
                topic_weight: args.r_variant.or(file.r_variant).unwrap_or_default(),
            },
        })
    }

    pub fn definitions(&self) -> Result<Vec<SdgDefinition>, CliError> {
        match &self.sdg_defs_path {
            Some(p) => SdgDefinition::load_all(p)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
            None => Ok(SdgDefinition::bundled()),
        }
    }

    /// Loads what `strategies` need: the word table unless only sentence
    /// baselines run, and each sentence cache they read.
    pub fn load_models(&self, strategies: &[Strategy]) -> Result<Models, CliError> {
        let defs = self.definitions()?;
        let needs_table = strategies
            .iter()
            .any(|s| s.uses_tfidf() || s.encoder().is_none());
        let table = match (&self.word_table_path, needs_table) {
            (Some(p), _) => EmbeddingTable::load(p)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
            (None, false) => EmbeddingTable::new(1),
            (None, true) => {
                return Err(CliError::Usage(
                    "a word table is required (--word-table)".into(),
                ))
            }
        };
        let encoders: BTreeSet<EncoderTag> =
            strategies.iter().filter_map(|s| s.encoder()).collect();
        let mut caches = Vec::new();
        for encoder in encoders {
            let path = self.sentence_cache_paths.get(&encoder).ok_or_else(|| {
                CliError::Usage(format!("no {encoder} sentence cache configured"))
            })?;
            caches.push(load_cache(path, encoder)?);
        }
        Ok(Models::new(&defs, table, caches)?)
    }
}

fn load_cache(path: &Path, encoder: EncoderTag) -> Result<SentenceCache, CliError> {
    let cache = SentenceCache::load(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if cache.encoder() != encoder {
        return Err(CliError::Data(format!(
            "{} holds {} vectors, expected {encoder}",
            path.display(),
            cache.encoder()
        )));
    }
    Ok(cache)
}

fn read_paragraphs(path: &Path) -> Result<Vec<AnnotatedParagraph>, CliError> {
    metrics::load_dataset(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_writer(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// Digest and canonical text of a required sentence-cache entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub digest: String,
    pub text: String,
}

/// Unique encoder inputs for the corpus plus `texts`, sorted by digest.
pub fn digest_manifest(encoder_texts: Vec<String>) -> Vec<ManifestEntry> {
    let unique: BTreeMap<String, String> = encoder_texts
        .into_iter()
        .map(|t| {
            let canonical = crate::embeddings::canonical_text(&t);
            (text_digest(&canonical), canonical)
        })
        .collect();
    unique
        .into_iter()
        .map(|(digest, text)| ManifestEntry { digest, text })
        .collect()
}

fn write_manifest(dir: &Path, stem: &str, entries: &[ManifestEntry]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut digests = String::new();
    let mut texts = String::new();
    for e in entries {
        digests.push_str(&e.digest);
        digests.push('\n');
        texts.push_str(&serde_json::to_string(e)?);
        texts.push('\n');
    }
    fs::write(dir.join(format!("{stem}digests.txt")), digests)?;
    fs::write(dir.join(format!("{stem}texts.jsonl")), texts)?;
    Ok(())
}

fn encoder_texts(
    defs: &[SdgDefinition],
    queries: &[AnnotatedParagraph],
) -> Result<Vec<String>, CliError> {
    let pp = crate::preprocess::Preprocessor::shared();
    let corpus = Corpus::build_with(defs, pp)?;
    Ok(corpus
        .texts()
        .chain(queries.iter().map(|q| q.text.as_str()))
        .map(|t| pp.encoder_text(t))
        .collect())
}

pub fn cmd_build(cfg: &RunConfig, out: &Path) -> Result<String, CliError> {
    let defs = cfg.definitions()?;
    let corpus = Corpus::build(&defs)?;
    let model = TfIdfModel::from_corpus(&corpus)?;
    fs::create_dir_all(out)?;
    let mut dump = serde_json::to_string(&model.dump())?;
    dump.push('\n');
    fs::write(out.join("model.json"), dump)?;
    let manifest = digest_manifest(encoder_texts(&defs, &[])?);
    write_manifest(out, "corpus_", &manifest)?;
    Ok(format!(
        "vocabulary {} terms, {} documents, {} corpus digests\n",
        model.vocabulary().len(),
        model.doc_vectors().len(),
        manifest.len()
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreflightOutcome {
    pub required: Vec<ManifestEntry>,
    /// Per encoder, digests absent from its cache.
    pub missing: BTreeMap<EncoderTag, Vec<String>>,
}

impl PreflightOutcome {
    pub fn missing_digests(&self) -> BTreeSet<&str> {
        self.missing
            .values()
            .flatten()
            .map(String::as_str)
            .collect()
    }
}

/// Checks configured caches (plus the strategy's encoder) for every required digest.
pub fn preflight(
    cfg: &RunConfig,
    paragraphs: &[AnnotatedParagraph],
) -> Result<PreflightOutcome, CliError> {
    let defs = cfg.definitions()?;
    let required = digest_manifest(encoder_texts(&defs, paragraphs)?);

    let mut encoders: BTreeSet<EncoderTag> = cfg.sentence_cache_paths.keys().copied().collect();
    encoders.extend(cfg.strategy.encoder());

    let mut missing = BTreeMap::new();
    for encoder in encoders {
        let cache = match cfg.sentence_cache_paths.get(&encoder) {
            Some(p) if p.exists() => Some(load_cache(p, encoder)?),
            _ => None,
        };
        let absent: Vec<String> = required
            .iter()
            .filter(|e| !cache.as_ref().is_some_and(|c| c.contains_digest(&e.digest)))
            .map(|e| e.digest.clone())
            .collect();
        missing.insert(encoder, absent);
    }
    Ok(PreflightOutcome { required, missing })
}

pub fn cmd_preflight(
    cfg: &RunConfig,
    texts: &Path,
    out: Option<&Path>,
) -> Result<String, CliError> {
    let paragraphs = read_paragraphs(texts)?;
    let outcome = preflight(cfg, &paragraphs)?;
    let missing = outcome.missing_digests();

    if let Some(dir) = out {
        write_manifest(dir, "", &outcome.required)?;
        let mut listing = String::new();
        for d in &missing {
            listing.push_str(d);
            listing.push('\n');
        }
        fs::write(dir.join("missing.txt"), listing)?;
    }

    let mut report = String::new();
    for (encoder, absent) in &outcome.missing {
        report.push_str(&format!(
            "{encoder}: {} of {} missing\n",
            absent.len(),
            outcome.required.len()
        ));
    }
    for d in &missing {
        report.push_str(&format!("missing {d}\n"));
    }
    report.push_str(&format!("{} missing\n", missing.len()));
    if missing.is_empty() {
        Ok(report)
    } else {
        print!("{report}");
        Err(CliError::CacheIncomplete(
            missing.into_iter().map(String::from).collect(),
        ))
    }
}

/// One line of `classify` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedParagraph {
    pub source_id: String,
    #[serde(rename = "eId")]
    pub e_id: String,
    pub labels: Vec<Label>,
    pub is_unrelated: bool,
}

impl ClassifiedParagraph {
    fn result(&self) -> ClassificationResult {
        ClassificationResult {
            labels: self.labels.clone(),
            is_unrelated: self.is_unrelated,
        }
    }
}

/// eIds from the input, else `para_<n>` numbered within each source document.
fn paragraph_eids(paragraphs: &[AnnotatedParagraph]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    paragraphs
        .iter()
        .map(|p| {
            let n = seen.entry(p.source_id.as_str()).or_insert(0);
            *n += 1;
            p.e_id.clone().unwrap_or_else(|| format!("para_{n}"))
        })
        .collect()
}

fn ensure_cached(
    cfg: &RunConfig,
    paragraphs: &[AnnotatedParagraph],
    strategies: &[Strategy],
) -> Result<(), CliError> {
    let encoders: BTreeSet<EncoderTag> = strategies.iter().filter_map(|s| s.encoder()).collect();
    for encoder in encoders {
        let single = RunConfig {
            sentence_cache_paths: cfg
                .sentence_cache_paths
                .get(&encoder)
                .map(|p| BTreeMap::from([(encoder, p.clone())]))
                .unwrap_or_default(),
            strategy: strategies
                .iter()
                .copied()
                .find(|s| s.encoder() == Some(encoder))
                .unwrap(),
            ..cfg.clone()
        };
        if !single.sentence_cache_paths.contains_key(&encoder) {
            return Err(CliError::Usage(format!(
                "no {encoder} sentence cache configured"
            )));
        }
        let outcome = preflight(&single, paragraphs)?;
        let missing = outcome.missing_digests();
        if !missing.is_empty() {
            return Err(CliError::CacheIncomplete(
                missing.into_iter().map(String::from).collect(),
            ));
        }
    }
    Ok(())
}

pub fn classify_paragraphs(
    cfg: &RunConfig,
    paragraphs: &[AnnotatedParagraph],
) -> Result<Vec<ClassifiedParagraph>, CliError> {
    ensure_cached(cfg, paragraphs, &[cfg.strategy])?;
    let models = cfg.load_models(&[cfg.strategy])?;
    let scores =
        metrics::score_dataset(&models, paragraphs, cfg.strategy, cfg.options, cfg.workers)?;
    Ok(paragraphs
        .iter()
        .zip(paragraph_eids(paragraphs))
        .zip(scores)
        .map(|((p, e_id), b)| {
            let r = crate::classifier::threshold_rank(&b, cfg.threshold);
            ClassifiedParagraph {
                source_id: p.source_id.clone(),
                e_id,
                labels: r.labels,
                is_unrelated: r.is_unrelated,
            }
        })
        .collect())
}

pub fn cmd_classify(
    cfg: &RunConfig,
    input: &Path,
    output: Option<&Path>,
    akn: Option<&Path>,
) -> Result<(), CliError> {
    let paragraphs = read_paragraphs(input)?;
    let records = classify_paragraphs(cfg, &paragraphs)?;
    let mut w = create_writer(output)?;
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    if let Some(dir) = akn {
        write_akn(&records, dir)?;
    }
    Ok(())
}

fn file_stem(source_id: &str) -> String {
    source_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// One `<source>.akn.xml` per source document, fragments concatenated.
pub fn write_akn(records: &[ClassifiedParagraph], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut by_source: BTreeMap<&str, Vec<&ClassifiedParagraph>> = BTreeMap::new();
    for r in records {
        by_source.entry(r.source_id.as_str()).or_default().push(r);
    }
    let mut written = Vec::new();
    for (source, rows) in by_source {
        let results: Vec<(String, ClassificationResult)> =
            rows.iter().map(|r| (r.e_id.clone(), r.result())).collect();
        let ann = AknAnnotation::from_results(
            aknxml::DEFAULT_SOURCE,
            results.iter().map(|(e, r)| (e.as_str(), r)),
        );
        let xml = aknxml::emit_all(&ann).map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        let path = dir.join(format!("{}.akn.xml", file_stem(source)));
        fs::write(&path, xml)?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_emit_akn(input: &Path, out: &Path) -> Result<String, CliError> {
    let reader = BufReader::new(fs::File::open(input)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ClassifiedParagraph = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", input.display(), i + 1)))?;
        records.push(rec);
    }
    let written = write_akn(&records, out)?;
    Ok(format!("wrote {} file(s)\n", written.len()))
}

pub fn cmd_evaluate(cfg: &RunConfig, dataset: &Path) -> Result<EvalReport, CliError> {
    let paragraphs = read_paragraphs(dataset)?;
    ensure_cached(cfg, &paragraphs, &[cfg.strategy])?;
    let models = cfg.load_models(&[cfg.strategy])?;
    Ok(metrics::evaluate(
        &models,
        &paragraphs,
        cfg.strategy,
        cfg.threshold,
        cfg.options,
        cfg.seed,
        cfg.workers,
    )?)
}

pub const DEFAULT_SWEEP_THRESHOLDS: [f64; 11] =
    [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

const SWEEP_METRICS: [&str; 4] = ["lrap", "weighted_f1", "br_accuracy", "br_weighted_f1"];

fn metric_value(report: &EvalReport, metric: &str) -> String {
    let v = match metric {
        "lrap" => report.lrap,
        "weighted_f1" => Some(report.weighted_f1),
        "br_accuracy" => Some(report.br_accuracy),
        "br_weighted_f1" => Some(report.br_weighted_f1),
        _ => unreachable!(),
    };
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Full strategy x threshold cross product, sorted by (strategy name, threshold).
pub fn sweep(
    cfg: &RunConfig,
    paragraphs: &[AnnotatedParagraph],
    thresholds: &[f64],
    strategies: &[Strategy],
) -> Result<Vec<EvalReport>, CliError> {
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(CliError::Usage("thresholds must be finite".into()));
    }
    let mut strategies: Vec<Strategy> = strategies.to_vec();
    strategies.sort_by_key(|s| s.name());
    strategies.dedup();
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    ensure_cached(cfg, paragraphs, &strategies)?;
    let models = cfg.load_models(&strategies)?;
    let mut reports = Vec::new();
    for &strategy in &strategies {
        let scores =
            metrics::score_dataset(&models, paragraphs, strategy, cfg.options, cfg.workers)?;
        for &t in &thresholds {
            reports.push(metrics::report_from_scores(
                paragraphs, &scores, strategy, t, cfg.seed,
            )?);
        }
    }
    Ok(reports)
}

pub fn sweep_csv(reports: &[EvalReport]) -> String {
    let mut csv = String::from(
        "strategy,threshold,lrap,weighted_f1,br_accuracy,br_weighted_f1,predicted_labels\n",
    );
    for r in reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.strategy,
            r.threshold,
            metric_value(r, "lrap"),
            r.weighted_f1,
            r.br_accuracy,
            r.br_weighted_f1,
            r.predicted_labels
        ));
    }
    csv
}

/// Threshold rows with one column per strategy, for a single metric.
pub fn plot_table(reports: &[EvalReport], metric: &str) -> String {
    let strategies: BTreeSet<&str> = reports.iter().map(|r| r.strategy.name()).collect();
    let mut thresholds: Vec<f64> = reports.iter().map(|r| r.threshold).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut out = String::from("threshold");
    for s in &strategies {
        out.push('\t');
        out.push_str(s);
    }
    out.push('\n');
    for t in thresholds {
        out.push_str(&t.to_string());
        for s in &strategies {
            out.push('\t');
            if let Some(r) = reports
                .iter()
                .find(|r| r.threshold == t && r.strategy.name() == *s)
            {
                out.push_str(&metric_value(r, metric));
            }
        }
        out.push('\n');
    }
    out
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    dataset: &Path,
    thresholds: &[f64],
    strategies: &[Strategy],
    out: &Path,
) -> Result<String, CliError> {
    let paragraphs = read_paragraphs(dataset)?;
    let reports = sweep(cfg, &paragraphs, thresholds, strategies)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep.csv"), sweep_csv(&reports))?;
    for metric in SWEEP_METRICS {
        fs::write(
            out.join(format!("plot_{metric}.tsv")),
            plot_table(&reports, metric),
        )?;
    }
    Ok(format!("{} rows\n", reports.len()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.global)?;
    match cli.command {
        Command::Build { out } => print!("{}", cmd_build(&cfg, &out)?),
        Command::Preflight { texts, out } => {
            print!("{}", cmd_preflight(&cfg, &texts, out.as_deref())?)
        }
        Command::Classify { input, output, akn } => {
            cmd_classify(&cfg, &input, output.as_deref(), akn.as_deref())?
        }
        Command::Evaluate { dataset, output } => {
            let report = cmd_evaluate(&cfg, &dataset)?;
            let mut w = create_writer(output.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Command::Sweep {
            dataset,
            thresholds,
            strategies,
            out,
        } => {
            let thresholds = thresholds.unwrap_or_else(|| DEFAULT_SWEEP_THRESHOLDS.to_vec());
            let strategies = strategies.unwrap_or_else(|| Strategy::ALL.to_vec());
            print!(
                "{}",
                cmd_sweep(&cfg, &dataset, &thresholds, &strategies, &out)?
            );
        }
        Command::EmitAkn { input, out } => print!("{}", cmd_emit_akn(&input, &out)?),
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::CacheIncomplete(digests) = &e {
                for d in digests {
                    eprintln!("  {d}");
                }
            }
            e.exit_code()
        }
    }
}
