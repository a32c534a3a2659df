//! Streaming deduplication over line-delimited JSON corpora, benchmark
//! corpus synthesis, and F1 evaluation.
//!
//! Stream semantics are first-seen-wins: documents are committed in input
//! order, so the earliest occurrence of any content is always unique.
//! Signature and fingerprint computation fans out across a worker pool in
//! batches; the commit stage is serial in input order, which keeps verdicts
//! independent of the worker count.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    ngram_dedup, paragraph_dedup, MembershipState, OverlapConfig, ParagraphWeighting,
};
use crate::index::LshBloomIndex;
use crate::lsh::{ClassicLshIndex, LshParams};
use crate::minhash::{counter_hash, minhash_signature, MinHashSignature, UniversalHashFamily};
use crate::shingle::{shingle, Document, ShingleUnit};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Unique,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Lshbloom,
    ClassicLsh,
    Paragraph,
    Ngram,
}

/// Per-document verdict, joinable back to the corpus by id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DedupDecision {
    pub doc_id: String,
    pub verdict: Verdict,
    pub method: MethodKind,
    /// Colliding band indices for LSH methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<Vec<usize>>,
    /// Duplicated fraction for the overlap baselines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duplicated_fraction: Option<f64>,
}

impl DedupDecision {
    pub fn is_duplicate(&self) -> bool {
        self.verdict == Verdict::Duplicate
    }
}

/// Everything needed to build a dedup engine for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: MethodKind,
    pub threshold: f64,
    pub num_perm: usize,
    pub ngram_n: usize,
    /// Effective false-positive rate for LSHBloom; per-filter rate for the
    /// baselines (0.0 selects the exact-set baseline state).
    pub fp_rate: f64,
    /// Capacity: expected documents (LSH methods) or expected items
    /// (paragraphs / n-grams) for filter sizing.
    pub expected_docs: u64,
    pub seed: u64,
    pub shingle_n: usize,
    pub shingle_unit: ShingleUnit,
    pub weighting: ParagraphWeighting,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            method: MethodKind::Lshbloom,
            threshold: 0.8,
            num_perm: 128,
            ngram_n: 5,
            fp_rate: 1e-5,
            expected_docs: 1_000_000,
            seed: 42,
            shingle_n: 3,
            shingle_unit: ShingleUnit::Word,
            weighting: ParagraphWeighting::Chars,
        }
    }
}

impl MethodConfig {
    pub fn lsh_params(&self) -> Result<LshParams> {
        LshParams::optimal(
            self.threshold,
            self.num_perm,
            self.seed,
            counter_hash(self.seed, 0x62616e64), // band-hash seed stream
        )
    }

    fn overlap_config(&self) -> OverlapConfig {
        OverlapConfig {
            threshold: self.threshold,
            ngram_n: self.ngram_n,
            expected_items: self.expected_docs,
            target_p: self.fp_rate,
            weighting: self.weighting,
        }
    }
}

/// Per-document work that can run on any worker before the ordered commit.
pub enum Prepared {
    Signature(MinHashSignature),
    Raw(Document),
}

/// One deduplication method plus its mutable state.
pub enum DedupEngine {
    LshBloom {
        family: UniversalHashFamily,
        index: LshBloomIndex,
        shingle_n: usize,
        shingle_unit: ShingleUnit,
    },
    ClassicLsh {
        family: UniversalHashFamily,
        index: ClassicLshIndex,
        shingle_n: usize,
        shingle_unit: ShingleUnit,
    },
    Paragraph {
        config: OverlapConfig,
        state: MembershipState,
    },
    Ngram {
        config: OverlapConfig,
        state: MembershipState,
    },
}

impl DedupEngine {
    pub fn new(config: &MethodConfig) -> Result<Self> {
        match config.method {
            MethodKind::Lshbloom => {
                let params = config.lsh_params()?;
                Ok(Self::LshBloom {
                    family: UniversalHashFamily::new(params.signature_seed, params.num_perm)?,
                    index: LshBloomIndex::new(params, config.expected_docs, config.fp_rate)?,
                    shingle_n: config.shingle_n,
                    shingle_unit: config.shingle_unit,
                })
            }
            MethodKind::ClassicLsh => {
                let params = config.lsh_params()?;
                Ok(Self::ClassicLsh {
                    family: UniversalHashFamily::new(params.signature_seed, params.num_perm)?,
                    index: ClassicLshIndex::new(params)?,
                    shingle_n: config.shingle_n,
                    shingle_unit: config.shingle_unit,
                })
            }
            MethodKind::Paragraph => {
                let cfg = config.overlap_config();
                Ok(Self::Paragraph {
                    state: MembershipState::for_config(&cfg, config.seed)?,
                    config: cfg,
                })
            }
            MethodKind::Ngram => {
                let cfg = config.overlap_config();
                Ok(Self::Ngram {
                    state: MembershipState::for_config(&cfg, config.seed)?,
                    config: cfg,
                })
            }
        }
    }

    /// Wraps an existing on-disk LSHBloom index for continued streaming.
    pub fn from_lshbloom_index(
        index: LshBloomIndex,
        shingle_n: usize,
        shingle_unit: ShingleUnit,
    ) -> Result<Self> {
        let params = *index.params();
        Ok(Self::LshBloom {
            family: UniversalHashFamily::new(params.signature_seed, params.num_perm)?,
            index,
            shingle_n,
            shingle_unit,
        })
    }

    pub fn method_kind(&self) -> MethodKind {
        match self {
            Self::LshBloom { .. } => MethodKind::Lshbloom,
            Self::ClassicLsh { .. } => MethodKind::ClassicLsh,
            Self::Paragraph { .. } => MethodKind::Paragraph,
            Self::Ngram { .. } => MethodKind::Ngram,
        }
    }

    /// Pure per-document stage, safe to run on any worker.
    pub fn prepare(&self, doc: &Document) -> Result<Prepared> {
        match self {
            Self::LshBloom {
                family,
                shingle_n,
                shingle_unit,
                ..
            }
            | Self::ClassicLsh {
                family,
                shingle_n,
                shingle_unit,
                ..
            } => {
                let shingles = shingle(&doc.text, *shingle_n, *shingle_unit)?;
                Ok(Prepared::Signature(minhash_signature(&shingles, family)?))
            }
            _ => Ok(Prepared::Raw(doc.clone())),
        }
    }

    /// Ordered commit stage: query-then-insert against the method state.
    pub fn commit(&mut self, id: &str, prepared: &Prepared) -> Result<DedupDecision> {
        let method = self.method_kind();
        match (self, prepared) {
            (Self::LshBloom { index, .. }, Prepared::Signature(sig)) => {
                let outcome = index.query_then_insert(sig)?;
                Ok(DedupDecision {
                    doc_id: id.to_string(),
                    verdict: if outcome.duplicate {
                        Verdict::Duplicate
                    } else {
                        Verdict::Unique
                    },
                    method,
                    bands: Some(outcome.colliding_bands),
                    duplicated_fraction: None,
                })
            }
            (Self::ClassicLsh { index, .. }, Prepared::Signature(sig)) => {
                let duplicate = index.is_duplicate(sig)?;
                index.insert(id, sig)?;
                Ok(DedupDecision {
                    doc_id: id.to_string(),
                    verdict: if duplicate {
                        Verdict::Duplicate
                    } else {
                        Verdict::Unique
                    },
                    method,
                    bands: None,
                    duplicated_fraction: None,
                })
            }
            (Self::Paragraph { config, state }, Prepared::Raw(doc)) => {
                let d = paragraph_dedup(doc, config, state)?;
                Ok(DedupDecision {
                    doc_id: id.to_string(),
                    verdict: if d.duplicate {
                        Verdict::Duplicate
                    } else {
                        Verdict::Unique
                    },
                    method,
                    bands: None,
                    duplicated_fraction: Some(d.duplicated_fraction),
                })
            }
            (Self::Ngram { config, state }, Prepared::Raw(doc)) => {
                let d = ngram_dedup(doc, config, state)?;
                Ok(DedupDecision {
                    doc_id: id.to_string(),
                    verdict: if d.duplicate {
                        Verdict::Duplicate
                    } else {
                        Verdict::Unique
                    },
                    method,
                    bands: None,
                    duplicated_fraction: Some(d.duplicated_fraction),
                })
            }
            _ => Err(Error::ConfigMismatch(
                "prepared stage does not match engine".into(),
            )),
        }
    }

    /// Current index footprint in bytes: exact encoded size for LSHBloom,
    /// estimated heap size for the classic index, state size for baselines.
    pub fn index_bytes(&self) -> u64 {
        match self {
            Self::LshBloom { index, .. } => index.encoded_len() as u64,
            Self::ClassicLsh { index, .. } => index.approx_memory_bytes(),
            Self::Paragraph { state, .. } | Self::Ngram { state, .. } => state.approx_bytes(),
        }
    }

    pub fn lshbloom_index(&self) -> Option<&LshBloomIndex> {
        match self {
            Self::LshBloom { index, .. } => Some(index),
            _ => None,
        }
    }
}

/// Parses one line-delimited record with remappable field names.
pub fn parse_record(line: &str, id_field: &str, text_field: &str) -> Result<Document> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| Error::MalformedRecord(e.to_string()))?;
    let id = value
        .get(id_field)
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::MalformedRecord(format!("missing string field \"{id_field}\"")))?;
    if id.is_empty() {
        return Err(Error::MalformedRecord("empty document id".into()));
    }
    let text = value
        .get(text_field)
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::MalformedRecord(format!("missing string field \"{text_field}\"")))?;
    Ok(Document::new(id, text))
}

/// Either a verdict or a per-line error; the stream keeps going on errors.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum StreamItem {
    Decision(DedupDecision),
    LineError { line: usize, error: String },
}

/// Resource accounting for one stream run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StreamStats {
    pub docs: u64,
    pub duplicates: u64,
    pub errors: u64,
    pub wall_seconds: f64,
    /// Time in the parallel shingle/signature stage.
    pub signature_seconds: f64,
    /// Time in the serial query/insert commit stage.
    pub index_seconds: f64,
    pub index_bytes: u64,
}

const STREAM_BATCH: usize = 2048;

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "LSHBLOOM_WORKERS";

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

/// Runs the engine over lines of records in input order, feeding every
/// decision (or per-line error) to `sink`. `workers = 0` uses rayon's
/// default parallelism.
pub fn dedup_stream<I>(
    lines: I,
    engine: &mut DedupEngine,
    id_field: &str,
    text_field: &str,
    workers: usize,
    mut sink: impl FnMut(&StreamItem) -> Result<()>,
) -> Result<StreamStats>
where
    I: Iterator<Item = std::io::Result<String>>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut stats = StreamStats::default();
    let run_start = Instant::now();
    let mut line_no = 0usize;
    let mut batch: Vec<(usize, String)> = Vec::with_capacity(STREAM_BATCH);
    let mut lines = lines.peekable();

    while lines.peek().is_some() {
        batch.clear();
        for line in lines.by_ref() {
            line_no += 1;
            batch.push((line_no, line?));
            if batch.len() >= STREAM_BATCH {
                break;
            }
        }

        let prep_start = Instant::now();
        let prepared: Vec<(usize, Result<(Document, Prepared)>)> = pool.install(|| {
            batch
                .par_iter()
                .map(|(no, line)| {
                    let res = parse_record(line, id_field, text_field)
                        .and_then(|doc| engine.prepare(&doc).map(|p| (doc, p)));
                    (*no, res)
                })
                .collect()
        });
        stats.signature_seconds += prep_start.elapsed().as_secs_f64();

        let commit_start = Instant::now();
        for (no, res) in prepared {
            let item = match res.and_then(|(doc, p)| engine.commit(&doc.id, &p)) {
                Ok(decision) => {
                    stats.docs += 1;
                    if decision.is_duplicate() {
                        stats.duplicates += 1;
                    }
                    StreamItem::Decision(decision)
                }
                Err(e) => {
                    stats.errors += 1;
                    StreamItem::LineError {
                        line: no,
                        error: e.to_string(),
                    }
                }
            };
            sink(&item)?;
        }
        stats.index_seconds += commit_start.elapsed().as_secs_f64();
    }

    stats.wall_seconds = run_start.elapsed().as_secs_f64();
    stats.index_bytes = engine.index_bytes();
    Ok(stats)
}

/// Ground-truth label for one document of a synthesized benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "lowercase")]
pub enum Label {
    Original,
    Duplicate { duplicate_of: String },
}

/// Benchmark corpus with ground-truth duplicate labels.
#[derive(Debug, Clone)]
pub struct LabeledCorpus {
    pub documents: Vec<Document>,
    pub labels: HashMap<String, Label>,
}

/// Drops each whitespace-delimited token independently with probability
/// `rate`, preserving the surrounding whitespace of kept tokens. A rate of
/// zero reproduces the input byte for byte.
fn drop_tokens(text: &str, rate: f64, rng: &mut impl Rng) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    // leading whitespace survives untouched
    let token_start = rest.find(|c: char| !c.is_whitespace()).unwrap_or(rest.len());
    out.push_str(&rest[..token_start]);
    rest = &rest[token_start..];
    while !rest.is_empty() {
        let token_end = rest
            .find(|c: char| c.is_whitespace())
            .unwrap_or(rest.len());
        let sep_end = rest[token_end..]
            .find(|c: char| !c.is_whitespace())
            .map(|i| token_end + i)
            .unwrap_or(rest.len());
        if !(rate > 0.0 && rng.gen::<f64>() < rate) {
            out.push_str(&rest[..sep_end]);
        }
        rest = &rest[sep_end..];
    }
    out
}

/// Builds a labeled benchmark: clones `n_duplicates` uniformly chosen base
/// documents, perturbs each clone by token dropout, and shuffles the
/// combined corpus deterministically by seed.
pub fn synthesize_benchmark(
    base: &[Document],
    n_duplicates: usize,
    dropout: f64,
    seed: u64,
) -> Result<LabeledCorpus> {
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::InvalidParameter(format!(
            "dropout rate {dropout} outside [0, 1)"
        )));
    }
    if n_duplicates > base.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot plant {n_duplicates} duplicates in a base corpus of {}",
            base.len()
        )));
    }
    let mut labels: HashMap<String, Label> = base
        .iter()
        .map(|d| (d.id.clone(), Label::Original))
        .collect();
    if labels.len() != base.len() {
        return Err(Error::InvalidParameter(
            "base corpus contains repeated document ids".into(),
        ));
    }
    let mut documents = base.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(counter_hash(seed, 0));
    let picks = sample(&mut rng, base.len().max(1), n_duplicates.min(base.len()));
    for (k, i) in picks.iter().enumerate() {
        let original = &base[i];
        let mut clone_rng = ChaCha8Rng::seed_from_u64(counter_hash(seed, 1 + k as u64));
        let text = drop_tokens(&original.text, dropout, &mut clone_rng);
        let id = format!("{}__dup{k}", original.id);
        labels.insert(
            id.clone(),
            Label::Duplicate {
                duplicate_of: original.id.clone(),
            },
        );
        documents.push(Document::new(id, text));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(counter_hash(seed, u64::MAX));
    documents.shuffle(&mut shuffle_rng);
    Ok(LabeledCorpus { documents, labels })
}

/// Deterministic random corpus of dissimilar documents, used by `bench`
/// and the test suites.
pub fn random_corpus(n_docs: usize, tokens_per_doc: usize, vocab: usize, seed: u64) -> Vec<Document> {
    (0..n_docs)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(counter_hash(seed, i as u64));
            let text = (0..tokens_per_doc)
                .map(|_| format!("w{}", rng.gen_range(0..vocab)))
                .collect::<Vec<_>>()
                .join(" ");
            Document::new(format!("d{i:08}"), text)
        })
        .collect()
}

/// Confusion counts and F1 = TP / (TP + (FP + FN)/2).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub f1: f64,
    pub wall_clock_seconds: f64,
    pub index_bytes: u64,
}

pub fn f1_score(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = tp as f64 + 0.5 * (fp + fn_) as f64;
    if denom > 0.0 {
        tp as f64 / denom
    } else {
        0.0
    }
}

/// Scores decisions against ground truth. Every decision id must be
/// labeled; "duplicate" is the positive class.
pub fn evaluate<'a>(
    decisions: impl IntoIterator<Item = &'a DedupDecision>,
    labels: &HashMap<String, Label>,
) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for decision in decisions {
        let label = labels
            .get(&decision.doc_id)
            .ok_or_else(|| Error::UnlabeledId(decision.doc_id.clone()))?;
        let truly_duplicate = matches!(label, Label::Duplicate { .. });
        match (truly_duplicate, decision.is_duplicate()) {
            (true, true) => report.tp += 1,
            (false, true) => report.fp += 1,
            (true, false) => report.fn_ += 1,
            (false, false) => report.tn += 1,
        }
    }
    report.f1 = f1_score(report.tp, report.fp, report.fn_);
    Ok(report)
}
