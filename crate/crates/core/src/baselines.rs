//! Document-level reimplementations of the comparison methods: exact
//! paragraph matching against a Bloom filter (Dolma/CCNet style) and
//! n-gram-overlap thresholding (Dolma-ngram/DCLM style).
//!
//! Both share the same membership state, which is either a Bloom filter or,
//! with `target_p` set to the 0.0 sentinel, an exact hash set (the CCNet
//! fidelity level: no false positives).

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloom::BloomFilter;
use crate::shingle::{fingerprint64, normalize, split_paragraphs, Document};
use crate::{Error, Result};

/// How the duplicated-paragraph fraction of a document is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParagraphWeighting {
    /// Fraction of document characters that belong to duplicated paragraphs.
    Chars,
    /// Plain fraction of duplicated paragraphs.
    Count,
}

/// Configuration shared by the baseline deduplicators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapConfig {
    /// Overlap tolerance T in [0, 1]; a document is a duplicate when its
    /// duplicated fraction reaches T.
    pub threshold: f64,
    /// n-gram width for the n-gram method.
    pub ngram_n: usize,
    /// Expected item count (paragraphs or n-grams) for filter sizing.
    pub expected_items: u64,
    /// Per-filter false-positive rate; 0.0 switches to an exact hash set.
    pub target_p: f64,
    pub weighting: ParagraphWeighting,
}

impl OverlapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!(
                "overlap threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if self.ngram_n == 0 {
            return Err(Error::InvalidParameter("ngram_n must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            ngram_n: 5,
            expected_items: 1_000_000,
            target_p: 1e-5,
            weighting: ParagraphWeighting::Chars,
        }
    }
}

/// Membership state for the baselines: approximate (Bloom) or exact (set).
#[derive(Debug, Clone)]
pub enum MembershipState {
    Bloom(BloomFilter),
    Exact(HashSet<u64>),
}

impl MembershipState {
    pub fn for_config(config: &OverlapConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.target_p == 0.0 {
            Ok(Self::Exact(HashSet::new()))
        } else {
            Ok(Self::Bloom(BloomFilter::new(
                config.expected_items,
                config.target_p,
                seed,
            )?))
        }
    }

    pub fn contains(&self, x: u64) -> bool {
        match self {
            Self::Bloom(f) => f.contains(x),
            Self::Exact(s) => s.contains(&x),
        }
    }

    pub fn insert(&mut self, x: u64) {
        match self {
            Self::Bloom(f) => f.insert(x),
            Self::Exact(s) => {
                s.insert(x);
            }
        }
    }

    pub fn approx_bytes(&self) -> u64 {
        match self {
            Self::Bloom(f) => f.encoded_len() as u64,
            Self::Exact(s) => s.len() as u64 * 16,
        }
    }
}

/// Outcome of one baseline decision: the verdict plus the fraction that
/// drove it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapDecision {
    pub duplicate: bool,
    pub duplicated_fraction: f64,
}

/// Dolma-style document duplicate detection: fingerprint each normalized
/// paragraph, measure the duplicated fraction, then record all paragraphs.
pub fn paragraph_dedup(
    doc: &Document,
    config: &OverlapConfig,
    state: &mut MembershipState,
) -> Result<OverlapDecision> {
    config.validate()?;
    let paragraphs: Vec<(u64, usize)> = split_paragraphs(&doc.text)
        .into_iter()
        .filter_map(|p| {
            let norm = normalize(p);
            if norm.is_empty() {
                None
            } else {
                let weight = norm.chars().count();
                Some((fingerprint64(norm.as_bytes()), weight))
            }
        })
        .collect();
    if paragraphs.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let (mut dup_weight, mut total_weight) = (0u64, 0u64);
    for &(fp, chars) in &paragraphs {
        let w = match config.weighting {
            ParagraphWeighting::Chars => chars as u64,
            ParagraphWeighting::Count => 1,
        };
        total_weight += w;
        if state.contains(fp) {
            dup_weight += w;
        }
    }
    let fraction = dup_weight as f64 / total_weight as f64;
    for &(fp, _) in &paragraphs {
        state.insert(fp);
    }
    Ok(OverlapDecision {
        duplicate: fraction >= config.threshold,
        duplicated_fraction: fraction,
    })
}

/// Word n-gram multiset of normalized text. Shorter texts than n produce a
/// single whole-text n-gram, mirroring the shingler.
fn ngram_fingerprints(text: &str, n: usize) -> Vec<u64> {
    let normalized = normalize(text);
    if normalized.is_empty() {
        return Vec::new();
    }
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    let join_fp = |window: &[&str]| {
        let joined = window.join("\u{1f}");
        fingerprint64(joined.as_bytes())
    };
    if tokens.len() < n {
        vec![join_fp(&tokens)]
    } else {
        tokens.windows(n).map(join_fp).collect()
    }
}

/// DCLM-style document duplicate detection: the fraction of the document's
/// n-gram occurrences already present in the filter, thresholded at T.
pub fn ngram_dedup(
    doc: &Document,
    config: &OverlapConfig,
    state: &mut MembershipState,
) -> Result<OverlapDecision> {
    config.validate()?;
    let ngrams = ngram_fingerprints(&doc.text, config.ngram_n);
    if ngrams.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let duplicated = ngrams.iter().filter(|&&fp| state.contains(fp)).count();
    let fraction = duplicated as f64 / ngrams.len() as f64;
    for &fp in &ngrams {
        state.insert(fp);
    }
    Ok(OverlapDecision {
        duplicate: fraction >= config.threshold,
        duplicated_fraction: fraction,
    })
}

/// Estimates the total n-gram count of a corpus from a uniform random
/// sample: mean per-document count times `total_docs`, rounded up.
pub fn estimate_corpus_ngrams(
    corpus: &[Document],
    n: usize,
    sample_size: usize,
    total_docs: u64,
    seed: u64,
) -> Result<u64> {
    if corpus.is_empty() {
        return Err(Error::InvalidParameter("empty corpus".into()));
    }
    if sample_size == 0 {
        return Err(Error::InvalidParameter("sample_size must be >= 1".into()));
    }
    let take = sample_size.min(corpus.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, corpus.len(), take);
    let total: u64 = picks
        .iter()
        .map(|i| ngram_fingerprints(&corpus[i].text, n).len() as u64)
        .sum();
    let mean = total as f64 / take as f64;
    Ok((mean * total_docs as f64).ceil() as u64)
}
