//! Text normalization, paragraph splitting, and n-gram shingling.
//!
//! Every deduplication method in this crate sees text through this module,
//! so the normalization and fingerprint here define what "the same text"
//! means everywhere else.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

/// One unit of deduplication: an opaque id plus the raw text payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// Tokenization unit for shingling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShingleUnit {
    Word,
    Char,
}

/// A document reduced to a set of 64-bit n-gram fingerprints.
#[derive(Debug, Clone)]
pub struct ShingleSet {
    elements: HashSet<u64>,
    n: usize,
    unit: ShingleUnit,
}

impl ShingleSet {
    pub fn elements(&self) -> &HashSet<u64> {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn unit(&self) -> ShingleUnit {
        self.unit
    }

    /// Builds a set directly from precomputed fingerprints. Used by tests
    /// that need pairs with an exactly known Jaccard similarity.
    pub fn from_fingerprints(
        elements: impl IntoIterator<Item = u64>,
        n: usize,
        unit: ShingleUnit,
    ) -> Self {
        Self {
            elements: elements.into_iter().collect(),
            n,
            unit,
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over a byte slice. Stable across platforms; the basis of every
/// fingerprint in this crate.
pub fn fingerprint64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Fingerprints an n-gram given as a token slice. Tokens are joined by a
/// 0x1F separator byte before hashing so that ("ab","c") and ("a","bc")
/// yield different fingerprints.
fn fingerprint_ngram(tokens: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in tok.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

fn normalize_pass(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.nfc().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() {
            // non-whitespace control characters are dropped outright
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    // re-normalize: removing characters can bring combining marks next to
    // their base, and lowercasing can denormalize composed sequences
    out.nfc().collect()
}

/// NFC-normalizes, lowercases, strips control characters, and collapses
/// whitespace runs to single spaces. Idempotent.
pub fn normalize(text: &str) -> String {
    let mut cur = normalize_pass(text);
    loop {
        let next = normalize_pass(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Splits on newlines, dropping empty and whitespace-only segments.
pub fn split_paragraphs(text: &str) -> Vec<&str> {
    text.split('\n')
        .filter(|seg| !seg.trim().is_empty())
        .collect()
}

/// Shingles normalized text into a set of n-gram fingerprints. Texts with
/// fewer than `n` tokens produce one shingle over all tokens rather than
/// erroring; real corpora contain stubs.
pub fn shingle(text: &str, n: usize, unit: ShingleUnit) -> Result<ShingleSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("shingle width n must be >= 1".into()));
    }
    let normalized = normalize(text);
    if normalized.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut elements = HashSet::new();
    match unit {
        ShingleUnit::Word => {
            let tokens: Vec<&str> = normalized.split_whitespace().collect();
            if tokens.len() < n {
                elements.insert(fingerprint_ngram(&tokens));
            } else {
                for window in tokens.windows(n) {
                    elements.insert(fingerprint_ngram(window));
                }
            }
        }
        ShingleUnit::Char => {
            let chars: Vec<char> = normalized.chars().collect();
            let mut buf = String::new();
            if chars.len() < n {
                elements.insert(fingerprint64(normalized.as_bytes()));
            } else {
                for window in chars.windows(n) {
                    buf.clear();
                    buf.extend(window.iter());
                    elements.insert(fingerprint64(buf.as_bytes()));
                }
            }
        }
    }
    Ok(ShingleSet { elements, n, unit })
}

/// |A ∩ B| / |A ∪ B| over shingle fingerprints.
pub fn exact_jaccard(a: &ShingleSet, b: &ShingleSet) -> Result<f64> {
    if a.n != b.n || a.unit != b.unit {
        return Err(Error::ConfigMismatch(format!(
            "shingle configs differ: ({}, {:?}) vs ({}, {:?})",
            a.n, a.unit, b.n, b.unit
        )));
    }
    if a.elements.is_empty() && b.elements.is_empty() {
        return Ok(1.0);
    }
    let inter = a.elements.intersection(&b.elements).count();
    let union = a.elements.len() + b.elements.len() - inter;
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("Foo\t\tBar"), "foo bar");
        assert_eq!(normalize("foo bar"), "foo bar");
        assert_eq!(normalize("  A \n B \u{0007} C  "), "a b c");
    }

    #[test]
    fn split_paragraph_examples() {
        assert_eq!(split_paragraphs("a\nb"), vec!["a", "b"]);
        assert_eq!(split_paragraphs("a\n\n\nb\n"), vec!["a", "b"]);
        assert_eq!(split_paragraphs("abc"), vec!["abc"]);
        assert!(split_paragraphs("\n \n").is_empty());
    }

    #[test]
    fn shingle_counts() {
        let s = shingle("a b c", 2, ShingleUnit::Word).unwrap();
        assert_eq!(s.len(), 2);
        let s = shingle("a a a a", 2, ShingleUnit::Word).unwrap();
        assert_eq!(s.len(), 1);
        let s = shingle("a b c d e", 5, ShingleUnit::Word).unwrap();
        assert_eq!(s.len(), 1);
        // fewer tokens than n: single whole-text shingle
        let s = shingle("a b", 5, ShingleUnit::Word).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn shingle_empty_errors() {
        assert!(matches!(
            shingle("   \t\n ", 3, ShingleUnit::Word),
            Err(Error::EmptyDocument)
        ));
        assert!(matches!(
            shingle("a b", 0, ShingleUnit::Word),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn token_boundaries_matter() {
        let a = shingle("ab c", 2, ShingleUnit::Word).unwrap();
        let b = shingle("a bc", 2, ShingleUnit::Word).unwrap();
        assert_eq!(exact_jaccard(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn jaccard_examples() {
        let s = shingle("x y z w", 2, ShingleUnit::Word).unwrap();
        assert_eq!(exact_jaccard(&s, &s).unwrap(), 1.0);

        let a = ShingleSet::from_fingerprints([1, 2, 3, 4], 3, ShingleUnit::Word);
        let b = ShingleSet::from_fingerprints([3, 4, 5, 6], 3, ShingleUnit::Word);
        let j = exact_jaccard(&a, &b).unwrap();
        assert!((j - 2.0 / 6.0).abs() < 1e-12);

        let c = ShingleSet::from_fingerprints([7, 8], 3, ShingleUnit::Word);
        let d = ShingleSet::from_fingerprints([9, 10], 3, ShingleUnit::Word);
        assert_eq!(exact_jaccard(&c, &d).unwrap(), 0.0);
    }

    #[test]
    fn jaccard_config_mismatch() {
        let a = ShingleSet::from_fingerprints([1], 2, ShingleUnit::Word);
        let b = ShingleSet::from_fingerprints([1], 3, ShingleUnit::Word);
        assert!(matches!(exact_jaccard(&a, &b), Err(Error::ConfigMismatch(_))));
    }

    proptest! {
        #[test]
        fn normalize_idempotent(s in "\\PC*") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn normalize_idempotent_arbitrary(s in proptest::string::string_regex(".{0,64}").unwrap()) {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn shingle_stable_under_normalization(s in "[a-zA-Z \\t]{1,80}", n in 1usize..5) {
            prop_assume!(!normalize(&s).is_empty());
            let direct = shingle(&s, n, ShingleUnit::Word).unwrap();
            let renorm = shingle(&normalize(&s), n, ShingleUnit::Word).unwrap();
            prop_assert_eq!(direct.elements(), renorm.elements());
        }

        #[test]
        fn shingle_size_bound(s in "[a-z ]{1,120}", n in 1usize..6) {
            prop_assume!(!normalize(&s).is_empty());
            let tokens = normalize(&s).split_whitespace().count();
            let set = shingle(&s, n, ShingleUnit::Word).unwrap();
            prop_assert!(set.len() >= 1);
            prop_assert!(set.len() <= std::cmp::max(1, tokens.saturating_sub(n) + 1));
        }

        #[test]
        fn jaccard_symmetric_and_bounded(
            a in proptest::collection::hash_set(0u64..1000, 1..50),
            b in proptest::collection::hash_set(0u64..1000, 1..50),
        ) {
            let sa = ShingleSet::from_fingerprints(a, 3, ShingleUnit::Word);
            let sb = ShingleSet::from_fingerprints(b, 3, ShingleUnit::Word);
            let j1 = exact_jaccard(&sa, &sb).unwrap();
            let j2 = exact_jaccard(&sb, &sa).unwrap();
            prop_assert_eq!(j1, j2);
            prop_assert!((0.0..=1.0).contains(&j1));
            prop_assert_eq!(exact_jaccard(&sa, &sa).unwrap(), 1.0);
        }
    }
}
