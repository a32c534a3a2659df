//! Carter–Wegman universal hashing over the Mersenne prime 2^61 − 1 and
//! MinHash signature computation.
//!
//! The per-position collision probability of two signatures equals the
//! Jaccard similarity of the underlying shingle sets, so comparing
//! signatures position-wise estimates Jaccard similarity.

use crate::shingle::ShingleSet;
use crate::{Error, Result};

/// Hash range and modulus: the Mersenne prime 2^61 − 1. Collision
/// probability for distinct inputs is 1/P ≈ 4.3e-19 per function.
pub const MERSENNE_PRIME_61: u64 = (1 << 61) - 1;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer (Vigna). Fixed here so seeds, filter probes, and
/// hash families are reproducible across implementations and platforms.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-mode splitmix64: the i-th output of the stream with the given
/// seed, computable at any index independently.
#[inline]
pub fn counter_hash(seed: u64, counter: u64) -> u64 {
    mix64(seed.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
}

/// (a·x + b) mod P with 1 ≤ a < P, 0 ≤ b < P.
#[inline]
pub fn universal_hash(a: u64, b: u64, x: u64) -> u64 {
    ((a as u128 * x as u128 + b as u128) % MERSENNE_PRIME_61 as u128) as u64
}

/// A reproducible family of universal hash functions h_i(x) = (a_i·x + b_i)
/// mod P. The same seed always yields the same family, and a family of
/// `count` functions is a prefix of any larger family with the same seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniversalHashFamily {
    seed: u64,
    params: Vec<(u64, u64)>,
}

impl UniversalHashFamily {
    pub fn new(seed: u64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter(
                "hash family count must be >= 1".into(),
            ));
        }
        let params = (0..count as u64)
            .map(|i| {
                let a = counter_hash(seed, 2 * i) % (MERSENNE_PRIME_61 - 1) + 1;
                let b = counter_hash(seed, 2 * i + 1) % MERSENNE_PRIME_61;
                (a, b)
            })
            .collect();
        Ok(Self { seed, params })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[(u64, u64)] {
        &self.params
    }

    #[inline]
    pub fn hash(&self, i: usize, x: u64) -> u64 {
        let (a, b) = self.params[i];
        universal_hash(a, b, x)
    }
}

/// Convenience alias for [`UniversalHashFamily::new`].
pub fn make_family(seed: u64, count: usize) -> Result<UniversalHashFamily> {
    UniversalHashFamily::new(seed, count)
}

/// Fixed-length vector of per-function minima over a shingle set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    values: Vec<u64>,
}

impl MinHashSignature {
    pub fn from_values(values: Vec<u64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn num_perm(&self) -> usize {
        self.values.len()
    }
}

/// values[i] = min over shingle fingerprints x of h_i(x). Independent of
/// shingle enumeration order.
pub fn minhash_signature(
    shingles: &ShingleSet,
    family: &UniversalHashFamily,
) -> Result<MinHashSignature> {
    if shingles.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut values = vec![u64::MAX; family.count()];
    for &x in shingles.elements() {
        for (i, &(a, b)) in family.params().iter().enumerate() {
            let h = universal_hash(a, b, x);
            if h < values[i] {
                values[i] = h;
            }
        }
    }
    Ok(MinHashSignature { values })
}

/// Fraction of positions where the two signatures agree.
pub fn estimate_jaccard(s1: &MinHashSignature, s2: &MinHashSignature) -> Result<f64> {
    if s1.num_perm() != s2.num_perm() {
        return Err(Error::ConfigMismatch(format!(
            "signature lengths differ: {} vs {}",
            s1.num_perm(),
            s2.num_perm()
        )));
    }
    let matches = s1
        .values
        .iter()
        .zip(&s2.values)
        .filter(|(a, b)| a == b)
        .count();
    Ok(matches as f64 / s1.num_perm() as f64)
}
