//! LSH banding: optimal (b, r) selection for a target Jaccard threshold,
//! band hashing, and the classic in-memory MinHashLSH index.
//!
//! The classic index stores document ids in per-band bucket maps keyed by
//! band hash. It is the correctness oracle the Bloom-filter index is
//! compared against: both see exactly the same band hashes, so the Bloom
//! variant can only ever add false positives on top of it.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::minhash::{MinHashSignature, UniversalHashFamily, MERSENNE_PRIME_61};
use crate::{Error, Result};

/// Full parameterization of an LSH run. Two indexes with equal params and
/// equal input streams produce identical verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LshParams {
    pub threshold: f64,
    pub num_perm: usize,
    pub bands: usize,
    pub rows: usize,
    pub signature_seed: u64,
    pub band_hash_seed: u64,
}

impl LshParams {
    /// Computes the optimal (b, r) for the threshold with equal
    /// false-positive/false-negative weighting.
    pub fn optimal(
        threshold: f64,
        num_perm: usize,
        signature_seed: u64,
        band_hash_seed: u64,
    ) -> Result<Self> {
        let (bands, rows) = optimal_params(threshold, num_perm, 0.5, 0.5)?;
        Ok(Self {
            threshold,
            num_perm,
            bands,
            rows,
            signature_seed,
            band_hash_seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        if self.bands == 0 || self.rows == 0 || self.bands * self.rows > self.num_perm {
            return Err(Error::InvalidParameter(format!(
                "infeasible banding: b={} r={} num_perm={}",
                self.bands, self.rows, self.num_perm
            )));
        }
        Ok(())
    }
}

/// Probability that two documents with similarity `s` collide in at least
/// one band: 1 − (1 − s^r)^b.
pub fn s_curve(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

/// Composite Simpson's rule over [lo, hi].
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, subintervals: usize) -> f64 {
    // Simpson needs an even panel count
    let n = subintervals + subintervals % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

const INTEGRATION_SUBINTERVALS: usize = 1000;

/// Weighted false-positive/false-negative area of the S-curve around the
/// threshold. The quantity minimized when picking (b, r).
pub fn banding_error(threshold: f64, bands: usize, rows: usize, fp_weight: f64, fn_weight: f64) -> f64 {
    let fp_area = simpson(
        |s| s_curve(s, bands, rows),
        0.0,
        threshold,
        INTEGRATION_SUBINTERVALS,
    );
    let fn_area = simpson(
        |s| 1.0 - s_curve(s, bands, rows),
        threshold,
        1.0,
        INTEGRATION_SUBINTERVALS,
    );
    fp_weight * fp_area + fn_weight * fn_area
}

/// Exhaustive minimization of the weighted S-curve error over all integer
/// (b, r) with b·r ≤ num_perm. Ties break toward smaller b, then smaller r.
pub fn optimal_params(
    threshold: f64,
    num_perm: usize,
    fp_weight: f64,
    fn_weight: f64,
) -> Result<(usize, usize)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} outside (0, 1]"
        )));
    }
    if num_perm < 2 {
        return Err(Error::InvalidParameter("num_perm must be >= 2".into()));
    }
    if fp_weight < 0.0 || fn_weight < 0.0 || (fp_weight + fn_weight - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "fp_weight and fn_weight must be non-negative and sum to 1".into(),
        ));
    }
    let mut best = (1, 1);
    let mut best_err = f64::INFINITY;
    for b in 1..=num_perm {
        for r in 1..=num_perm / b {
            let err = banding_error(threshold, b, r, fp_weight, fn_weight);
            if err < best_err {
                best_err = err;
                best = (b, r);
            }
        }
    }
    Ok(best)
}

/// Hashes one band of a signature to a single value in [0, P):
/// (Σ_i h_i(x_i)) mod P, with the r per-row hash functions derived from the
/// band hash seed and shared across bands.
#[derive(Debug, Clone)]
pub struct BandHasher {
    family: UniversalHashFamily,
    bands: usize,
    rows: usize,
}

impl BandHasher {
    pub fn new(params: &LshParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            family: UniversalHashFamily::new(params.band_hash_seed, params.rows)?,
            bands: params.bands,
            rows: params.rows,
        })
    }

    pub fn hash(&self, signature: &MinHashSignature, band_index: usize) -> Result<u64> {
        if band_index >= self.bands {
            return Err(Error::InvalidParameter(format!(
                "band index {} out of range (b = {})",
                band_index, self.bands
            )));
        }
        if signature.num_perm() < self.bands * self.rows {
            return Err(Error::ConfigMismatch(format!(
                "signature has {} values, banding needs {}",
                signature.num_perm(),
                self.bands * self.rows
            )));
        }
        let start = band_index * self.rows;
        let mut acc: u128 = 0;
        for (i, &x) in signature.values()[start..start + self.rows].iter().enumerate() {
            acc += self.family.hash(i, x) as u128;
        }
        Ok((acc % MERSENNE_PRIME_61 as u128) as u64)
    }
}

/// One-off band hash; indexes and pipelines hold a [`BandHasher`] instead.
pub fn band_hash(signature: &MinHashSignature, band_index: usize, params: &LshParams) -> Result<u64> {
    BandHasher::new(params)?.hash(signature, band_index)
}

/// Traditional MinHashLSH index: per-band maps from band hash to the list
/// of document ids in that bucket.
#[derive(Debug)]
pub struct ClassicLshIndex {
    params: LshParams,
    hasher: BandHasher,
    buckets: Vec<HashMap<u64, Vec<String>>>,
    ids: HashSet<String>,
}

impl ClassicLshIndex {
    pub fn new(params: LshParams) -> Result<Self> {
        let hasher = BandHasher::new(&params)?;
        let buckets = (0..params.bands).map(|_| HashMap::new()).collect();
        Ok(Self {
            params,
            hasher,
            buckets,
            ids: HashSet::new(),
        })
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn doc_count(&self) -> usize {
        self.ids.len()
    }

    pub fn insert(&mut self, id: &str, signature: &MinHashSignature) -> Result<()> {
        if self.ids.contains(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        for band in 0..self.params.bands {
            let key = self.hasher.hash(signature, band)?;
            self.buckets[band].entry(key).or_default().push(id.to_string());
        }
        self.ids.insert(id.to_string());
        Ok(())
    }

    /// Union over bands of the ids sharing that band's hash. Empty result
    /// means "not a duplicate of anything seen".
    pub fn query(&self, signature: &MinHashSignature) -> Result<HashSet<String>> {
        let mut out = HashSet::new();
        for band in 0..self.params.bands {
            let key = self.hasher.hash(signature, band)?;
            if let Some(bucket) = self.buckets[band].get(&key) {
                out.extend(bucket.iter().cloned());
            }
        }
        Ok(out)
    }

    pub fn is_duplicate(&self, signature: &MinHashSignature) -> Result<bool> {
        for band in 0..self.params.bands {
            let key = self.hasher.hash(signature, band)?;
            if self.buckets[band].contains_key(&key) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Rough heap footprint: map entries, bucket vectors, and id strings.
    /// Used by `bench` to contrast growth rates against the Bloom index,
    /// which has an exact closed-form size.
    pub fn approx_memory_bytes(&self) -> u64 {
        let mut bytes = 0u64;
        for map in &self.buckets {
            // key + Vec header per entry, plus hashbrown control/slack overhead
            bytes += map.len() as u64 * (8 + 24 + 8);
            for ids in map.values() {
                bytes += ids.iter().map(|s| 24 + s.len() as u64).sum::<u64>();
            }
        }
        for id in &self.ids {
            bytes += 24 + 8 + id.len() as u64;
        }
        bytes
    }
}
