//! The LSHBloom index: b Bloom filters, one per LSH band.
//!
//! Instead of bucket maps holding document ids, each band keeps only a
//! Bloom filter of the band hashes seen so far. A document is a duplicate
//! if any band's filter already contains that band's hash. No ids are
//! stored anywhere, so the index size is fixed by the capacity plan alone
//! and is independent of id lengths or bucket shapes. The price is a
//! false-positive overhead of 1 − (1 − p)^b across the b filters, where p
//! is the per-filter rate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bloom::{bloom_size, BloomFilter};
use crate::lsh::{optimal_params, BandHasher, LshParams};
use crate::minhash::{counter_hash, MinHashSignature};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"LSHB";
const FORMAT_VERSION: u32 = 1;
const CONTAINER_HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4 + 4 + 8 + 8 + 8 + 8 + 8;
const FILTER_SEED_TAG: u64 = 0x4c53_4842_4c4f_4f4d; // "LSHBLOOM"

/// Combined false-positive rate of b independent filters with per-filter
/// rate p: 1 − (1 − p)^b.
pub fn effective_fp(per_filter_p: f64, bands: usize) -> f64 {
    -(bands as f64 * (-per_filter_p).ln_1p()).exp_m1()
}

/// Inversion of [`effective_fp`]: the per-filter rate needed so that b
/// filters combine to p_effective. Stable down to p_effective ~ 1e-15.
pub fn per_filter_fp(p_effective: f64, bands: usize) -> Result<f64> {
    if !(p_effective > 0.0 && p_effective < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "effective false-positive rate {p_effective} outside (0, 1)"
        )));
    }
    let p = -((-p_effective).ln_1p() / bands as f64).exp_m1();
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "per-filter rate {p} infeasible for b = {bands}"
        )));
    }
    Ok(p)
}

/// Closed-form prediction of index geometry and disk footprint.
/// `total_bytes` counts bit payloads only; header overhead is reported
/// separately so the payload figure matches the analytic formula. GB/TB in
/// reports are decimal (1e9 / 1e12 bytes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityPlan {
    pub n_docs: u64,
    pub p_effective: f64,
    pub threshold: f64,
    pub num_perm: usize,
    pub bands: usize,
    pub rows: usize,
    pub per_filter_p: f64,
    pub per_filter_bits: u64,
    pub probes_per_filter: u32,
    pub total_bytes: u64,
    pub header_overhead_bytes: u64,
}

impl CapacityPlan {
    /// Payload plus all headers and checksums: the exact size of the file
    /// `save` writes.
    pub fn file_bytes(&self) -> u64 {
        self.total_bytes + self.header_overhead_bytes
    }

    pub fn total_gigabytes(&self) -> f64 {
        self.total_bytes as f64 / 1e9
    }
}

/// Predicts filter geometry and disk usage for a corpus of `n_docs`
/// documents at a target effective false-positive rate.
pub fn plan(n_docs: u64, p_effective: f64, threshold: f64, num_perm: usize) -> Result<CapacityPlan> {
    if n_docs == 0 {
        return Err(Error::InvalidParameter("n_docs must be >= 1".into()));
    }
    let (bands, rows) = optimal_params(threshold, num_perm, 0.5, 0.5)?;
    let per_filter_p = per_filter_fp(p_effective, bands)?;
    let (per_filter_bits, probes) = bloom_size(n_docs, per_filter_p)?;
    let payload = per_filter_bits.div_ceil(8);
    // per-filter header + CRC is 56 bytes, container header + CRC wraps them
    let per_filter_overhead = 52 + 4;
    let header_overhead =
        bands as u64 * per_filter_overhead + CONTAINER_HEADER_LEN as u64 + 4;
    Ok(CapacityPlan {
        n_docs,
        p_effective,
        threshold,
        num_perm,
        bands,
        rows,
        per_filter_p,
        per_filter_bits,
        probes_per_filter: probes,
        total_bytes: bands as u64 * payload,
        header_overhead_bytes: header_overhead,
    })
}

/// Verdict for one queried signature, with the colliding bands kept for
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOutcome {
    pub duplicate: bool,
    pub colliding_bands: Vec<usize>,
}

/// LSH duplicate index backed by one Bloom filter per band.
#[derive(Debug, Clone)]
pub struct LshBloomIndex {
    params: LshParams,
    hasher: BandHasher,
    filters: Vec<BloomFilter>,
    n_docs: u64,
    p_effective: f64,
    doc_count: u64,
}

impl LshBloomIndex {
    /// Allocates b filters sized for `n_docs` documents at the effective
    /// false-positive rate. Filter seeds derive from the band hash seed and
    /// band position, so equal params reproduce the identical index.
    pub fn new(params: LshParams, n_docs: u64, p_effective: f64) -> Result<Self> {
        params.validate()?;
        let hasher = BandHasher::new(&params)?;
        let per_p = per_filter_fp(p_effective, params.bands)?;
        let filters = (0..params.bands)
            .map(|band| {
                let seed = counter_hash(params.band_hash_seed ^ FILTER_SEED_TAG, band as u64);
                BloomFilter::new(n_docs, per_p, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            hasher,
            filters,
            n_docs,
            p_effective,
            doc_count: 0,
        })
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    pub fn capacity(&self) -> u64 {
        self.n_docs
    }

    pub fn p_effective(&self) -> f64 {
        self.p_effective
    }

    pub fn filters(&self) -> &[BloomFilter] {
        &self.filters
    }

    pub fn oversubscribed(&self) -> bool {
        self.doc_count > self.n_docs
    }

    fn check_signature(&self, signature: &MinHashSignature) -> Result<()> {
        if signature.num_perm() != self.params.num_perm {
            return Err(Error::ConfigMismatch(format!(
                "signature has {} values, index expects {}",
                signature.num_perm(),
                self.params.num_perm
            )));
        }
        Ok(())
    }

    /// Inserts each band's hash into that band's filter. The document id is
    /// deliberately not an argument: the index stores membership only.
    pub fn insert(&mut self, signature: &MinHashSignature) -> Result<()> {
        self.check_signature(signature)?;
        for band in 0..self.params.bands {
            let h = self.hasher.hash(signature, band)?;
            self.filters[band].insert(h);
        }
        self.doc_count += 1;
        Ok(())
    }

    /// Duplicate iff any band's filter already contains that band's hash.
    pub fn query(&self, signature: &MinHashSignature) -> Result<QueryOutcome> {
        self.check_signature(signature)?;
        let mut colliding = Vec::new();
        for band in 0..self.params.bands {
            let h = self.hasher.hash(signature, band)?;
            if self.filters[band].contains(h) {
                colliding.push(band);
            }
        }
        Ok(QueryOutcome {
            duplicate: !colliding.is_empty(),
            colliding_bands: colliding,
        })
    }

    /// Streaming first-seen-wins step: query, then insert unconditionally.
    pub fn query_then_insert(&mut self, signature: &MinHashSignature) -> Result<QueryOutcome> {
        let outcome = self.query(signature)?;
        self.insert(signature)?;
        Ok(outcome)
    }

    /// Exact size in bytes of the serialized container.
    pub fn encoded_len(&self) -> usize {
        CONTAINER_HEADER_LEN
            + self.filters.iter().map(|f| f.encoded_len()).sum::<usize>()
            + 4
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.params.threshold.to_le_bytes());
        out.extend_from_slice(&(self.params.num_perm as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.bands as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.rows as u32).to_le_bytes());
        out.extend_from_slice(&self.params.signature_seed.to_le_bytes());
        out.extend_from_slice(&self.params.band_hash_seed.to_le_bytes());
        out.extend_from_slice(&self.n_docs.to_le_bytes());
        out.extend_from_slice(&self.p_effective.to_le_bytes());
        out.extend_from_slice(&self.doc_count.to_le_bytes());
        for filter in &self.filters {
            out.extend_from_slice(&filter.serialize());
        }
        let crc = crc32c::crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < CONTAINER_HEADER_LEN + 4 {
            return Err(Error::Truncated);
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let crc_expected = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32c::crc32c(&bytes[..bytes.len() - 4]) != crc_expected {
            return Err(Error::ChecksumMismatch);
        }
        let threshold = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let num_perm = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let bands = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
        let rows = u32::from_le_bytes(bytes[24..28].try_into().unwrap()) as usize;
        let signature_seed = u64::from_le_bytes(bytes[28..36].try_into().unwrap());
        let band_hash_seed = u64::from_le_bytes(bytes[36..44].try_into().unwrap());
        let n_docs = u64::from_le_bytes(bytes[44..52].try_into().unwrap());
        let p_effective = f64::from_le_bytes(bytes[52..60].try_into().unwrap());
        let doc_count = u64::from_le_bytes(bytes[60..68].try_into().unwrap());
        let params = LshParams {
            threshold,
            num_perm,
            bands,
            rows,
            signature_seed,
            band_hash_seed,
        };
        params.validate()?;
        let mut filters = Vec::with_capacity(bands);
        let mut offset = CONTAINER_HEADER_LEN;
        for _ in 0..bands {
            let (filter, consumed) = BloomFilter::deserialize_prefix(&bytes[offset..bytes.len() - 4])?;
            filters.push(filter);
            offset += consumed;
        }
        if offset != bytes.len() - 4 {
            return Err(Error::Truncated);
        }
        Ok(Self {
            hasher: BandHasher::new(&params)?,
            params,
            filters,
            n_docs,
            p_effective,
            doc_count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minhash::{make_family, minhash_signature};
    use crate::shingle::{ShingleSet, ShingleUnit};

    fn test_params() -> LshParams {
        LshParams::optimal(0.8, 128, 1, 2).unwrap()
    }

    fn sig_from_seed(seed: u64) -> MinHashSignature {
        let family = make_family(1, 128).unwrap();
        let shingles =
            ShingleSet::from_fingerprints((0..64).map(|i| counter_hash(seed, i)), 3, ShingleUnit::Word);
        minhash_signature(&shingles, &family).unwrap()
    }

    #[test]
    fn effective_fp_examples() {
        assert_eq!(effective_fp(0.0, 5), 0.0);
        assert!((effective_fp(0.25, 1) - 0.25).abs() < 1e-15);
        let p = effective_fp(1e-5, 9);
        assert!((p - 8.9996400084e-5).abs() / p < 1e-9, "got {p}");
        // nine independent filters push the combined rate just under 9x
        assert!(p > 1e-5 && p < 8e-4);
    }

    #[test]
    fn per_filter_inversion_roundtrips() {
        for &p_eff in &[1e-3, 1e-5, 1e-10, 1e-15] {
            for &b in &[1usize, 4, 9, 32] {
                let p = per_filter_fp(p_eff, b).unwrap();
                assert!(p > 0.0 && p < 1.0);
                let back = effective_fp(p, b);
                assert!((back - p_eff).abs() / p_eff < 1e-9, "p_eff {p_eff} b {b}");
            }
        }
        // b = 1 collapses to the per-filter rate itself
        let p1 = per_filter_fp(1e-5, 1).unwrap();
        assert!((p1 - 1e-5).abs() / 1e-5 < 1e-12);
    }

    #[test]
    fn plan_reproduces_published_sizes() {
        // 5B docs, T = 0.8, 128 perms
        let p = plan(5_000_000_000, 1e-5, 0.8, 128).unwrap();
        assert_eq!(p.bands, 9);
        assert!((p.total_gigabytes() - 160.51).abs() / 160.51 < 1e-3, "{}", p.total_gigabytes());

        let p = plan(5_000_000_000, 1e-10, 0.8, 128).unwrap();
        assert!((p.total_gigabytes() - 295.30).abs() / 295.30 < 1e-3, "{}", p.total_gigabytes());

        let p = plan(10_000_000_000, 1e-10, 0.8, 128).unwrap();
        assert!((p.total_gigabytes() - 590.0).abs() / 590.0 < 5e-3, "{}", p.total_gigabytes());

        let p = plan(100_000_000_000, 1e-5, 0.8, 128).unwrap();
        assert!((p.total_gigabytes() / 1e3 - 3.21).abs() / 3.21 < 1e-3, "{}", p.total_gigabytes());
    }

    #[test]
    fn new_index_band_count_and_b1_identity() {
        let index = LshBloomIndex::new(test_params(), 1000, 1e-5).unwrap();
        assert_eq!(index.filters().len(), 9);

        let params = LshParams {
            threshold: 0.5,
            num_perm: 16,
            bands: 1,
            rows: 16,
            signature_seed: 1,
            band_hash_seed: 2,
        };
        let index = LshBloomIndex::new(params, 100, 1e-4).unwrap();
        assert!((index.filters()[0].target_p() - 1e-4).abs() / 1e-4 < 1e-12);
    }

    #[test]
    fn filters_share_geometry_with_distinct_seeds() {
        let index = LshBloomIndex::new(test_params(), 5000, 1e-5).unwrap();
        let first = &index.filters()[0];
        let mut seeds = std::collections::HashSet::new();
        for f in index.filters() {
            assert_eq!(f.bit_count(), first.bit_count());
            assert_eq!(f.probe_count(), first.probe_count());
            assert_eq!(f.capacity(), first.capacity());
            seeds.insert(f.seed());
        }
        assert_eq!(seeds.len(), index.filters().len());
    }

    #[test]
    fn insert_query_stream_semantics() {
        let mut index = LshBloomIndex::new(test_params(), 1000, 1e-5).unwrap();
        let sig = sig_from_seed(7);

        let fresh = index.query(&sig).unwrap();
        assert!(!fresh.duplicate);

        let first = index.query_then_insert(&sig).unwrap();
        assert!(!first.duplicate);
        let second = index.query_then_insert(&sig).unwrap();
        assert!(second.duplicate);
        assert_eq!(second.colliding_bands.len(), index.params().bands);
        assert_eq!(index.doc_count(), 2);
    }

    #[test]
    fn repeat_insert_leaves_bits_unchanged() {
        let mut index = LshBloomIndex::new(test_params(), 1000, 1e-5).unwrap();
        let sig = sig_from_seed(3);
        index.insert(&sig).unwrap();
        let snapshot: Vec<u64> = index.filters().iter().map(|f| f.set_bit_population()).collect();
        index.insert(&sig).unwrap();
        let after: Vec<u64> = index.filters().iter().map(|f| f.set_bit_population()).collect();
        assert_eq!(snapshot, after);
        assert!(index.filters().iter().all(|f| f.inserted() == 2));
    }

    #[test]
    fn signature_length_mismatch_rejected() {
        let mut index = LshBloomIndex::new(test_params(), 100, 1e-4).unwrap();
        let bad = MinHashSignature::from_values(vec![1; 64]);
        assert!(matches!(index.insert(&bad), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn infeasible_p_rejected() {
        assert!(LshBloomIndex::new(test_params(), 100, 0.0).is_err());
        assert!(LshBloomIndex::new(test_params(), 100, 1.0).is_err());
    }

    #[test]
    fn container_roundtrip_and_size() {
        let mut index = LshBloomIndex::new(test_params(), 2000, 1e-4).unwrap();
        for i in 0..500 {
            index.insert(&sig_from_seed(i)).unwrap();
        }
        let bytes = index.to_bytes();
        assert_eq!(bytes.len(), index.encoded_len());

        let loaded = LshBloomIndex::from_bytes(&bytes).unwrap();
        assert_eq!(loaded.doc_count(), 500);
        assert_eq!(loaded.params(), index.params());
        for i in 0..1000 {
            let sig = sig_from_seed(i + 10_000);
            assert_eq!(loaded.query(&sig).unwrap(), index.query(&sig).unwrap());
        }
        // byte-exact re-emission
        assert_eq!(loaded.to_bytes(), bytes);
    }

    #[test]
    fn container_corruption_detected() {
        let index = LshBloomIndex::new(test_params(), 100, 1e-4).unwrap();
        let bytes = index.to_bytes();
        assert!(matches!(
            LshBloomIndex::from_bytes(&bytes[..bytes.len() - 8]),
            Err(Error::Truncated) | Err(Error::ChecksumMismatch)
        ));
        let mut bad = bytes.clone();
        bad[100] ^= 1;
        assert!(matches!(
            LshBloomIndex::from_bytes(&bad),
            Err(Error::ChecksumMismatch)
        ));
        let mut wrong_magic = bytes;
        wrong_magic[0] = b'Z';
        assert!(matches!(
            LshBloomIndex::from_bytes(&wrong_magic),
            Err(Error::BadMagic)
        ));
    }

    #[test]
    fn save_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.lshb");
        let mut index = LshBloomIndex::new(test_params(), 100, 1e-4).unwrap();
        index.insert(&sig_from_seed(1)).unwrap();
        index.save(&path).unwrap();
        assert_eq!(
            std::fs::metadata(&path).unwrap().len() as usize,
            index.encoded_len()
        );
        let loaded = LshBloomIndex::load(&path).unwrap();
        assert!(loaded.query(&sig_from_seed(1)).unwrap().duplicate);
    }

    #[test]
    fn plan_matches_actual_file_size() {
        let p = plan(2000, 1e-4, 0.8, 128).unwrap();
        let index = LshBloomIndex::new(test_params(), 2000, 1e-4).unwrap();
        assert_eq!(p.file_bytes(), index.encoded_len() as u64);
    }
}
