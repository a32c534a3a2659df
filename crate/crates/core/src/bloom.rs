//! Space-optimal Bloom filter with double-hashed probes and a checksummed
//! little-endian wire encoding.
//!
//! Sizing follows m = ceil(−n·ln(p)/(ln 2)²), k = max(1, round((m/n)·ln 2)),
//! natural logarithms throughout. Probes use Kirsch–Mitzenmauer double
//! hashing: g_j(x) = (h1(x) + j·h2(x)) mod m with h2 forced odd.

use crate::minhash::mix64;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"LBF1";
const FORMAT_VERSION: u32 = 1;

/// Bits and probe count for a capacity/false-positive target.
pub fn bloom_size(capacity_n: u64, target_p: f64) -> Result<(u64, u32)> {
    if capacity_n == 0 {
        return Err(Error::InvalidParameter("capacity must be >= 1".into()));
    }
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "false-positive rate {target_p} outside (0, 1)"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let m = (-(capacity_n as f64) * target_p.ln() / (ln2 * ln2)).ceil() as u64;
    let k = ((m as f64 / capacity_n as f64) * ln2).round().max(1.0) as u32;
    Ok((m, k))
}

/// Bit array of m bits with k derived probes. Bits are only ever set, never
/// cleared, so an element once inserted is always reported present.
#[derive(Debug, Clone, PartialEq)]
pub struct BloomFilter {
    words: Vec<u64>,
    m: u64,
    k: u32,
    capacity_n: u64,
    target_p: f64,
    inserted: u64,
    seed: u64,
}

impl BloomFilter {
    pub fn new(capacity_n: u64, target_p: f64, seed: u64) -> Result<Self> {
        let (m, k) = bloom_size(capacity_n, target_p)?;
        Self::with_geometry(m, k, capacity_n, target_p, seed)
    }

    fn with_geometry(m: u64, k: u32, capacity_n: u64, target_p: f64, seed: u64) -> Result<Self> {
        // storage rounds up to whole words; probing stays mod the analytic m
        let words = vec![0u64; m.div_ceil(64) as usize];
        Ok(Self {
            words,
            m,
            k,
            capacity_n,
            target_p,
            inserted: 0,
            seed,
        })
    }

    pub fn bit_count(&self) -> u64 {
        self.m
    }

    pub fn probe_count(&self) -> u32 {
        self.k
    }

    pub fn capacity(&self) -> u64 {
        self.capacity_n
    }

    pub fn target_p(&self) -> f64 {
        self.target_p
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// True once more elements have been inserted than the filter was sized
    /// for; the false-positive rate then exceeds target_p.
    pub fn oversubscribed(&self) -> bool {
        self.inserted > self.capacity_n
    }

    pub fn set_bit_population(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    #[inline]
    fn probe_bases(&self, x: u64) -> (u64, u64) {
        let h1 = mix64(x ^ self.seed);
        let h2 = mix64(x.rotate_left(32) ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)) | 1;
        (h1, h2)
    }

    pub fn insert(&mut self, x: u64) {
        let (h1, h2) = self.probe_bases(x);
        for j in 0..self.k as u64 {
            let bit = h1.wrapping_add(j.wrapping_mul(h2)) % self.m;
            self.words[(bit >> 6) as usize] |= 1 << (bit & 63);
        }
        self.inserted += 1;
    }

    pub fn contains(&self, x: u64) -> bool {
        let (h1, h2) = self.probe_bases(x);
        (0..self.k as u64).all(|j| {
            let bit = h1.wrapping_add(j.wrapping_mul(h2)) % self.m;
            self.words[(bit >> 6) as usize] & (1 << (bit & 63)) != 0
        })
    }

    /// Encoded size in bytes: fixed header, bit payload, trailing CRC32C.
    pub fn encoded_len(&self) -> usize {
        4 + 4 + 8 + 8 + 8 + 8 + 4 + 8 + self.m.div_ceil(8) as usize + 4
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.capacity_n.to_le_bytes());
        out.extend_from_slice(&self.target_p.to_le_bytes());
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.inserted.to_le_bytes());
        let payload_len = self.m.div_ceil(8) as usize;
        let mut payload = vec![0u8; payload_len];
        for (i, word) in self.words.iter().enumerate() {
            let bytes = word.to_le_bytes();
            let start = i * 8;
            let end = (start + 8).min(payload_len);
            payload[start..end].copy_from_slice(&bytes[..end - start]);
        }
        out.extend_from_slice(&payload);
        let crc = crc32c::crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let (filter, consumed) = Self::deserialize_prefix(bytes)?;
        if consumed != bytes.len() {
            return Err(Error::Truncated);
        }
        Ok(filter)
    }

    /// Decodes one filter from the front of `bytes`, returning it and the
    /// number of bytes consumed. Lets container formats embed filters
    /// back to back.
    pub fn deserialize_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        const HEADER: usize = 4 + 4 + 8 + 8 + 8 + 8 + 4 + 8;
        if bytes.len() < HEADER {
            return Err(Error::Truncated);
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let seed = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let capacity_n = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let target_p = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        let m = u64::from_le_bytes(bytes[32..40].try_into().unwrap());
        let k = u32::from_le_bytes(bytes[40..44].try_into().unwrap());
        let inserted = u64::from_le_bytes(bytes[44..52].try_into().unwrap());
        let payload_len = m.div_ceil(8) as usize;
        let total = HEADER + payload_len + 4;
        if bytes.len() < total {
            return Err(Error::Truncated);
        }
        let crc_expected = u32::from_le_bytes(bytes[total - 4..total].try_into().unwrap());
        if crc32c::crc32c(&bytes[..total - 4]) != crc_expected {
            return Err(Error::ChecksumMismatch);
        }
        let payload = &bytes[HEADER..HEADER + payload_len];
        let mut words = vec![0u64; m.div_ceil(64) as usize];
        for (i, word) in words.iter_mut().enumerate() {
            let start = i * 8;
            let end = (start + 8).min(payload_len);
            let mut buf = [0u8; 8];
            buf[..end - start].copy_from_slice(&payload[start..end]);
            *word = u64::from_le_bytes(buf);
        }
        Ok((
            Self {
                words,
                m,
                k,
                capacity_n,
                target_p,
                inserted,
                seed,
            },
            total,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minhash::counter_hash;
    use proptest::prelude::*;

    #[test]
    fn sizing_formula() {
        let (m, k) = bloom_size(1_000_000, 1e-5).unwrap();
        assert_eq!(m, 23_962_646);
        assert_eq!(k, 17);

        // ln(0.5) = -ln 2 cancels: m = ceil(1/ln 2) = 2, k = max(1, round(2 ln 2)) = 1
        let (m, k) = bloom_size(1, 0.5).unwrap();
        assert_eq!(m, 2);
        assert_eq!(k, 1);
    }

    #[test]
    fn sizing_rejects_bad_p() {
        assert!(bloom_size(10, 0.0).is_err());
        assert!(bloom_size(10, 1.0).is_err());
        assert!(bloom_size(0, 0.5).is_err());
    }

    #[test]
    fn insert_then_contains() {
        let mut f = BloomFilter::new(1000, 1e-3, 42).unwrap();
        assert!(!f.contains(123));
        f.insert(123);
        assert!(f.contains(123));
    }

    #[test]
    fn insert_is_bit_idempotent() {
        let mut once = BloomFilter::new(1000, 1e-3, 42).unwrap();
        once.insert(777);
        let mut twice = BloomFilter::new(1000, 1e-3, 42).unwrap();
        twice.insert(777);
        twice.insert(777);
        assert_eq!(once.words, twice.words);
        assert_eq!(twice.inserted(), 2);
    }

    #[test]
    fn oversubscription_flag() {
        let mut f = BloomFilter::new(2, 0.01, 1).unwrap();
        f.insert(1);
        f.insert(2);
        assert!(!f.oversubscribed());
        f.insert(3);
        assert!(f.oversubscribed());
    }

    /// After n inserts the expected set-bit population is
    /// m(1 − (1 − 1/m)^(kn)); measured population should be within 1%.
    #[test]
    fn population_matches_expectation() {
        let n = 100_000u64;
        let mut f = BloomFilter::new(n, 1e-3, 7).unwrap();
        for i in 0..n {
            f.insert(counter_hash(0xfeed, i));
        }
        let m = f.bit_count() as f64;
        let expected = m * (1.0 - (1.0 - 1.0 / m).powf(f.probe_count() as f64 * n as f64));
        let measured = f.set_bit_population() as f64;
        assert!(
            (measured - expected).abs() / expected < 0.01,
            "population {measured} vs expected {expected}"
        );
    }

    #[test]
    fn measured_fp_rate_near_target() {
        let n = 100_000u64;
        let p = 1e-3;
        let mut f = BloomFilter::new(n, p, 9).unwrap();
        for i in 0..n {
            f.insert(counter_hash(1, i));
        }
        let probes = 1_000_000u64;
        let fps = (0..probes)
            .filter(|&i| f.contains(counter_hash(2, i)))
            .count() as f64;
        let rate = fps / probes as f64;
        assert!(rate >= p / 2.0 && rate <= 2.0 * p, "fp rate {rate}");
    }

    #[test]
    fn roundtrip_empty() {
        let f = BloomFilter::new(100, 0.01, 3).unwrap();
        let bytes = f.serialize();
        assert_eq!(bytes.len(), f.encoded_len());
        assert_eq!(BloomFilter::deserialize(&bytes).unwrap(), f);
    }

    #[test]
    fn roundtrip_populated_preserves_membership() {
        let mut f = BloomFilter::new(10_000, 1e-4, 11).unwrap();
        for i in 0..10_000u64 {
            f.insert(counter_hash(5, i));
        }
        let g = BloomFilter::deserialize(&f.serialize()).unwrap();
        assert_eq!(g, f);
        for i in 0..1000u64 {
            let probe = counter_hash(6, i);
            assert_eq!(f.contains(probe), g.contains(probe));
        }
    }

    #[test]
    fn corruption_detected() {
        let mut f = BloomFilter::new(500, 0.01, 13).unwrap();
        f.insert(42);
        let good = f.serialize();

        let mut bad = good.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0xff;
        assert!(matches!(
            BloomFilter::deserialize(&bad),
            Err(Error::ChecksumMismatch)
        ));

        let mut wrong_magic = good.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            BloomFilter::deserialize(&wrong_magic),
            Err(Error::BadMagic)
        ));

        assert!(matches!(
            BloomFilter::deserialize(&good[..good.len() - 10]),
            Err(Error::Truncated)
        ));

        let mut wrong_version = good;
        wrong_version[4] = 99;
        assert!(matches!(
            BloomFilter::deserialize(&wrong_version),
            Err(Error::UnsupportedVersion(99))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn no_false_negatives(seed in any::<u64>(), items in proptest::collection::vec(any::<u64>(), 1..500)) {
            let mut f = BloomFilter::new(items.len() as u64, 1e-3, seed).unwrap();
            for &x in &items {
                f.insert(x);
            }
            for &x in &items {
                prop_assert!(f.contains(x));
            }
        }

        #[test]
        fn population_monotone(items in proptest::collection::vec(any::<u64>(), 1..200)) {
            let mut f = BloomFilter::new(200, 0.01, 17).unwrap();
            let mut prev = 0;
            for &x in &items {
                f.insert(x);
                let pop = f.set_bit_population();
                prop_assert!(pop >= prev);
                prev = pop;
            }
        }

        #[test]
        fn roundtrip_identity(seed in any::<u64>(), items in proptest::collection::vec(any::<u64>(), 0..100)) {
            let mut f = BloomFilter::new(128, 0.01, seed).unwrap();
            for &x in &items {
                f.insert(x);
            }
            prop_assert_eq!(BloomFilter::deserialize(&f.serialize()).unwrap(), f);
        }
    }
}
