//! Streaming document deduplication built around an LSH index of per-band
//! Bloom filters, alongside a classic MinHashLSH index and paragraph/n-gram
//! baselines for comparison.
//!
//! The flow for MinHash-based methods is: normalize and shingle each
//! document ([`shingle`]), compute a MinHash signature ([`minhash`]), split
//! the signature into bands and hash each band ([`lsh`]), then either store
//! band hashes in per-band bucket maps ([`lsh::ClassicLshIndex`]) or insert
//! them into per-band Bloom filters ([`index::LshBloomIndex`]). The Bloom
//! variant stores no document ids at all, which is where its space advantage
//! comes from; its only cost is a configurable false-positive overhead of
//! `1 - (1 - p)^b` across the `b` filters.

pub mod baselines;
pub mod bloom;
pub mod error;
pub mod index;
pub mod lsh;
pub mod minhash;
pub mod pipeline;
pub mod shingle;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
