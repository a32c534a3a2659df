//! C ABI over the lshbloom index. All functions return an [`LshbStatus`];
//! results come back through out-pointers. Handles are opaque and must be
//! released with `lshb_index_free`. The library never panics across the
//! boundary; the last error message is kept per thread and can be fetched
//! with `lshb_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use lshbloom::index::{plan, LshBloomIndex};
use lshbloom::lsh::LshParams;
use lshbloom::minhash::{counter_hash, minhash_signature, UniversalHashFamily};
use lshbloom::shingle::{shingle, ShingleUnit};
use lshbloom::Error;

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LshbStatus {
    LshbOk = 0,
    /// A parameter was out of range or inconsistent.
    LshbErrInvalidArg = 1,
    /// The document produced no shingles (empty or whitespace-only text).
    LshbErrEmptyDocument = 2,
    /// Filesystem failure while saving or loading.
    LshbErrIo = 3,
    /// The file is not a valid index (bad magic, version, truncation, or
    /// checksum mismatch).
    LshbErrFormat = 4,
    /// A required pointer argument was null, or text was not valid UTF-8.
    LshbErrBadPointer = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> LshbStatus {
    match err {
        Error::EmptyDocument => LshbStatus::LshbErrEmptyDocument,
        Error::Io(_) => LshbStatus::LshbErrIo,
        Error::BadMagic
        | Error::UnsupportedVersion(_)
        | Error::Truncated
        | Error::ChecksumMismatch => LshbStatus::LshbErrFormat,
        _ => LshbStatus::LshbErrInvalidArg,
    }
}

fn fail(err: Error) -> LshbStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

fn fail_pointer(what: &str) -> LshbStatus {
    set_error(what);
    LshbStatus::LshbErrBadPointer
}

/// Opaque deduplication index: the per-band Bloom filters plus the hashing
/// configuration needed to turn raw text into signatures.
pub struct LshbIndex {
    index: LshBloomIndex,
    family: UniversalHashFamily,
    shingle_n: usize,
    unit: ShingleUnit,
}

impl LshbIndex {
    fn open(index: LshBloomIndex, shingle_n: u32, char_shingles: i32) -> Result<Self, Error> {
        let family = UniversalHashFamily::new(
            index.params().signature_seed,
            index.params().num_perm,
        )?;
        Ok(Self {
            index,
            family,
            shingle_n: shingle_n as usize,
            unit: if char_shingles != 0 {
                ShingleUnit::Char
            } else {
                ShingleUnit::Word
            },
        })
    }

    fn signature(&self, text: &str) -> Result<lshbloom::minhash::MinHashSignature, Error> {
        let shingles = shingle(text, self.shingle_n, self.unit)?;
        minhash_signature(&shingles, &self.family)
    }
}

unsafe fn text_arg<'a>(text: *const c_char) -> Result<&'a str, LshbStatus> {
    if text.is_null() {
        return Err(fail_pointer("text is null"));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|_| fail_pointer("text is not valid UTF-8"))
}

/// Returns the crate version as a static string.
#[no_mangle]
pub extern "C" fn lshb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns the message of the last error on this thread; valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lshb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Predicts the on-disk index size in bytes for a corpus of `n_docs` at
/// effective false-positive rate `p_effective`.
#[no_mangle]
pub unsafe extern "C" fn lshb_plan_file_bytes(
    n_docs: u64,
    p_effective: f64,
    threshold: f64,
    num_perm: u32,
    out_bytes: *mut u64,
) -> LshbStatus {
    if out_bytes.is_null() {
        return fail_pointer("out_bytes is null");
    }
    match plan(n_docs, p_effective, threshold, num_perm as usize) {
        Ok(p) => {
            *out_bytes = p.file_bytes();
            LshbStatus::LshbOk
        }
        Err(e) => fail(e),
    }
}

/// Creates an index sized for `capacity` documents. `char_shingles`
/// selects character shingles; zero means word shingles. On success
/// `*out_index` owns the handle.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_new(
    threshold: f64,
    num_perm: u32,
    capacity: u64,
    p_effective: f64,
    seed: u64,
    shingle_n: u32,
    char_shingles: i32,
    out_index: *mut *mut LshbIndex,
) -> LshbStatus {
    if out_index.is_null() {
        return fail_pointer("out_index is null");
    }
    let built = LshParams::optimal(
        threshold,
        num_perm as usize,
        seed,
        counter_hash(seed, 0x62616e64),
    )
    .and_then(|params| LshBloomIndex::new(params, capacity, p_effective))
    .and_then(|index| LshbIndex::open(index, shingle_n, char_shingles));
    match built {
        Ok(handle) => {
            *out_index = Box::into_raw(Box::new(handle));
            LshbStatus::LshbOk
        }
        Err(e) => fail(e),
    }
}

/// Releases a handle. Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_free(index: *mut LshbIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Inserts a document without querying.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_insert_text(
    index: *mut LshbIndex,
    text: *const c_char,
) -> LshbStatus {
    let Some(handle) = index.as_mut() else {
        return fail_pointer("index is null");
    };
    let text = match text_arg(text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    match handle.signature(text).and_then(|sig| handle.index.insert(&sig)) {
        Ok(()) => LshbStatus::LshbOk,
        Err(e) => fail(e),
    }
}

/// Queries a document without inserting; writes 1 to `*out_is_duplicate`
/// if any band already contains it.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_query_text(
    index: *const LshbIndex,
    text: *const c_char,
    out_is_duplicate: *mut i32,
) -> LshbStatus {
    let Some(handle) = index.as_ref() else {
        return fail_pointer("index is null");
    };
    if out_is_duplicate.is_null() {
        return fail_pointer("out_is_duplicate is null");
    }
    let text = match text_arg(text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    match handle.signature(text).and_then(|sig| handle.index.query(&sig)) {
        Ok(outcome) => {
            *out_is_duplicate = outcome.duplicate as i32;
            LshbStatus::LshbOk
        }
        Err(e) => fail(e),
    }
}

/// Streaming first-seen-wins step: queries, then inserts, in one call.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_query_insert_text(
    index: *mut LshbIndex,
    text: *const c_char,
    out_is_duplicate: *mut i32,
) -> LshbStatus {
    let Some(handle) = index.as_mut() else {
        return fail_pointer("index is null");
    };
    if out_is_duplicate.is_null() {
        return fail_pointer("out_is_duplicate is null");
    }
    let text = match text_arg(text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    match handle
        .signature(text)
        .and_then(|sig| handle.index.query_then_insert(&sig))
    {
        Ok(outcome) => {
            *out_is_duplicate = outcome.duplicate as i32;
            LshbStatus::LshbOk
        }
        Err(e) => fail(e),
    }
}

/// Number of documents inserted so far.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_doc_count(
    index: *const LshbIndex,
    out_count: *mut u64,
) -> LshbStatus {
    let Some(handle) = index.as_ref() else {
        return fail_pointer("index is null");
    };
    if out_count.is_null() {
        return fail_pointer("out_count is null");
    }
    *out_count = handle.index.doc_count();
    LshbStatus::LshbOk
}

/// Exact size of the file `lshb_index_save` would write.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_file_bytes(
    index: *const LshbIndex,
    out_bytes: *mut u64,
) -> LshbStatus {
    let Some(handle) = index.as_ref() else {
        return fail_pointer("index is null");
    };
    if out_bytes.is_null() {
        return fail_pointer("out_bytes is null");
    }
    *out_bytes = handle.index.encoded_len() as u64;
    LshbStatus::LshbOk
}

/// Writes the index to `path` in its checksummed container format.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_save(
    index: *const LshbIndex,
    path: *const c_char,
) -> LshbStatus {
    let Some(handle) = index.as_ref() else {
        return fail_pointer("index is null");
    };
    let path = match text_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match handle.index.save(path) {
        Ok(()) => LshbStatus::LshbOk,
        Err(e) => fail(e),
    }
}

/// Loads an index from `path`. The shingle configuration is not stored in
/// the file and must be supplied again.
#[no_mangle]
pub unsafe extern "C" fn lshb_index_load(
    path: *const c_char,
    shingle_n: u32,
    char_shingles: i32,
    out_index: *mut *mut LshbIndex,
) -> LshbStatus {
    if out_index.is_null() {
        return fail_pointer("out_index is null");
    }
    let path = match text_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match LshBloomIndex::load(path).and_then(|idx| LshbIndex::open(idx, shingle_n, char_shingles)) {
        Ok(handle) => {
            *out_index = Box::into_raw(Box::new(handle));
            LshbStatus::LshbOk
        }
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn c(text: &str) -> CString {
        CString::new(text).unwrap()
    }

    unsafe fn new_index() -> *mut LshbIndex {
        let mut handle = ptr::null_mut();
        let status = lshb_index_new(0.8, 128, 1_000, 1e-5, 42, 3, 0, &mut handle);
        assert_eq!(status, LshbStatus::LshbOk);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn query_insert_detects_repeats() {
        unsafe {
            let idx = new_index();
            let text = c("the quick brown fox jumps over the lazy dog");
            let mut dup = -1;
            assert_eq!(
                lshb_index_query_insert_text(idx, text.as_ptr(), &mut dup),
                LshbStatus::LshbOk
            );
            assert_eq!(dup, 0);
            assert_eq!(
                lshb_index_query_insert_text(idx, text.as_ptr(), &mut dup),
                LshbStatus::LshbOk
            );
            assert_eq!(dup, 1);

            let other = c("completely unrelated words in a different order entirely");
            assert_eq!(
                lshb_index_query_text(idx, other.as_ptr(), &mut dup),
                LshbStatus::LshbOk
            );
            assert_eq!(dup, 0);

            let mut count = 0;
            assert_eq!(lshb_index_doc_count(idx, &mut count), LshbStatus::LshbOk);
            assert_eq!(count, 2);
            lshb_index_free(idx);
        }
    }

    #[test]
    fn save_load_preserves_verdicts() {
        let dir = tempfile::tempdir().unwrap();
        let path = c(dir.path().join("index.lshb").to_str().unwrap());
        unsafe {
            let idx = new_index();
            let text = c("some document text to remember across a save and load");
            assert_eq!(lshb_index_insert_text(idx, text.as_ptr()), LshbStatus::LshbOk);

            let mut planned = 0;
            assert_eq!(lshb_index_file_bytes(idx, &mut planned), LshbStatus::LshbOk);
            assert_eq!(lshb_index_save(idx, path.as_ptr()), LshbStatus::LshbOk);
            lshb_index_free(idx);
            assert_eq!(
                std::fs::metadata(dir.path().join("index.lshb")).unwrap().len(),
                planned
            );

            let mut loaded = ptr::null_mut();
            assert_eq!(
                lshb_index_load(path.as_ptr(), 3, 0, &mut loaded),
                LshbStatus::LshbOk
            );
            let mut dup = -1;
            assert_eq!(
                lshb_index_query_text(loaded, text.as_ptr(), &mut dup),
                LshbStatus::LshbOk
            );
            assert_eq!(dup, 1);
            lshb_index_free(loaded);
        }
    }

    #[test]
    fn corrupt_file_reports_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path_buf = dir.path().join("index.lshb");
        let path = c(path_buf.to_str().unwrap());
        unsafe {
            let idx = new_index();
            assert_eq!(lshb_index_save(idx, path.as_ptr()), LshbStatus::LshbOk);
            lshb_index_free(idx);

            let mut bytes = std::fs::read(&path_buf).unwrap();
            let mid = bytes.len() / 2;
            bytes[mid] ^= 0xFF;
            std::fs::write(&path_buf, &bytes).unwrap();

            let mut loaded = ptr::null_mut();
            assert_eq!(
                lshb_index_load(path.as_ptr(), 3, 0, &mut loaded),
                LshbStatus::LshbErrFormat
            );
            assert!(loaded.is_null());
            let msg = CStr::from_ptr(lshb_last_error_message());
            assert!(!msg.to_bytes().is_empty());
        }
    }

    #[test]
    fn error_paths_are_reported() {
        unsafe {
            // null pointers
            assert_eq!(
                lshb_index_new(0.8, 128, 10, 1e-5, 1, 3, 0, ptr::null_mut()),
                LshbStatus::LshbErrBadPointer
            );
            let mut dup = 0;
            assert_eq!(
                lshb_index_query_text(ptr::null(), c("x").as_ptr(), &mut dup),
                LshbStatus::LshbErrBadPointer
            );

            // invalid parameter
            let mut handle = ptr::null_mut();
            assert_eq!(
                lshb_index_new(1.5, 128, 10, 1e-5, 1, 3, 0, &mut handle),
                LshbStatus::LshbErrInvalidArg
            );

            // empty document
            let idx = new_index();
            assert_eq!(
                lshb_index_insert_text(idx, c("   ").as_ptr()),
                LshbStatus::LshbErrEmptyDocument
            );

            // missing file
            let mut loaded = ptr::null_mut();
            assert_eq!(
                lshb_index_load(c("/no/such/index.lshb").as_ptr(), 3, 0, &mut loaded),
                LshbStatus::LshbErrIo
            );
            lshb_index_free(idx);
        }
    }
}
