//! C ABI over `ssl-lab`.
//!
//! Datasets and splits cross the boundary as opaque handles that the caller
//! frees with the matching `*_free` function. Every fallible call returns an
//! [`SslStatus`]; on failure the message is kept in a thread-local slot and
//! can be copied out with [`ssl_last_error_message`]. Panics are caught at
//! the boundary and reported as [`SslStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ssl_lab::data::make_holdout_split;
use ssl_lab::experiments::{average_precision, run_method, MethodConfig, MethodId};
use ssl_lab::synth::{generate, GroupSpec, SynthSpec};
use ssl_lab::{DescriptorSet, Error, SplitPlan};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SslStatus {
    Ok = 0,
    /// Null pointer, non-UTF-8 string or out-of-range argument.
    InvalidArgument = 1,
    /// Bad configuration, method id or split request.
    Config = 2,
    /// File could not be read or written, or had the wrong format.
    Io = 3,
    /// Singular system or failed solver.
    Numerical = 4,
    /// Evaluation undefined, e.g. a test set without positives.
    Evaluation = 5,
    /// Internal invariant violated or panic caught at the boundary.
    Internal = 6,
}

/// Synthetic dataset or one loaded from CSV.
pub struct SslDataset(DescriptorSet);

/// Labeled / unlabeled-train / test partition of a dataset.
pub struct SslSplit(SplitPlan);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> SslStatus {
    match err.root() {
        Error::Dimension(_) | Error::Domain(_) | Error::Parameter(_) | Error::Bounds { .. } => {
            SslStatus::InvalidArgument
        }
        Error::InsufficientData(_) | Error::DegenerateSplit(_) | Error::Config(_) => SslStatus::Config,
        Error::Input(_) | Error::Csv(_) | Error::Io(_) => SslStatus::Io,
        Error::Numerical { .. } | Error::DegenerateLabels(_) => SslStatus::Numerical,
        Error::UndefinedAp | Error::Evaluation(_) => SslStatus::Evaluation,
        _ => SslStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (SslStatus, String)>) -> SslStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SslStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside ssl-lab".into());
            SslStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (SslStatus, String) {
    (status_of(&e), e.to_string())
}

fn arg_err(msg: &str) -> (SslStatus, String) {
    (SslStatus::InvalidArgument, msg.to_string())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SslStatus, String)> {
    if p.is_null() {
        return Err(arg_err(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| arg_err(&format!("{what} is not valid UTF-8")))
}

unsafe fn read_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SslStatus, String)> {
    p.as_ref().ok_or_else(|| arg_err(&format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (SslStatus, String)> {
    if out.is_null() {
        return Err(arg_err("output pointer is null"));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ssl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns the full message
/// length in bytes. An empty message means the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ssl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Generates a synthetic dataset with `group_count` descriptor groups of
/// dimensions `dims`, all sharing `noise`.
///
/// # Safety
/// `dims` must point to `group_count` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssl_synth_generate(
    class_count: usize,
    samples_per_class: usize,
    dims: *const usize,
    group_count: usize,
    noise: f64,
    manifold_strength: f64,
    seed: u64,
    out: *mut *mut SslDataset,
) -> SslStatus {
    guard(|| {
        if dims.is_null() || group_count == 0 {
            return Err(arg_err("dims must hold at least one group"));
        }
        let groups = std::slice::from_raw_parts(dims, group_count)
            .iter()
            .map(|&dim| GroupSpec { dim, noise })
            .collect();
        let spec = SynthSpec::new(class_count, samples_per_class, groups, manifold_strength, seed);
        let data = generate(&spec).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(SslDataset(data))))
    })
}

/// Loads a dataset from the CSV layout written by [`ssl_dataset_write_csv`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ssl_dataset_read_csv(path: *const c_char, out: *mut *mut SslDataset) -> SslStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        let file = File::open(path).map_err(|e| lib_err(e.into()))?;
        let data = DescriptorSet::read_csv(BufReader::new(file)).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(SslDataset(data))))
    })
}

/// # Safety
/// `data` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ssl_dataset_write_csv(data: *const SslDataset, path: *const c_char) -> SslStatus {
    guard(|| {
        let data = read_ref(data, "dataset")?;
        let path = read_str(path, "path")?;
        let file = File::create(path).map_err(|e| lib_err(e.into()))?;
        data.0.write_csv(BufWriter::new(file)).map_err(lib_err)
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssl_dataset_sample_count(data: *const SslDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_samples())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssl_dataset_class_count(data: *const SslDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.class_count())
}

/// # Safety
/// `data` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssl_dataset_free(data: *mut SslDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Stratified split with a fixed held-out test share per class.
/// `unlabeled_fraction` selects the unlabeled-train part of the remaining
/// pool; `leak != 0` also appends the test ids to unlabeled-train.
///
/// # Safety
/// `data` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ssl_split_holdout(
    data: *const SslDataset,
    n_labeled_per_class: usize,
    unlabeled_fraction: f64,
    holdout_fraction: f64,
    leak: i32,
    seed: u64,
    out: *mut *mut SslSplit,
) -> SslStatus {
    guard(|| {
        let data = read_ref(data, "dataset")?;
        let plan = make_holdout_split(
            &data.0,
            n_labeled_per_class,
            unlabeled_fraction,
            holdout_fraction,
            leak != 0,
            seed,
        )
        .map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(SslSplit(plan))))
    })
}

/// Sizes of the labeled, unlabeled-train and test roles.
///
/// # Safety
/// `split` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssl_split_sizes(
    split: *const SslSplit,
    labeled: *mut usize,
    unlabeled: *mut usize,
    test: *mut usize,
) -> SslStatus {
    guard(|| {
        let plan = &read_ref(split, "split")?.0;
        write_out(labeled, plan.labeled_ids.len())?;
        write_out(unlabeled, plan.unlabeled_train_ids.len())?;
        write_out(test, plan.test_ids.len())
    })
}

/// # Safety
/// `split` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssl_split_free(split: *mut SslSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// Trains method `method` (e.g. `"svm_chi2"`, `"enpro"`) with its default
/// settings and writes the test-set mean average precision to `map`.
///
/// # Safety
/// Handles must be live, `method` NUL-terminated and `map` writable.
#[no_mangle]
pub unsafe extern "C" fn ssl_run_method(
    method: *const c_char,
    data: *const SslDataset,
    split: *const SslSplit,
    map: *mut f64,
) -> SslStatus {
    guard(|| {
        let id: MethodId = read_str(method, "method")?.parse().map_err(lib_err)?;
        let data = read_ref(data, "dataset")?;
        let split = read_ref(split, "split")?;
        let record = run_method(&MethodConfig::new(id), &data.0, &split.0).map_err(lib_err)?;
        write_out(map, record.map)
    })
}

/// Non-interpolated average precision of `scores` against 0/1 `relevance`.
///
/// # Safety
/// `scores` and `relevance` must point to `len` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ssl_average_precision(
    scores: *const f64,
    relevance: *const u8,
    len: usize,
    out: *mut f64,
) -> SslStatus {
    guard(|| {
        if len > 0 && (scores.is_null() || relevance.is_null()) {
            return Err(arg_err("scores and relevance must be non-null"));
        }
        let (s, r) = if len == 0 {
            (&[][..], Vec::new())
        } else {
            let r = std::slice::from_raw_parts(relevance, len).iter().map(|&v| v != 0).collect();
            (std::slice::from_raw_parts(scores, len), r)
        };
        write_out(out, average_precision(s, &r).map_err(lib_err)?)
    })
}
