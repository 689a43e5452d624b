use std::ffi::{c_char, CStr, CString};
use std::ptr;

use ssl_lab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { ssl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    assert_eq!(s.len(), n.min(255));
    s
}

fn dataset(seed: u64) -> *mut SslDataset {
    let dims = [8usize, 12];
    let mut out = ptr::null_mut();
    let status = unsafe { ssl_synth_generate(3, 20, dims.as_ptr(), dims.len(), 0.1, 0.8, seed, &mut out) };
    assert_eq!(status, SslStatus::Ok, "{}", last_error());
    out
}

#[test]
fn synth_split_and_run() {
    let data = dataset(1);
    unsafe {
        assert_eq!(ssl_dataset_sample_count(data), 60);
        assert_eq!(ssl_dataset_class_count(data), 3);
        let mut split = ptr::null_mut();
        assert_eq!(ssl_split_holdout(data, 5, 1.0, 0.5, 0, 3, &mut split), SslStatus::Ok);
        let (mut l, mut u, mut t) = (0, 0, 0);
        assert_eq!(ssl_split_sizes(split, &mut l, &mut u, &mut t), SslStatus::Ok);
        assert_eq!(l, 15);
        assert_eq!(l + u + t, 60);
        let method = CString::new("svm_chi2").unwrap();
        let mut map = f64::NAN;
        assert_eq!(ssl_run_method(method.as_ptr(), data, split, &mut map), SslStatus::Ok);
        assert!(map > 0.0 && map <= 1.0);
        assert_eq!(last_error(), "");
        ssl_split_free(split);
        ssl_dataset_free(data);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let data = dataset(2);
    unsafe {
        let mut split = ptr::null_mut();
        assert_eq!(ssl_split_holdout(data, 30, 1.0, 0.5, 0, 0, &mut split), SslStatus::Config);
        assert!(split.is_null());
        assert!(last_error().contains("insufficient"));

        assert_eq!(ssl_split_holdout(data, 2, 1.0, 0.5, 0, 0, &mut split), SslStatus::Ok);
        let bogus = CString::new("nope").unwrap();
        let mut map = 0.0;
        assert_eq!(ssl_run_method(bogus.as_ptr(), data, split, &mut map), SslStatus::Config);
        assert!(last_error().contains("svm_linear"));
        assert_eq!(ssl_run_method(ptr::null(), data, split, &mut map), SslStatus::InvalidArgument);
        let method = CString::new("svm_linear").unwrap();
        assert_eq!(ssl_run_method(method.as_ptr(), ptr::null(), split, &mut map), SslStatus::InvalidArgument);

        let missing = CString::new("/nonexistent/dir/data.csv").unwrap();
        let mut loaded = ptr::null_mut();
        assert_eq!(ssl_dataset_read_csv(missing.as_ptr(), &mut loaded), SslStatus::Io);

        ssl_split_free(split);
        ssl_dataset_free(data);
        ssl_dataset_free(ptr::null_mut());
    }
}

#[test]
fn csv_roundtrip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("d.csv").to_str().unwrap()).unwrap();
    let data = dataset(4);
    unsafe {
        assert_eq!(ssl_dataset_write_csv(data, path.as_ptr()), SslStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ssl_dataset_read_csv(path.as_ptr(), &mut back), SslStatus::Ok);
        assert_eq!(ssl_dataset_sample_count(back), 60);
        ssl_dataset_free(back);
        ssl_dataset_free(data);
    }
}

#[test]
fn average_precision_and_small_buffers() {
    let scores = [0.9, 0.8, 0.7, 0.6];
    let rel = [1u8, 0, 1, 0];
    let mut ap = 0.0;
    unsafe {
        assert_eq!(ssl_average_precision(scores.as_ptr(), rel.as_ptr(), 4, &mut ap), SslStatus::Ok);
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        let none = [0u8; 4];
        assert_eq!(ssl_average_precision(scores.as_ptr(), none.as_ptr(), 4, &mut ap), SslStatus::Evaluation);
        let full = ssl_last_error_message(ptr::null_mut(), 0);
        assert!(full > 4);
        let mut tiny = [1 as c_char; 4];
        assert_eq!(ssl_last_error_message(tiny.as_mut_ptr(), 4), full);
        assert_eq!(tiny[3], 0);
        assert_eq!(ssl_average_precision(ptr::null(), rel.as_ptr(), 4, &mut ap), SslStatus::InvalidArgument);
        let v = CStr::from_ptr(ssl_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn errors_are_thread_local() {
    let mut ap = 0.0;
    let none = [0u8; 1];
    unsafe {
        assert_eq!(ssl_average_precision([0.5].as_ptr(), none.as_ptr(), 1, &mut ap), SslStatus::Evaluation);
    }
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(!last_error().is_empty());
}
