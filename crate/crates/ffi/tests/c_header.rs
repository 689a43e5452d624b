//! Compiles a small C program against the generated header and the static
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "ssl_lab.h"

int main(void) {
    size_t dims[2] = {8, 12};
    SslDataset *data = NULL;
    if (ssl_synth_generate(3, 20, dims, 2, 0.1, 0.8, 7, &data) != SSL_STATUS_OK) return 10;
    SslSplit *split = NULL;
    if (ssl_split_holdout(data, 5, 1.0, 0.5, 0, 1, &split) != SSL_STATUS_OK) return 11;
    double map = 0.0;
    if (ssl_run_method("svm_linear", data, split, &map) != SSL_STATUS_OK) return 12;
    if (!(map > 0.0 && map <= 1.0)) return 13;
    if (ssl_run_method("bogus", data, split, &map) != SSL_STATUS_CONFIG) return 14;
    char msg[256];
    if (ssl_last_error_message(msg, sizeof msg) == 0) return 15;
    printf("%s\n", msg);
    ssl_split_free(split);
    ssl_dataset_free(data);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    // target/<profile>/deps/<test-binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libssl_lab_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "smoke program exited with {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("unknown method"), "{stdout}");
}
