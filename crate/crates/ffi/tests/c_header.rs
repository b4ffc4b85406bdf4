//! Compiles a C program against the generated header and links it to the
//! shared library built alongside this test.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "ser.h"

int main(void) {
    double daily[2] = {0.1, -0.1};
    double weekly = 0.0;
    if (ser_compound_weekly(daily, 2, &weekly) != SER_STATUS_OK) return 1;
    if (fabs(weekly - (1.1 * 0.9 - 1.0)) > 1e-15) return 2;
    if (ser_compound_weekly(daily, 0, &weekly) != SER_STATUS_DOMAIN) return 3;
    if (ser_last_error() == NULL) return 4;
    SerCheckpoint *h = NULL;
    if (ser_checkpoint_load("/nonexistent/ckpt.json", &h) != SER_STATUS_IO || h != NULL) return 5;
    printf("%s\n", ser_version());
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libser_ffi.so");
    if !cfg!(target_os = "linux") || !lib.exists() {
        eprintln!("skipping: no shared library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .arg(format!("-L{}", profile_dir.display()))
        .arg("-lser_ffi")
        .arg("-lm")
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .status()
        .expect("cc not found");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), env!("CARGO_PKG_VERSION"));
}
