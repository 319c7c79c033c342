//! Compiles and runs a small C program against the generated header and the
//! static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "smoothsgd.h"

int main(void) {
    SsgObjective *obj = NULL;
    SsgNoise *noise = NULL;
    SsgView *view = NULL;
    SsgJet jet;
    double vstar = 0.0;
    char msg[128];

    if (ssg_objective_new(SSG_OBJECTIVE_KIND_ASYM_QUAD_BUMP, 0.3, &obj) != SSG_STATUS_OK) return 10;
    if (ssg_noise_new(SSG_NOISE_KIND_UNIFORM, 1.0, 0.0, &noise) != SSG_STATUS_OK) return 11;
    if (ssg_view_new(obj, noise, 0.3, &view) != SSG_STATUS_OK) return 12;
    ssg_noise_free(noise);
    ssg_objective_free(obj);

    if (ssg_view_smoothed(view, 1.0, &jet) != SSG_STATUS_OK) return 13;
    if (fabs(jet.value - 0.09 / 6.0) > 1e-12) return 14;
    if (ssg_view_minimize(view, -1.0, 2.0, &vstar) != SSG_STATUS_OK) return 15;
    if (fabs(vstar - 1.0) > 1e-3) return 16;
    if (ssg_view_phi(view, 0.0, &vstar) != SSG_STATUS_REGIME_VIOLATION) return 17;
    if (ssg_last_error(msg, sizeof msg) == 0) return 18;
    ssg_view_free(view);
    printf("ok %s\n", ssg_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/c_header-<hash>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    let lib_dir = target_dir();
    let staticlib = lib_dir.join("libsmoothsgd_ffi.a");
    assert!(staticlib.exists(), "missing {}", staticlib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let work = tempfile_dir();
    let src = work.join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = work.join("main");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}

fn tempfile_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_header");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
