//! Compiles and runs a small C program against the generated header and the
//! shared library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "treebec.h"

int main(void) {
    double a, mu, v;
    if (treebec_a_mu(3.0, 3, &a, &mu) != TREEBEC_STATUS_OK) return 10;
    if (fabs(a - 0.5) > 1e-15 || fabs(mu - 1.5) > 1e-15) return 11;
    if (treebec_a_mu(1.0, 3, &a, &mu) != TREEBEC_STATUS_DOMAIN) return 12;
    if (treebec_last_error()[0] == '\0') return 13;
    TreebecModel *m = NULL;
    if (treebec_model_new(TREEBEC_KIND_SUBTREE, 3, 2, 4, &m) != TREEBEC_STATUS_OK) return 14;
    if (treebec_lambda_max(m, 1e-10, &v) != TREEBEC_STATUS_OK) return 15;
    printf("%zu %.12f %s\n", (size_t)treebec_model_vertex_count(m), v, treebec_version());
    treebec_model_free(m);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> -> target/<profile>
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    assert!(lib_dir.join("libtreebec_ffi.so").exists(), "shared library missing in {}", lib_dir.display());
    let work = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = work.join("smoke.c");
    let exe = work.join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .args(["-ltreebec_ffi", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler is installed");
    assert!(status.success());
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut parts = text.split_whitespace();
    assert_eq!(parts.next(), Some("46"));
    let lmax: f64 = parts.next().unwrap().parse().unwrap();
    assert!(lmax > 2.0 * 2f64.sqrt() && lmax < 3.5);
    assert_eq!(parts.next(), Some(env!("CARGO_PKG_VERSION")));
}
