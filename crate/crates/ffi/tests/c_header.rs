//! Compiles a small C program against the generated header and static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "sipsgraph.h"

int main(void) {
    SgGraph *g = NULL;
    if (sg_graph_generate_tree(2, 2, &g) != SG_STATUS_OK) return 1;
    size_t n = 0, m = 0;
    sg_graph_node_count(g, &n);
    sg_graph_edge_count(g, &m);
    SgGraph *bad = NULL;
    SgStatus st = sg_graph_generate_tree(1, 2, &bad);
    const char *msg = sg_last_error_message();
    double y[2] = {0.5, 0.5}, o[2] = {0.0, 0.0}, v = 0.0;
    sg_kernel_eval(SG_KERNEL_NEG_POINCARE, y, o, 2, &v);
    printf("%zu %zu %d %d %.12f\n", n, m, (int)st, msg != NULL, v);
    sg_graph_free(g);
    return 0;
}
"#;

fn staticlib() -> Option<PathBuf> {
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let target = tmp.parent()?.to_path_buf();
    ["debug", "release"].iter().map(|p| target.join(p).join("libsipsgraph_ffi.a")).find(|p| p.exists())
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok())
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let lib = staticlib().expect("static library is built alongside the tests");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "7 10 3 1 -1.762747174039");
}
