//! Compiles and links a small C program against the generated header and
//! the static library. Skipped when no C compiler is on PATH.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "knowsearch.h"

int main(void) {
    double f1 = 0.0;
    if (ks_token_f1("The Eiffel Tower", "eiffel tower", &f1) != KS_STATUS_OK || f1 != 1.0) return 1;

    const char *golds[] = {"2"};
    KsRewardBreakdown r;
    if (ks_score_trajectory("<think>x</think><answer>\\boxed{2}</answer>", golds, 1, 0.7, &r) != KS_STATUS_OK)
        return 2;
    if (r.reward != 1.0 || r.branch != KS_REWARD_BRANCH_DIRECT_ANSWER) return 3;

    if (ks_score_trajectory("<think>", golds, 1, 0.7, &r) != KS_STATUS_PARSE) return 4;
    if (ks_last_error_message() == NULL) return 5;

    KsWorld *world = NULL;
    if (ks_world_generate(6, 6, 1, 0.0, 0.0, 3, &world) != KS_STATUS_OK) return 6;
    KsPolicy *policy = NULL;
    if (ks_train(world, "steps = 5", &policy) != KS_STATUS_OK) return 7;
    KsMetrics m;
    if (ks_evaluate(policy, world, &m) != KS_STATUS_OK || m.n != 12) return 8;
    ks_policy_free(policy);
    ks_world_free(world);
    printf("ok %s\n", ks_version());
    return 0;
}
"#;

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
}

/// `target/<profile>`, found from this test binary's location.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = profile_dir().join("libknowsearch_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let build = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(
        build.status.success(),
        "{}",
        String::from_utf8_lossy(&build.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{:?}", run);
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
