//! Compiles a small C program against the generated header and links it to
//! the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "lm_forecast.h"

int main(void) {
    LmfCounts c;
    if (lmf_split_block(6312, 0.30, 0.35, 0.35, &c) != LMF_STATUS_OK) return 1;
    if (c.train != 1894 || c.validation != 2209 || c.test != 2209) return 2;

    LmfSynthParams p = lmf_synth_params_default();
    p.n = 300;
    LmfSeries *s = NULL;
    if (lmf_series_synth(&p, &s) != LMF_STATUS_OK) return 3;

    LmfSessionConfig cfg = lmf_session_config_default();
    cfg.max_epochs = 10;
    LmfSession *session = NULL;
    if (lmf_session_run(s, &cfg, &session) != LMF_STATUS_OK) {
        fprintf(stderr, "%s\n", lmf_last_error_message());
        return 4;
    }
    LmfMetrics m;
    if (lmf_session_metrics(session, LMF_SPLIT_TEST, &m) != LMF_STATUS_OK) return 5;
    if (!(m.accuracy > 0.0) || fabs(m.accuracy + m.mape - 100.0) > 0.0) return 6;

    if (lmf_series_load_csv("/no/such/file.csv", "hr_bpm", &s) != LMF_STATUS_NOT_FOUND) return 7;
    printf("ok %zu %.4f\n", m.samples, m.accuracy);
    lmf_session_free(session);
    lmf_series_free(s);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests/<binary> lives in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = target_dir();
    let staticlib = lib_dir.join("liblm_forecast_ffi.a");
    assert!(staticlib.exists(), "missing {}", staticlib.display());

    let work = tempfile_dir();
    let src = work.join("main.c");
    let exe = work.join("main");
    std::fs::write(&src, PROGRAM).unwrap();

    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("run cc");
    assert!(status.success());

    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
    std::fs::remove_dir_all(work).unwrap();
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("lmf-c-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
