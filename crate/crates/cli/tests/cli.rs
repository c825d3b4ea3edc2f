use std::path::Path;
use std::process::{Command, Output};

fn radhar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radhar"))
        .args(args)
        .env_remove("RADHAR_CONFIG")
        .env_remove("RADHAR_SEED")
        .env_remove("RADHAR_OUT")
        .env_remove("RADHAR_JOBS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn help_lists_global_flags() {
    let out = radhar(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--config", "--seed", "--out", "--jobs", "dynamic-eval", "static-eval"] {
        assert!(text.contains(flag), "help lacks {flag}");
    }
}

#[test]
fn invalid_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for json in [
        r#"{"static": {"tracker": {"tau": 1.5}}}"#,
        r#"{"seed": 1, "no_such_key": true}"#,
        r#"{"dynamic": {"snr_db": "loud"}}"#,
        "{ not json",
    ] {
        let cfg = write_config(dir.path(), json);
        let r = radhar(&["--config", &cfg, "--out", out, "static-eval"]);
        assert_eq!(r.status.code(), Some(2), "config {json}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(String::from_utf8_lossy(&r.stderr).starts_with("radhar: "));
    }
    assert_eq!(radhar(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.rdt");
    let r = radhar(&["--out", dir.path().to_str().unwrap(), "score", "--input", missing.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn dynamic_eval_is_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"dynamic": {"snr_db": [10, -5], "write_images": false}}"#);
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let r = radhar(&["--config", &cfg, "--seed", "11", "--out", out.to_str().unwrap(), "dynamic-eval"]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        csvs.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);

    let path = dir.path().join("a/metrics.csv");
    let methods = csv_column(&path, "method");
    assert_eq!(methods.len(), 10);
    assert_eq!(&methods[..5], ["NS", "EBD", "ATh", "APr", "APr+ATh"]);
    let snrs = csv_column(&path, "snr_db");
    assert!(snrs[..5].iter().all(|s| s.parse::<f64>().unwrap() == 10.0));
    assert!(snrs[5..].iter().all(|s| s.parse::<f64>().unwrap() == -5.0));
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("snr_db,method,mse,mae,rmse,psnr_db,pearson,ssim\n"));
}

#[test]
fn static_eval_coasts_through_dropout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = radhar(&["--out", out.to_str().unwrap(), "--jobs", "2", "static-eval"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let modes = csv_column(&out.join("track.csv"), "mode");
    assert_eq!(modes.len(), 40);
    let coasting: Vec<usize> = modes.iter().enumerate().filter(|(_, m)| *m == "coasting").map(|(i, _)| i).collect();
    assert_eq!(coasting, [12, 13, 14, 24, 25, 26, 27, 28]);
    let manifest = std::fs::read_to_string(out.join("MANIFEST")).unwrap();
    for stage in ["synth", "score", "track", "mask"] {
        assert!(manifest.lines().any(|l| l == stage), "manifest lacks {stage}");
    }
}

#[test]
fn zero_tau_accepts_every_frame() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"static": {"tracker": {"tau": 0.0}, "write_overlays": false}}"#,
    );
    let out = dir.path().join("out");
    let r = radhar(&["--config", &cfg, "--out", out.to_str().unwrap(), "static-eval"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let modes = csv_column(&out.join("track.csv"), "mode");
    assert!(modes.iter().all(|m| m == "accepted"), "{modes:?}");
}

#[test]
fn synth_then_score_and_track() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert!(radhar(&["--out", o, "synth", "--kind", "blobs"]).status.success());
    let frames = out.join("ra_frames.rdt");
    assert!(frames.exists() && out.join("ra_frames.rdt.json").exists() && out.join("truth.csv").exists());
    let f = frames.to_str().unwrap();
    let scored = dir.path().join("scored");
    assert!(radhar(&["--out", scored.to_str().unwrap(), "score", "--input", f]).status.success());
    assert_eq!(csv_column(&scored.join("scores.csv"), "S").len(), 40);
    let tracked = dir.path().join("tracked");
    assert!(radhar(&["--out", tracked.to_str().unwrap(), "track", "--input", f]).status.success());
    assert!(tracked.join("hard_masks.rdt").exists());
    let rendered = dir.path().join("rendered");
    assert!(radhar(&["--out", rendered.to_str().unwrap(), "render", "--input", f]).status.success());
    assert!(rendered.join("ra_frames_039.pgm").exists());
}
