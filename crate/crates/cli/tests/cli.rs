use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssct::export::read_pgm16;
use ssct::signal::read_field;

fn ssct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssct"))
        .args(args)
        .output()
        .expect("run ssct")
}

fn ok(args: &[&str]) -> String {
    let out = ssct(args);
    assert!(
        out.status.success(),
        "ssct {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn manifest_value(dir: &Path, key: &str) -> Option<String> {
    let text = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

/// Every listed output exists, has the recorded size and parses.
fn check_outputs(dir: &Path) {
    let text = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    let mut n = 0;
    for line in text.lines().filter_map(|l| l.strip_prefix("output=")) {
        let (name, bytes) = line.split_once(" bytes=").unwrap();
        let path = dir.join(name);
        let data = fs::read(&path).unwrap();
        assert_eq!(data.len().to_string(), bytes, "{name}");
        if name.ends_with(".ssct") {
            read_field(&path).unwrap();
        } else if name.ends_with(".pgm") {
            read_pgm16(&data).unwrap();
        } else if name.ends_with(".csv") {
            let text = String::from_utf8(data).unwrap();
            let cols = text.lines().next().unwrap().split(',').count();
            assert!(text.lines().all(|l| l.split(',').count() == cols), "{name}");
        }
        n += 1;
    }
    assert!(n > 0);
}

fn small_preset(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("preset.json");
    fs::write(&p, body).unwrap();
    p
}

const WAVES64: &str = r#"{
  "name": "waves64", "version": 1, "side": 64, "seed": 4,
  "components": [
    { "phase": { "c1": 1.0, "c2": 0.0, "n": 12.0 } },
    { "phase": { "c1": 0.0, "c2": 1.0, "n": 20.0, "terms": [{ "amp": 0.02, "k": [1.0, 0.0] }] } }
  ]
}"#;

#[test]
fn synth_then_estimate_reports_small_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    let e = dir.path().join("e");
    ok(&[
        "--out",
        s.to_str().unwrap(),
        "synth",
        "--preset",
        "example1",
    ]);
    check_outputs(&s);
    let stdout = ok(&[
        "--out",
        e.to_str().unwrap(),
        "--quiet",
        "estimate",
        "--input",
        s.join("field.ssct").to_str().unwrap(),
        "--truth",
        s.join("truth_01.csv").to_str().unwrap(),
    ]);
    assert!(stdout.is_empty());
    let max: f64 = manifest_value(&e, "max_R0").unwrap().parse().unwrap();
    assert!(max <= 0.05, "{max}");
    check_outputs(&e);
}

#[test]
fn estimate_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let preset = small_preset(dir.path(), WAVES64);
    let stdout = ok(&[
        "--out",
        dir.path().join("e").to_str().unwrap(),
        "estimate",
        "--preset",
        preset.to_str().unwrap(),
    ]);
    let line = stdout.lines().next().unwrap();
    assert!(line.starts_with("max_R0="), "{line}");
}

#[test]
fn decompose_two_component_preset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    ok(&[
        "--out",
        d.to_str().unwrap(),
        "decompose",
        "--preset",
        "example2",
    ]);
    assert_eq!(manifest_value(&d, "modes").as_deref(), Some("2"));
    for k in [
        "mode_001_best_component_error",
        "mode_002_best_component_error",
    ] {
        let e: f64 = manifest_value(&d, k).unwrap().parse().unwrap();
        assert!(e <= 0.15, "{k} = {e}");
    }
    assert!(d.join("mode_001.ssct").exists() && d.join("mode_002.ssct").exists());
    check_outputs(&d);
}

#[test]
fn manifests_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let preset = small_preset(dir.path(), WAVES64);
    let mut manifests = Vec::new();
    for threads in ["1", "3"] {
        let d = dir.path().join(format!("t{threads}"));
        ok(&[
            "--out",
            d.to_str().unwrap(),
            "--threads",
            threads,
            "decompose",
            "--preset",
            preset.to_str().unwrap(),
            "--snr",
            "10",
        ]);
        check_outputs(&d);
        assert!(fs::read_to_string(d.join("run.log"))
            .unwrap()
            .contains("started_unix="));
        let m = fs::read_to_string(d.join("manifest.txt")).unwrap();
        manifests.push(m.replace(&format!("\"threads\":{threads}"), ""));
        let field = fs::read(d.join("mode_001.ssct")).unwrap();
        manifests.push(format!("{:?}", &field[..]));
    }
    assert_eq!(manifests[0], manifests[2]);
    assert_eq!(manifests[1], manifests[3]);
}

#[test]
fn forward_reports_tight_frame() {
    let dir = tempfile::tempdir().unwrap();
    let preset = small_preset(dir.path(), WAVES64);
    let d = dir.path().join("f");
    ok(&[
        "--out",
        d.to_str().unwrap(),
        "forward",
        "--preset",
        preset.to_str().unwrap(),
        "--wave-packet",
    ]);
    let dev: f64 = manifest_value(&d, "energy_deviation")
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev < 1e-10, "{dev}");
    check_outputs(&d);
}

#[test]
fn bench_compares_two_geometries() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("b");
    let stdout = ok(&["--out", d.to_str().unwrap(), "bench", "--preset", "banded1"]);
    assert!(stdout.contains("ssct") && stdout.contains("sswpt"));
    let ssct: f64 = manifest_value(&d, "ssct_max_error")
        .unwrap()
        .parse()
        .unwrap();
    let sswpt: f64 = manifest_value(&d, "sswpt_max_error")
        .unwrap()
        .parse()
        .unwrap();
    assert!(sswpt > ssct, "{sswpt} vs {ssct}");
    check_outputs(&d);
}

#[test]
fn snr_sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let preset = small_preset(dir.path(), WAVES64);
    let d = dir.path().join("w");
    ok(&[
        "--out",
        d.to_str().unwrap(),
        "--quiet",
        "snr-sweep",
        "--preset",
        preset.to_str().unwrap(),
        "--snr-list",
        "inf,-3",
        "--delta-list",
        "0,0.5",
        "--seeds",
        "1,2",
    ]);
    assert_eq!(manifest_value(&d, "rows").as_deref(), Some("4"));
    let table = fs::read_to_string(d.join("sweep.csv")).unwrap();
    assert!(table.starts_with("snr_db,delta,seed,max_error,mean_error,evaluated"));
    check_outputs(&d);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let preset = small_preset(dir.path(), WAVES64);
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"preset": {:?}, "decompose": {{"tiling": {{"side": 64, "s": 0.625, "t": 0.875}}, "epsilon": 1e-3}}, "out": {:?}}}"#,
            preset.to_str().unwrap(),
            dir.path().join("ignored").to_str().unwrap()
        ),
    )
    .unwrap();
    let d = dir.path().join("c");
    ok(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d.to_str().unwrap(),
        "--quiet",
        "decompose",
        "--delta",
        "0.25",
    ]);
    let config = manifest_value(&d, "config").unwrap();
    assert!(
        config.contains("\"epsilon\":0.001") && config.contains("\"mass_threshold\":0.25"),
        "{config}"
    );
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"preset": "example1", "colour": "blue"}"#).unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    for args in [
        vec!["--config", cfg.to_str().unwrap(), "--out", o, "synth"],
        vec!["--out", o, "estimate", "--preset", "no-such-preset"],
        vec!["--out", o, "estimate"],
        vec!["--out", o, "estimate", "--input", "/nonexistent/field.ssct"],
        vec![
            "--out",
            o,
            "decompose",
            "--preset",
            "example2",
            "--epsilon",
            "-1",
        ],
        vec!["--out", o, "frobnicate"],
    ] {
        let r = ssct(&args);
        assert_eq!(
            r.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&r.stderr)
        );
        assert!(!r.stderr.is_empty());
    }
}

#[test]
fn numerical_failure_exits_3() {
    // Noise cannot be calibrated against a constant field.
    let dir = tempfile::tempdir().unwrap();
    let preset = small_preset(
        dir.path(),
        r#"{"name": "flat", "version": 1, "side": 32, "seed": 1, "snr_db": 0.0,
            "components": [{ "phase": { "c1": 0.0, "c2": 0.0, "n": 0.0 } }]}"#,
    );
    let r = ssct(&[
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "synth",
        "--preset",
        preset.to_str().unwrap(),
    ]);
    assert_eq!(
        r.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}
