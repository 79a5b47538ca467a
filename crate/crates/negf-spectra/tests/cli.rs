use std::path::PathBuf;
use std::process::Command;

use negf_spectra::io::{emit_spectrum, run, sidecar_path, spectrum_csv};
use negf_spectra::kernels::{Axis, Spectrum, SpectrumMeta, Values};

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("negf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_negf"))
}

#[test]
fn sle_scan_end_to_end() {
    let out = scratch("sle.csv");
    let code = run(["negf", "sle", "--config", &data("kh3.json"), "--scan", "omega2:0.8:1.2:401", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(text.lines().next().unwrap(), "omega,value");
    assert_eq!(rows.len(), 401);
    let peak = rows.iter().cloned().fold((0.0, f64::MIN), |a, r| if r.1 > a.1 { r } else { a });
    assert!((peak.0 - 1.0).abs() <= 1e-3);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&out)).unwrap()).unwrap();
    assert_eq!(meta["axes"][0]["points"], 401);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let (a, b) = (scratch("a.csv"), scratch("b.csv"));
    for p in [&a, &b] {
        let code = run([
            "negf", "pump-probe", "--config", &data("fig3b.json"), "--scan", "omega1:0.9:1.1:7", "--scan", "omega2:0.7:0.9:5",
            "-o", p.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("# row-major"));
    assert_eq!(text.lines().nth(1).unwrap(), "omega1,omega2,value");
    assert_eq!(text.lines().count(), 2 + 35);
}

#[test]
fn spectrum_reemission_is_byte_identical() {
    let s = Spectrum::new(
        vec![Axis { name: "omega1".into(), values: vec![1.0, 2.0] }, Axis { name: "omega2".into(), values: vec![0.5] }],
        Values::Real(vec![0.25, 1.0 / 3.0]),
        SpectrumMeta::default(),
    )
    .unwrap();
    let p = scratch("two.csv");
    emit_spectrum(&s, &p).unwrap();
    let first = std::fs::read(&p).unwrap();
    emit_spectrum(&s, &p).unwrap();
    assert_eq!(first, std::fs::read(&p).unwrap());
    assert_eq!(String::from_utf8(first).unwrap(), spectrum_csv(&s));
    assert!(spectrum_csv(&s).contains("3.3333333333333331e-1"));
}

#[test]
fn diagrams_ascii_has_eight_blocks() {
    let o = bin().args(["diagrams", "--process", "pump-probe", "--scheme", &data("fig3b.json"), "--format", "ascii"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("loop")).count(), 8);
}

#[test]
fn diagrams_json_lists_loops() {
    let o = bin().args(["diagrams", "--process", "sle", "--scheme", &data("kh3.json"), "--format", "json"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["loops"].as_array().unwrap().len(), 1);
    assert_eq!(v["loops"][0]["feynman_count"], 3);
}

#[test]
fn validate_passes() {
    let o = bin().arg("validate").output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8(o.stdout).unwrap().contains("6 of 6 checks passed"));
}

#[test]
fn error_exit_codes() {
    let missing = bin().args(["sle", "--config", "/nonexistent.json", "--scan", "omega2:0.8:1.2:3"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let err = String::from_utf8(missing.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error kind=config code=2"));

    let bad = scratch("bad.json");
    let text = std::fs::read_to_string(data("kh3.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["dipole"][1][1] = serde_json::json!([0.5, 0.0]);
    std::fs::write(&bad, v.to_string()).unwrap();
    let o = bin().args(["sle", "--config", bad.to_str().unwrap(), "--scan", "omega2:0.8:1.2:3"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let o = bin()
        .args(["oracle", "--config", &data("kh3.json"), "--dt", "2.0", "--T", "10", "--scan", "omega_s:0.9:1.1:2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    let o = bin().args(["sle", "--config", &data("kh3.json"), "--scan", "omega2:0.8:1.2:1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated() {
    let o = bin().env("NEGF_THREADS", "zero").arg("validate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .env("NEGF_THREADS", "1")
        .args(["sle", "--config", &data("kh3.json"), "--scan", "omega2:0.9:1.1:5"])
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn ensemble_csv() {
    let o = bin().args(["ensemble", "--n", "12", "--s-i", "2", "--s-c", "0.5"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[0], 12.0);
    assert_eq!(row[3], 132.0);
    assert_eq!(row[4], 12.0 * 2.0 + 132.0 * 0.5);
}

#[test]
fn help_lists_subcommands() {
    let o = bin().arg("--help").output().unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    for c in ["sle", "pump-probe", "wave-mixing", "diagrams", "ensemble", "oracle", "validate"] {
        assert!(text.contains(c), "{c}");
    }
}
