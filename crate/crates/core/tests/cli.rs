use std::path::Path;
use std::process::{Command, Output};

use orlicz_ps::harness::config::{CorpusSpec, ExperimentConfig};
use orlicz_ps::harness::corpus::{default_bodies, default_fields};
use orlicz_ps::harness::report::SuiteReport;
use orlicz_ps::orlicz::OrliczSpec;
use orlicz_ps::scalar_field::read_field;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orlicz-ps"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig {
        corpus: CorpusSpec {
            resolution: 40,
            fields: vec![default_fields()[0].clone(), default_fields()[7].clone()],
            bodies: default_bodies().into_iter().take(2).collect(),
            body_nodes: 128,
            ..CorpusSpec::default()
        },
        phis: vec![OrliczSpec::Power { p: 2.0 }],
        quadrature_count: 64,
        ..ExperimentConfig::default()
    };
    cfg.suites.approx_sdr_steps = 4;
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    path
}

#[test]
fn verify_writes_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let mut texts = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o =
            run(&["verify", "certificates", "--config", cfg, "--out", out.to_str().unwrap(), "--format", "json,csv"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("certificates"));
        assert!(out.join("certificates.csv").exists());
        texts.push(std::fs::read(out.join("certificates.json")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let report = SuiteReport::from_json(std::str::from_utf8(&texts[0]).unwrap()).unwrap();
    assert!(report.passed() && report.summary.cases > 0);
}

#[test]
fn verify_seed_changes_the_fingerprinted_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let mut seeds = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let o = run(&[
            "verify",
            "certificates",
            "--config",
            cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
            "--format",
            "json",
        ]);
        assert_eq!(o.status.code(), Some(0));
        let r = SuiteReport::from_json(&std::fs::read_to_string(out.join("certificates.json")).unwrap()).unwrap();
        seeds.push((r.environment.seed, r.environment.config_fingerprint));
    }
    assert_eq!((seeds[0].0, seeds[1].0), (1, 2));
    assert_ne!(seeds[0].1, seeds[1].1);
}

#[test]
fn bad_input_exits_with_code_two() {
    assert_eq!(run(&["verify", "no_such_suite"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "petty", "--format", "pdf"]).status.code(), Some(2));
    assert_eq!(run(&["field", "info", "/nonexistent.field"]).status.code(), Some(2));
}

#[test]
fn default_config_round_trips() {
    let o = run(&["default-config"]);
    assert!(o.status.success());
    let cfg = ExperimentConfig::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn corpus_and_field_tools() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let corpus = dir.path().join("corpus");
    let o = run(&["corpus", "generate", "--spec", cfg.to_str().unwrap(), "--out", corpus.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let field = corpus.join("radial_bump2.field");
    let f = read_field(&field).unwrap();
    assert_eq!(f.grid().resolution(), &[40, 40]);
    assert!(corpus.join("radial_bump2.field.json").exists());
    assert!(corpus.join("disk.body.json").exists());
    assert!(corpus.join("disk.csv").exists());

    let o = run(&["field", "info", field.to_str().unwrap()]);
    assert!(o.status.success());
    let info: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(info["support_cells"].as_u64().unwrap() as usize, f.support_count());

    let thin = corpus.join("bump_thin.field");
    let st = dir.path().join("st.field");
    let o = run(&["steiner", thin.to_str().unwrap(), "--direction", "1,-1", "--out", st.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = read_field(&st).unwrap();
    let src = read_field(&thin).unwrap();
    assert!((g.integral() - src.integral()).abs() < 0.05 * src.integral());

    let sd = dir.path().join("sdr.field");
    assert!(run(&["sdr", thin.to_str().unwrap(), "--out", sd.to_str().unwrap()]).status.success());
    let s = read_field(&sd).unwrap();
    assert_eq!(s.support_count(), src.support_count());

    let o = run(&["approx-sdr", thin.to_str().unwrap(), "--k", "4"]);
    assert!(o.status.success());
    let trace = String::from_utf8(o.stdout).unwrap();
    assert_eq!(trace.lines().count(), 1 + 4, "{trace}");

    let body = dir.path().join("ball.csv");
    let o = run(&["energy", field.to_str().unwrap(), "--nodes", "64", "--body-csv", body.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(e["energy"].as_f64().unwrap() > 0.0);
    assert!(body.exists());
}
