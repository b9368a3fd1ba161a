mod common;

use std::fs;

use common::*;

#[test]
fn identical_runs_write_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, ea) = run_fixture("anosov-cert", "anosov-cert.toml", a.path());
    let cfg = fixture("anosov-cert.toml");
    let (cb, eb) = run(&["anosov-cert", "--config", cfg.to_str().unwrap(), "--threads", "2"], b.path());
    assert_eq!((ca, cb), (0, 0), "{ea}{eb}");
    let names = artifacts(a.path());
    assert_eq!(names, artifacts(b.path()));
    assert!(names.iter().any(|n| n == "certificate.json"));
    for n in &names {
        assert_eq!(
            fs::read(a.path().join(n)).unwrap(),
            fs::read(b.path().join(n)).unwrap(),
            "{n} differs between runs"
        );
    }
    assert_eq!(manifest(a.path())["config_hash"], manifest(b.path())["config_hash"]);
    assert_eq!(manifest(a.path())["artifacts"], manifest(b.path())["artifacts"]);
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = fixture("psl-conjugacy.toml");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(&["psl-conjugacy", "--config", cfg], a.path()).0, 0);
    assert_eq!(run(&["psl-conjugacy", "--config", cfg, "--seed", "8"], b.path()).0, 0);
    assert_eq!(manifest(b.path())["seed"], 8);
    assert_ne!(
        fs::read(a.path().join("psl_conjugacy.json")).unwrap(),
        fs::read(b.path().join("psl_conjugacy.json")).unwrap()
    );
    assert_ne!(manifest(a.path())["config_hash"], manifest(b.path())["config_hash"]);
}
