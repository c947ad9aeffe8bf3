use feedbin_cli::config::{ExperimentConfig, FamilyConfig};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn feedbin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_feedbin"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"
[model]
alpha = 2.0
t0 = 1
tau0 = 2
family = { kind = "constant", value = 1 }

[run]
horizon = 100
reps = 2
master_seed = 5
"#;

#[test]
fn shipped_configs_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = ExperimentConfig::load(&path).unwrap();
        let text = cfg.to_toml().unwrap();
        let again = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        assert_eq!(text, again.to_toml().unwrap());
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn unknown_keys_are_rejected() {
    let bad = SMALL.replace("horizon = 100", "horizon = 100\nhorizn = 3");
    let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
    assert!(err.contains("horizn"), "{err}");
    let bad = SMALL.replace("value = 1 }", "value = 1, extra = 2 }");
    assert!(ExperimentConfig::parse(&bad).is_err());
    assert!(ExperimentConfig::parse(&SMALL.replace("tau0 = 2\n", "")).is_err());
    assert!(ExperimentConfig::parse(&SMALL.replace("alpha = 2.0", "alpha = 0.5")).is_err());
}

#[test]
fn custom_sigma_file_is_resolved_next_to_the_config() {
    let cfg = ExperimentConfig::load(&configs_dir().join("custom.toml")).unwrap();
    let FamilyConfig::Custom { sigma_file: Some(f), .. } = &cfg.model.family else {
        panic!("custom.toml should use sigma_file");
    };
    assert!(f.exists());
    let seq = cfg.sequence(6).unwrap();
    assert_eq!(seq.sigma(3).unwrap().to_u64(), Some(2980));
}

#[test]
fn smoke_simulation_is_fast_and_writes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let start = Instant::now();
    let status = feedbin()
        .args(["simulate", "--dump-trajectories", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(start.elapsed() < Duration::from_secs(1));
    assert_eq!(status.code(), Some(0));
    for f in ["summary.json", "records.csv", "trajectories/rep_000000.csv", "trajectories/rep_000001.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], "v1");
    assert_eq!(summary["config"]["run"]["reps"], 2);
    assert_eq!(summary["summary"]["reps"], 2);
    let traj = std::fs::read_to_string(out.join("trajectories/rep_000000.csv")).unwrap();
    assert_eq!(traj.lines().count(), 102);
    // no temporary files left behind
    let leftovers = std::fs::read_dir(&out).unwrap().filter(|e| {
        let name = e.as_ref().unwrap().file_name();
        name.to_string_lossy().starts_with(".tmp")
    });
    assert_eq!(leftovers.count(), 0);
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("reps = 2", "reps = 20"));
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let status = feedbin()
            .args(["simulate", "--dump-trajectories", "--threads", "2", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(out.join("records.csv")).unwrap(),
            std::fs::read(out.join("trajectories/rep_000007.csv")).unwrap(),
        )
    };
    let a = run("a", "9");
    let b = run("b", "9");
    let c = run("c", "10");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn float_switchover_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[model]
alpha = 2.0
family = { kind = "doubly-exponential-tau", b = 1.0, theta0 = 1.0, growth = 3.0 }

[run]
horizon = 16
reps = 4
"#;
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("out");
    let output = feedbin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("log representation"));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["summary"]["float_switch_step"].as_u64().is_some());
}

#[test]
fn classify_exit_codes() {
    let definite = feedbin()
        .args(["classify", "--config"])
        .arg(configs_dir().join("critical.toml"))
        .output()
        .unwrap();
    assert_eq!(definite.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&definite.stdout).unwrap();
    assert_eq!(v["monopoly"], "strictly-between");
    assert_eq!(v["provenance"]["theorem"], "critical-dichotomy");

    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[model]
alpha = 2.0
tau0 = 2
family = { kind = "custom", sigma = ["1", "3", "2", "5", "4", "7", "6", "9", "8", "11", "10", "13"] }

[analysis]
strict = true
classify_n_max = 10
"#;
    let cfg = write_config(dir.path(), body);
    let open = feedbin().args(["classify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(open.status.code(), Some(2));

    let missing = feedbin().args(["classify", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn verify_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = feedbin().args(["verify", "identity-1101", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("PASS identity-1101"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("verify-identity-1101.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);

    let unknown = feedbin().args(["verify", "no-such-id"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));

    let list = feedbin().arg("verify").output().unwrap();
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), 9);
}
