use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn narxid(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_narxid"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NARXID_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn failed(out: &Output) -> String {
    assert!(!out.status.success(), "expected failure");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn mape_of(stdout: &str) -> f64 {
    let line = stdout.lines().find(|l| l.starts_with("MAPE:")).expect("MAPE line");
    line.trim_start_matches("MAPE:").trim_end_matches('%').trim().parse().unwrap()
}

#[test]
fn presets_list_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok(&narxid(&["presets", "list"], dir.path()));
    for name in ["heating-narx", "bouc-wen-narx", "valve-narx", "valve-bouc-wen", "valve-narx-compensation", "valve-inverse", "heating", "bouc-wen", "valve"] {
        assert!(s.contains(name), "{name}");
    }
    let s = ok(&narxid(&["presets", "show", "heating-narx"], dir.path()));
    assert!(s.contains("u(k-2)^2"));
    let s = ok(&narxid(&["presets", "show", "bouc-wen"], dir.path()));
    assert!(s.contains("kind = \"bouc-wen\""));
    failed(&narxid(&["presets", "show", "nope"], dir.path()));
}

#[test]
fn design_input_is_reproducible_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&narxid(&["design-input", "--preset", "heating", "--out", "a"], p));
    ok(&narxid(&["design-input", "--preset", "heating", "--out", "b"], p));
    ok(&narxid(&["design-input", "--preset", "heating", "--seed", "7", "--out", "c"], p));
    let a = fs::read_to_string(p.join("a/input.csv")).unwrap();
    let b = fs::read_to_string(p.join("b/input.csv")).unwrap();
    let c = fs::read_to_string(p.join("c/input.csv")).unwrap();
    assert_eq!(a.lines().count(), 2001);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let log = fs::read_to_string(p.join("c/design-input.log")).unwrap();
    assert!(log.contains("seed 7") && log.contains("seed = 7"));
    // 17 significant digits
    let sample = a.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert_eq!(sample.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&narxid(&["presets", "export", "heating", "heating.toml"], p));
    let text = fs::read_to_string(p.join("heating.toml")).unwrap();

    let short = text.replace("segment_lengths = [1000, 1000]", "segment_lengths = [1000, 2]");
    assert_ne!(short, text);
    fs::write(p.join("short.toml"), short).unwrap();
    let err = failed(&narxid(&["design-input", "--config", "short.toml"], p));
    assert!(err.contains("segment"), "{err}");

    let typo = text.replace("noise_ratio = 0.05", "noise_ratio = oops");
    fs::write(p.join("typo.toml"), typo).unwrap();
    let err = failed(&narxid(&["design-input", "--config", "typo.toml"], p));
    assert!(err.contains("line"), "{err}");

    let err = failed(&narxid(&["design-input", "--config", "missing.toml"], p));
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_narxid"))
        .args(["design-input", "--preset", "heating"])
        .current_dir(dir.path())
        .env("NARXID_OUTPUT_DIR", "from-env")
        .output()
        .unwrap();
    ok(&out);
    assert!(dir.path().join("from-env/input.csv").exists());
}

#[test]
fn identify_then_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let s = ok(&narxid(&["identify", "--preset", "heating", "--out", "id"], p));
    assert!(s.contains("AIC minimum at"));
    for f in ["model.toml", "err.csv", "aic.csv", "estimation.toml", "report.txt", "data.csv"] {
        assert!(p.join("id").join(f).exists(), "{f}");
    }
    let s = ok(&narxid(&["validate", "--preset", "heating", "--model", "id/model.toml", "--out", "id"], p));
    let m = mape_of(&s);
    assert!(m.is_finite() && m < 2.0, "{m}");
    let csv = fs::read_to_string(p.join("id/prediction.csv")).unwrap();
    assert!(csv.starts_with("k,reference,prediction"));
    let s = ok(&narxid(
        &["validate", "--model", "id/model.toml", "--data", "id/data.csv", "--mode", "one-step", "--out", "id"],
        p,
    ));
    assert!(mape_of(&s) < 2.0);
}

#[test]
fn perfect_model_validates_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&narxid(&["presets", "export", "heating-narx", "m.toml"], p));
    ok(&narxid(&["design-input", "--preset", "heating", "--out", "."], p));
    ok(&narxid(&["simulate", "--model", "m.toml", "--input", "input.csv", "--out", "."], p));
    let s = ok(&narxid(&["validate", "--model", "m.toml", "--data", "simulation.csv", "--out", "."], p));
    assert_eq!(mape_of(&s), 0.0);
}

#[test]
fn simulate_writes_noisy_and_validation_records() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&narxid(&["simulate", "--preset", "heating", "--out", "."], p));
    ok(&narxid(&["simulate", "--preset", "heating", "--validation", "--out", "."], p));
    let data = fs::read_to_string(p.join("data.csv")).unwrap();
    let val = fs::read_to_string(p.join("validation.csv")).unwrap();
    assert!(data.starts_with("k,u,y"));
    assert_eq!(data.lines().count(), 2001);
    assert_ne!(data, val);
}

#[test]
fn valve_experiment_needs_its_data() {
    let dir = tempfile::tempdir().unwrap();
    let err = failed(&narxid(&["identify", "--preset", "valve"], dir.path()));
    assert!(err.contains("experimental data not distributed"), "{err}");
}

#[test]
fn sine_validation_against_catalog_plant() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok(&narxid(
        &[
            "validate",
            "--preset-model",
            "valve-narx",
            "--sine",
            "0.45,0.1,0,3,3000",
            "--reference",
            "valve-bouc-wen",
            "--out",
            ".",
        ],
        dir.path(),
    ));
    assert!(mape_of(&s).is_finite());
}

#[test]
fn monte_carlo_replays_with_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = |out: &'static str| ["monte-carlo", "--preset", "heating", "--ratios", "0,10", "--trials", "2", "--seed", "5", "--out", out];
    ok(&narxid(&args("a"), p));
    ok(&narxid(&args("b"), p));
    let a = fs::read_to_string(p.join("a/monte_carlo.csv")).unwrap();
    let b = fs::read_to_string(p.join("b/monte_carlo.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("ratio,mean_mape,std_mape,failures"));
    assert_eq!(a.lines().count(), 3);
    failed(&narxid(&["monte-carlo", "--preset", "heating", "--ratios", "30,0"], p));
}
