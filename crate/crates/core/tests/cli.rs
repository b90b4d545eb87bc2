//! End-to-end tests of the command-line pipeline and its exit-code contract:
//! 0 pass, 1 mathematical failure, 2 outside the uniqueness region, 64 config
//! error, 65 data error.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polygibbs"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("spawn polygibbs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const MODEL1_SMALL: &str = r#"{
    "model": {"type": "model1", "n": 1, "lambda": 0.02, "b": {"1": 1.0, "-1": 1.0}},
    "lattice": {"dim": 1, "L": [8], "bc": "torus"},
    "metric": {"alpha": 0.0},
    "sampler": {"sweeps": 700, "burnin": 100, "thin": 1, "seed": 4242},
    "analysis": {"observable": "tanh", "max_displacement": 2, "a": 1.0}
}"#;

#[test]
fn check_reports_threshold_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ok.json", MODEL1_SMALL);
    let out = run(&["check", "--config", &config, "--out", "report.json"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["conditions"]["cond_a_ok"], true);
    assert_eq!(report["conditions"]["cond_c_ok"], true);
    let gamma = report["dobrushin"]["gamma_d"].as_f64().unwrap();
    assert!(gamma > 0.0 && gamma <= 32.0);
    let threshold = report["dobrushin"]["threshold"].as_f64().unwrap();
    assert!(threshold >= 1.0 / 32.0);
    assert!(report["tolerances"]["ratio_optimizer_abs"].as_f64().unwrap() > 0.0);
    assert!(report["config_digest"].as_str().unwrap().len() == 64);

    // Same model at an absurd coupling: conditions hold, uniqueness does not.
    let hot = MODEL1_SMALL.replace("\"lambda\": 0.02", "\"lambda\": 10.0");
    let config = write_config(dir.path(), "hot.json", &hot);
    let out = run(&["check", "--config", &config, "--out", "hot.json.report"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn check_flags_condition_failures() {
    let dir = tempfile::tempdir().unwrap();
    // Odd pair potential u^3 violates convexity.
    let bad = r#"{
        "model": {"type": "custom", "F": [0.0, 0.0, 0.5], "G": {"1": [0.0, 0.0, 0.0, 1.0]}, "lambda": 0.1},
        "lattice": {"dim": 1, "L": [8], "bc": "torus"},
        "sampler": {"sweeps": 100, "seed": 1}
    }"#;
    let config = write_config(dir.path(), "bad.json", bad);
    let out = run(&["check", "--config", &config, "--out", "bad_report.json"], dir.path());
    assert_eq!(code(&out), 1);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bad_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["conditions"]["cond_b_ok"], false);
}

#[test]
fn malformed_config_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "broken.json", "{ not json");
    for sub in ["check", "verify"] {
        let out = run(&[sub, "--config", &config], dir.path());
        assert_eq!(code(&out), 64, "{sub}");
    }
    let out = run(&["sample", "--config", &config, "--out", "r"], dir.path());
    assert_eq!(code(&out), 64);
    // Unknown flags are usage errors.
    let out = run(&["check", "--concfig", "x"], dir.path());
    assert_eq!(code(&out), 64);
}

#[test]
fn wrap_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = MODEL1_SMALL.replace("\"L\": [8]", "\"L\": [2]");
    let config = write_config(dir.path(), "tiny.json", &tiny);
    let out = run(&["check", "--config", &config], dir.path());
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("wrap violation"));
}

#[test]
fn sample_writes_a_complete_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", MODEL1_SMALL);
    let out = run(&["sample", "--config", &config, "--out", "run1"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let run_dir = dir.path().join("run1");
    for file in ["config.json", "meta.json", "samples.csv", "checkpoint.bin", "checkpoint.json"] {
        assert!(run_dir.join(file).exists(), "{file} missing");
    }
    let samples = std::fs::read_to_string(run_dir.join("samples.csv")).unwrap();
    let lines: Vec<&str> = samples.lines().collect();
    assert_eq!(lines[0], "sweep,x_0,x_1,x_2,x_3,x_4,x_5,x_6,x_7");
    assert_eq!(lines.len() - 1, 600); // (700 - 100) / 1
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seed"], 4242);
    assert_eq!(meta["unique"], true);

    // Refuses to overwrite without --force.
    let out = run(&["sample", "--config", &config, "--out", "run1"], dir.path());
    assert_eq!(code(&out), 65);
    let out = run(&["sample", "--config", &config, "--out", "run1", "--force"], dir.path());
    assert_eq!(code(&out), 0);
}

#[test]
fn identical_seeds_give_byte_identical_samples() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", MODEL1_SMALL);
    assert_eq!(code(&run(&["sample", "--config", &config, "--out", "a"], dir.path())), 0);
    assert_eq!(code(&run(&["sample", "--config", &config, "--out", "b"], dir.path())), 0);
    let a = std::fs::read(dir.path().join("a/samples.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/samples.csv")).unwrap();
    assert_eq!(a, b);
    let ca = std::fs::read(dir.path().join("a/checkpoint.bin")).unwrap();
    let cb = std::fs::read(dir.path().join("b/checkpoint.bin")).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn resume_matches_single_long_run_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", MODEL1_SMALL);

    // One uninterrupted run to 700 sweeps.
    assert_eq!(code(&run(&["sample", "--config", &config, "--out", "full"], dir.path())), 0);
    // Stop at 350, then resume to 700.
    assert_eq!(
        code(&run(
            &["sample", "--config", &config, "--out", "split", "--sweeps", "350"],
            dir.path()
        )),
        0
    );
    assert_eq!(
        code(&run(
            &["sample", "--config", &config, "--out", "split", "--resume", "--sweeps", "700"],
            dir.path()
        )),
        0
    );

    let full = std::fs::read(dir.path().join("full/samples.csv")).unwrap();
    let split = std::fs::read(dir.path().join("split/samples.csv")).unwrap();
    assert_eq!(full, split);
    let cf = std::fs::read(dir.path().join("full/checkpoint.bin")).unwrap();
    let cs = std::fs::read(dir.path().join("split/checkpoint.bin")).unwrap();
    assert_eq!(cf, cs);
}

#[test]
fn resume_guards_against_mismatched_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", MODEL1_SMALL);
    assert_eq!(code(&run(&["sample", "--config", &config, "--out", "r"], dir.path())), 0);
    let other = MODEL1_SMALL.replace("0.02", "0.03");
    let other = write_config(dir.path(), "other.json", &other);
    let out = run(
        &["sample", "--config", &other, "--out", "r", "--resume", "--sweeps", "900"],
        dir.path(),
    );
    assert_eq!(code(&out), 65);
}

#[test]
fn analyze_zero_coupling_reports_no_signal() {
    let dir = tempfile::tempdir().unwrap();
    let free = MODEL1_SMALL.replace("\"lambda\": 0.02", "\"lambda\": 0.0");
    let config = write_config(dir.path(), "free.json", &free);
    assert_eq!(code(&run(&["sample", "--config", &config, "--out", "run"], dir.path())), 0);
    let out = run(&["analyze", "run"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run/report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["decay_fit"]["status"], "no_signal");
    let bounds = report["bounds"].as_array().unwrap();
    assert!(bounds.iter().all(|b| b["pass"] == true));
    assert!(bounds.iter().any(|b| b["name"] == "decay_bound"));
    assert!(bounds.iter().any(|b| b["name"] == "second_moment"));

    let cov = std::fs::read_to_string(dir.path().join("run/cov.csv")).unwrap();
    let mut lines = cov.lines();
    assert_eq!(lines.next().unwrap(), "displacement,cov,stderr,weight,included_in_fit");
    // Ball of radius 2 in one dimension: displacements -2..2.
    assert_eq!(lines.count(), 5);
}

#[test]
fn analyze_missing_run_data_exits_65() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = run(&["analyze", "empty"], dir.path());
    assert_eq!(code(&out), 65);

    // Corrupt samples.csv.
    let config = write_config(dir.path(), "run.json", MODEL1_SMALL);
    assert_eq!(code(&run(&["sample", "--config", &config, "--out", "runx"], dir.path())), 0);
    std::fs::write(dir.path().join("runx/samples.csv"), "sweep,x_0\n1,garbage\n").unwrap();
    let out = run(&["analyze", "runx"], dir.path());
    assert_eq!(code(&out), 65);
}

#[test]
fn oracle_writes_exact_columns() {
    let dir = tempfile::tempdir().unwrap();
    // Zero coupling, eps = 2: all variances are 1/2, covariances vanish.
    let config = write_config(
        dir.path(),
        "gauss.json",
        r#"{
            "model": {"type": "gaussian", "epsilon": 2.0, "lambda": 0.0},
            "lattice": {"dim": 1, "L": [8], "bc": "torus"},
            "sampler": {"sweeps": 200, "seed": 3},
            "analysis": {"max_displacement": 2}
        }"#,
    );
    let out = run(&["oracle", "--config", &config, "--out", "oracle.csv"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    for line in text.lines().skip(1) {
        let (d, v) = line.split_once(',').unwrap();
        let v: f64 = v.parse().unwrap();
        if d == "0" {
            assert!((v - 0.5).abs() < 1e-12);
        } else {
            assert!(v.abs() < 1e-14);
        }
    }

    // Non-Gaussian model is a configuration error for the oracle.
    let m1 = write_config(dir.path(), "m1.json", MODEL1_SMALL);
    let out = run(&["oracle", "--config", &m1, "--out", "nope.csv"], dir.path());
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not Gaussian"));
}

#[test]
fn analyze_against_oracle_passes_for_gaussian_run() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = r#"{
        "model": {"type": "gaussian", "epsilon": 1.0, "lambda": 0.1, "b": {"1": 1.0, "-1": 1.0}},
        "lattice": {"dim": 1, "L": [16], "bc": "torus"},
        "sampler": {"sweeps": 3000, "burnin": 300, "thin": 1, "seed": 2718},
        "analysis": {"observable": "x", "max_displacement": 3, "a": 0.4}
    }"#;
    let config = write_config(dir.path(), "gauss.json", config_text);
    assert_eq!(
        code(&run(&["sample", "--config", &config, "--out", "grun"], dir.path())),
        0
    );
    assert_eq!(
        code(&run(&["oracle", "--config", &config, "--out", "oracle.csv"], dir.path())),
        0
    );
    let out = run(&["analyze", "grun", "--against-oracle", "oracle.csv"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("grun/report.json")).unwrap(),
    )
    .unwrap();
    let bounds = report["bounds"].as_array().unwrap();
    let oracle_cmp = bounds.iter().find(|b| b["name"] == "oracle_comparison").unwrap();
    assert_eq!(oracle_cmp["pass"], true, "{oracle_cmp}");
}

#[test]
fn verify_battery_passes_for_model1_and_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "m1.json", MODEL1_SMALL);
    let out = run(&["verify", "--config", &config, "--out", "verify.json"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap())
            .unwrap();
    let bounds = report["bounds"].as_array().unwrap();
    assert!(bounds.len() >= 4 * 3 + 2 + 1);
    assert!(bounds.iter().all(|b| b["pass"] == true));

    let gauss = write_config(
        dir.path(),
        "gauss.json",
        r#"{
            "model": {"type": "gaussian", "epsilon": 1.0, "lambda": 0.1, "b": {"1": 1.0, "-1": 1.0}},
            "lattice": {"dim": 1, "L": [8], "bc": "torus"},
            "sampler": {"sweeps": 100, "seed": 5}
        }"#,
    );
    let out = run(&["verify", "--config", &gauss, "--out", "gv.json"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gv.json")).unwrap())
            .unwrap();
    let bounds = report["bounds"].as_array().unwrap();
    // The coordinate observable saturates the variance bounds for a
    // quadratic self potential; the report flags the equality.
    let bl_x = bounds.iter().find(|b| b["name"] == "brascamp_lieb[x]").unwrap();
    assert!(bl_x["note"].as_str().unwrap().contains("equality"));
}
