use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[experiment]
solver = "dps"
seeds = [0, 1, 2, 3]
output = "out/run.csv"
[schedule]
steps = 30
beta_max = 0.3
[operator]
kind = "box_mask"
[manifold]
kinds = ["sphere"]
dims = [8]
trials = 50
"#;

fn bench(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .env("DSG_OUT_DIR", out_dir)
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = bench(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("schema_version,solver,task,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 rows"));
}

#[test]
fn seed_and_output_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let elsewhere = dir.path().join("elsewhere");
    let out = bench(
        &[
            "run",
            &cfg,
            "--seeds",
            "10..12",
            "--workers",
            "1",
            "--out",
            elsewhere.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(elsewhere.join("out/run.csv")).unwrap();
    let seeds: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(8).unwrap()).collect();
    assert_eq!(seeds, ["10", "11"]);
}

#[test]
fn ablate_runs_four_arms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = bench(&["ablate", &cfg, "--seeds", "0,1"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("out/run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    for arm in ["none", "random", "gradient", "state"] {
        assert!(csv.contains(&format!(",{arm},")), "{arm}");
    }
}

#[test]
fn manifold_reports_the_positive_margin_share() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = bench(&["manifold", &cfg], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("margin > 0 in"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("out/run.csv")).unwrap();
    assert!(csv.starts_with("kind,eta,eps_scale,"));
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[guidance]\ntau = 2.0\n");
    let out = bench(&["run", &cfg], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));

    let good = write_config(dir.path(), SMALL);
    let out = bench(&["run", &good, "--seeds", "5..5"], dir.path());
    assert!(!out.status.success());

    let out = bench(&["run", "/nonexistent/cfg.toml"], dir.path());
    assert!(!out.status.success());
}
