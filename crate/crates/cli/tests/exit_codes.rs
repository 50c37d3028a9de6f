use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn epipinn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epipinn"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, lr: f64) -> PathBuf {
    let cfg = format!(
        r#"{{
  "regions": ["Bremen"],
  "repetitions": 2,
  "datasets": {{
    "synthetic": {{ "alpha": 0.07, "beta": 0.22658, "i0": 15.0, "days": 35 }}
  }},
  "solver": {{
    "network": {{ "output_dim": 3, "hidden_layers": 2, "hidden_width": 8, "activation": "tanh" }},
    "train": {{ "iterations": 20, "initial_lr": {lr:e} }}
  }}
}}"#
    );
    let path = dir.join("config.json");
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn report_on_fixtures_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = epipinn(&[
        "report",
        "--metadata",
        fixture("region_metadata.csv").to_str().unwrap(),
        "--table",
        fixture("published_parameters.csv").to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("beta vs vaccination_pct: r = -0.57089"), "{stdout}");
    assert!(dir.path().join("summary.csv").exists());
    assert!(dir.path().join("correlations.json").exists());
}

#[test]
fn simulate_writes_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = epipinn(&["simulate", "--days", "30", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("compartments_synthetic.svg").exists());
}

#[test]
fn missing_config_exits_one() {
    let out = epipinn(&["fit-sir", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_region_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1e-3);
    let out = epipinn(&[
        "fit-sir",
        "--config",
        cfg.to_str().unwrap(),
        "--metadata",
        fixture("region_metadata.csv").to_str().unwrap(),
        "--regions",
        "Atlantis",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_sir_succeeds_and_diverging_fit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let metadata = fixture("region_metadata.csv");
    for (lr, code) in [(1e-3, 0), (1e300, 2)] {
        let out_dir = dir.path().join(format!("lr{lr:e}"));
        std::fs::create_dir_all(&out_dir).unwrap();
        let cfg = write_config(&out_dir, lr);
        let out = epipinn(&[
            "fit-sir",
            "--config",
            cfg.to_str().unwrap(),
            "--metadata",
            metadata.to_str().unwrap(),
            "-o",
            out_dir.to_str().unwrap(),
            "--no-plots",
        ]);
        assert_eq!(out.status.code(), Some(code), "lr {lr}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(dir.path().join("lr1e-3/params.csv").exists());
}
