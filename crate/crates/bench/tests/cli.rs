use std::path::{Path, PathBuf};
use std::process::Command;

use ksd_mcmc::weighting::GammaCache;
use ksd_mcmc_bench::output::read_csv;
use ksd_mcmc_bench::{run_experiment, ExperimentConfig};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(name)).unwrap()
}

#[test]
fn every_checked_in_config_loads_and_builds() {
    let mut kinds = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg =
                ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.target.build().unwrap();
            assert_eq!(
                path.file_stem().unwrap().to_str().unwrap(),
                cfg.experiment.name()
            );
            kinds.push(cfg.experiment);
        }
    }
    assert_eq!(kinds.len(), 8);
}

#[test]
fn one_replicate_of_one_method_gives_one_row_per_checkpoint() {
    let mut cfg = config("unimodal.toml");
    cfg.repeats = 1;
    cfg.methods = Some(vec!["uniform".into()]);
    let rows = run_experiment(&cfg, &GammaCache::in_memory()).unwrap();
    assert_eq!(rows.len(), cfg.checkpoints.len());
    assert!(rows.iter().all(|r| r.method == "uniform"));
    let n: Vec<usize> = rows.iter().map(|r| r.n_samples).collect();
    assert_eq!(n, cfg.checkpoints);
    assert!(rows
        .windows(2)
        .all(|w| w[0].density_evals <= w[1].density_evals));
}

#[test]
fn single_chain_methods_cover_the_pool() {
    let mut cfg = config("unimodal.toml");
    cfg.repeats = 2;
    cfg.methods = Some(vec!["single".into()]);
    cfg.checkpoints = vec![200];
    let rows = run_experiment(&cfg, &GammaCache::in_memory()).unwrap();
    assert_eq!(rows.len(), 2 * 5);
    assert!(rows.iter().any(|r| r.method == "single-4-step=2"));
}

#[test]
fn reference_block_agrees_with_itself() {
    let cfg = ExperimentConfig::parse(
        r#"
        experiment = "block-agreement"
        repeats = 3
        [target]
        kind = "standard-normal"
        dim = 1
        [block]
        draws = 400
        block_sizes = [10, 50, 400]
        reference_block = 400
        widths = [1.0]
        sampler = "mala"
        init_box = { lo = [-1.0], hi = [1.0] }
        "#,
    )
    .unwrap();
    let rows = run_experiment(&cfg, &GammaCache::in_memory()).unwrap();
    assert_eq!(rows.len(), 3 * 3 * 2);
    for r in rows
        .iter()
        .filter(|r| r.n_samples == 400 && r.method.starts_with("agree"))
    {
        assert_eq!(r.metric, 1.0);
    }
}

#[test]
fn section_missing_for_kind_is_rejected() {
    let err = ExperimentConfig::parse(
        r#"
        experiment = "sampler-count"
        repeats = 1
        [target]
        kind = "three-mode"
        "#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("[run]"), "{err}");
}

#[test]
fn cli_rejects_a_config_of_another_kind() {
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["sensor", "--config"])
        .arg(configs_dir().join("unimodal.toml"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(!status.status.success());
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(
        stderr.contains("`unimodal`") && stderr.contains("`sensor`"),
        "{stderr}"
    );
}

#[test]
fn cli_writes_csv_and_plot_script() {
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["unimodal", "--seed", "11", "--repeats", "2", "--config"])
        .arg(configs_dir().join("unimodal.toml"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_csv(&out.path().join("unimodal.csv")).unwrap();
    // three bandit methods plus five single chains, four checkpoints, two seeds
    assert_eq!(rows.len(), 8 * 4 * 2);
    let script = std::fs::read_to_string(out.path().join("unimodal.plot.py")).unwrap();
    assert!(script.contains("unimodal.csv"));
}
