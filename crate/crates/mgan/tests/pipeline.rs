//! End-to-end pipeline tests: the CLI stages chained on small problems,
//! artifact layout, determinism, and process exit codes.

use mgan::cli;
use mgan::config::{DatasetConfig, EvaluateConfig, ExperimentConfig, McmcSettings};
use mgan::problems::Problem;
use mgan::trainer::TrainConfig;
use std::path::Path;
use std::process::Command;

fn tiny_experiment(problem: Problem, dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        problem,
        dataset: DatasetConfig { n_samples: 400, seed: 5, reverse_order: false, grid_points: 15 },
        train: TrainConfig {
            epochs: 3,
            batch_size: 20,
            generator_hidden: vec![12, 12],
            discriminator_hidden: vec![12, 12],
            snapshot_last: 2,
            mono_pairs: 500,
            seed: 5,
            ..Default::default()
        },
        evaluate: EvaluateConfig {
            num_samples: 2_000,
            grid_cells: 60,
            mmd_subsample: 500,
            mcmc: McmcSettings {
                chain_length: 1_500,
                burn_in: 300,
                proposal_std: Some(vec![0.5, 0.5]),
                seed: 5,
            },
            ..Default::default()
        },
        output_dir: dir.to_path_buf(),
    }
}

#[test]
fn generate_writes_dataset_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_experiment(Problem::Synthetic4, dir.path());
    cli::cmd_generate(&config).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 401); // header + rows
    assert!(csv.starts_with("x1,y1\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dataset_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["problem"], "synthetic-4");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["n_samples"], 400);

    // Regeneration is byte-identical.
    let first = std::fs::read(dir.path().join("dataset.bin")).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let mut config2 = config.clone();
    config2.output_dir = dir2.path().to_path_buf();
    cli::cmd_generate(&config2).unwrap();
    let second = std::fs::read(dir2.path().join("dataset.bin")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn darcy_generation_smoke_at_reduced_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_experiment(Problem::Darcy, dir.path());
    config.dataset.n_samples = 30;
    cli::cmd_generate(&config).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,"));
    assert_eq!(csv.lines().count(), 31);
}

#[test]
fn train_writes_history_checkpoints_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_experiment(Problem::Synthetic5, dir.path());
    cli::cmd_generate(&config).unwrap();
    cli::cmd_train(&config, None).unwrap();

    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.starts_with("# lambda=0.01 label=mgan\n"));
    assert_eq!(history.lines().count(), 2 + 3); // comment + header + epochs
    for line in history.lines().skip(2) {
        let mono: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&mono));
    }
    assert!(dir.path().join("checkpoints/final/map.json").exists());
    assert!(dir.path().join("checkpoints/epoch_0001/f.net").exists());
    assert!(dir.path().join("checkpoints/epoch_0002/f.net").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("train_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["snapshot_epochs"], serde_json::json!([1, 2]));
    assert_eq!(manifest["generator_updates"], 60);
}

#[test]
fn cgan_label_appears_when_lambda_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_experiment(Problem::Synthetic4, dir.path());
    config.train.lambda = 0.0;
    cli::cmd_generate(&config).unwrap();
    cli::cmd_train(&config, None).unwrap();
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.starts_with("# lambda=0 label=cgan\n"));
}

#[test]
fn train_rejects_mismatched_dataset_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_experiment(Problem::Synthetic4, dir.path());
    cli::cmd_generate(&config).unwrap();
    let mut wrong = tiny_experiment(Problem::Bod, dir.path());
    wrong.output_dir = dir.path().to_path_buf();
    let err = cli::cmd_train(&wrong, None).unwrap_err();
    assert!(matches!(err, mgan::Error::Config(_)), "{err:?}");
    assert!(!dir.path().join("history.csv").exists());
}

#[test]
fn full_pipeline_is_deterministic() {
    let run = |root: &Path| -> Vec<u8> {
        let config = tiny_experiment(Problem::Synthetic4, root);
        cli::cmd_generate(&config).unwrap();
        cli::cmd_train(&config, None).unwrap();
        cli::cmd_evaluate(&config, None).unwrap();
        std::fs::read(root.join("metrics.csv")).unwrap()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    assert_eq!(run(dir_a.path()), run(dir_b.path()));
    // The metrics file carries the expected columns.
    let text = std::fs::read_to_string(dir_a.path().join("metrics.csv")).unwrap();
    assert!(text.starts_with("metric,value,std,scale\n"));
    assert!(text.contains("rel-l2,"));
    assert!(text.contains("kl,"));
    assert!(dir_a.path().join("evaluate_manifest.json").exists());
    assert!(dir_a.path().join("samples_x0.csv").exists());
}

#[test]
fn bod_pipeline_with_reference_chain() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_experiment(Problem::Bod, dir.path());
    config.dataset.n_samples = 300;
    config.evaluate.num_samples = 800;
    config.evaluate.grid_cells = 40;
    cli::cmd_generate(&config).unwrap();
    cli::cmd_train(&config, None).unwrap();
    cli::cmd_evaluate(&config, None).unwrap();
    let chain = std::fs::read_to_string(dir.path().join("mcmc/chain_0.csv")).unwrap();
    assert_eq!(chain.lines().count(), 1 + 1_500);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("mcmc/chain_0_manifest.json")).unwrap(),
    )
    .unwrap();
    assert!(manifest["acceptance_rate"].as_f64().unwrap() > 0.0);
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.contains("mmd2-x0,"));
    assert!(metrics.contains("mean1-x0,"));
}

#[test]
fn mcmc_command_writes_identical_chains_for_equal_seeds() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let mut config = tiny_experiment(Problem::Bod, dir);
        config.evaluate.mcmc.chain_length = 1_000;
        cli::cmd_mcmc(&config).unwrap();
    }
    let a = std::fs::read(dir_a.path().join("mcmc/chain_0.csv")).unwrap();
    let b = std::fs::read(dir_b.path().join("mcmc/chain_0.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn kr_oracle_dump_has_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_experiment(Problem::Synthetic6, dir.path());
    config.evaluate.grid_cells = 20;
    cli::cmd_kr_oracle(&config).unwrap();
    let text = std::fs::read_to_string(dir.path().join("kr_map.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 400);
    assert!(text.starts_with("x,u,y\n"));
}

// ------------------------------------------------- binary interface

fn mgan_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mgan"))
}

#[test]
fn binary_exit_codes() {
    // Missing config file: configuration error, exit 2.
    let out = mgan_bin()
        .args(["generate", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Valid flow end to end, exit 0; seed override keeps it deterministic.
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_experiment(Problem::Synthetic4, &dir.path().join("out"));
    let config_path = dir.path().join("config.json");
    config.save(&config_path).unwrap();
    let out = mgan_bin()
        .args(["generate", "--config"])
        .arg(&config_path)
        .args(["--seed", "9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/dataset.bin").exists());

    // Unknown key in the config: exit 2.
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"problem": "synthetic-4", "dataset": {"n_samples": 5, "seed": 1, "oops": 2}, "output_dir": "x"}"#,
    )
    .unwrap();
    let out = mgan_bin().args(["generate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn binary_train_without_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_experiment(Problem::Synthetic4, &dir.path().join("out"));
    let config_path = dir.path().join("config.json");
    config.save(&config_path).unwrap();
    let out = mgan_bin().args(["train", "--config"]).arg(&config_path).output().unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
