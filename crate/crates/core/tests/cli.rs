use std::fs;
use std::path::Path;
use std::process::Command;

use conda_tta::cli::{run, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
use conda_tta::model::Checkpoint;

fn argv(args: &[&str]) -> Vec<String> {
    std::iter::once("conda-tta").chain(args.iter().copied()).map(String::from).collect()
}

fn tiny_train_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "train",
        "--seed", "3",
        "--out", out,
        "--source-domains", "domain0,domain1",
        "--target-domains", "domain2",
        "--dim", "6",
        "--epochs", "2",
        "--tta-batch", "32",
        "--set", "samples_per_domain=80",
        "--set", "batch_size=32",
    ];
    v.extend_from_slice(extra);
    v
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(argv(&["gradcheck", "--seed", "7", "--out", out])), EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("gradcheck.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn train_without_source_domains_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(argv(&["train", "--out", out, "--target-domains", "domain2"])), EXIT_USAGE);
}

#[test]
fn unknown_flags_and_bad_values_are_usage_errors() {
    assert_eq!(run(argv(&["train", "--bogus"])), EXIT_USAGE);
    assert_eq!(run(argv(&["train", "--seed", "x"])), EXIT_USAGE);
    assert_eq!(run(argv(&["train", "--set", "nonsense=1", "--source-domains", "a", "--target-domains", "b"])), EXIT_USAGE);
    assert_eq!(run(argv(&[])), EXIT_USAGE);
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let missing = dir.path().join("missing.jsonl");
    let code = run(argv(&[
        "train",
        "--out", out.to_str().unwrap(),
        "--data", missing.to_str().unwrap(),
        "--source-domains", "a",
        "--target-domains", "b",
    ]));
    assert_eq!(code, EXIT_RUNTIME);
    // Overlapping domains are rejected by the partition.
    let code = run(argv(&["train", "--out", out.to_str().unwrap(), "--source-domains", "domain0", "--target-domains", "domain0"]));
    assert_eq!(code, EXIT_RUNTIME);
}

#[test]
fn generate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let code = run(argv(&["generate", "--seed", "1", "--dim", "5", "--set", "samples_per_domain=20", "--out", out.to_str().unwrap()]));
        assert_eq!(code, EXIT_OK);
    }
    let fa = fs::read(a.join("synthetic.jsonl")).unwrap();
    assert!(!fa.is_empty());
    assert_eq!(fa, fs::read(b.join("synthetic.jsonl")).unwrap());
    assert_eq!(fs::read(a.join("config.resolved.txt")).unwrap(), fs::read(b.join("config.resolved.txt")).unwrap());
}

fn train_into(out: &Path, extra: &[&str]) {
    let out = out.to_str().unwrap();
    assert_eq!(run(argv(&tiny_train_args(out, extra))), EXIT_OK);
}

#[test]
fn train_writes_outputs_and_stamps_metadata() {
    let dir = tempfile::tempdir().unwrap();
    train_into(dir.path(), &[]);
    for f in ["checkpoint.json", "checkpoint_tta.json", "trace.csv", "trace.json", "metrics.json", "projection2d.csv", "config.resolved.txt"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["seed"], 3);
    assert_eq!(metrics["tta_applied"], true);
    assert_eq!(metrics["config"]["lambda_mmd"], "1");
    assert_eq!(metrics["config_hash"].as_str().unwrap().len(), 64);
    let ckpt = Checkpoint::load(dir.path().join("checkpoint.json")).unwrap();
    assert_eq!(ckpt.metadata["seed"], "3");
    assert_eq!(ckpt.metadata["config_hash"], metrics["config_hash"].as_str().unwrap());

    // The resolved config reproduces the run when fed back in.
    let again = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.resolved.txt");
    let code = run(argv(&["train", "--config", cfg.to_str().unwrap(), "--out", again.path().to_str().unwrap()]));
    assert_eq!(code, EXIT_OK);
    assert_eq!(fs::read(dir.path().join("checkpoint.json")).unwrap(), fs::read(again.path().join("checkpoint.json")).unwrap());
}

#[test]
fn no_tta_flag_skips_adaptation() {
    let dir = tempfile::tempdir().unwrap();
    train_into(dir.path(), &["--no-tta"]);
    assert!(!dir.path().join("checkpoint_tta.json").exists());
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["tta_applied"], false);
    assert_eq!(metrics["tta_batches"], 0);
}

#[test]
fn tta_and_evaluate_on_a_saved_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    train_into(&dir.path().join("train"), &["--no-tta"]);
    let ckpt = dir.path().join("train/checkpoint.json");
    let common = |cmd: &'static str, out: &Path| {
        let mut v = vec![cmd.to_string()];
        v.extend(
            tiny_train_args(out.to_str().unwrap(), &["--checkpoint", ckpt.to_str().unwrap()])[1..]
                .iter()
                .map(|s| s.to_string()),
        );
        run(std::iter::once("conda-tta".to_string()).chain(v))
    };
    assert_eq!(common("tta", &dir.path().join("tta")), EXIT_OK);
    assert_eq!(common("evaluate", &dir.path().join("eval")), EXIT_OK);
    // Evaluating the untouched checkpoint reproduces the no-TTA training metrics.
    let read = |p: &str| -> serde_json::Value { serde_json::from_str(&fs::read_to_string(dir.path().join(p)).unwrap()).unwrap() };
    let (eval, train) = (read("eval/metrics.json"), read("train/metrics.json"));
    for key in ["accuracy", "f1", "confusion", "domain_variance"] {
        assert_eq!(eval["report"][key], train["report"][key], "{key}");
    }
    assert!(dir.path().join("tta/checkpoint_tta.json").exists());
}

#[test]
fn binary_reports_usage_errors() {
    let status = Command::new(env!("CARGO_BIN_EXE_conda-tta")).arg("train").status().unwrap();
    assert_eq!(status.code(), Some(EXIT_USAGE));
    let status = Command::new(env!("CARGO_BIN_EXE_conda-tta")).arg("--help").status().unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
}
