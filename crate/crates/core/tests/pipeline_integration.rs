//! End-to-end pipeline checks on a miniature preset: stage smoke run,
//! dependency errors, idempotent re-runs, and bitwise-deterministic
//! metrics files.

use std::fs;
use std::path::PathBuf;

use alirector_core::error::Error;
use alirector_core::pipeline::{self, RunConfig, RunSettings};

fn tiny_settings(seed: u64) -> RunSettings {
    let mut s = RunSettings::default();
    s.seed = seed;
    s.train_count = 60;
    s.dev_count = 16;
    s.test_count = 16;
    s.vocab_size = 15;
    s.min_len = 4;
    s.max_len = 7;
    s.layers = 1;
    s.heads = 2;
    s.hidden_dim = 16;
    s.ffn_dim = 32;
    s.max_positions = 32;
    s.batch_size = 8;
    s.max_epochs = 2;
    s.warmup_steps = 4;
    s.beam_size = 2;
    s
}

fn temp_run_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("alirector-it-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn smoke_pipeline_gen_train_evaluate() {
    let dir = temp_run_dir("smoke");
    let cfg = RunConfig::new(tiny_settings(3), &dir);

    pipeline::gen_data(&cfg).unwrap();
    assert!(pipeline::data_path(&dir, "correction_train").exists());

    pipeline::train_correct(&cfg, false, None).unwrap();
    assert!(pipeline::model_path(&dir, "corrector").exists());
    assert!(pipeline::metrics_path(&dir, "corrector").exists());

    let report = pipeline::predict_and_evaluate(&cfg, "corrector").unwrap();
    assert!(report.tp + report.fp + report.fn_ > 0, "report should count something");
    assert!(pipeline::report_path(&dir, "corrector_test").exists());

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_dependencies_name_the_stage_to_run_first() {
    let dir = temp_run_dir("deps");
    let cfg = RunConfig::new(tiny_settings(4), &dir);

    // distill without anything else
    match pipeline::distill_stage(&cfg, None) {
        Err(e @ Error::Dependency { .. }) => {
            assert_eq!(e.exit_code(), 2);
            assert!(e.to_string().contains("gen-data"));
        }
        other => panic!("expected dependency error, got {other:?}"),
    }

    // after gen-data, distill should point at train-correct
    pipeline::gen_data(&cfg).unwrap();
    match pipeline::distill_stage(&cfg, None) {
        Err(Error::Dependency { run_first, .. }) => {
            assert!(run_first.contains("build-triples") || run_first.contains("train-correct"));
        }
        other => panic!("expected dependency error, got {other:?}"),
    }

    // ablate requires a completed full distillation run
    assert!(matches!(
        pipeline::ablate(&cfg, &[pipeline::AblateMode::NoKd]),
        Err(Error::Dependency { .. })
    ));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn completed_stages_are_skipped_until_forced() {
    let dir = temp_run_dir("skip");
    let mut cfg = RunConfig::new(tiny_settings(5), &dir);

    let first = pipeline::gen_data(&cfg).unwrap();
    assert!(!first.skipped);
    let second = pipeline::gen_data(&cfg).unwrap();
    assert!(second.skipped, "unchanged config should be a no-op");

    cfg.force = true;
    let forced = pipeline::gen_data(&cfg).unwrap();
    assert!(!forced.skipped);

    // Changing the settings invalidates the manifest.
    cfg.force = false;
    cfg.settings.clean_fraction = 0.6;
    let changed = pipeline::gen_data(&cfg).unwrap();
    assert!(!changed.skipped);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn metrics_files_are_bitwise_deterministic() {
    let dir_a = temp_run_dir("det-a");
    let dir_b = temp_run_dir("det-b");
    let cfg_a = RunConfig::new(tiny_settings(6), &dir_a);
    let cfg_b = RunConfig::new(tiny_settings(6), &dir_b);

    for cfg in [&cfg_a, &cfg_b] {
        pipeline::gen_data(cfg).unwrap();
        pipeline::train_correct(cfg, false, None).unwrap();
        pipeline::predict_and_evaluate(cfg, "corrector").unwrap();
    }
    for rel in ["data/correction_train.jsonl", "metrics/corrector.metrics.jsonl"] {
        let a = fs::read(dir_a.join(rel)).unwrap();
        let b = fs::read(dir_b.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} must be byte-identical across runs");
    }
    let a = fs::read(pipeline::model_path(&dir_a, "corrector")).unwrap();
    let b = fs::read(pipeline::model_path(&dir_b, "corrector")).unwrap();
    assert_eq!(a, b, "checkpoints must be byte-identical across runs");
    let a = fs::read(pipeline::report_path(&dir_a, "corrector_test")).unwrap();
    let b = fs::read(pipeline::report_path(&dir_b, "corrector_test")).unwrap();
    assert_eq!(a, b, "eval reports must be byte-identical across runs");

    fs::remove_dir_all(&dir_a).ok();
    fs::remove_dir_all(&dir_b).ok();
}

#[test]
fn provenance_chain_reaches_back_to_the_corpus() {
    let dir = temp_run_dir("prov");
    let cfg = RunConfig::new(tiny_settings(7), &dir);
    pipeline::gen_data(&cfg).unwrap();
    pipeline::train_correct(&cfg, false, None).unwrap();
    pipeline::predict_and_evaluate(&cfg, "corrector").unwrap();

    // Walk manifests from the eval report back to gen-data: every stage's
    // declared inputs must be outputs of an earlier manifest (or the
    // corpus itself).
    let read = |stage: &str| -> pipeline::Manifest {
        let raw = fs::read_to_string(dir.join(format!("manifests/{stage}.json"))).unwrap();
        serde_json::from_str(&raw).unwrap()
    };
    let eval = read("evaluate-corrector_test");
    let predict = read("predict-corrector_test");
    let train = read("train-correct");
    let gen = read("gen-data");

    let outputs_of = |m: &pipeline::Manifest| -> Vec<String> {
        m.outputs.iter().map(|a| a.path.clone()).collect()
    };
    let all_outputs: Vec<String> = [&predict, &train, &gen]
        .iter()
        .flat_map(|m| outputs_of(m))
        .collect();
    for input in &eval.inputs {
        assert!(
            all_outputs.contains(&input.path),
            "eval input {} is not produced by an upstream stage",
            input.path
        );
    }
    for input in &train.inputs {
        assert!(outputs_of(&gen).contains(&input.path));
    }
    assert_eq!(gen.seed, 7);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn cli_binary_runs_stages_and_reports_dependency_exit_code() {
    let dir = temp_run_dir("cli");
    fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("config.toml");
    fs::write(&config_path, tiny_settings(8).to_toml()).unwrap();
    let bin = env!("CARGO_BIN_EXE_alirector");
    let run_dir = dir.join("run");

    let output = std::process::Command::new(bin)
        .args(["gen-data", "--config"])
        .arg(&config_path)
        .arg("--run-dir")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    // Missing dependency -> exit code 2.
    let output = std::process::Command::new(bin)
        .args(["distill", "--config"])
        .arg(&config_path)
        .arg("--run-dir")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", String::from_utf8_lossy(&output.stderr));

    // Unknown ablation mode -> usage error (exit 1 from config parsing).
    let output = std::process::Command::new(bin)
        .args(["ablate", "--mode", "bogus", "--config"])
        .arg(&config_path)
        .arg("--run-dir")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    fs::remove_dir_all(&dir).ok();
}
