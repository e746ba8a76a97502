use std::fs;
use std::path::Path;

use smae_cli::manifest::{manifest_path, RunManifest};
use smae_cli::{resolve_config, run_command, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use smae_core::ModelConfig;

fn run(args: &[&str]) -> i32 {
    run_command(std::iter::once("smae").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&["pretrain", "--no-such-flag"]), EXIT_USAGE);
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(run(&["--help"]), EXIT_OK);
    assert_eq!(run(&["--version"]), EXIT_OK);
}

#[test]
fn missing_or_malformed_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.smae");
    assert_eq!(run(&["pretrain", "--corpus", s(&dir.path().join("absent.jsonl")), "--out", s(&out)]), EXIT_DATA);
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"n\": 2, \"edges\": [[0, 5]]}\n").unwrap();
    assert_eq!(run(&["score", "--corpus", s(&bad), "--metric", "degree", "--out", s(&out)]), EXIT_DATA);
}

#[test]
fn preset_and_config_may_not_both_set_the_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"encoder": {"hidden": 8}}"#).unwrap();
    let out = dir.path().join("m.smae");
    assert_eq!(run(&["pretrain", "--synthetic", "0", "--preset", "mutag", "--config", s(&cfg), "--out", s(&out)]), EXIT_USAGE);
    // Non-architecture keys are fine alongside a preset.
    fs::write(&cfg, r#"{"lr": 0.01}"#).unwrap();
    let (merged, feat) = resolve_config(Some("mutag"), Some(&cfg), None, None, None).unwrap();
    assert_eq!(merged.lr, 0.01);
    assert!(feat.is_some());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"learning_rate": 0.01}"#).unwrap();
    assert!(resolve_config(None, Some(&cfg), None, None, None).is_err());
}

#[test]
fn emitted_config_reparses_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let emitted = dir.path().join("resolved.json");
    assert_eq!(run(&["pretrain", "--preset", "proteins", "--variant", "L", "--seed", "4", "--emit-config", s(&emitted)]), EXIT_OK);
    let text = fs::read_to_string(&emitted).unwrap();
    let parsed: ModelConfig = serde_json::from_str(&text).unwrap();
    let (direct, _) = resolve_config(Some("proteins"), None, Some(smae_core::Variant::L), Some(4), None).unwrap();
    assert_eq!(parsed, direct);
    let (again, _) = resolve_config(None, Some(&emitted), None, None, None).unwrap();
    assert_eq!(again, direct);
}

#[test]
fn pretrain_is_reproducible_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.smae");
    let b = dir.path().join("b.smae");
    for out in [&a, &b] {
        assert_eq!(run(&["pretrain", "--synthetic", "1", "--variant", "L", "--epochs", "2", "--seed", "3", "--out", s(out)]), EXIT_OK);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let manifest = manifest_path(&a);
    let recorded = RunManifest::read(&manifest).unwrap();
    assert_eq!(recorded.command, "pretrain");
    assert_eq!(recorded.loss_log.len(), 2);
    let c = dir.path().join("c.smae");
    assert_eq!(run(&["pretrain", "--replay", s(&manifest), "--out", s(&c)]), EXIT_OK);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert_eq!(run(&["pretrain", "--replay", s(&manifest), "--seed", "9"]), EXIT_USAGE);
}

#[test]
fn replay_notices_a_changed_input() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("g.jsonl");
    fs::write(
        &corpus,
        "{\"n\": 3, \"edges\": [[0, 1], [1, 2]], \"label\": 0}\n{\"n\": 4, \"edges\": [[0, 1], [1, 2], [2, 3], [3, 0]], \"label\": 1}\n",
    )
    .unwrap();
    let out = dir.path().join("m.smae");
    let args = ["pretrain", "--corpus", s(&corpus), "--featurization", "degree_onehot", "--epochs", "1", "--out", s(&out)];
    assert_eq!(run(&args), EXIT_OK);
    fs::write(&corpus, "{\"n\": 3, \"edges\": [[0, 1], [0, 2]], \"label\": 0}\n").unwrap();
    assert_eq!(run(&["pretrain", "--replay", s(&manifest_path(&out))]), EXIT_DATA);
}

#[test]
fn score_embed_evaluate_retrieve_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    assert_eq!(run(&["score", "--synthetic", "2", "--metric", "betweenness", "--out", s(&p("scores.jsonl"))]), EXIT_OK);
    let lines = fs::read_to_string(p("scores.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 200);
    assert!(manifest_path(&p("scores.jsonl")).exists());

    assert_eq!(run(&["pretrain", "--synthetic", "2", "--variant", "L", "--epochs", "1", "--out", s(&p("m.smae"))]), EXIT_OK);
    assert_eq!(
        run(&["score", "--synthetic", "2", "--metric", "learnable", "--model", s(&p("m.smae")), "--out", s(&p("ls.jsonl"))]),
        EXIT_OK
    );
    assert_eq!(run(&["score", "--synthetic", "2", "--metric", "learnable", "--out", s(&p("ls.jsonl"))]), EXIT_USAGE);
    assert_eq!(run(&["embed", "--model", s(&p("m.smae")), "--synthetic", "2", "--out", s(&p("e.jsonl"))]), EXIT_OK);
    assert_eq!(run(&["evaluate", "--emb", s(&p("e.jsonl")), "--report", s(&p("r.json")), "--repeats", "1"]), EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("r.json")).unwrap()).unwrap();
    assert_eq!(report["fold_accuracies"].as_array().unwrap().len(), 10);
    assert_eq!(run(&["retrieve", "--emb", s(&p("e.jsonl")), "--query", "0", "--k", "5"]), EXIT_OK);
    assert_eq!(run(&["retrieve", "--emb", s(&p("e.jsonl")), "--query", "999", "--k", "5"]), EXIT_USAGE);
}

#[test]
fn mask_preview_validates_its_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mask.jsonl");
    let ok = ["mask-preview", "--synthetic", "0", "--epoch", "5", "--of", "10", "--p", "0.5", "--beta", "1", "--out", s(&out)];
    assert_eq!(run(&ok), EXIT_OK);
    let first: serde_json::Value = serde_json::from_str(fs::read_to_string(&out).unwrap().lines().next().unwrap()).unwrap();
    let n = first["n"].as_u64().unwrap() as usize;
    assert_eq!(first["masked"].as_array().unwrap().len(), n.div_ceil(2).clamp(1, n - 1));
    assert_eq!(run(&["mask-preview", "--synthetic", "0", "--epoch", "11", "--of", "10", "--p", "0.5", "--beta", "1"]), EXIT_USAGE);
}

#[test]
fn sweep_writes_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    assert_eq!(run(&["sweep", "--synthetic", "4", "--epochs", "1", "--betas", "0,1", "--out", s(&out)]), EXIT_OK);
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["beta", "mean_acc", "std"]);
    assert_eq!(r.records().count(), 2);
    assert_eq!(run(&["sweep", "--synthetic", "4", "--out", s(&out)]), EXIT_USAGE);
}
