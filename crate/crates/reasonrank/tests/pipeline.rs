use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use reasonrank::config::RunConfig;
use reasonrank::pipeline::{EvalSummary, ModelFile, Pipeline, PipelineOptions, SignificanceRow, StageStatus};
use reasonrank::{Error, GatewayError};
use reasonrank_core::prompt::PromptMode;

fn toy_conf() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/toy.conf")
}

fn toy() -> RunConfig {
    RunConfig::load(&toy_conf()).unwrap()
}

fn opts(root: &Path) -> PipelineOptions {
    PipelineOptions {
        out_root: root.to_path_buf(),
        cache_dir: Some(root.join("cache")),
        ..Default::default()
    }
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn toy_run_emits_every_report() {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = Pipeline::open(toy(), opts(tmp.path())).unwrap();
    p.run_all().unwrap();
    let run = p.run_dir().to_path_buf();
    for f in [
        "manifest.json",
        "index.rrix",
        "retrieve.run",
        "parsed/combined.run",
        "responses/basic/windows.jsonl",
        "model.json",
        "train_trace.csv",
        "student.run",
        "eval/ndcg.csv",
        "eval/significance.csv",
        "eval/text_quality.csv",
        "eval/behavior.csv",
        "eval/cost.csv",
        "eval/cost_profiles.csv",
        "eval/summary.json",
    ] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let summary: EvalSummary =
        serde_json::from_slice(&std::fs::read(run.join("eval/summary.json")).unwrap()).unwrap();
    assert_eq!(summary.queries, 10);
    let names: Vec<&str> = summary.systems.iter().map(|s| s.system.as_str()).collect();
    assert_eq!(
        names,
        ["bm25", "teacher-basic", "teacher-explicit", "teacher-comparison", "teacher-combined", "student"]
    );
    assert!(summary.systems.iter().all(|s| (0.0..=1.0).contains(&s.ndcg_at_5)));
    // Each reasoning mode against the no-reasoning prompt, at both cutoffs.
    for m in ["explicit", "comparison", "combined"] {
        let rows: Vec<&SignificanceRow> = summary
            .significance
            .iter()
            .filter(|r| r.system == format!("teacher-{m}"))
            .collect();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.baseline == "teacher-basic"));
    }
    assert_eq!(summary.text_quality.len(), 1);

    let trace = std::fs::read_to_string(run.join("train_trace.csv")).unwrap();
    assert!(trace.starts_with("epoch,L_pairwise,L_listwise,L_generation,alpha,beta,gamma\n"));
    assert_eq!(trace.lines().count(), 1 + 50);

    let m = p.manifest();
    assert_eq!(m.usage.len(), 4);
    let info = m.train.as_ref().unwrap();
    assert_eq!((info.pool_size, info.train_size), (10, 10));
    assert!((info.mix_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    // The mock rate-limits every new request once.
    let l = p.gateway_ledger();
    assert_eq!(l.cache_hits, 0);
    assert_eq!(l.requests % 2, 0);
    let windows: u64 = m.usage.values().map(|u| u.requests).sum();
    assert_eq!(l.requests, 2 * windows);
}

#[test]
fn rerun_is_byte_identical_and_offline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut first = Pipeline::open(toy(), opts(tmp.path())).unwrap();
    first.run_all().unwrap();
    let before = tree(first.run_dir());

    let mut again = Pipeline::open(toy(), opts(tmp.path())).unwrap();
    again.run_all().unwrap();
    assert!(again.log.iter().all(|l| l.ends_with(": up to date")), "{:?}", again.log);
    assert_eq!(again.gateway_ledger().requests, 0);
    assert_eq!(tree(again.run_dir()), before);

    // --force reruns every stage; the cache answers every teacher call.
    let mut forced = Pipeline::open(
        toy(),
        PipelineOptions {
            force: true,
            ..opts(tmp.path())
        },
    )
    .unwrap();
    forced.run_all().unwrap();
    assert!(forced.log.iter().all(|l| l.ends_with(": done")));
    assert_eq!(forced.gateway_ledger().requests, 0);
    assert!(forced.gateway_ledger().cache_hits > 0);
    assert_eq!(tree(forced.run_dir()), before);

    // A new output root sharing the cache, served strictly offline.
    let other = tempfile::tempdir().unwrap();
    let mut fresh = Pipeline::open(
        toy(),
        PipelineOptions {
            out_root: other.path().to_path_buf(),
            cache_dir: Some(tmp.path().join("cache")),
            offline: true,
            force: false,
        },
    )
    .unwrap();
    fresh.run_all().unwrap();
    assert_eq!(fresh.gateway_ledger().requests, 0);
    assert_eq!(tree(fresh.run_dir()), before);
}

#[test]
fn missing_prerequisites_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = Pipeline::open(toy(), opts(tmp.path())).unwrap();
    match p.cmd_retrieve() {
        Err(Error::MissingStage { stage }) => assert_eq!(stage, "index"),
        other => panic!("unexpected {other:?}"),
    }
    p.cmd_index().unwrap();
    p.cmd_retrieve().unwrap();
    let err = p.cmd_parse(PromptMode::Explicit).unwrap_err();
    assert!(err.to_string().contains("teacher_rerank:explicit"), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(p.cmd_train(), Err(Error::MissingStage { .. })));
    assert!(matches!(p.cmd_behavior_report(), Err(Error::MissingStage { .. })));

    // A deleted output also counts as a missing stage.
    std::fs::remove_file(p.run_dir().join("index.rrix")).unwrap();
    let mut reopened = Pipeline::open(
        toy(),
        PipelineOptions {
            force: true,
            ..opts(tmp.path())
        },
    )
    .unwrap();
    assert!(matches!(reopened.cmd_retrieve(), Err(Error::MissingStage { .. })));
}

#[test]
fn changed_settings_require_force() {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = Pipeline::open(toy(), opts(tmp.path())).unwrap();
    p.cmd_index().unwrap();
    p.cmd_retrieve().unwrap();
    let base = toy_conf().parent().unwrap().to_path_buf();

    let mut changed = toy();
    changed.set("k1", "1.2", &base).unwrap();
    let mut q = Pipeline::open(changed.clone(), opts(tmp.path())).unwrap();
    let err = q.cmd_retrieve().unwrap_err();
    assert!(matches!(err, Error::ConfigMismatch { .. }));
    let msg = err.to_string();
    assert!(msg.contains("k1: 0.9 -> 1.2") && msg.contains("--force"), "{msg}");
    assert_eq!(q.cmd_index().unwrap(), StageStatus::UpToDate);

    let mut forced = Pipeline::open(
        changed,
        PipelineOptions {
            force: true,
            ..opts(tmp.path())
        },
    )
    .unwrap();
    assert_eq!(forced.cmd_retrieve().unwrap(), StageStatus::Ran);
    assert_eq!(forced.manifest().stages["retrieve"].settings["k1"], "1.2");
}

#[test]
fn offline_cache_miss_is_a_gateway_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = Pipeline::open(
        toy(),
        PipelineOptions {
            offline: true,
            ..opts(tmp.path())
        },
    )
    .unwrap();
    p.cmd_index().unwrap();
    p.cmd_retrieve().unwrap();
    let err = p.cmd_teacher_rerank(PromptMode::Basic).unwrap_err();
    assert!(matches!(err, Error::Gateway(GatewayError::OfflineCacheMiss(_))), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(!p.manifest().stages.contains_key("teacher_rerank:basic"));
}

#[test]
fn self_comparison_is_not_significant() {
    let a = [0.2, 0.5, 0.9, 0.4];
    let r = SignificanceRow::compare("x", "x", "ndcg@5", &a, &a).unwrap();
    assert_eq!((r.t, r.p_value, r.verdict.as_str()), (0.0, 1.0, "not significant"));

    // An identity teacher returns BM25's order, so its row against BM25 is a
    // self-comparison through the whole pipeline.
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("identity.conf");
    std::fs::write(&script, "policy = identity\ndrop_every = 2\nduplicate_every = 3\n").unwrap();
    let mut cfg = toy();
    let base = toy_conf().parent().unwrap().to_path_buf();
    cfg.set("gateway", &format!("mock:{}", script.display()), &base).unwrap();
    cfg.set("modes", "basic", &base).unwrap();
    cfg.set("train_mode", "basic", &base).unwrap();
    let mut p = Pipeline::open(cfg, opts(tmp.path())).unwrap();
    p.run_all().unwrap();
    let summary: EvalSummary =
        serde_json::from_slice(&std::fs::read(p.run_dir().join("eval/summary.json")).unwrap()).unwrap();
    let rows: Vec<&SignificanceRow> = summary
        .significance
        .iter()
        .filter(|r| r.system == "teacher-basic" && r.baseline == "bm25")
        .collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!((r.t, r.p_value, r.verdict.as_str()), (0.0, 1.0, "not significant"));
    }
    let csv = std::fs::read_to_string(p.run_dir().join("eval/significance.csv")).unwrap();
    assert!(csv.contains("teacher-basic,bm25,ndcg@5,"));
    assert!(csv.contains(",0.0000,9,1.0000,not significant"));
}

fn synthetic_run(root: &Path, name: &str, size: usize) -> (Pipeline, ModelFile) {
    let base = toy_conf().parent().unwrap().to_path_buf();
    let mut cfg = toy();
    for (k, v) in [
        ("name", name.to_string()),
        ("train_source", "synthetic".into()),
        ("train_size", size.to_string()),
        ("epochs", "2".into()),
    ] {
        cfg.set(k, &v, &base).unwrap();
    }
    let mut p = Pipeline::open(cfg, opts(root)).unwrap();
    p.cmd_train().unwrap();
    let model = serde_json::from_slice(&std::fs::read(p.run_dir().join("model.json")).unwrap()).unwrap();
    (p, model)
}

#[test]
fn train_size_subsamples_are_exact_and_nested() {
    let tmp = tempfile::tempdir().unwrap();
    let (small, m100) = synthetic_run(tmp.path(), "n100", 100);
    let (large, m1000) = synthetic_run(tmp.path(), "n1000", 1000);
    let (s, l) = (small.manifest().train.clone().unwrap(), large.manifest().train.clone().unwrap());
    assert_eq!((s.train_size, s.pool_size), (100, 2000));
    assert_eq!((l.train_size, l.pool_size), (1000, 2000));
    assert!(s.heldout_ndcg_at_5.is_some());
    assert_eq!(m100.train_queries.len(), 100);
    assert!(m100.train_queries.iter().all(|q| m1000.train_queries.contains(q)));

    // The student reranker refuses a synthetic model.
    let mut p = small;
    assert!(p.cmd_student_rerank().is_err());
}

#[test]
fn train_size_larger_than_pool_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy();
    cfg.set("modes", "combined", Path::new(".")).unwrap();
    cfg.set("train_size", "11", Path::new(".")).unwrap();
    let mut p = Pipeline::open(cfg, opts(tmp.path())).unwrap();
    p.cmd_index().unwrap();
    p.cmd_retrieve().unwrap();
    p.cmd_teacher_rerank(PromptMode::Combined).unwrap();
    p.cmd_parse(PromptMode::Combined).unwrap();
    let err = p.cmd_train().unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert!(err.to_string().contains("exceeds the 10"));
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_reasonrank");
    let conf = toy_conf();
    let run = |args: &[&str]| {
        Command::new(bin)
            .arg("--config")
            .arg(&conf)
            .arg("--out")
            .arg(tmp.path())
            .args(args)
            .output()
            .unwrap()
    };
    let ok = run(&["--mode", "basic", "index"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(run(&["--mode", "basic", "retrieve"]).status.code(), Some(0));

    let mismatch = run(&["--k1", "2.0", "retrieve"]);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("--force"));

    let missing = run(&["train"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("parse:combined"));

    let offline = run(&["--offline", "--mode", "basic", "teacher-rerank"]);
    assert_eq!(offline.status.code(), Some(3));

    let bad = run(&["--window", "1", "index"]);
    assert_eq!(bad.status.code(), Some(2));
}
