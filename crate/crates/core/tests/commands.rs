use std::fs;
use std::path::Path;

use crb_core::commands::{
    build_table, cmd_degrade, cmd_eval_entities, cmd_eval_human, cmd_eval_nlg, cmd_stats, cmd_synth, cmd_table,
    ArmSet, CmdError, NlgOptions, OutputFormat, StatsOptions, StatsTest, SynthOptions, TableInputs,
};
use crb_core::diagnosis::AccuracyMode;
use crb_core::jsonl;
use crb_core::metrics::{HashingProvider, MetricScope};
use crb_core::model::Report;
use crb_core::synth::FaultProfile;
use crb_core::tables::{is_marked, MethodMetrics, TableFormat, TableId};
use crb_core::EntityLexicon;
use serde_json::json;

fn synth(dir: &Path, n: usize, arms: Option<ArmSet>) {
    let opts = SynthOptions { n_cases: n, seed: 17, spec: None, arms };
    cmd_synth(&opts, &EntityLexicon::builtin(), dir).unwrap();
}

fn ground_truth(dir: &Path) -> std::path::PathBuf {
    let reports: Vec<Report> = jsonl::read_file(&dir.join("reports.jsonl")).unwrap();
    let gt: Vec<Report> = reports.into_iter().filter(|r| r.arm == crb_core::Arm::GroundTruth).collect();
    let path = dir.join("gt.jsonl");
    jsonl::write_file(&path, &gt).unwrap();
    path
}

fn corpus_rows(out: &str) -> Vec<MethodMetrics> {
    jsonl::read_records::<MethodMetrics, _>(out.as_bytes(), "stdout")
        .unwrap()
        .into_iter()
        .filter(|m| m.report.scope == MetricScope::Corpus)
        .collect()
}

#[test]
fn eval_nlg_self_comparison_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 20, None);
    let gt = ground_truth(dir.path());
    let provider = HashingProvider::default();
    let opts = NlgOptions { language: None, method: "self".into(), embedder: Some(&provider), format: OutputFormat::Json };
    let out = cmd_eval_nlg(&gt, &gt, &EntityLexicon::builtin(), &opts).unwrap();
    let rows = corpus_rows(&out);
    assert_eq!(rows.len(), 2);
    for m in rows {
        assert_eq!(m.report.bleu, [1.0; 4]);
        assert_eq!(m.report.rouge_l, 1.0);
        assert!((m.report.bertscore_f1.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(m.report.entity_recall, Some(1.0));
        assert_eq!(m.report.n_cases, 20);
    }
}

#[test]
fn degraded_corpus_scores_strictly_lower() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 40, None);
    let gt = ground_truth(dir.path());
    let lex = EntityLexicon::builtin();
    let profile = FaultProfile { omission_rate: 0.3, incorrection_rate: 0.3, cs_probability: 0.5 };
    let out = dir.path().join("degraded");
    cmd_degrade(&gt, &profile, None, 3, &lex, &out).unwrap();
    let opts = NlgOptions { language: None, method: "d".into(), embedder: None, format: OutputFormat::Json };
    let degraded = corpus_rows(&cmd_eval_nlg(&out.join("reports.jsonl"), &gt, &lex, &opts).unwrap());
    for m in degraded {
        let r = &m.report;
        assert!(r.bleu.iter().all(|b| *b < 1.0), "{:?}", r.bleu);
        assert!(r.rouge_l < 1.0 && r.entity_recall.unwrap() < 1.0);
    }
    let tsv = cmd_eval_nlg(&out.join("reports.jsonl"), &gt, &lex, &NlgOptions { format: OutputFormat::Tsv, ..opts }).unwrap();
    assert!(tsv.starts_with("Method\tBLEU-1\tBLEU-2\tBLEU-3\tBLEU-4\tROUGE-L\tMETEOR\tBERTScore\tRecall\n"));
}

#[test]
fn mismatched_case_ids_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 5, None);
    let gt = ground_truth(dir.path());
    let mut reports: Vec<Report> = jsonl::read_file(&gt).unwrap();
    reports.pop();
    let short = dir.path().join("short.jsonl");
    jsonl::write_file(&short, &reports).unwrap();
    let opts = NlgOptions { language: None, method: "x".into(), embedder: None, format: OutputFormat::Json };
    let err = cmd_eval_nlg(&short, &gt, &EntityLexicon::builtin(), &opts).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn parse_failure_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"not\": \"a report\"}\n").unwrap();
    let opts = NlgOptions { language: None, method: "x".into(), embedder: None, format: OutputFormat::Json };
    let err = cmd_eval_nlg(&bad, &bad, &EntityLexicon::builtin(), &opts).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("bad.jsonl:1:"), "{err}");
}

#[test]
fn entities_detection_feeds_table() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 30, None);
    let gt = ground_truth(dir.path());
    let out = cmd_eval_entities(&gt, &gt, &EntityLexicon::builtin(), AccuracyMode::Jaccard, OutputFormat::Json).unwrap();
    let path = dir.path().join("entities.jsonl");
    fs::write(&path, &out).unwrap();
    assert!(out.contains("\"record\":\"summary\""));
    let inputs = TableInputs { input: Some(path), ..Default::default() };
    let t = build_table(TableId::S3Detect, &inputs).unwrap();
    assert_eq!(t.header, ["Impression", "ZH", "EN"]);
    assert!(t.data_rows().all(|r| r[1] == "1.000" && r[2] == "1.000"));
}

fn write_values(path: &Path, values: &[serde_json::Value]) {
    jsonl::write_file(path, values).unwrap();
}

#[test]
fn stats_marks_only_separated_groups() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.jsonl");
    let mut rows = Vec::new();
    for i in 0..15 {
        rows.push(json!({"arm": "AI", "omissions": i % 3}));
        rows.push(json!({"arm": "Novice", "omissions": i % 3}));
        rows.push(json!({"arm": "Senior", "omissions": 10 + i % 3}));
    }
    write_values(&path, &rows);
    let opts = StatsOptions {
        groupby: "arm".into(),
        outcome: "omissions".into(),
        test: StatsTest::KruskalWallis,
        reference: Some("AI".into()),
        format: OutputFormat::Json,
    };
    let out = cmd_stats(&path, &opts).unwrap();
    let recs: Vec<serde_json::Value> = jsonl::read_records(out.as_bytes(), "stdout").unwrap();
    assert_eq!(recs[0]["group"], "overall");
    assert!(recs[0]["result"]["p_value"].as_f64().unwrap() < 0.05);
    let marker = |g: &str| recs.iter().find(|r| r["group"] == g).unwrap()["marker"].as_str().unwrap().to_string();
    // Pairwise order follows sorted group names: Novice is "a", Senior is "b".
    assert_eq!(marker("AI"), "b");
    assert_eq!(marker("Novice"), "");
    assert_eq!(marker("Senior"), "b");
}

#[test]
fn stats_identical_groups_have_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.jsonl");
    let rows: Vec<_> = (0..20).map(|i| json!({"g": if i % 2 == 0 { "x" } else { "y" }, "v": 2})).collect();
    write_values(&path, &rows);
    let opts = StatsOptions {
        groupby: "g".into(),
        outcome: "v".into(),
        test: StatsTest::KruskalWallis,
        reference: None,
        format: OutputFormat::Json,
    };
    let out = cmd_stats(&path, &opts).unwrap();
    let recs: Vec<serde_json::Value> = jsonl::read_records(out.as_bytes(), "stdout").unwrap();
    assert_eq!(recs[0]["result"]["p_value"], 1.0);
    assert!(recs.iter().all(|r| r["marker"] == ""));
}

#[test]
fn stats_unknown_outcome_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.jsonl");
    write_values(&path, &[json!({"g": "a", "v": 1})]);
    let opts = StatsOptions {
        groupby: "g".into(),
        outcome: "nope".into(),
        test: StatsTest::KruskalWallis,
        reference: None,
        format: OutputFormat::Json,
    };
    assert_eq!(cmd_stats(&path, &opts).unwrap_err().exit_code(), 2);
}

#[test]
fn marker_threshold_is_strict() {
    assert!(!is_marked(Some(0.05)));
    assert!(is_marked(Some(0.049_999_999)));
    assert!(!is_marked(None));
}

#[test]
fn reference_preference_counts_render_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.jsonl");
    write_values(
        &path,
        &[
            json!({"role": "radiologist", "arm": "AI", "counts": [24, 40, 125, 111]}),
            json!({"role": "radiologist", "arm": "Senior", "counts": [214, 62, 14, 10]}),
        ],
    );
    let inputs = TableInputs { input: Some(path), ..Default::default() };
    let out = cmd_table(TableId::S3Pref, &inputs, TableFormat::Tsv).unwrap();
    assert!(out.contains("AI\t24 (0.080)\t"));
    assert!(out.contains("Senior\t214 (0.713)\t"));
}

#[test]
fn synthetic_studies_produce_burden_tables() {
    for (set, ids) in [
        (ArmSet::AiVersusManual, [TableId::S4, TableId::S5]),
        (ArmSet::ManualAndCollaboration, [TableId::S7, TableId::S8]),
    ] {
        let dir = tempfile::tempdir().unwrap();
        synth(dir.path(), 120, Some(set));
        let inputs = TableInputs {
            input: None,
            annotations: Some(dir.path().join("annotations.jsonl")),
            cases: Some(dir.path().join("cases.jsonl")),
        };
        for id in ids {
            let t = build_table(id, &inputs).unwrap();
            assert_eq!(t.header.last().unwrap(), "p_value");
            assert_eq!(t.data_rows().count(), 16);
        }
        if set == ArmSet::ManualAndCollaboration {
            // Ranks 5 and 6 do not fit a 4-point table.
            assert_eq!(build_table(TableId::S3Pref, &inputs).unwrap_err().exit_code(), 3);
        }
    }
}

#[test]
fn empty_study_table_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let inputs = TableInputs { input: None, annotations: Some(empty.clone()), cases: Some(empty) };
    let err = cmd_table(TableId::S4, &inputs, TableFormat::Tsv).unwrap_err();
    assert!(matches!(err, CmdError::Input(_)));
    assert_eq!(err.exit_code(), 2);
    let err = cmd_table(TableId::S2, &TableInputs::default(), TableFormat::Tsv).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn human_summary_from_synthetic_annotations() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 50, Some(ArmSet::ManualAndCollaboration));
    let out = cmd_eval_human(&dir.path().join("annotations.jsonl"), &dir.path().join("cases.jsonl"), 6, OutputFormat::Json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["scale"], 6);
    assert_eq!(v["quality_deltas"].as_array().unwrap().len(), 3);
    let table = cmd_eval_human(&dir.path().join("annotations.jsonl"), &dir.path().join("cases.jsonl"), 6, OutputFormat::Tsv).unwrap();
    assert!(table.starts_with("Group\tRank 1\tRank 2\tRank 3\tRank 4\tRank 5\tRank 6\n"));
}
