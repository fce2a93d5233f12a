use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn crb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crb")).args(args).output().expect("spawn crb")
}

fn ok(args: &[&str]) -> String {
    let out = crb(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, n: &str, seed: &str, arms: Option<&str>) {
    let mut args = vec!["--seed", seed, "--out", p(dir), "synth", "--n", n];
    if let Some(a) = arms {
        args.extend(["--arms", a]);
    }
    ok(&args);
}

/// Writes only the ground-truth reports so they can be compared or degraded.
fn ground_truth(dir: &Path) -> std::path::PathBuf {
    let text = std::fs::read_to_string(dir.join("reports.jsonl")).unwrap();
    let gt: String = text.lines().filter(|l| l.contains("\"GroundTruth\"")).map(|l| format!("{l}\n")).collect();
    let path = dir.join("gt.jsonl");
    std::fs::write(&path, gt).unwrap();
    path
}

#[test]
fn synth_is_deterministic_under_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), "25", "9", None);
    synth(b.path(), "25", "9", None);
    synth(c.path(), "25", "10", None);
    let read = |d: &Path| std::fs::read(d.join("reports.jsonl")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
    assert_eq!(std::fs::read_to_string(a.path().join("cases.jsonl")).unwrap().lines().count(), 25);
}

#[test]
fn self_comparison_then_degraded_comparison() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "20", "1", None);
    let gt = ground_truth(dir.path());
    let same = lines(&ok(&["eval", "nlg", "--hyp", p(&gt), "--ref", p(&gt)]));
    let corpus: Vec<&Value> = same.iter().filter(|v| v["report"]["scope"] == "corpus").collect();
    assert_eq!(corpus.len(), 2);
    for c in &corpus {
        assert_eq!(c["report"]["bleu"][3], 1.0);
        assert_eq!(c["report"]["rouge_l"], 1.0);
    }

    let deg = dir.path().join("deg");
    ok(&["--seed", "4", "--out", p(&deg), "degrade", "--reports", p(&gt), "--omission", "0.5", "--incorrection", "0.3"]);
    let worse = lines(&ok(&["eval", "nlg", "--hyp", p(&deg.join("reports.jsonl")), "--ref", p(&gt), "--embedder", "none"]));
    for c in worse.iter().filter(|v| v["report"]["scope"] == "corpus") {
        assert!(c["report"]["bleu"][3].as_f64().unwrap() < 1.0);
        assert!(c["report"]["rouge_l"].as_f64().unwrap() < 1.0);
    }
    assert!(std::fs::read_to_string(deg.join("manifest.jsonl")).unwrap().lines().count() > 0);
}

#[test]
fn table_output_goes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "10", "2", None);
    let gt = ground_truth(dir.path());
    let metrics = dir.path().join("metrics.jsonl");
    ok(&["--out", p(&metrics), "eval", "nlg", "--hyp", p(&gt), "--ref", p(&gt), "--method", "Self"]);
    let table = ok(&["--format", "markdown", "table", "S2", "--input", p(&metrics)]);
    assert!(table.contains("BLEU-1"), "{table}");
    assert!(table.contains("Self"));
    let out = dir.path().join("s2.tsv");
    assert_eq!(ok(&["--out", p(&out), "table", "S2", "--input", p(&metrics)]), "");
    assert!(std::fs::read_to_string(out).unwrap().starts_with("Method\tBLEU-1\t"));
}

#[test]
fn entity_evaluation_of_ground_truth_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "30", "3", None);
    let gt = ground_truth(dir.path());
    let recs = lines(&ok(&["eval", "entities", "--hyp", p(&gt), "--ref", p(&gt)]));
    let summaries: Vec<&Value> = recs.iter().filter(|v| v["record"] == "summary").collect();
    assert_eq!(summaries.len(), 2);
    for s in summaries {
        assert_eq!(s["corpus_recall"], 1.0);
        assert_eq!(s["mean_accuracy"], 1.0);
    }
    let table = ok(&["--format", "tsv", "eval", "entities", "--hyp", p(&gt), "--ref", p(&gt)]);
    assert!(table.lines().next().unwrap().contains("ZH"));
}

#[test]
fn human_stats_and_burden_tables_from_synthetic_study() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "60", "5", Some("ai-vs-manual"));
    let (anns, cases) = (dir.path().join("annotations.jsonl"), dir.path().join("cases.jsonl"));
    let summary: Value = serde_json::from_str(&ok(&["eval", "human", "--annotations", p(&anns), "--cases", p(&cases)])).unwrap();
    assert_eq!(summary["n_annotations"], 240);

    let stats = lines(&ok(&["stats", "--input", p(&anns), "--groupby", "arm", "--outcome", "errors", "--reference", "AI"]));
    assert_eq!(stats[0]["group"], "overall");
    assert_eq!(stats.len(), 5);

    let s4 = ok(&["table", "S4", "--annotations", p(&anns), "--cases", p(&cases)]);
    assert!(s4.lines().next().unwrap().ends_with("p_value"), "{s4}");
    let pref = ok(&["table", "S3_pref", "--annotations", p(&anns)]);
    assert!(pref.contains("(0."), "{pref}");
}

#[test]
fn kernels_selftest_passes() {
    let out = ok(&["--format", "tsv", "kernels", "selftest"]);
    assert!(out.lines().count() >= 8);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "5", "6", None);
    let gt = ground_truth(dir.path());

    // 2: input errors, including argument parsing and malformed lines.
    assert_eq!(crb(&["eval", "nlg", "--hyp", "/no/such/file", "--ref", p(&gt)]).status.code(), Some(2));
    assert_eq!(crb(&["table", "S9"]).status.code(), Some(2));
    assert_eq!(crb(&["synth", "--n", "3"]).status.code(), Some(2));
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"report_id\": 1}\n").unwrap();
    let out = crb(&["eval", "nlg", "--hyp", p(&bad), "--ref", p(&gt)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:1"));
    assert_eq!(crb(&["stats", "--input", p(&gt), "--groupby", "arm", "--outcome", "nope"]).status.code(), Some(2));

    // 3: consistency errors.
    let text = std::fs::read_to_string(&gt).unwrap();
    let short = dir.path().join("short.jsonl");
    std::fs::write(&short, text.lines().skip(2).map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    assert_eq!(crb(&["eval", "nlg", "--hyp", p(&short), "--ref", p(&gt)]).status.code(), Some(3));
}

#[test]
fn serve_answers_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_crb"))
        .args(["serve", "--data-dir", p(dir.path())])
        .env("CRB_ADDR", &addr)
        .env("RUST_LOG", "warn")
        .spawn()
        .unwrap();
    let client = crb_service::Client::new(format!("http://{addr}"));
    let mut status = None;
    for _ in 0..100 {
        if let Ok((s, _)) = client.get_raw("/healthz") {
            status = Some(s);
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let created = client.create_study(&crb_core::StudyConfig::ai_versus_manual("cli", 1).into());
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(status, Some(200));
    assert!(created.unwrap().created);
    assert!(dir.path().join("cli.jsonl").exists());
}
