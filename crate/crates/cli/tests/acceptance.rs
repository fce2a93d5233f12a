//! Acceptance suite: one PASS/FAIL line per criterion, each with its own
//! tolerance and wall-clock budget. Runs without any UI build; the study
//! service is driven over HTTP. Exits non-zero if any criterion fails.
//!
//!     cargo test -p crb-cli --test acceptance

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crb_core::diagnosis::corpus_recall;
use crb_core::human_eval::{error_burden, quality_means, rank_distribution, ErrorKind};
use crb_core::kernels::{gradient_check, mix_prompts, rope_rotate, sample_slices, selftest, Gelu, PromptVariant, RopeConfig};
use crb_core::metrics::{bleu, evaluate, meteor, relative_change, rouge_l, HashingProvider, ScoredPair};
use crb_core::model::{Arm, Language, RaterRole, StudyConfig};
use crb_core::parser::{Section, TokenSequence};
use crb_core::stats::{holm_adjust, kruskal_wallis, mann_whitney_u, spearman, MwuOptions};
use crb_core::summary::summarize;
use crb_core::synth::{auto_annotate, synth_cohort, CohortSpec, FaultProfile};
use crb_core::EntityLexicon;
use crb_service::simulate::{self, OracleRater, Scenario};
use crb_service::{AppState, BackgroundServer, Client, LogStore};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn toks(words: &[&str]) -> TokenSequence {
    TokenSequence::new(Language::En, words.iter().map(|w| w.to_string()).collect())
}

fn metric_oracles() -> Outcome {
    let b1 = bleu(&toks(&["the", "cat"]), &[toks(&["the", "cat", "sat"])], 1).map_err(|e| e.to_string())?;
    ensure((b1 - (-0.5f64).exp()).abs() <= 1e-9, || format!("BLEU-1 {b1}"))?;
    let b2 = bleu(&toks(&["a", "b"]), &[toks(&["c", "d"])], 2).map_err(|e| e.to_string())?;
    ensure(b2 == 0.0, || format!("disjoint BLEU-2 {b2}"))?;
    let rl = rouge_l(&toks(&["a", "b", "c"]), &toks(&["a", "c"]));
    ensure((rl - 0.8).abs() <= 1e-9, || format!("ROUGE-L {rl}"))?;
    let m1 = meteor(&toks(&["the", "cat"]), &toks(&["the", "cat"]));
    ensure((m1 - 0.9375).abs() <= 1e-9, || format!("METEOR self {m1}"))?;
    let m2 = meteor(&toks(&["cats"]), &toks(&["cat"]));
    ensure((m2 - 0.5).abs() <= 1e-9, || format!("METEOR stem {m2}"))?;

    // Self-comparison over a synthetic bilingual corpus.
    let lex = EntityLexicon::builtin();
    let corpus = synth_cohort(&CohortSpec::with_defaults(&lex, 100, 3), &lex).map_err(|e| e.to_string())?;
    let pairs: Vec<ScoredPair> = corpus
        .reports
        .iter()
        .map(|r| {
            let t = crb_core::commands::report_tokens(r);
            ScoredPair { case_id: r.report_id.clone(), hyp: t.clone(), reference: t }
        })
        .collect();
    let provider = HashingProvider::default();
    let (per_case, corpus_row) = evaluate(&pairs, Some(&provider)).map_err(|e| e.to_string())?;
    for (row, pair) in per_case.iter().zip(&pairs) {
        let m = pair.hyp.len() as f64;
        let meteor_self = 1.0 - 0.5 / (m * m * m);
        let ones = row.bleu.iter().chain([&row.rouge_l, &row.bertscore_f1.unwrap_or(f64::NAN)]).all(|v| (v - 1.0).abs() <= 1e-9);
        ensure(ones, || format!("{}: self-comparison {:?}", pair.case_id, row))?;
        ensure((row.meteor - meteor_self).abs() <= 1e-9, || format!("{}: METEOR {}", pair.case_id, row.meteor))?;
    }
    ensure(corpus_row.bleu.iter().all(|v| (v - 1.0).abs() <= 1e-9), || format!("corpus BLEU {:?}", corpus_row.bleu))?;
    Ok(format!(
        "BLEU-1={b1:.4} ROUGE-L={rl:.4} METEOR={m1:.4}/{m2:.4}; {} self pairs at 1.0 (METEOR at 1-0.5/m^3, corpus {:.3})",
        pairs.len(),
        corpus_row.meteor
    ))
}

fn stats_oracles() -> Outcome {
    let e = |e: crb_core::stats::StatsError| e.to_string();
    let kw = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).map_err(e)?;
    let p = kw.p_value.unwrap_or(f64::NAN);
    ensure((kw.statistic - 3.857).abs() <= 1e-3 && (p - 0.0495).abs() <= 1e-3, || format!("KW H={} p={p}", kw.statistic))?;
    let mw = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], MwuOptions::default()).map_err(e)?;
    let mp = mw.p_value.unwrap_or(f64::NAN);
    ensure(mw.statistic == 0.0 && (mp - 0.081).abs() <= 1e-3, || format!("MWU U={} p={mp}", mw.statistic))?;
    let holm = holm_adjust(&[0.01, 0.04]).map_err(e)?;
    ensure(holm == [0.02, 0.04], || format!("Holm {holm:?}"))?;
    let x: Vec<f64> = (0..20).map(f64::from).collect();
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    let up = spearman(&x, &x.iter().map(|v| v * v + 1.0).collect::<Vec<_>>()).map_err(e)?.statistic;
    let down = spearman(&x, &rev).map_err(e)?.statistic;
    ensure(up == 1.0 && down == -1.0, || format!("Spearman {up} / {down}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (na, nb) = (rng.random_range(3..15), rng.random_range(3..15));
        let a: Vec<f64> = (0..na).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random::<f64>() + 0.2).collect();
        let mut all: Vec<f64> = a.iter().chain(&b).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        ensure(all.len() == na + nb, || "tie in random dataset".into())?;
        let h = kruskal_wallis(&[a.clone(), b.clone()]).map_err(e)?.statistic;
        let z = mann_whitney_u(&a, &b, MwuOptions { continuity: false, ..Default::default() }).map_err(e)?.z.unwrap_or(f64::NAN);
        worst = worst.max((h - z * z).abs());
    }
    ensure(worst <= 1e-9, || format!("chi2_1 vs z^2 max diff {worst:e}"))?;
    Ok(format!("H={:.4} p={p:.4}; U=0 p={mp:.4}; Holm {holm:?}; rho=+1/-1; |H-z^2|<={worst:.1e} over 100 sets", kw.statistic))
}

fn preference_table() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let counts = dir.path().join("counts.jsonl");
    std::fs::write(
        &counts,
        concat!(
            "{\"role\":\"radiologist\",\"arm\":\"AI\",\"counts\":[24,40,125,111]}\n",
            "{\"role\":\"radiologist\",\"arm\":\"Senior\",\"counts\":[214,62,14,10]}\n",
        ),
    )
    .map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_crb"))
        .args(["table", "S3_pref", "--input"])
        .arg(&counts)
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.success(), || format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
    let cells: Vec<&str> = text.lines().flat_map(|l| l.split('\t')).collect();
    for want in ["24 (0.080)", "214 (0.713)"] {
        ensure(cells.contains(&want), || format!("no cell {want:?} in:\n{text}"))?;
    }
    Ok("cells \"24 (0.080)\" and \"214 (0.713)\" emitted by `crb table S3_pref`".into())
}

fn relative_change_check() -> Outcome {
    let r = relative_change(0.07, 0.16).map_err(|e| e.to_string())?;
    ensure((r - 129.0).abs() <= 1.5, || format!("{r}"))?;
    Ok(format!("{r:+.2}% vs expected +129% (display rounding of 0.07 / 0.16)"))
}

fn kernel_properties() -> Outcome {
    let cfg = RopeConfig::new(64);
    let v: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
    ensure(rope_rotate(&v, 0, &cfg).map_err(|e| e.to_string())? == v, || "RoPE at p=0 is not the identity".into())?;
    let checks = selftest(7);
    let get = |name: &str| checks.iter().find(|c| c.name == name).map(|c| c.observed).unwrap_or(f64::NAN);
    let (norm, rel) = (get("rope_norm_preservation"), get("rope_relative_position"));
    ensure(norm <= 1e-12, || format!("norm error {norm:e}"))?;
    ensure(rel <= 1e-9, || format!("relative-position error {rel:e}"))?;
    let grad = (0..100).map(|s| gradient_check(s, (3, 5, 4, 6), 1e-5, Gelu::Exact)).fold(0.0, f64::max);
    ensure(grad < 1e-4, || format!("projector gradient rel error {grad:e}"))?;
    let even: Vec<usize> = (0..96).map(|k| 2 * k).collect();
    ensure(sample_slices(192, 96) == even, || "sample_slices(192, 96) is not the even indices".into())?;
    let ids: Vec<u32> = (0..10).collect();
    let with = mix_prompts(&ids, (1, 4), 7).iter().filter(|(_, v)| *v == PromptVariant::WithDiagnosis).count();
    ensure(with == 2, || format!("mix_prompts gave {with} with-diagnosis"))?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    ensure(failed.is_empty(), || format!("selftest failures {failed:?}"))?;
    Ok(format!("norm {norm:.1e}, relative {rel:.1e} over 1000 draws, grad {grad:.1e} over 100 seeds, slices/mix exact"))
}

fn pipeline() -> Outcome {
    let lex = EntityLexicon::builtin();
    let rates = [(Arm::Ai, 0.30, 0.20), (Arm::Novice, 0.45, 0.10), (Arm::Intermediate, 0.25, 0.15), (Arm::Senior, 0.10, 0.05)];
    let profiles: BTreeMap<Arm, FaultProfile> = rates
        .iter()
        .map(|&(a, o, i)| (a, FaultProfile { omission_rate: o, incorrection_rate: i, cs_probability: 0.3 }))
        .collect();
    let config = StudyConfig::ai_versus_manual("pipeline", 17);
    let sc = Scenario::with_profiles(config, 2000, 31, &lex, &profiles).map_err(|e| e.to_string())?;

    // Direct: manifests -> auto-annotations -> error burden.
    let anns = auto_annotate(&sc.manifest, &sc.case_ids(), &Arm::AI_VERSUS_MANUAL, "auto", RaterRole::Radiologist);
    let rows = error_burden(&anns, &sc.cases).map_err(|e| e.to_string())?;
    let corpus = synth_cohort(&CohortSpec::with_defaults(&lex, 2000, 31), &lex).map_err(|e| e.to_string())?;
    let mean_entities = corpus.entities.iter().map(|e| e.entities.len() as f64).sum::<f64>() / 2000.0;
    let mut worst: f64 = 0.0;
    for &(arm, o, _) in &rates {
        for section in Section::ALL {
            let (mut total, mut n) = (0.0, 0usize);
            for r in rows.iter().filter(|r| r.arm == arm && r.section == section && r.kind == ErrorKind::Omission) {
                total += r.mean_count * r.n_cases as f64;
                n += r.n_cases;
            }
            let est = total / n as f64 / mean_entities;
            worst = worst.max((est - o).abs());
        }
    }
    ensure(worst <= 0.03, || format!("omission rate off by {worst:.4}"))?;

    let mut shuffled = anns.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let e = |e: crb_core::human_eval::HumanEvalError| e.to_string();
    ensure(rank_distribution(&anns, 4).map_err(e)? == rank_distribution(&shuffled, 4).map_err(e)?, || "rank aggregation depends on order".into())?;
    ensure(quality_means(&anns).map_err(e)? == quality_means(&shuffled).map_err(e)?, || "quality aggregation depends on order".into())?;
    ensure(summarize(&anns, &sc.cases, 4).map_err(e)? == summarize(&shuffled, &sc.cases, 4).map_err(e)?, || "summary depends on order".into())?;

    // Over HTTP: the same study rated through the service, then replayed.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let open = |d: &std::path::Path| -> Result<(BackgroundServer, Client), String> {
        let state = AppState::open(LogStore::new(Some(d.to_path_buf())).map_err(|e| e.to_string())?, 0).map_err(|e| e.to_string())?;
        let srv = BackgroundServer::start(state).map_err(|e| e.to_string())?;
        let client = Client::new(srv.url(""));
        Ok((srv, client))
    };
    let (bytes, export, served_worst) = {
        let (_srv, client) = open(dir.path())?;
        simulate::load(&client, &sc).map_err(|e| e.to_string())?;
        let rater = OracleRater::new(&sc, "rad-1", RaterRole::Radiologist);
        let done = simulate::run(&client, "pipeline", &rater).map_err(|e| e.to_string())?;
        ensure(done == 2000, || format!("rater completed {done} tasks"))?;
        let res = client.results("pipeline").map_err(|e| e.to_string())?;
        let mut w: f64 = 0.0;
        for &(arm, o, _) in &rates {
            let (mut total, mut n) = (0.0, 0usize);
            for r in res.summary.error_burden.iter().filter(|r| r.arm == arm && r.kind == ErrorKind::Omission) {
                total += r.mean_count * r.n_cases as f64;
                n += r.n_cases;
            }
            // n counts each case once per section row, so this averages both sections.
            w = w.max((total / n as f64 / mean_entities - o).abs());
        }
        (client.results_bytes("pipeline").map_err(|e| e.to_string())?, client.export("pipeline").map_err(|e| e.to_string())?, w)
    };
    ensure(served_worst <= 0.03, || format!("served omission rate off by {served_worst:.4}"))?;
    let replay_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(replay_dir.path().join("pipeline.jsonl"), &export).map_err(|e| e.to_string())?;
    let (_srv, client) = open(replay_dir.path())?;
    let replayed = client.results_bytes("pipeline").map_err(|e| e.to_string())?;
    ensure(replayed == bytes, || "replayed results differ from the original payload".into())?;
    Ok(format!(
        "2000 cases; omission within {worst:.4} (direct) / {served_worst:.4} (via HTTP); order-invariant; replay of {} events byte-identical ({} bytes)",
        export.iter().filter(|&&b| b == b'\n').count(),
        bytes.len()
    ))
}

fn entity_round_trip() -> Outcome {
    let lex = EntityLexicon::builtin();
    let corpus = synth_cohort(&CohortSpec::with_defaults(&lex, 10_000, 2025), &lex).map_err(|e| e.to_string())?;
    let sampled: BTreeMap<&str, &Vec<String>> = corpus.entities.iter().map(|c| (c.case_id.as_str(), &c.entities)).collect();
    let mut checked = 0usize;
    let mut pairs = Vec::new();
    for r in &corpus.reports {
        let got = lex.extract(&r.impression, r.language);
        let want: std::collections::BTreeSet<String> = sampled[r.case_id.as_str()].iter().cloned().collect();
        ensure(got == want, || format!("{}: extracted {got:?}, sampled {want:?}", r.report_id))?;
        pairs.push((got.clone(), got));
        checked += 1;
    }
    let recall = corpus_recall(&pairs).map_err(|e| e.to_string())?;
    ensure(recall == 1.0, || format!("corpus recall {recall}"))?;
    Ok(format!("{checked} impressions (10000 cases x zh/en) round-trip exactly; corpus_recall = {recall}"))
}

fn no_secondary_component() -> Outcome {
    let lex = EntityLexicon::builtin();
    let sc = Scenario::synthetic(StudyConfig::manual_versus_collaboration("headless", 3), 3, 3, &lex).map_err(|e| e.to_string())?;
    let srv = BackgroundServer::start(AppState::in_memory(0)).map_err(|e| e.to_string())?;
    let client = Client::new(srv.url(""));
    simulate::load(&client, &sc).map_err(|e| e.to_string())?;
    let rater = OracleRater::new(&sc, "cli-1", RaterRole::Clinician);
    client.register_rater("headless", "cli-1", RaterRole::Clinician).map_err(|e| e.to_string())?;
    let task = client.next_task("headless", "cli-1").map_err(|e| e.to_string())?.ok_or("no task served")?;
    ensure(task.scale == 6 && task.presented.len() == 6, || format!("scale {} with {} candidates", task.scale, task.presented.len()))?;
    let ack = client.submit(&task.task_id, &rater.answer(&task)?).map_err(|e| e.to_string())?;
    let dup = client.submit(&task.task_id, &rater.answer(&task)?).err().and_then(|e| e.status());
    ensure(ack.stored == 6 && dup == Some(409), || format!("stored {} then retry status {dup:?}", ack.stored))?;
    let ui_dirs = ["rater_ui", "rater-ui", "ui", "web"].iter().filter(|d| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(d).join("dist").exists()).count();
    ensure(ui_dirs == 0, || "a built UI bundle is present".into())?;
    Ok(format!("scale-6 task served at {} and stored over plain HTTP; duplicate retry rejected; no UI bundle", srv.addr))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("metric oracles", Duration::from_secs(1), metric_oracles),
        ("statistics oracles", Duration::from_secs(5), stats_oracles),
        ("preference table from reference counts", Duration::from_secs(10), preference_table),
        ("relative change vs +129%", Duration::from_secs(1), relative_change_check),
        ("kernel properties", Duration::from_secs(10), kernel_properties),
        ("end-to-end pipeline oracle", Duration::from_secs(60), pipeline),
        ("entity round trip", Duration::from_secs(60), entity_round_trip),
        ("primary suite without secondary component", Duration::from_secs(10), no_secondary_component),
    ];
    let mut failures = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(e) => (false, e),
        };
        failures += usize::from(!ok);
        println!(
            "{} {name}: {detail} [{:.2}s / {}s]",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 8 criteria passed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
