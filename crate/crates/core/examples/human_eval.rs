//! Builds simulated rater annotations from a degradation manifest, then
//! aggregates ranks, rubric means and error burden and renders two tables.
//!
//! cargo run -p crb-core --example human_eval

use crb_core::model::{Arm, RaterRole};
use crb_core::summary::summarize;
use crb_core::synth::{auto_annotate, degrade_corpus, synth_cohort, tiered_profiles, CohortSpec};
use crb_core::tables::{burden_table, preference_table, TableFormat, TableId};
use crb_core::EntityLexicon;

fn main() {
    let lex = EntityLexicon::builtin();
    let arms = Arm::AI_VERSUS_MANUAL;
    let corpus = synth_cohort(&CohortSpec::with_defaults(&lex, 80, 3), &lex).unwrap();
    let (_, manifest) = degrade_corpus(&corpus, &tiered_profiles(&arms), &lex, 3).unwrap();
    let ids: Vec<String> = corpus.cases.iter().map(|c| c.case_id.clone()).collect();
    let mut annotations = auto_annotate(&manifest, &ids, &arms, "rad-1", RaterRole::Radiologist);
    annotations.extend(auto_annotate(&manifest, &ids, &arms, "cli-1", RaterRole::Clinician));

    let summary = summarize(&annotations, &corpus.cases, 4).unwrap();
    for q in &summary.quality {
        println!(
            "{:<12} {:<12} factual {:.2} coherence {:.2} safety {:.2} use {:.2}",
            format!("{:?}", q.role),
            q.arm.to_string(),
            q.means.factual_consistency,
            q.means.coherence,
            q.means.medical_safety,
            q.means.clinical_use
        );
    }

    let cohorts: Vec<_> = summary.ranks.iter().map(|c| (c.role, c.distribution.clone())).collect();
    println!("\n{}", preference_table(TableId::S3Pref, &cohorts).unwrap().render(TableFormat::Markdown));
    println!("{}", burden_table(TableId::S4, &annotations, &corpus.cases).unwrap().render(TableFormat::Markdown));
}
