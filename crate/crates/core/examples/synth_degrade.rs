//! Synthesizes a small cohort, degrades it into four arms and shows what
//! the fault injection did to one case.
//!
//! cargo run -p crb-core --example synth_degrade

use crb_core::model::Arm;
use crb_core::synth::{degrade_corpus, synth_cohort, tiered_profiles, CohortSpec};
use crb_core::{EntityLexicon, Language};

fn main() {
    let lex = EntityLexicon::builtin();
    let corpus = synth_cohort(&CohortSpec::with_defaults(&lex, 12, 42), &lex).unwrap();
    let profiles = tiered_profiles(&Arm::AI_VERSUS_MANUAL);
    let (reports, manifest) = degrade_corpus(&corpus, &profiles, &lex, 42).unwrap();
    println!("{} cases, {} degraded reports, {} injected errors", corpus.cases.len(), reports.len(), manifest.len());

    let case = &corpus.cases[0];
    println!("\n{} ({:?}, {:?}) entities {:?}", case.case_id, case.department, case.fov, corpus.entities[0].entities);
    let gt = corpus.reports.iter().find(|r| r.case_id == case.case_id && r.language == Language::En).unwrap();
    println!("  ground truth: {}", gt.impression);
    for r in reports.iter().filter(|r| r.case_id == case.case_id && r.language == Language::En) {
        println!("  {:<13} {}", r.arm.to_string(), r.impression);
    }
    for m in manifest.iter().filter(|m| m.case_id == case.case_id) {
        println!("  {:?} {:?} {:?} {} cs={}", m.arm, m.section, m.kind, m.entity, m.clinically_significant);
    }
}
