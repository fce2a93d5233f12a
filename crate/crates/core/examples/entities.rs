//! Parses a raw bilingual report pair, extracts impression entities and
//! scores the prediction against the reference.
//!
//! cargo run -p crb-core --example entities

use std::collections::BTreeSet;

use crb_core::diagnosis::{corpus_recall, per_entity_detection, score_case};
use crb_core::parser::{parse_sections, section_headers};
use crb_core::{EntityLexicon, Language};

fn main() {
    let lex = EntityLexicon::builtin();
    let (f, i) = section_headers(Language::Zh);
    let raw_zh = format!("{f}\n可见根尖周炎相关影像表现。\n{i}\n根尖周炎；阻生齿。");
    let zh = parse_sections(&raw_zh, Language::Zh).expect("well-formed report");
    let pred_zh = lex.extract(&zh.impression, Language::Zh);
    let ref_zh: BTreeSet<String> = lex.extract("根尖周炎；阻生齿；牙脱位。", Language::Zh);

    let pred_en = lex.extract("Apical periodontitis. Impacted tooth.", Language::En);
    let ref_en = lex.extract("Apical periodontitis; impacted tooth; malocclusion.", Language::En);

    for (lang, pred, reference) in [("zh", &pred_zh, &ref_zh), ("en", &pred_en, &ref_en)] {
        let s = score_case(pred, reference);
        println!("{lang}: predicted {pred:?}");
        println!("    reference {reference:?}");
        println!("    tp={} fp={} fn={} accuracy={:.3} recall={:.3}", s.tp, s.fp, s.fn_, s.accuracy, s.recall);
    }

    let cases = vec![(pred_zh, ref_zh), (pred_en, ref_en)];
    println!("corpus recall {:.3}", corpus_recall(&cases).unwrap());
    for e in lex.entries().iter().take(6) {
        if let Some(rate) = per_entity_detection(&cases, &e.canonical_id) {
            println!("  {:<24} detected in {:.0}% of reference mentions", e.canonical_id, 100.0 * rate);
        }
    }
}
