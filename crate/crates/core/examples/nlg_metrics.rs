//! Scores one English and one Chinese hypothesis against its reference.
//!
//! cargo run -p crb-core --example nlg_metrics

use crb_core::metrics::{bleu, evaluate, meteor, rouge_l, HashingProvider, ScoredPair};
use crb_core::parser::tokenize;
use crb_core::Language;

fn main() {
    let pairs = [
        (
            Language::En,
            "Periapical lesion at tooth 36. Impacted third molar.",
            "Periapical lesion at tooth 36. Impacted lower third molar with root resorption.",
        ),
        (Language::Zh, "可见根尖周炎相关影像表现。", "可见根尖周炎及阻生齿相关影像表现。"),
    ];
    let provider = HashingProvider::new(256, 0);
    for (lang, hyp, reference) in pairs {
        let (h, r) = (tokenize(hyp, lang), tokenize(reference, lang));
        println!("[{lang}] {} hyp tokens, {} ref tokens", h.len(), r.len());
        for n in 1..=4 {
            println!("  BLEU-{n}  {:.4}", bleu(&h, std::slice::from_ref(&r), n).unwrap());
        }
        println!("  ROUGE-L {:.4}", rouge_l(&h, &r));
        println!("  METEOR  {:.4}", meteor(&h, &r));

        let pair = ScoredPair { case_id: "demo".into(), hyp: h, reference: r };
        let (_, corpus) = evaluate(&[pair], Some(&provider)).unwrap();
        println!("  BERTScore (hashing embedder) {:.4}", corpus.bertscore_f1.unwrap());
    }
}
