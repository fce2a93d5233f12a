//! Evaluation workbench for bilingual (Chinese/English) CBCT radiology reports.
//!
//! The crate is organized by capability:
//!
//! - [`model`]: shared domain types (cases, reports, arms, study configuration)
//!   and study validation.
//! - [`parser`]: section parsing, per-language tokenization and lexicon-based
//!   diagnosis entity extraction.
//! - [`metrics`]: BLEU-1..4, ROUGE-L, METEOR and BERTScore with pluggable
//!   embedding providers.
//! - [`diagnosis`]: entity-level accuracy/recall and per-entity detection rates.
//! - [`human_eval`]: preference-ranking, quality-rubric and error-burden
//!   aggregation for rater annotations.
//! - [`stats`]: rank-based nonparametric statistics (Kruskal–Wallis,
//!   Mann–Whitney U, Holm, Spearman) and their distribution functions.
//! - [`kernels`]: reference implementations of the encoder-side math (2D RoPE,
//!   slice sampling, prompt mixing, the MLP projector and its gradient).
//! - [`synth`]: deterministic synthetic cohorts and fault injection.
//! - [`summary`]: one-call aggregation of a finished study.
//! - [`tables`]: fixed-layout table emission.
//! - [`commands`]: the command implementations behind the `crb` binary.

pub mod commands;
pub mod diagnosis;
pub mod human_eval;
pub mod jsonl;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod parser;
pub mod stats;
pub mod summary;
pub mod synth;
pub mod tables;

pub use model::{Arm, CaseRecord, Language, Report, StudyConfig};
pub use parser::{EntityLexicon, TokenSequence};
