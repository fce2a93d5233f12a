//! Report parsing: section splitting, tokenization and lexicon entity
//! extraction.

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};
use crate::model::Language;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Findings,
    Impression,
}

impl Section {
    pub const ALL: [Section; 2] = [Section::Findings, Section::Impression];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::Findings => "findings",
            Section::Impression => "impression",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("raw report text is empty")]
    EmptyInput,
    #[error("missing {} section header", .0.as_str())]
    MissingSection(Section),
    #[error("{} section header occurs more than once", .0.as_str())]
    AmbiguousSection(Section),
    #[error("{} section is empty", .0.as_str())]
    EmptySection(Section),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sections {
    pub findings: String,
    pub impression: String,
}

/// Canonical (findings, impression) headers written for a language.
pub fn section_headers(language: Language) -> (&'static str, &'static str) {
    match language {
        Language::En => ("Findings:", "Impression:"),
        Language::Zh => ("影像所见：", "诊断印象："),
    }
}

/// Returns (start, end) byte offsets of every header occurrence.
fn find_header(raw: &str, folded: &str, language: Language, section: Section) -> Vec<(usize, usize)> {
    match language {
        Language::En => {
            let needle = match section {
                Section::Findings => "findings:",
                Section::Impression => "impression:",
            };
            folded
                .match_indices(needle)
                .map(|(i, m)| (i, i + m.len()))
                .collect()
        }
        Language::Zh => {
            let stem = match section {
                Section::Findings => "影像所见",
                Section::Impression => "诊断印象",
            };
            raw.match_indices(stem)
                .filter_map(|(i, m)| {
                    let after = &raw[i + m.len()..];
                    let colon = after.chars().next().filter(|c| *c == '：' || *c == ':')?;
                    Some((i, i + m.len() + colon.len_utf8()))
                })
                .collect()
        }
    }
}

/// Splits raw report text into its Findings and Impression bodies.
///
/// English headers are matched case-insensitively; Chinese headers accept
/// either a full-width or an ASCII colon. Each body runs from the end of its
/// header to the start of the other header (or end of text) and is trimmed.
pub fn parse_sections(raw: &str, language: Language) -> Result<Sections, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let folded = raw.to_ascii_lowercase();
    let mut spans = [(0usize, 0usize); 2];
    for (slot, section) in Section::ALL.into_iter().enumerate() {
        let hits = find_header(raw, &folded, language, section);
        match hits.len() {
            0 => return Err(ParseError::MissingSection(section)),
            1 => spans[slot] = hits[0],
            _ => return Err(ParseError::AmbiguousSection(section)),
        }
    }
    let body = |slot: usize| {
        let (_, start) = spans[slot];
        let (other_start, _) = spans[1 - slot];
        let end = if other_start >= start { other_start } else { raw.len() };
        raw[start..end].trim().to_string()
    };
    let findings = body(0);
    let impression = body(1);
    if findings.is_empty() {
        return Err(ParseError::EmptySection(Section::Findings));
    }
    if impression.is_empty() {
        return Err(ParseError::EmptySection(Section::Impression));
    }
    Ok(Sections {
        findings,
        impression,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub language: Language,
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(language: Language, tokens: Vec<String>) -> Self {
        Self { language, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0xF900..=0xFAFF
        | 0x2F800..=0x2FA1F)
}

/// Per-language tokenization used by every n-gram metric.
///
/// English: lowercase, whitespace split, leading/trailing non-alphanumerics
/// stripped, empty tokens dropped. Chinese: one token per CJK character,
/// maximal ASCII alphanumeric runs kept whole, everything else dropped.
pub fn tokenize(text: &str, language: Language) -> TokenSequence {
    let tokens = match language {
        Language::En => text
            .split_whitespace()
            .map(|w| {
                w.trim_matches(|c: char| !c.is_alphanumeric())
                    .to_lowercase()
            })
            .filter(|w| !w.is_empty())
            .collect(),
        Language::Zh => {
            let mut out = Vec::new();
            let mut run = String::new();
            for c in text.chars() {
                if c.is_ascii_alphanumeric() {
                    run.push(c);
                    continue;
                }
                if !run.is_empty() {
                    out.push(std::mem::take(&mut run));
                }
                if is_cjk(c) {
                    out.push(c.to_string());
                }
            }
            if !run.is_empty() {
                out.push(run);
            }
            out
        }
    };
    TokenSequence { language, tokens }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub canonical_id: String,
    pub icd10: String,
    pub display_en: String,
    pub surfaces_en: Vec<String>,
    pub surfaces_zh: Vec<String>,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error(transparent)]
    Read(#[from] JsonlError),
    #[error("duplicate canonical id `{0}`")]
    DuplicateId(String),
    #[error("entry `{0}` has no {1} surface form")]
    NoSurface(String, Language),
    #[error("entry `{id}` has malformed ICD-10 code `{code}`")]
    BadIcd10 { id: String, code: String },
    #[error("entry `{id}`: English surface `{surface}` is not lowercase")]
    NotLowercase { id: String, surface: String },
}

/// Letter, two digits, optional ".digits"; or letter + digits as in `K07`.
fn icd10_ok(code: &str) -> bool {
    let mut parts = code.splitn(2, '.');
    let head = parts.next().unwrap_or("");
    let mut chars = head.chars();
    let letter_ok = chars.next().is_some_and(|c| c.is_ascii_uppercase());
    let digits: String = chars.collect();
    let head_ok = letter_ok && !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit());
    let tail_ok = parts
        .next()
        .is_none_or(|t| !t.is_empty() && t.chars().all(|c| c.is_ascii_digit()));
    head_ok && tail_ok
}

#[derive(Debug, Clone)]
struct EnMatcher {
    tokens: Vec<String>,
    entry: usize,
}

#[derive(Debug, Clone)]
struct ZhMatcher {
    surface: String,
    entry: usize,
}

/// Canonical diagnosis vocabulary with per-language surface forms.
///
/// Immutable once built; matchers are precompiled longest-surface-first.
#[derive(Debug, Clone)]
pub struct EntityLexicon {
    entries: Vec<LexiconEntry>,
    en: Vec<EnMatcher>,
    zh: Vec<ZhMatcher>,
}

impl EntityLexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        let mut ids = HashSet::new();
        for e in &entries {
            if !ids.insert(e.canonical_id.as_str()) {
                return Err(LexiconError::DuplicateId(e.canonical_id.clone()));
            }
            if !icd10_ok(&e.icd10) {
                return Err(LexiconError::BadIcd10 {
                    id: e.canonical_id.clone(),
                    code: e.icd10.clone(),
                });
            }
            if e.surfaces_en.iter().all(|s| s.trim().is_empty()) {
                return Err(LexiconError::NoSurface(e.canonical_id.clone(), Language::En));
            }
            if e.surfaces_zh.iter().all(|s| s.trim().is_empty()) {
                return Err(LexiconError::NoSurface(e.canonical_id.clone(), Language::Zh));
            }
            if let Some(s) = e.surfaces_en.iter().find(|s| s.to_lowercase() != **s) {
                return Err(LexiconError::NotLowercase {
                    id: e.canonical_id.clone(),
                    surface: s.clone(),
                });
            }
        }

        let mut en: Vec<EnMatcher> = entries
            .iter()
            .enumerate()
            .flat_map(|(entry, e)| {
                e.surfaces_en.iter().map(move |s| EnMatcher {
                    tokens: tokenize(s, Language::En).tokens,
                    entry,
                })
            })
            .filter(|m| !m.tokens.is_empty())
            .collect();
        en.sort_by(|a, b| {
            let len = |m: &EnMatcher| m.tokens.iter().map(|t| t.chars().count()).sum::<usize>();
            b.tokens
                .len()
                .cmp(&a.tokens.len())
                .then(len(b).cmp(&len(a)))
                .then(a.entry.cmp(&b.entry))
        });

        let mut zh: Vec<ZhMatcher> = entries
            .iter()
            .enumerate()
            .flat_map(|(entry, e)| {
                e.surfaces_zh.iter().map(move |s| ZhMatcher {
                    surface: s.trim().to_string(),
                    entry,
                })
            })
            .filter(|m| !m.surface.is_empty())
            .collect();
        zh.sort_by(|a, b| {
            b.surface
                .chars()
                .count()
                .cmp(&a.surface.chars().count())
                .then(a.entry.cmp(&b.entry))
        });

        Ok(Self { entries, en, zh })
    }

    pub fn from_reader<R: BufRead>(reader: R, origin: &str) -> Result<Self, LexiconError> {
        Self::new(jsonl::read_records(reader, origin)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, LexiconError> {
        Self::new(jsonl::read_file(path)?)
    }

    /// The shipped vocabulary: every row of the CBCT disease/treatment table.
    pub fn builtin() -> Self {
        Self::from_reader(DEFAULT_LEXICON.as_bytes(), "builtin lexicon")
            .expect("builtin lexicon is valid")
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, canonical_id: &str) -> Option<&LexiconEntry> {
        self.entries.iter().find(|e| e.canonical_id == canonical_id)
    }

    pub fn position(&self, canonical_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.canonical_id == canonical_id)
    }

    pub fn contains(&self, canonical_id: &str) -> bool {
        self.position(canonical_id).is_some()
    }

    /// Canonical ids mentioned in a diagnostic impression.
    pub fn extract(&self, impression: &str, language: Language) -> BTreeSet<String> {
        let mut found = BTreeSet::new();
        for clause in clauses(impression) {
            match language {
                Language::En => self.match_en(clause, &mut found),
                Language::Zh => self.match_zh(clause, &mut found),
            }
        }
        found.into_iter().map(|i| self.entries[i].canonical_id.clone()).collect()
    }

    fn match_en(&self, clause: &str, found: &mut BTreeSet<usize>) {
        let tokens = tokenize(clause, Language::En).tokens;
        let mut consumed = vec![false; tokens.len()];
        for m in &self.en {
            let w = m.tokens.len();
            if w > tokens.len() {
                continue;
            }
            let mut start = 0;
            while start + w <= tokens.len() {
                if tokens[start..start + w] == m.tokens[..] && !consumed[start..start + w].contains(&true) {
                    consumed[start..start + w].iter_mut().for_each(|c| *c = true);
                    found.insert(m.entry);
                    start += w;
                } else {
                    start += 1;
                }
            }
        }
    }

    fn match_zh(&self, clause: &str, found: &mut BTreeSet<usize>) {
        let text: String = clause.chars().filter(|c| !c.is_whitespace()).collect();
        let mut consumed = vec![false; text.len()];
        for m in &self.zh {
            for (i, s) in text.match_indices(m.surface.as_str()) {
                let span = i..i + s.len();
                if !consumed[span.clone()].contains(&true) {
                    consumed[span].iter_mut().for_each(|c| *c = true);
                    found.insert(m.entry);
                }
            }
        }
    }
}

const CLAUSE_BREAKS: &[char] = &[
    '.', ';', ',', ':', '!', '?', '(', ')', '\n', '\r', '。', '；', '，', '、', '：', '！', '？', '（',
    '）',
];

/// Clause boundaries for entity matching. No surface form spans one of these.
fn clauses(text: &str) -> impl Iterator<Item = &str> {
    text.split(CLAUSE_BREAKS).filter(|c| !c.trim().is_empty())
}

/// Free-function form of [`EntityLexicon::extract`].
pub fn extract_entities(impression: &str, language: Language, lexicon: &EntityLexicon) -> BTreeSet<String> {
    lexicon.extract(impression, language)
}
