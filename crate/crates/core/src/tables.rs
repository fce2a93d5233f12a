//! Fixed-layout result tables rendered as TSV or Markdown.
//!
//! Number formats are locked (3-decimal metrics, "count (proportion)" rank
//! cells, 2-decimal burden means) so golden outputs stay byte-stable.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::human_eval::{burden_samples, Annotation, BurdenOutcome, ErrorKind, HumanEvalError, RankDistribution};
use crate::metrics::MetricReport;
use crate::model::{Arm, CaseRecord, Department, Language, ParseEnumError, RaterRole};
use crate::parser::Section;
use crate::stats::{compare_against, kruskal_wallis, MwuOptions, StatsError};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("no input rows for table {0}")]
    Empty(TableId),
    #[error("missing data: {0}")]
    Missing(String),
    #[error(transparent)]
    HumanEval(#[from] HumanEvalError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TableId {
    S2,
    #[serde(rename = "S3_detect")]
    S3Detect,
    #[serde(rename = "S3_pref")]
    S3Pref,
    S4,
    S5,
    S6,
    S7,
    S8,
}

impl TableId {
    pub const ALL: [TableId; 8] = [
        TableId::S2,
        TableId::S3Detect,
        TableId::S3Pref,
        TableId::S4,
        TableId::S5,
        TableId::S6,
        TableId::S7,
        TableId::S8,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TableId::S2 => "S2",
            TableId::S3Detect => "S3_detect",
            TableId::S3Pref => "S3_pref",
            TableId::S4 => "S4",
            TableId::S5 => "S5",
            TableId::S6 => "S6",
            TableId::S7 => "S7",
            TableId::S8 => "S8",
        }
    }
}

impl std::fmt::Display for TableId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableId {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ParseEnumError::new("table id", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Tsv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(TableFormat::Tsv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(ParseEnumError::new("table format", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Row {
    /// A group heading spanning the table ("ZH", "Findings", "Radiologists").
    Section(String),
    Data(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub id: TableId,
    pub header: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn render(&self, format: TableFormat) -> String {
        let width = self.header.len();
        let mut out = String::new();
        match format {
            TableFormat::Tsv => {
                out.push_str(&self.header.join("\t"));
                out.push('\n');
                for row in &self.rows {
                    match row {
                        Row::Section(label) => {
                            out.push_str(label);
                            out.push_str(&"\t".repeat(width - 1));
                        }
                        Row::Data(cells) => out.push_str(&cells.join("\t")),
                    }
                    out.push('\n');
                }
            }
            TableFormat::Markdown => {
                let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
                out.push_str(&line(&self.header));
                out.push_str(&line(&vec!["---".to_string(); width]));
                for row in &self.rows {
                    match row {
                        Row::Section(label) => {
                            let mut cells = vec![format!("**{label}**")];
                            cells.resize(width, String::new());
                            out.push_str(&line(&cells));
                        }
                        Row::Data(cells) => out.push_str(&line(&cells.iter().map(|c| md_escape(c)).collect::<Vec<_>>())),
                    }
                }
            }
        }
        out
    }

    pub fn data_rows(&self) -> impl Iterator<Item = &Vec<String>> {
        self.rows.iter().filter_map(|r| match r {
            Row::Data(c) => Some(c),
            Row::Section(_) => None,
        })
    }

    /// The cell in the first data row whose first column is `row_label`.
    pub fn cell(&self, row_label: &str, column: &str) -> Option<&str> {
        let col = self.header.iter().position(|h| h == column)?;
        self.data_rows().find(|r| r[0] == row_label).map(|r| r[col].as_str())
    }
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn fmt_fixed(v: f64, decimals: usize) -> String {
    // Avoid "-0.000" for tiny negatives.
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| fmt_fixed(v, decimals))
}

// ---- S2 ----

/// One method's corpus metrics in one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub language: Language,
    pub report: MetricReport,
}

pub const S2_HEADER: [&str; 9] = [
    "Method", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "METEOR", "BERTScore", "Recall",
];

/// Methods grouped under ZH then EN, input order kept inside a group.
pub fn s2_table(rows: &[MethodMetrics]) -> Result<Table, TableError> {
    if rows.is_empty() {
        return Err(TableError::Empty(TableId::S2));
    }
    let mut out = Vec::new();
    for lang in Language::ALL {
        let group: Vec<&MethodMetrics> = rows.iter().filter(|r| r.language == lang).collect();
        if group.is_empty() {
            continue;
        }
        out.push(Row::Section(lang.as_str().to_uppercase()));
        for m in group {
            let r = &m.report;
            let mut cells = vec![m.method.clone()];
            cells.extend(r.bleu.iter().map(|b| fmt_fixed(*b, 3)));
            cells.push(fmt_fixed(r.rouge_l, 3));
            cells.push(fmt_fixed(r.meteor, 3));
            cells.push(fmt_opt(r.bertscore_f1, 3));
            cells.push(fmt_opt(r.entity_recall, 3));
            out.push(Row::Data(cells));
        }
    }
    Ok(Table {
        id: TableId::S2,
        header: S2_HEADER.iter().map(|s| s.to_string()).collect(),
        rows: out,
    })
}

// ---- S3 detection ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub entity: String,
    pub display: String,
    pub zh: Option<f64>,
    pub en: Option<f64>,
}

pub fn s3_detect_table(rows: &[DetectionRow]) -> Result<Table, TableError> {
    if rows.is_empty() {
        return Err(TableError::Empty(TableId::S3Detect));
    }
    Ok(Table {
        id: TableId::S3Detect,
        header: vec!["Impression".into(), "ZH".into(), "EN".into()],
        rows: rows
            .iter()
            .map(|r| Row::Data(vec![r.display.clone(), fmt_opt(r.zh, 3), fmt_opt(r.en, 3)]))
            .collect(),
    })
}

// ---- preference ranks (S3_pref, S6) ----

/// Rank counts for one arm within one rater cohort.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankCounts {
    pub role: RaterRole,
    pub arm: Arm,
    pub counts: Vec<u64>,
}

fn pref_cell(count: u64, n: u64, decimals: usize) -> String {
    let p = if n == 0 { 0.0 } else { count as f64 / n as f64 };
    format!("{count} ({})", fmt_fixed(p, decimals))
}

/// S3_pref for a 4-point scale (3-decimal proportions) or S6 for a
/// 6-point scale (2-decimal proportions). Cohorts in role order, arms in
/// `arms` order; arms absent from a cohort are skipped.
pub fn preference_table(id: TableId, cohorts: &[(RaterRole, RankDistribution)]) -> Result<Table, TableError> {
    let (scale, arms, decimals): (u8, &[Arm], usize) = match id {
        TableId::S3Pref => (4, &Arm::AI_VERSUS_MANUAL, 3),
        TableId::S6 => (6, &S6_ROW_ORDER, 2),
        other => return Err(TableError::Missing(format!("{other} is not a preference table"))),
    };
    let mut rows = Vec::new();
    let mut sorted: Vec<&(RaterRole, RankDistribution)> = cohorts.iter().collect();
    sorted.sort_by_key(|c| c.0);
    for (role, dist) in sorted {
        if dist.scale != scale {
            return Err(TableError::Missing(format!(
                "{} cohort uses a {}-point scale, {id} needs {scale}",
                role.as_str(),
                dist.scale
            )));
        }
        let present: Vec<Arm> = arms.iter().copied().filter(|a| dist.arm(*a).is_some()).collect();
        if present.is_empty() {
            continue;
        }
        rows.push(Row::Section(role.cohort_label().to_string()));
        for arm in present {
            let r = dist.arm(arm).expect("present");
            let mut cells = vec![arm.label().to_string()];
            cells.extend(r.counts.iter().map(|&c| pref_cell(c, r.n, decimals)));
            rows.push(Row::Data(cells));
        }
    }
    if rows.is_empty() {
        return Err(TableError::Empty(id));
    }
    let mut header = vec!["Group".to_string()];
    header.extend((1..=scale).map(|r| format!("Rank {r}")));
    Ok(Table { id, header, rows })
}

/// Manual tiers first, then collaboration tiers.
pub const S6_ROW_ORDER: [Arm; 6] = [
    Arm::Novice,
    Arm::Intermediate,
    Arm::Senior,
    Arm::CoNovice,
    Arm::CoIntermediate,
    Arm::CoSenior,
];

/// Builds per-cohort distributions from raw counts.
pub fn distributions_from_counts(records: &[RankCounts]) -> Result<Vec<(RaterRole, RankDistribution)>, TableError> {
    let mut by_role: BTreeMap<RaterRole, Vec<&RankCounts>> = BTreeMap::new();
    for r in records {
        by_role.entry(r.role).or_default().push(r);
    }
    let mut out = Vec::new();
    for (role, recs) in by_role {
        let scale = recs[0].counts.len();
        if recs.iter().any(|r| r.counts.len() != scale) || !(scale == 4 || scale == 6) {
            return Err(TableError::Missing(format!("{} counts must all have length 4 or 6", role.as_str())));
        }
        let mut arms: Vec<crate::human_eval::ArmRanks> =
            recs.iter().map(|r| crate::human_eval::ArmRanks::from_counts(r.arm, r.counts.clone())).collect();
        arms.sort_by_key(|a| a.arm);
        out.push((role, RankDistribution { scale: scale as u8, arms }));
    }
    Ok(out)
}

// ---- error burden (S4, S5, S7, S8) ----

/// Row order of departments in the burden tables.
pub const DEPARTMENT_ROWS: [Department; 4] = [
    Department::Ortho,
    Department::Omfs,
    Department::PerioImplantProstho,
    Department::Endo,
];

const MARKERS: [&str; 3] = ["a", "b", "c"];
pub const SIGNIFICANCE: f64 = 0.05;

/// Whether an adjusted p earns a superscript; the threshold is strict.
pub fn is_marked(p_adjusted: Option<f64>) -> bool {
    p_adjusted.is_some_and(|p| p < SIGNIFICANCE)
}

fn superscript(letters: &[&str]) -> String {
    match letters {
        [] => String::new(),
        [one] => format!(" ^{one}"),
        many => format!(" ^{{{}}}", many.join(",")),
    }
}

/// Burden table for omissions (S4, S7) or incorrections (S5, S8).
///
/// S4/S5 compare AI with each manual tier: Kruskal-Wallis across the four
/// arms plus Holm-adjusted Mann-Whitney tests against AI, marked a/b/c when
/// the adjusted p is strictly below 0.05. S7/S8 report the Kruskal-Wallis p
/// across the six manual and collaboration arms without markers.
pub fn burden_table(id: TableId, annotations: &[Annotation], cases: &[CaseRecord]) -> Result<Table, TableError> {
    let (kind, arms, pairwise): (ErrorKind, &[Arm], bool) = match id {
        TableId::S4 => (ErrorKind::Omission, &Arm::AI_VERSUS_MANUAL, true),
        TableId::S5 => (ErrorKind::Incorrection, &Arm::AI_VERSUS_MANUAL, true),
        TableId::S7 => (ErrorKind::Omission, &Arm::MANUAL_AND_COLLABORATION, false),
        TableId::S8 => (ErrorKind::Incorrection, &Arm::MANUAL_AND_COLLABORATION, false),
        other => return Err(TableError::Missing(format!("{other} is not an error-burden table"))),
    };
    if annotations.is_empty() {
        return Err(TableError::Empty(id));
    }
    let mut rows = Vec::new();
    for section in Section::ALL {
        rows.push(Row::Section(match (section, pairwise) {
            (Section::Findings, _) => "Findings".to_string(),
            (Section::Impression, true) => "Impression".to_string(),
            (Section::Impression, false) => "Impressions".to_string(),
        }));
        for dept in DEPARTMENT_ROWS {
            for outcome in [BurdenOutcome::Count, BurdenOutcome::ClinicalSignificance] {
                let samples = burden_samples(annotations, cases, Some(dept), section, kind, outcome)?;
                let groups: Vec<Vec<f64>> = arms
                    .iter()
                    .map(|a| {
                        samples.get(a).cloned().filter(|g| !g.is_empty()).ok_or_else(|| {
                            TableError::Missing(format!("no {} annotations for {}", a.label(), dept.table_label()))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let outcome_label = match outcome {
                    BurdenOutcome::Count => "Count",
                    BurdenOutcome::ClinicalSignificance => "Clinical Significance",
                };
                let mut cells = vec![dept.table_label().to_string(), outcome_label.to_string()];
                let means: Vec<String> = groups
                    .iter()
                    .map(|g| fmt_fixed(g.iter().sum::<f64>() / g.len() as f64, 2))
                    .collect();
                let (marks, p) = if pairwise {
                    let cmp = compare_against(&groups, 0, MwuOptions::default())?;
                    let mut marks = vec![Vec::new(); groups.len()];
                    for (k, (idx, r)) in cmp.pairwise.iter().enumerate() {
                        if is_marked(r.p_adjusted) {
                            marks[0].push(MARKERS[k]);
                            marks[*idx].push(MARKERS[k]);
                        }
                    }
                    (marks, cmp.overall.p_value)
                } else {
                    (vec![Vec::new(); groups.len()], kruskal_wallis(&groups)?.p_value)
                };
                for (mean, m) in means.into_iter().zip(&marks) {
                    cells.push(format!("{mean}{}", superscript(m)));
                }
                cells.push(fmt_opt(p, 3));
                rows.push(Row::Data(cells));
            }
        }
    }
    let mut header = vec!["Subspecialty".to_string(), "Outcome".to_string()];
    header.extend(arms.iter().map(|a| a.label().to_string()));
    header.push("p_value".to_string());
    Ok(Table { id, header, rows })
}

/// Renders a table to a string in one call.
pub fn render(table: &Table, format: TableFormat) -> String {
    table.render(format)
}
