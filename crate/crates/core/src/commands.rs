//! Command implementations behind the `crb` binary. Each returns the text to
//! print (or writes into an output directory) and maps failures to exit
//! codes: 2 for unreadable or missing input, 3 for inputs that parse but do
//! not agree with each other.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::diagnosis::{corpus_recall, mean_accuracy, per_entity_detection, score_case_with, AccuracyMode, EntityScore};
use crate::human_eval::Annotation;
use crate::jsonl;
use crate::kernels::{self, Check};
use crate::metrics::{evaluate, EmbeddingProvider, MetricScope, ScoredPair};
use crate::model::{Arm, CaseRecord, Language, ParseEnumError, RaterRole, Report};
use crate::parser::{tokenize, EntityLexicon, TokenSequence};
use crate::stats::{compare_against, kruskal_wallis, mann_whitney_u, MwuOptions, StatResult};
use crate::summary::summarize;
use crate::synth::{
    auto_annotate, degrade_case, degrade_corpus, synth_cohort, tiered_profiles, CohortSpec, FaultProfile, ManifestItem,
};
use crate::tables::{
    burden_table, distributions_from_counts, preference_table, s2_table, s3_detect_table, DetectionRow, MethodMetrics,
    is_marked, RankCounts, Table, TableFormat, TableId,
};

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Consistency(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Input(_) => 2,
            CmdError::Consistency(_) => 3,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CmdError {
    CmdError::Input(e.to_string())
}

pub type CmdResult<T> = Result<T, CmdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Tsv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" | "jsonl" => Ok(OutputFormat::Json),
            "tsv" => Ok(OutputFormat::Tsv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            _ => Err(ParseEnumError::new("output format", s)),
        }
    }
}

impl OutputFormat {
    fn table(self) -> TableFormat {
        match self {
            OutputFormat::Markdown => TableFormat::Markdown,
            _ => TableFormat::Tsv,
        }
    }
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> CmdResult<Vec<T>> {
    jsonl::read_file(path).map_err(input)
}

fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut buf = Vec::new();
    jsonl::write_records(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn write_jsonl<T: Serialize>(dir: &Path, name: &str, records: &[T]) -> CmdResult<PathBuf> {
    let path = dir.join(name);
    jsonl::write_file(&path, records).map_err(|e| CmdError::Input(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Tokens scored by the text metrics: findings then impression.
pub fn report_tokens(report: &Report) -> TokenSequence {
    tokenize(&format!("{}\n{}", report.findings, report.impression), report.language)
}

type Key = (String, Language);

/// Pairs hypotheses with references on (case_id, language). Duplicate keys
/// or keys present on only one side are consistency errors.
fn pair_reports<'a>(
    hyps: &'a [Report],
    refs: &'a [Report],
    language: Option<Language>,
) -> CmdResult<Vec<(&'a Report, &'a Report)>> {
    let index = |reports: &'a [Report], side: &str| -> CmdResult<BTreeMap<Key, &'a Report>> {
        let mut map = BTreeMap::new();
        for r in reports.iter().filter(|r| language.is_none_or(|l| l == r.language)) {
            if map.insert((r.case_id.clone(), r.language), r).is_some() {
                return Err(CmdError::Consistency(format!(
                    "{side} has more than one {} report for case {}",
                    r.language, r.case_id
                )));
            }
        }
        Ok(map)
    };
    let (h, r) = (index(hyps, "hypothesis file")?, index(refs, "reference file")?);
    let hk: BTreeSet<&Key> = h.keys().collect();
    let rk: BTreeSet<&Key> = r.keys().collect();
    if hk != rk {
        let only_h: Vec<String> = hk.difference(&rk).take(5).map(|(c, l)| format!("{c}/{l}")).collect();
        let only_r: Vec<String> = rk.difference(&hk).take(5).map(|(c, l)| format!("{c}/{l}")).collect();
        return Err(CmdError::Consistency(format!(
            "case ids differ: only in hypotheses {only_h:?}, only in references {only_r:?}"
        )));
    }
    if h.is_empty() {
        return Err(CmdError::Input("no reports to compare".into()));
    }
    Ok(h.into_iter().map(|(k, hyp)| (hyp, r[&k])).collect())
}

pub struct NlgOptions<'a> {
    pub language: Option<Language>,
    pub method: String,
    pub embedder: Option<&'a dyn EmbeddingProvider>,
    pub format: OutputFormat,
}

/// Text metrics per case and per language corpus. JSON output carries one
/// `MethodMetrics` line per case followed by the corpus line(s); table
/// formats print the corpus rows in the S2 layout.
pub fn cmd_eval_nlg(hyp_file: &Path, ref_file: &Path, lexicon: &EntityLexicon, opts: &NlgOptions) -> CmdResult<String> {
    let hyps: Vec<Report> = read(hyp_file)?;
    let refs: Vec<Report> = read(ref_file)?;
    let pairs = pair_reports(&hyps, &refs, opts.language)?;
    let mut records = Vec::new();
    let mut corpus_rows = Vec::new();
    for lang in Language::ALL {
        let group: Vec<&(&Report, &Report)> = pairs.iter().filter(|(h, _)| h.language == lang).collect();
        if group.is_empty() {
            continue;
        }
        let scored: Vec<ScoredPair> = group
            .iter()
            .map(|(h, r)| ScoredPair { case_id: h.case_id.clone(), hyp: report_tokens(h), reference: report_tokens(r) })
            .collect();
        let entity_sets: Vec<(BTreeSet<String>, BTreeSet<String>)> = group
            .iter()
            .map(|(h, r)| (lexicon.extract(&h.impression, lang), lexicon.extract(&r.impression, lang)))
            .collect();
        let (mut per_case, mut corpus) = evaluate(&scored, opts.embedder).map_err(|e| CmdError::Consistency(e.to_string()))?;
        for (rep, (p, r)) in per_case.iter_mut().zip(&entity_sets) {
            let s = score_case_with(p, r, AccuracyMode::default());
            rep.entity_accuracy = Some(s.accuracy);
            rep.entity_recall = Some(s.recall);
        }
        corpus.entity_accuracy = Some(mean_accuracy(&entity_sets, AccuracyMode::default()).map_err(input)?);
        corpus.entity_recall = Some(corpus_recall(&entity_sets).map_err(input)?);
        records.extend(per_case.into_iter().map(|report| MethodMetrics { method: opts.method.clone(), language: lang, report }));
        corpus_rows.push(MethodMetrics { method: opts.method.clone(), language: lang, report: corpus });
    }
    Ok(match opts.format {
        OutputFormat::Json => {
            records.extend(corpus_rows);
            to_jsonl(&records)
        }
        f => s2_table(&corpus_rows).map_err(input)?.render(f.table()),
    })
}

/// Output records of `eval entities`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum EntityRecord {
    Case {
        case_id: String,
        language: Language,
        predicted: BTreeSet<String>,
        reference: BTreeSet<String>,
        #[serde(flatten)]
        score: EntityScore,
    },
    Entity(DetectionRow),
    Summary {
        language: Language,
        n_cases: usize,
        mean_accuracy: f64,
        corpus_recall: f64,
    },
}

/// Entity scores per case, per-entity detection rates (lexicon order) and
/// a per-language summary.
pub fn cmd_eval_entities(
    hyp_file: &Path,
    ref_file: &Path,
    lexicon: &EntityLexicon,
    mode: AccuracyMode,
    format: OutputFormat,
) -> CmdResult<String> {
    let hyps: Vec<Report> = read(hyp_file)?;
    let refs: Vec<Report> = read(ref_file)?;
    let pairs = pair_reports(&hyps, &refs, None)?;
    let mut cases = Vec::new();
    let mut by_lang: BTreeMap<Language, Vec<(BTreeSet<String>, BTreeSet<String>)>> = BTreeMap::new();
    for (h, r) in &pairs {
        let predicted = lexicon.extract(&h.impression, h.language);
        let reference = lexicon.extract(&r.impression, r.language);
        let score = score_case_with(&predicted, &reference, mode);
        by_lang.entry(h.language).or_default().push((predicted.clone(), reference.clone()));
        cases.push(EntityRecord::Case { case_id: h.case_id.clone(), language: h.language, predicted, reference, score });
    }
    let mut rows = Vec::new();
    for e in lexicon.entries() {
        let rate = |l: Language| by_lang.get(&l).and_then(|c| per_entity_detection(c, &e.canonical_id));
        let (zh, en) = (rate(Language::Zh), rate(Language::En));
        if zh.is_some() || en.is_some() {
            rows.push(DetectionRow { entity: e.canonical_id.clone(), display: e.display_en.clone(), zh, en });
        }
    }
    if format != OutputFormat::Json {
        return s3_detect_table(&rows).map(|t| t.render(format.table())).map_err(input);
    }
    let mut out = cases;
    out.extend(rows.into_iter().map(EntityRecord::Entity));
    for (language, c) in &by_lang {
        out.push(EntityRecord::Summary {
            language: *language,
            n_cases: c.len(),
            mean_accuracy: mean_accuracy(c, mode).map_err(input)?,
            corpus_recall: corpus_recall(c).map_err(input)?,
        });
    }
    Ok(to_jsonl(&out))
}

/// Aggregates for a set of annotations: JSON summary bundle, or the
/// preference table for the given scale in table formats.
pub fn cmd_eval_human(annotations: &Path, cases: &Path, scale: u8, format: OutputFormat) -> CmdResult<String> {
    let anns: Vec<Annotation> = read(annotations)?;
    let cases: Vec<CaseRecord> = read(cases)?;
    if anns.is_empty() {
        return Err(CmdError::Input(format!("{}: no annotations", annotations.display())));
    }
    let summary = summarize(&anns, &cases, scale).map_err(|e| CmdError::Consistency(e.to_string()))?;
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"),
        f => {
            let id = if scale == 4 { TableId::S3Pref } else { TableId::S6 };
            let dists: Vec<_> = summary.ranks.into_iter().map(|c| (c.role, c.distribution)).collect();
            Ok(preference_table(id, &dists).map_err(input)?.render(f.table()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatsTest {
    /// Kruskal-Wallis overall plus Holm-adjusted Mann-Whitney against the reference.
    #[default]
    KruskalWallis,
    /// Mann-Whitney U between exactly two groups.
    MannWhitney,
}

impl FromStr for StatsTest {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kw" | "kruskal" => Ok(StatsTest::KruskalWallis),
            "mwu" | "mann-whitney" => Ok(StatsTest::MannWhitney),
            _ => Err(ParseEnumError::new("test", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    /// Group value, or "overall" for the omnibus row.
    pub group: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub result: Option<StatResult>,
    /// Superscript letter(s) from pairwise comparisons with adjusted p < 0.05.
    pub marker: String,
}

/// Resolves a dotted field path ("quality.coherence") to a number; booleans
/// count as 0/1 and arrays as their length.
fn lookup(v: &Value, path: &str) -> Option<f64> {
    let mut cur = v;
    for part in path.split('.') {
        cur = cur.get(part)?;
    }
    match cur {
        Value::Number(n) => n.as_f64(),
        Value::Bool(b) => Some(f64::from(u8::from(*b))),
        Value::Array(a) => Some(a.len() as f64),
        _ => None,
    }
}

fn group_label(v: &Value, path: &str) -> Option<String> {
    let mut cur = v;
    for part in path.split('.') {
        cur = cur.get(part)?;
    }
    Some(match cur {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    })
}

pub struct StatsOptions {
    pub groupby: String,
    pub outcome: String,
    pub test: StatsTest,
    /// Reference group for pairwise comparisons; defaults to the first group
    /// in sorted order.
    pub reference: Option<String>,
    pub format: OutputFormat,
}

/// Groups records by `groupby`, tests `outcome` across groups and marks
/// groups that differ from the reference (letters a, b, c... in group
/// order) when the Holm-adjusted p is strictly below 0.05.
pub fn cmd_stats(input_file: &Path, opts: &StatsOptions) -> CmdResult<String> {
    let records: Vec<Value> = read(input_file)?;
    if records.is_empty() {
        return Err(CmdError::Input(format!("{}: no records", input_file.display())));
    }
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let g = group_label(r, &opts.groupby)
            .ok_or_else(|| CmdError::Input(format!("record {}: no field {:?}", i + 1, opts.groupby)))?;
        let y = lookup(r, &opts.outcome)
            .ok_or_else(|| CmdError::Input(format!("record {}: no numeric field {:?}", i + 1, opts.outcome)))?;
        groups.entry(g).or_default().push(y);
    }
    let names: Vec<String> = groups.keys().cloned().collect();
    let values: Vec<Vec<f64>> = groups.into_values().collect();
    let reference = match &opts.reference {
        Some(r) => names
            .iter()
            .position(|n| n == r)
            .ok_or_else(|| CmdError::Input(format!("reference group {r:?} not found among {names:?}")))?,
        None => 0,
    };
    let mean = |g: &[f64]| g.iter().sum::<f64>() / g.len() as f64;
    let mut rows: Vec<StatsRow> = names
        .iter()
        .zip(&values)
        .map(|(n, g)| StatsRow { group: n.clone(), n: g.len(), mean: Some(mean(g)), result: None, marker: String::new() })
        .collect();
    let stats_err = |e: crate::stats::StatsError| CmdError::Input(e.to_string());
    let overall = match opts.test {
        StatsTest::MannWhitney => {
            if values.len() != 2 {
                return Err(CmdError::Input(format!("mann-whitney needs exactly 2 groups, found {}", values.len())));
            }
            let other = 1 - reference;
            let r = mann_whitney_u(&values[reference], &values[other], MwuOptions::default()).map_err(stats_err)?;
            rows[other].result = Some(r.clone());
            r
        }
        StatsTest::KruskalWallis if values.len() == 2 => {
            let other = 1 - reference;
            let mut cmp = compare_against(&values, reference, MwuOptions::default()).map_err(stats_err)?;
            let (_, r) = cmp.pairwise.remove(0);
            if is_marked(r.p_adjusted) {
                rows[other].marker = "a".into();
                rows[reference].marker = "a".into();
            }
            rows[other].result = Some(r);
            kruskal_wallis(&values).map_err(stats_err)?
        }
        StatsTest::KruskalWallis => {
            let cmp = compare_against(&values, reference, MwuOptions::default()).map_err(stats_err)?;
            let mut ref_marks = Vec::new();
            for (k, (idx, r)) in cmp.pairwise.into_iter().enumerate() {
                if is_marked(r.p_adjusted) {
                    let letter = marker_letter(k);
                    rows[idx].marker = letter.clone();
                    ref_marks.push(letter);
                }
                rows[idx].result = Some(r);
            }
            rows[reference].marker = ref_marks.join(",");
            cmp.overall
        }
    };
    rows.insert(
        0,
        StatsRow { group: "overall".into(), n: values.iter().map(Vec::len).sum(), mean: None, result: Some(overall), marker: String::new() },
    );
    Ok(match opts.format {
        OutputFormat::Json => to_jsonl(&rows),
        f => stats_table(&rows, &names[reference]).render(f.table()),
    })
}

fn marker_letter(k: usize) -> String {
    let mut s = String::new();
    let mut k = k;
    loop {
        s.insert(0, (b'a' + (k % 26) as u8) as char);
        if k < 26 {
            return s;
        }
        k = k / 26 - 1;
    }
}

fn stats_table(rows: &[StatsRow], reference: &str) -> Table {
    use crate::tables::{fmt_fixed, Row};
    let fmt = |v: Option<f64>, d| v.map_or_else(|| "-".to_string(), |v| fmt_fixed(v, d));
    Table {
        id: TableId::S4,
        header: ["group", "n", "mean", "statistic", "p_value", "p_adjusted", "marker"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                let label = if r.group == reference { format!("{} (reference)", r.group) } else { r.group.clone() };
                Row::Data(vec![
                    label,
                    r.n.to_string(),
                    fmt(r.mean, 3),
                    fmt(r.result.as_ref().map(|s| s.statistic), 3),
                    fmt(r.result.as_ref().and_then(|s| s.p_value), 3),
                    fmt(r.result.as_ref().and_then(|s| s.p_adjusted), 3),
                    r.marker.clone(),
                ])
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmSet {
    AiVersusManual,
    ManualAndCollaboration,
}

impl ArmSet {
    pub fn arms(self) -> Vec<Arm> {
        match self {
            ArmSet::AiVersusManual => Arm::AI_VERSUS_MANUAL.to_vec(),
            ArmSet::ManualAndCollaboration => Arm::MANUAL_AND_COLLABORATION.to_vec(),
        }
    }
}

impl FromStr for ArmSet {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ai-vs-manual" => Ok(ArmSet::AiVersusManual),
            "collaboration" => Ok(ArmSet::ManualAndCollaboration),
            _ => Err(ParseEnumError::new("arm set", s)),
        }
    }
}

pub struct SynthOptions {
    pub n_cases: usize,
    pub seed: u64,
    pub spec: Option<PathBuf>,
    /// Also emit degraded reports for these arms, their manifests and
    /// manifest-derived annotations.
    pub arms: Option<ArmSet>,
}

/// Writes cases, reports, entities (and with arms: manifest, annotations)
/// as JSONL files into `out`. Returns a one-line-per-file listing.
pub fn cmd_synth(opts: &SynthOptions, lexicon: &EntityLexicon, out: &Path) -> CmdResult<String> {
    let spec = match &opts.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CmdError::Input(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<CohortSpec>(&text).map_err(|e| CmdError::Input(format!("{}: {e}", p.display())))?
        }
        None => CohortSpec::with_defaults(lexicon, opts.n_cases, opts.seed),
    };
    let corpus = synth_cohort(&spec, lexicon).map_err(input)?;
    fs::create_dir_all(out).map_err(|e| CmdError::Input(format!("{}: {e}", out.display())))?;
    let mut written = vec![
        write_jsonl(out, "cases.jsonl", &corpus.cases)?,
        write_jsonl(out, "entities.jsonl", &corpus.entities)?,
    ];
    let mut reports = corpus.reports.clone();
    if let Some(set) = opts.arms {
        let arms = set.arms();
        let (degraded, manifest) = degrade_corpus(&corpus, &tiered_profiles(&arms), lexicon, spec.seed).map_err(input)?;
        reports.extend(degraded);
        let ids: Vec<String> = corpus.cases.iter().map(|c| c.case_id.clone()).collect();
        let anns = auto_annotate(&manifest, &ids, &arms, "auto-radiologist", RaterRole::Radiologist);
        written.push(write_jsonl(out, "manifest.jsonl", &manifest)?);
        written.push(write_jsonl(out, "annotations.jsonl", &anns)?);
    }
    written.insert(1, write_jsonl(out, "reports.jsonl", &reports)?);
    Ok(written.iter().map(|p| format!("{}\n", p.display())).collect())
}

/// Degrades every report in `reports_file` (language versions of a case
/// get identical edits) and writes `reports.jsonl` and `manifest.jsonl`.
pub fn cmd_degrade(
    reports_file: &Path,
    profile: &FaultProfile,
    relabel: Option<Arm>,
    seed: u64,
    lexicon: &EntityLexicon,
    out: &Path,
) -> CmdResult<String> {
    profile.check().map_err(input)?;
    let reports: Vec<Report> = read(reports_file)?;
    if reports.is_empty() {
        return Err(CmdError::Input(format!("{}: no reports", reports_file.display())));
    }
    let mut groups: BTreeMap<(String, Arm), Vec<Report>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.case_id.clone(), r.arm)).or_default().push(r);
    }
    let mut out_reports = Vec::new();
    let mut manifest: Vec<ManifestItem> = Vec::new();
    for ((_, arm), group) in groups {
        let (r, m) = degrade_case(&group, relabel.unwrap_or(arm), profile, lexicon, seed).map_err(input)?;
        out_reports.extend(r);
        manifest.extend(m);
    }
    fs::create_dir_all(out).map_err(|e| CmdError::Input(format!("{}: {e}", out.display())))?;
    let a = write_jsonl(out, "reports.jsonl", &out_reports)?;
    let b = write_jsonl(out, "manifest.jsonl", &manifest)?;
    Ok(format!("{}\n{}\n", a.display(), b.display()))
}

#[derive(Debug, Clone, Default)]
pub struct TableInputs {
    /// Metric lines (S2), entity records (S3_detect) or rank counts (S3_pref, S6).
    pub input: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub cases: Option<PathBuf>,
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str, id: TableId) -> CmdResult<&'a Path> {
    p.as_deref().ok_or_else(|| CmdError::Input(format!("table {id} needs {flag}")))
}

fn empty_to_input(e: crate::tables::TableError) -> CmdError {
    CmdError::Input(e.to_string())
}

pub fn build_table(id: TableId, inputs: &TableInputs) -> CmdResult<Table> {
    match id {
        TableId::S2 => {
            let rows: Vec<MethodMetrics> = read(need(&inputs.input, "--input", id)?)?;
            let corpus: Vec<MethodMetrics> = rows.into_iter().filter(|m| m.report.scope == MetricScope::Corpus).collect();
            s2_table(&corpus).map_err(empty_to_input)
        }
        TableId::S3Detect => {
            let recs: Vec<EntityRecord> = read(need(&inputs.input, "--input", id)?)?;
            let rows: Vec<DetectionRow> = recs
                .into_iter()
                .filter_map(|r| match r {
                    EntityRecord::Entity(d) => Some(d),
                    _ => None,
                })
                .collect();
            s3_detect_table(&rows).map_err(empty_to_input)
        }
        TableId::S3Pref | TableId::S6 => {
            let scale = if id == TableId::S3Pref { 4 } else { 6 };
            let dists = if let Some(p) = &inputs.input {
                let counts: Vec<RankCounts> = read(p)?;
                distributions_from_counts(&counts).map_err(empty_to_input)?
            } else {
                let anns: Vec<Annotation> = read(need(&inputs.annotations, "--input or --annotations", id)?)?;
                let mut by_role: BTreeMap<RaterRole, Vec<Annotation>> = BTreeMap::new();
                for a in anns {
                    by_role.entry(a.role).or_default().push(a);
                }
                by_role
                    .into_iter()
                    .map(|(role, a)| {
                        crate::human_eval::rank_distribution(&a, scale)
                            .map(|d| (role, d))
                            .map_err(|e| CmdError::Consistency(e.to_string()))
                    })
                    .collect::<CmdResult<Vec<_>>>()?
            };
            preference_table(id, &dists).map_err(empty_to_input)
        }
        TableId::S4 | TableId::S5 | TableId::S7 | TableId::S8 => {
            let anns: Vec<Annotation> = read(need(&inputs.annotations, "--annotations", id)?)?;
            let cases: Vec<CaseRecord> = read(need(&inputs.cases, "--cases", id)?)?;
            let radiologist: Vec<Annotation> = anns.into_iter().filter(|a| a.role == RaterRole::Radiologist).collect();
            burden_table(id, &radiologist, &cases).map_err(|e| match e {
                crate::tables::TableError::HumanEval(h) => CmdError::Consistency(h.to_string()),
                other => CmdError::Input(other.to_string()),
            })
        }
    }
}

pub fn cmd_table(id: TableId, inputs: &TableInputs, format: TableFormat) -> CmdResult<String> {
    Ok(build_table(id, inputs)?.render(format))
}

/// Runs the kernel self-test; any failing check is a consistency error
/// carrying the full report.
pub fn cmd_kernels_selftest(seed: u64, format: OutputFormat) -> CmdResult<String> {
    let checks = kernels::selftest(seed);
    let text = match format {
        OutputFormat::Json => to_jsonl(&checks),
        _ => checks
            .iter()
            .map(|c: &Check| {
                format!("{}\t{}\t{:.3e}\t{:.3e}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.observed, c.tolerance)
            })
            .collect(),
    };
    if checks.iter().all(|c| c.passed) {
        Ok(text)
    } else {
        Err(CmdError::Consistency(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_letters() {
        assert_eq!(marker_letter(0), "a");
        assert_eq!(marker_letter(2), "c");
        assert_eq!(marker_letter(25), "z");
        assert_eq!(marker_letter(26), "aa");
    }

    #[test]
    fn lookup_paths() {
        let v: Value = serde_json::json!({"arm": "AI", "quality": {"coherence": 3}, "flag": true, "errors": [1, 2]});
        assert_eq!(lookup(&v, "quality.coherence"), Some(3.0));
        assert_eq!(lookup(&v, "flag"), Some(1.0));
        assert_eq!(lookup(&v, "errors"), Some(2.0));
        assert_eq!(lookup(&v, "arm"), None);
        assert_eq!(group_label(&v, "arm").as_deref(), Some("AI"));
        assert_eq!(group_label(&v, "quality.coherence").as_deref(), Some("3"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CmdError::Input("x".into()).exit_code(), 2);
        assert_eq!(CmdError::Consistency("x".into()).exit_code(), 3);
    }

    #[test]
    fn selftest_passes() {
        let out = cmd_kernels_selftest(0, OutputFormat::Tsv).unwrap();
        assert!(out.lines().all(|l| l.starts_with("PASS")));
    }
}
