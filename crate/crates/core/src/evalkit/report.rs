//! Scoring prediction files against gold files.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::confusion::{ClassScores, ConfusionMatrix, SevereSplit};
use super::metrics::{bleu, conceptual_precision, rouge_l, rouge_n, ConceptSet, DEFAULT_MAX_N};
use super::EvalError;
use crate::triage::Severity;

/// One line of a pred or gold file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseText {
    pub case_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<Severity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub bleu: f64,
    pub rouge1_p: f64,
    pub rouge1_r: f64,
    pub rouge1_f: f64,
    pub rouge2_p: f64,
    pub rouge2_r: f64,
    pub rouge2_f: f64,
    #[serde(rename = "rougeL_p")]
    pub rouge_l_p: f64,
    #[serde(rename = "rougeL_r")]
    pub rouge_l_r: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
    pub conceptual_precision: Option<f64>,
}

/// Means over all rows; `None` wherever no row defines the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub cases: usize,
    pub bleu: Option<f64>,
    pub rouge1_f: Option<f64>,
    pub rouge2_f: Option<f64>,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: Option<f64>,
    pub conceptual_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassScores>,
    pub severe_vs_rest: SevereSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<CaseMetrics>,
    pub aggregate: Aggregate,
    /// Present when every pred and gold row carries a level.
    pub severity: Option<SeverityReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub max_n: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { max_n: DEFAULT_MAX_N }
    }
}

fn parse_error(file: &str, line: u64, reason: impl Into<String>) -> EvalError {
    EvalError::Parse { file: file.to_string(), line, reason: reason.into() }
}

#[derive(Deserialize)]
struct RawCase {
    case_id: String,
    text: String,
    #[serde(default)]
    level: Option<String>,
}

/// Parse a `case_id,text[,level]` CSV. `file` names the source in errors.
pub fn read_cases(reader: impl Read, file: &str) -> Result<Vec<CaseText>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_error(file, 1, e.to_string()))?.clone();
    for required in ["case_id", "text"] {
        if !headers.iter().any(|h| h == required) {
            return Err(parse_error(file, 1, format!("missing column {required}")));
        }
    }
    let mut out: Vec<CaseText> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr
            .read_record(&mut record)
            .map_err(|e| parse_error(file, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw: RawCase = record.deserialize(Some(&headers)).map_err(|e| parse_error(file, line, e.to_string()))?;
        let level = match raw.level.as_deref().map(str::trim).filter(|l| !l.is_empty()) {
            None => None,
            Some(l) => Some(Severity::parse(l).ok_or_else(|| parse_error(file, line, format!("unknown level `{l}`")))?),
        };
        if raw.case_id.trim().is_empty() {
            return Err(parse_error(file, line, "empty case_id"));
        }
        if out.iter().any(|c| c.case_id == raw.case_id) {
            return Err(parse_error(file, line, format!("duplicate case_id `{}`", raw.case_id)));
        }
        out.push(CaseText { case_id: raw.case_id, text: raw.text, level });
    }
    Ok(out)
}

pub fn read_cases_file(path: &Path) -> Result<Vec<CaseText>, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    read_cases(file, &path.display().to_string())
}

pub type ConceptFile = BTreeMap<String, ConceptSet>;

pub fn read_concepts(reader: impl Read, file: &str) -> Result<ConceptFile, EvalError> {
    serde_json::from_reader(reader).map_err(|e| parse_error(file, e.line() as u64, e.to_string()))
}

pub fn read_concepts_file(path: &Path) -> Result<ConceptFile, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    read_concepts(file, &path.display().to_string())
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Score each prediction (in pred order) against the gold row with the same id.
pub fn score_cases(
    pred: &[CaseText],
    gold: &[CaseText],
    concepts: &ConceptFile,
    opts: ReportOptions,
) -> Result<MetricReport, EvalError> {
    let gold_by_id: HashMap<&str, &CaseText> = gold.iter().map(|g| (g.case_id.as_str(), g)).collect();
    let mut rows = Vec::with_capacity(pred.len());
    let mut levels = Vec::new();
    for p in pred {
        let g = gold_by_id.get(p.case_id.as_str()).ok_or_else(|| EvalError::UnknownCase(p.case_id.clone()))?;
        let r1 = rouge_n(&p.text, &g.text, 1);
        let r2 = rouge_n(&p.text, &g.text, 2);
        let rl = rouge_l(&p.text, &g.text);
        rows.push(CaseMetrics {
            case_id: p.case_id.clone(),
            bleu: bleu(&p.text, &[&g.text], opts.max_n)?,
            rouge1_p: r1.precision,
            rouge1_r: r1.recall,
            rouge1_f: r1.f,
            rouge2_p: r2.precision,
            rouge2_r: r2.recall,
            rouge2_f: r2.f,
            rouge_l_p: rl.precision,
            rouge_l_r: rl.recall,
            rouge_l_f: rl.f,
            conceptual_precision: concepts.get(&p.case_id).and_then(|c| conceptual_precision(&p.text, c)),
        });
        levels.push(g.level.zip(p.level));
    }
    let aggregate = Aggregate {
        cases: rows.len(),
        bleu: mean(rows.iter().map(|r| Some(r.bleu))),
        rouge1_f: mean(rows.iter().map(|r| Some(r.rouge1_f))),
        rouge2_f: mean(rows.iter().map(|r| Some(r.rouge2_f))),
        rouge_l_f: mean(rows.iter().map(|r| Some(r.rouge_l_f))),
        conceptual_precision: mean(rows.iter().map(|r| r.conceptual_precision)),
    };
    let severity = if !levels.is_empty() && levels.iter().all(Option::is_some) {
        let (g, p): (Vec<Severity>, Vec<Severity>) = levels.into_iter().flatten().unzip();
        let confusion = ConfusionMatrix::from_pairs(&g, &p)?;
        Some(SeverityReport {
            per_class: confusion.class_scores(),
            severe_vs_rest: confusion.severe_split(),
            confusion,
        })
    } else {
        None
    };
    Ok(MetricReport { rows, aggregate, severity })
}

/// Parse the three files and score them.
pub fn run_report(
    pred_file: &Path,
    gold_file: &Path,
    concepts_file: Option<&Path>,
    opts: ReportOptions,
) -> Result<MetricReport, EvalError> {
    let pred = read_cases_file(pred_file)?;
    let gold = read_cases_file(gold_file)?;
    let concepts = match concepts_file {
        Some(p) => read_concepts_file(p)?,
        None => ConceptFile::new(),
    };
    score_cases(&pred, &gold, &concepts, opts)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Per-case rows plus a trailing `mean` row; undefined values are blank.
pub fn write_report_csv(report: &MetricReport, writer: impl Write) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| EvalError::Io(e.to_string());
    w.write_record([
        "case_id",
        "bleu",
        "rouge1_p",
        "rouge1_r",
        "rouge1_f",
        "rouge2_p",
        "rouge2_r",
        "rouge2_f",
        "rougeL_p",
        "rougeL_r",
        "rougeL_f",
        "conceptual_precision",
    ])
    .map_err(io)?;
    for r in &report.rows {
        let nums = [r.bleu, r.rouge1_p, r.rouge1_r, r.rouge1_f, r.rouge2_p, r.rouge2_r, r.rouge2_f, r.rouge_l_p, r.rouge_l_r, r.rouge_l_f];
        let mut rec = vec![r.case_id.clone()];
        rec.extend(nums.iter().map(|x| format!("{x:.6}")));
        rec.push(fmt_opt(r.conceptual_precision));
        w.write_record(&rec).map_err(io)?;
    }
    let a = &report.aggregate;
    w.write_record([
        "mean".to_string(),
        fmt_opt(a.bleu),
        String::new(),
        String::new(),
        fmt_opt(a.rouge1_f),
        String::new(),
        String::new(),
        fmt_opt(a.rouge2_f),
        String::new(),
        String::new(),
        fmt_opt(a.rouge_l_f),
        fmt_opt(a.conceptual_precision),
    ])
    .map_err(io)?;
    w.flush().map_err(|e| EvalError::Io(e.to_string()))
}

/// Write `<stem>.json` and `<stem>.csv` next to each other. `out` may carry
/// either extension or none.
pub fn write_report_files(report: &MetricReport, out: &Path) -> Result<(std::path::PathBuf, std::path::PathBuf), EvalError> {
    let json_path = out.with_extension("json");
    let csv_path = out.with_extension("csv");
    let json = serde_json::to_string_pretty(report).map_err(|e| EvalError::Io(e.to_string()))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| EvalError::Io(format!("{}: {e}", json_path.display())))?;
    let file = std::fs::File::create(&csv_path).map_err(|e| EvalError::Io(format!("{}: {e}", csv_path.display())))?;
    write_report_csv(report, file)?;
    Ok((json_path, csv_path))
}
