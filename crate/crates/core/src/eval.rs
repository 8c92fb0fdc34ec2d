//! Corpus evaluation: sentence matching against the gold extractive
//! summary, ROUGE-1 and ROUGE-2, each as precision/recall/F1.
//!
//! The gold summary of a document is its label-1 sentences. Per-document
//! scores are aggregated by macro average (mean of per-document P, R and F1)
//! or micro average (P/R/F1 of the summed match counts).

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Document, Token};
use crate::metrics::{MatchCounts, Prf};
use crate::rouge::rouge_n_multi_counts;
use crate::summarize::SummaryResult;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold summary is empty")]
    EmptyGold,
    #[error("result for {0:?} has no matching gold document")]
    UnknownId(String),
    #[error("gold document {0:?} has no labels")]
    MissingLabels(String),
    #[error("result for {id:?} selects sentence {index}, document has {len}")]
    IndexOutOfRange { id: String, index: usize, len: usize },
    #[error("no results to evaluate")]
    NoResults,
    #[error("unknown aggregation {0:?} (expected macro or micro)")]
    UnknownAggregate(String),
    #[error("unknown match mode {0:?} (expected index or text)")]
    UnknownMatchMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Macro,
    Micro,
}

impl FromStr for Aggregate {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Aggregate::Macro),
            "micro" => Ok(Aggregate::Micro),
            other => Err(EvalError::UnknownAggregate(other.to_owned())),
        }
    }
}

/// How generated sentences are matched to gold sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// By sentence index; requires the same segmentation on both sides.
    #[default]
    Index,
    /// By normalized text (lowercased, whitespace collapsed), for gold
    /// files segmented independently of the system output.
    Text,
}

impl FromStr for MatchMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "index" => Ok(MatchMode::Index),
            "text" => Ok(MatchMode::Text),
            other => Err(EvalError::UnknownMatchMode(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    SentenceMatch,
    Rouge1,
    Rouge2,
}

impl MetricName {
    pub const ALL: [MetricName; 3] = [MetricName::SentenceMatch, MetricName::Rouge1, MetricName::Rouge2];

    pub fn label(self) -> &'static str {
        match self {
            MetricName::SentenceMatch => "Sentence matching gold standard",
            MetricName::Rouge1 => "ROUGE-1",
            MetricName::Rouge2 => "ROUGE-2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: MetricName,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricRow {
    fn new(name: MetricName, prf: Prf) -> Self {
        MetricRow {
            name,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
        }
    }

    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScores {
    pub id: String,
    /// Counts for sentence match, ROUGE-1 and ROUGE-2, in that order.
    pub counts: [MatchCounts; 3],
    pub scores: [Prf; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Sentence match, ROUGE-1, ROUGE-2.
    pub rows: Vec<MetricRow>,
    pub num_documents: usize,
    pub aggregate: Aggregate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_document: Option<Vec<DocumentScores>>,
}

impl EvaluationReport {
    pub fn row(&self, name: MetricName) -> &MetricRow {
        self.rows.iter().find(|r| r.name == name).expect("report has every metric")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub aggregate: Aggregate,
    pub match_mode: MatchMode,
    pub per_document: bool,
}

pub fn sentence_match_counts(selected: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> Result<MatchCounts, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    Ok(MatchCounts {
        matched: selected.intersection(gold).count(),
        predicted: selected.len(),
        actual: gold.len(),
    })
}

/// Precision/recall/F1 of selected sentence indices against gold indices.
pub fn sentence_match(selected: &[usize], gold: &[usize]) -> Result<Prf, EvalError> {
    let selected: BTreeSet<usize> = selected.iter().copied().collect();
    let gold: BTreeSet<usize> = gold.iter().copied().collect();
    sentence_match_counts(&selected, &gold).map(MatchCounts::prf)
}

fn normalize(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn score_document(result: &SummaryResult, gold: &Document, mode: MatchMode) -> Result<DocumentScores, EvalError> {
    let labels = gold
        .labels
        .as_ref()
        .ok_or_else(|| EvalError::MissingLabels(gold.id.clone()))?;
    let gold_idx: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| l.then_some(i))
        .collect();

    let match_counts = match mode {
        MatchMode::Index => {
            if let Some(&index) = result.selected_indices.iter().find(|&&i| i >= gold.sentences.len()) {
                return Err(EvalError::IndexOutOfRange {
                    id: result.doc_id.clone(),
                    index,
                    len: gold.sentences.len(),
                });
            }
            sentence_match_counts(
                &result.selected_indices.iter().copied().collect(),
                &gold_idx.iter().copied().collect(),
            )?
        }
        MatchMode::Text => {
            let selected: BTreeSet<String> = result.summary_text.iter().map(|s| normalize(s)).collect();
            let gold_text: BTreeSet<String> = gold_idx.iter().map(|&i| normalize(&gold.sentences[i].raw)).collect();
            if gold_text.is_empty() {
                return Err(EvalError::EmptyGold);
            }
            MatchCounts {
                matched: selected.intersection(&gold_text).count(),
                predicted: selected.len(),
                actual: gold_text.len(),
            }
        }
    };

    let generated: Vec<Vec<Token>> = result.summary_text.iter().map(|s| tokenize(s)).collect();
    let reference: Vec<&[Token]> = gold_idx.iter().map(|&i| gold.sentences[i].tokens.as_slice()).collect();
    let rouge1 = rouge_n_multi_counts(&generated, &reference, 1).expect("order 1 is valid");
    let rouge2 = rouge_n_multi_counts(&generated, &reference, 2).expect("order 2 is valid");
    let counts = [match_counts, rouge1, rouge2];
    Ok(DocumentScores {
        id: result.doc_id.clone(),
        counts,
        scores: counts.map(MatchCounts::prf),
    })
}

pub fn evaluate(results: &[SummaryResult], gold_corpus: &[Document], options: EvalOptions) -> Result<EvaluationReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoResults);
    }
    let by_id: HashMap<&str, &Document> = gold_corpus.iter().map(|d| (d.id.as_str(), d)).collect();
    let per_doc = results
        .iter()
        .map(|r| {
            let gold = by_id
                .get(r.doc_id.as_str())
                .ok_or_else(|| EvalError::UnknownId(r.doc_id.clone()))?;
            score_document(r, gold, options.match_mode)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rows = MetricName::ALL
        .iter()
        .enumerate()
        .map(|(m, &name)| {
            let prf = match options.aggregate {
                Aggregate::Macro => Prf::mean(per_doc.iter().map(|d| &d.scores[m])).expect("non-empty"),
                Aggregate::Micro => per_doc
                    .iter()
                    .map(|d| d.counts[m])
                    .fold(MatchCounts::default(), |a, b| a + b)
                    .prf(),
            };
            MetricRow::new(name, prf)
        })
        .collect();

    Ok(EvaluationReport {
        rows,
        num_documents: per_doc.len(),
        aggregate: options.aggregate,
        per_document: options.per_document.then_some(per_doc),
    })
}

/// Aligned text table with values rounded to three decimals.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:>9} {:>9} {:>9}",
        "Score", "Precision", "Recall", "F1"
    );
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{:<32} {:>9.3} {:>9.3} {:>9.3}",
            row.name.label(),
            row.precision,
            row.recall,
            row.f1
        );
    }
    let aggregate = match report.aggregate {
        Aggregate::Macro => "macro",
        Aggregate::Micro => "micro",
    };
    let _ = writeln!(out, "({} documents, {aggregate} average)", report.num_documents);
    out
}

/// Machine-readable report (pretty JSON).
pub fn render_json(report: &EvaluationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization cannot fail")
}

/// Both renderings: the text table and the JSON record.
pub fn render_report(report: &EvaluationReport) -> (String, String) {
    (render_table(report), render_json(report))
}
