//! Extractive summaries from a trained model.
//!
//! Output records, one JSON object per line:
//!
//! ```text
//! {"id": "a1", "selected": [0, 4, 7], "probabilities": [0.91, ...], "summary": ["First.", ...]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::embed::{embed_document, WordVectorStore};
use crate::labeler::target_count;
use crate::net::{forward, ModelParams, NetError};
use crate::select::top_n_indices;

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("document {0:?} has no sentences")]
    EmptyDocument(String),
    #[error("word vectors have dimension {vectors} but the model input dimension is {model}")]
    DimensionMismatch { vectors: usize, model: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed result record: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResult {
    #[serde(rename = "id")]
    pub doc_id: String,
    /// Selected sentence indices, ascending.
    #[serde(rename = "selected")]
    pub selected_indices: Vec<usize>,
    pub probabilities: Vec<f64>,
    /// Raw text of the selected sentences, in document order.
    #[serde(rename = "summary")]
    pub summary_text: Vec<String>,
}

/// Picks the `target_count(n)` most probable sentences (ties to the earlier
/// sentence) and returns them in document order.
pub fn select_summary(doc: &Document, probabilities: Vec<f64>) -> Result<SummaryResult, SummarizeError> {
    let n = target_count(doc.sentences.len()).map_err(|_| SummarizeError::EmptyDocument(doc.id.clone()))?;
    let selected = top_n_indices(&probabilities, n);
    Ok(SummaryResult {
        doc_id: doc.id.clone(),
        summary_text: selected.iter().map(|&i| doc.sentences[i].raw.clone()).collect(),
        selected_indices: selected,
        probabilities,
    })
}

pub fn summarize(params: &ModelParams, vectors: &WordVectorStore, doc: &Document) -> Result<SummaryResult, SummarizeError> {
    if vectors.dim() != params.dims.input {
        return Err(SummarizeError::DimensionMismatch {
            vectors: vectors.dim(),
            model: params.dims.input,
        });
    }
    if doc.sentences.is_empty() {
        return Err(SummarizeError::EmptyDocument(doc.id.clone()));
    }
    let embeddings = embed_document(vectors, doc);
    let trace = forward(params, &embeddings)?;
    select_summary(doc, trace.p)
}

#[derive(Debug, Default)]
pub struct CorpusSummary {
    pub results: Vec<SummaryResult>,
    pub failures: Vec<(String, SummarizeError)>,
}

/// Summarizes every document in parallel and writes one record per success
/// to `out_path`, in input order. Per-document failures are logged and
/// returned; only I/O errors abort.
pub fn summarize_corpus(
    params: &ModelParams,
    vectors: &WordVectorStore,
    docs: &[Document],
    out_path: impl AsRef<Path>,
) -> Result<CorpusSummary, SummarizeError> {
    let outcomes: Vec<_> = docs.par_iter().map(|d| summarize(params, vectors, d)).collect();
    let mut summary = CorpusSummary::default();
    for (doc, outcome) in docs.iter().zip(outcomes) {
        match outcome {
            Ok(result) => summary.results.push(result),
            Err(e) => {
                warn!("cannot summarize document {:?}: {e}", doc.id);
                summary.failures.push((doc.id.clone(), e));
            }
        }
    }
    write_results(&summary.results, out_path)?;
    Ok(summary)
}

pub fn write_results(results: &[SummaryResult], path: impl AsRef<Path>) -> Result<(), SummarizeError> {
    let path = path.as_ref();
    let io_err = |source| SummarizeError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for r in results {
        let line = serde_json::to_string(r).expect("result serialization cannot fail");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<SummaryResult>, SummarizeError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| SummarizeError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut results = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| SummarizeError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: SummaryResult = serde_json::from_str(&line).map_err(|e| SummarizeError::Malformed {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        results.push(r);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, ModelDims};

    fn doc(n: usize) -> Document {
        Document::new("d", (0..n).map(|i| format!("Sentence {i} here.")))
    }

    #[test]
    fn selection_uses_probability_then_index() {
        let r = select_summary(&doc(5), vec![0.9, 0.1, 0.8, 0.7, 0.2]).unwrap();
        assert_eq!(r.selected_indices, [0, 2, 3]);
        assert_eq!(r.summary_text, ["Sentence 0 here.", "Sentence 2 here.", "Sentence 3 here."]);

        let r = select_summary(&doc(10), vec![0.4; 10]).unwrap();
        assert_eq!(r.selected_indices, [0, 1, 2]);

        let r = select_summary(&doc(2), vec![0.1, 0.2]).unwrap();
        assert_eq!(r.selected_indices, [0, 1]);

        let r = select_summary(&doc(35), (0..35).map(|i| i as f64 / 35.0).collect()).unwrap();
        assert_eq!(r.selected_indices, [31, 32, 33, 34]);
    }

    #[test]
    fn summarize_checks_dims_and_emptiness() {
        let params = init_params(ModelDims::new(2, 2, 2), 1).unwrap();
        let vectors = WordVectorStore::new(3, [("sentence".to_owned(), vec![1.0, 0.0, 0.0])]).unwrap();
        assert!(matches!(
            summarize(&params, &vectors, &doc(3)),
            Err(SummarizeError::DimensionMismatch { vectors: 3, model: 2 })
        ));
        let vectors = WordVectorStore::new(2, [("sentence".to_owned(), vec![1.0, 0.0])]).unwrap();
        let empty = Document::new("e", Vec::<String>::new());
        assert!(matches!(
            summarize(&params, &vectors, &empty),
            Err(SummarizeError::EmptyDocument(_))
        ));
        let r = summarize(&params, &vectors, &doc(4)).unwrap();
        assert_eq!(r.probabilities.len(), 4);
        assert_eq!(r.selected_indices.len(), 3);
    }

    #[test]
    fn results_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let results = vec![select_summary(&doc(4), vec![0.1, 0.7000000000000001, 1e-300, 0.3]).unwrap()];
        write_results(&results, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"id\":\"d\",\"selected\":[0,1,3],\"probabilities\":"));
        assert_eq!(read_results(&path).unwrap(), results);
    }
}
