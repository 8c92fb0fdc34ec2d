//! Extractive labels from abstractive summaries.
//!
//! Every article sentence is scored alone by ROUGE-1 F1 against the whole
//! abstractive summary; the top [`target_count`] sentences become label 1.

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Document;
use crate::rouge::rouge_n;
use crate::select::top_n_indices;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("sentence count must be at least 1")]
    NoSentences,
    #[error("document {0:?} not annotatable: missing or empty abstractive summary")]
    NotAnnotatable(String),
}

/// Summary size for an `n`-sentence document: `max(ceil(n / 10), 3)`,
/// never more than `n`.
pub fn target_count(num_sentences: usize) -> Result<usize, LabelError> {
    if num_sentences == 0 {
        return Err(LabelError::NoSentences);
    }
    Ok(num_sentences.div_ceil(10).max(3).min(num_sentences))
}

/// ROUGE-1 F1 of each sentence against the concatenated abstractive summary.
pub fn score_sentences(doc: &Document) -> Result<Vec<f64>, LabelError> {
    let summary = doc
        .abstractive_tokens()
        .filter(|t| !t.is_empty())
        .ok_or_else(|| LabelError::NotAnnotatable(doc.id.clone()))?;
    Ok(doc
        .sentences
        .iter()
        .map(|s| rouge_n(&s.tokens, &summary, 1).expect("order 1 is valid").f1)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDocument {
    pub document: Document,
    /// Per-sentence ROUGE-1 F1 against the abstractive summary.
    pub scores: Vec<f64>,
}

pub fn generate_labels(doc: &Document) -> Result<LabeledDocument, LabelError> {
    let scores = score_sentences(doc)?;
    let n = target_count(doc.sentences.len())?;
    let mut labels = vec![false; scores.len()];
    for idx in top_n_indices(&scores, n) {
        labels[idx] = true;
    }
    let mut document = doc.clone();
    document.labels = Some(labels);
    Ok(LabeledDocument { document, scores })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedDocument {
    pub id: String,
    pub error: LabelError,
}

#[derive(Debug, Clone, Default)]
pub struct Annotation {
    pub labeled: Vec<LabeledDocument>,
    pub skipped: Vec<SkippedDocument>,
}

/// Labels every annotatable document in parallel. Output keeps input order;
/// failures are logged and collected instead of aborting the run.
pub fn annotate_corpus(docs: &[Document]) -> Annotation {
    let outcomes: Vec<_> = docs.par_iter().map(generate_labels).collect();
    let mut annotation = Annotation::default();
    for (doc, outcome) in docs.iter().zip(outcomes) {
        match outcome {
            Ok(labeled) => annotation.labeled.push(labeled),
            Err(error) => {
                warn!("skipping document {:?}: {error}", doc.id);
                annotation.skipped.push(SkippedDocument {
                    id: doc.id.clone(),
                    error,
                });
            }
        }
    }
    annotation
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_count_rule() {
        assert_eq!(target_count(25), Ok(3));
        assert_eq!(target_count(40), Ok(4));
        assert_eq!(target_count(35), Ok(4));
        assert_eq!(target_count(30), Ok(3));
        assert_eq!(target_count(31), Ok(4));
        assert_eq!(target_count(2), Ok(2));
        assert_eq!(target_count(1), Ok(1));
        assert_eq!(target_count(0), Err(LabelError::NoSentences));
    }

    #[test]
    fn scores_against_summary() {
        let doc = Document::new("d", ["A b.", "Nothing here.", "Cat dog bird."])
            .with_abstractive(["Cat dog.", "Bird!"]);
        let scores = score_sentences(&doc).unwrap();
        assert_eq!(scores.len(), 3);
        assert_eq!(scores[1], 0.0);
        assert_eq!(scores[2], 1.0);

        let half = Document::new("h", ["a b"]).with_abstractive(["a c"]);
        assert_eq!(score_sentences(&half).unwrap(), [0.5]);
    }

    #[test]
    fn missing_or_empty_summary_is_rejected() {
        let doc = Document::new("d", ["x"]);
        assert_eq!(score_sentences(&doc), Err(LabelError::NotAnnotatable("d".into())));
        let empty = Document::new("e", ["x"]).with_abstractive(["..."]);
        assert!(score_sentences(&empty).is_err());
    }

    #[test]
    fn labels_follow_score_then_index() {
        // scores 0, 1, 2/3, 1, 0 against summary "a b"
        let doc = Document::new("d", ["z", "a b", "a", "b a", "q"]).with_abstractive(["a b"]);
        let labeled = generate_labels(&doc).unwrap();
        assert_eq!(
            labeled.document.labels.unwrap(),
            [false, true, true, true, false]
        );

        let flat = Document::new("f", vec!["same"; 10]).with_abstractive(["same"]);
        assert_eq!(generate_labels(&flat).unwrap().document.gold_indices(), [0, 1, 2]);

        let short = Document::new("s", ["a", "b"]).with_abstractive(["c"]);
        assert_eq!(generate_labels(&short).unwrap().document.gold_indices(), [0, 1]);
    }

    #[test]
    fn annotate_skips_and_preserves_order() {
        let docs = vec![
            Document::new("1", ["a"]).with_abstractive(["a"]),
            Document::new("2", ["b"]),
            Document::new("3", ["c"]).with_abstractive(["c"]),
        ];
        let out = annotate_corpus(&docs);
        let ids: Vec<_> = out.labeled.iter().map(|l| l.document.id.as_str()).collect();
        assert_eq!(ids, ["1", "3"]);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].id, "2");
        assert!(annotate_corpus(&[]).labeled.is_empty());
    }
}
