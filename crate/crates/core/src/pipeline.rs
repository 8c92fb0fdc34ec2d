//! label → train → summarize → evaluate, with every intermediate artifact
//! written to one run directory:
//!
//! | file            | content                                         |
//! |-----------------|-------------------------------------------------|
//! | `config.txt`    | effective configuration                         |
//! | `labeled.jsonl` | every annotated document with generated labels  |
//! | `train.jsonl`   | training split                                  |
//! | `test.jsonl`    | held-out split                                  |
//! | `model.ckpt`    | trained checkpoint                              |
//! | `train.json`    | per-epoch mean training loss                    |
//! | `results.jsonl` | summaries of the held-out documents             |
//! | `report.json`   | evaluation report                               |
//! | `report.txt`    | evaluation table                                |
//!
//! The held-out split is by document and seeded.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{write_corpus, Document};
use crate::embed::WordVectorStore;
use crate::error::Error;
use crate::eval::{evaluate, render_json, render_table, Aggregate, EvalOptions, EvaluationReport};
use crate::labeler::annotate_corpus;
use crate::net::save_params;
use crate::summarize::summarize_corpus;
use crate::train::{parse_entries, train, ConfigError, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Setup,
    Label,
    Split,
    Train,
    Summarize,
    Evaluate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Setup => "setup",
            Stage::Label => "label",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Summarize => "summarize",
            Stage::Evaluate => "evaluate",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error("no document has an abstractive summary ({0} skipped)")]
    NothingLabeled(usize),
    #[error("need at least 2 labeled documents to split, have {0}")]
    TooFewDocuments(usize),
    #[error("every held-out document failed to summarize")]
    NothingSummarized,
}

#[derive(Debug, Error)]
#[error("pipeline stage {stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

fn at<E>(stage: Stage) -> impl FnOnce(E) -> Box<PipelineError>
where
    E: std::error::Error + Send + Sync + 'static,
{
    move |e| {
        Box::new(PipelineError {
            stage,
            source: Box::new(e),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    /// Fraction of labeled documents held out for evaluation.
    pub holdout_fraction: f64,
    pub aggregate: Aggregate,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            holdout_fraction: 0.1,
            aggregate: Aggregate::Macro,
        }
    }
}

impl PipelineConfig {
    /// Training keys plus `holdout_fraction` and `aggregate`
    /// (`macro`/`micro`). Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = PipelineConfig::default();
        for entry in parse_entries(text)? {
            match entry.key.as_str() {
                "holdout_fraction" => config.holdout_fraction = entry.parse()?,
                "aggregate" => config.aggregate = entry.parse().map_err(|_| ConfigError::BadValue {
                    line: entry.line,
                    key: entry.key.clone(),
                    value: entry.value.clone(),
                })?,
                _ => config.train.apply(&entry)?,
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate()?;
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(ConfigError::Invalid("holdout_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn to_config_string(&self) -> String {
        let mut out = self.train.to_config_string();
        let _ = writeln!(out, "holdout_fraction = {}", self.holdout_fraction);
        let aggregate = match self.aggregate {
            Aggregate::Macro => "macro",
            Aggregate::Micro => "micro",
        };
        let _ = writeln!(out, "aggregate = {aggregate}");
        out
    }
}

/// Seeded by-document split. Returns `(train, test)` index lists, each in
/// ascending order. The test side gets `round(fraction · n)` documents,
/// at least one, and leaves at least one for training.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    order.shuffle(&mut rng);
    let test_len = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut test = order[..test_len.min(n)].to_vec();
    let mut train = order[test_len.min(n)..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub run_dir: PathBuf,
    pub report: EvaluationReport,
    pub train_report: TrainReport,
    pub labeled: usize,
    pub skipped_unlabelable: usize,
    pub summarize_failures: usize,
}

#[derive(Serialize)]
struct TrainLog<'a> {
    epoch_losses: &'a [f64],
    first_batch_loss: f64,
    documents_seen: usize,
    skipped: &'a [String],
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn run_pipeline(
    raw: &[Document],
    vectors: &WordVectorStore,
    config: &PipelineConfig,
    run_dir: impl AsRef<Path>,
) -> Result<PipelineOutput, Box<PipelineError>> {
    let run_dir = run_dir.as_ref().to_owned();
    config.validate().map_err(at(Stage::Setup))?;
    fs::create_dir_all(&run_dir)
        .map_err(|source| Error::Io {
            path: run_dir.clone(),
            source,
        })
        .map_err(at(Stage::Setup))?;
    let effective = config.to_config_string();
    info!("effective config:\n{effective}");
    write_file(&run_dir.join("config.txt"), &effective).map_err(at(Stage::Setup))?;

    let annotation = annotate_corpus(raw);
    let skipped_unlabelable = annotation.skipped.len();
    if annotation.labeled.is_empty() {
        return Err(at(Stage::Label)(StageFailure::NothingLabeled(skipped_unlabelable)));
    }
    let labeled: Vec<Document> = annotation.labeled.into_iter().map(|l| l.document).collect();
    write_corpus(&labeled, run_dir.join("labeled.jsonl")).map_err(at(Stage::Label))?;
    info!("labeled {} documents, skipped {skipped_unlabelable}", labeled.len());

    if labeled.len() < 2 {
        return Err(at(Stage::Split)(StageFailure::TooFewDocuments(labeled.len())));
    }
    let (train_idx, test_idx) = split_indices(labeled.len(), config.holdout_fraction, config.train.seed);
    let train_docs: Vec<Document> = train_idx.iter().map(|&i| labeled[i].clone()).collect();
    let test_docs: Vec<Document> = test_idx.iter().map(|&i| labeled[i].clone()).collect();
    write_corpus(&train_docs, run_dir.join("train.jsonl")).map_err(at(Stage::Split))?;
    write_corpus(&test_docs, run_dir.join("test.jsonl")).map_err(at(Stage::Split))?;

    let (params, mut train_report) = train(&train_docs, vectors, &config.train).map_err(at(Stage::Train))?;
    let checkpoint = run_dir.join("model.ckpt");
    save_params(&params, config.train.seed, &checkpoint).map_err(at(Stage::Train))?;
    train_report.checkpoint = Some(checkpoint);
    info!("trained in {:.1}s", train_report.seconds);
    let log = TrainLog {
        epoch_losses: &train_report.epoch_losses,
        first_batch_loss: train_report.first_batch_loss,
        documents_seen: train_report.documents_seen,
        skipped: &train_report.skipped,
    };
    let log = serde_json::to_string_pretty(&log).expect("train log serialization cannot fail");
    write_file(&run_dir.join("train.json"), &log).map_err(at(Stage::Train))?;

    let summary = summarize_corpus(&params, vectors, &test_docs, run_dir.join("results.jsonl"))
        .map_err(at(Stage::Summarize))?;
    if summary.results.is_empty() {
        return Err(at(Stage::Summarize)(StageFailure::NothingSummarized));
    }

    let options = EvalOptions {
        aggregate: config.aggregate,
        ..Default::default()
    };
    let report = evaluate(&summary.results, &test_docs, options).map_err(at(Stage::Evaluate))?;
    write_file(&run_dir.join("report.json"), &render_json(&report)).map_err(at(Stage::Evaluate))?;
    write_file(&run_dir.join("report.txt"), &render_table(&report)).map_err(at(Stage::Evaluate))?;

    Ok(PipelineOutput {
        run_dir,
        report,
        train_report,
        labeled: labeled.len(),
        skipped_unlabelable,
        summarize_failures: summary.failures.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (train, test) = split_indices(50, 0.1, 13);
        assert_eq!(test.len(), 5);
        assert_eq!(train.len(), 45);
        assert!(test.iter().all(|t| !train.contains(t)));
        assert_eq!(split_indices(50, 0.1, 13), (train, test));
        assert_ne!(split_indices(50, 0.1, 14).1, split_indices(50, 0.1, 13).1);

        let (train, test) = split_indices(2, 0.1, 1);
        assert_eq!((train.len(), test.len()), (1, 1));
        let (train, test) = split_indices(10, 0.99, 1);
        assert_eq!((train.len(), test.len()), (1, 9));
    }

    #[test]
    fn pipeline_config_keys() {
        let c = PipelineConfig::parse("holdout_fraction = 0.25\naggregate = micro\nepochs = 2").unwrap();
        assert_eq!(c.holdout_fraction, 0.25);
        assert_eq!(c.aggregate, Aggregate::Micro);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(PipelineConfig::parse(&c.to_config_string()).unwrap(), c);
        assert!(PipelineConfig::parse("holdout_fraction = 1.5").is_err());
        assert!(PipelineConfig::parse("aggregate = weighted").is_err());
        assert!(PipelineConfig::parse("colour = blue").is_err());
    }

    #[test]
    fn unlabelable_corpus_fails_at_label_stage() {
        let dir = tempfile::tempdir().unwrap();
        let docs = vec![Document::new("a", ["One."]), Document::new("b", ["Two."])];
        let vectors = WordVectorStore::new(2, [("one".to_owned(), vec![1.0, 0.0])]).unwrap();
        let err = run_pipeline(&docs, &vectors, &PipelineConfig::default(), dir.path()).unwrap_err();
        assert_eq!(err.stage, Stage::Label);
    }
}
