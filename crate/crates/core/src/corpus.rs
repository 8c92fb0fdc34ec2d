//! Documents, tokenization, sentence splitting and the JSONL corpus format.
//!
//! One record per line, UTF-8:
//!
//! ```text
//! {"id": "a1", "sentences": ["First.", "Second."], "abstractive": ["Summary."], "labels": [1, 0]}
//! ```
//!
//! `abstractive` and `labels` are optional. Unknown keys are ignored on read
//! and never written back. Blank lines are skipped.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid token {0:?}: tokens are non-empty, lowercase and contain no whitespace")]
    InvalidToken(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: document {id:?}: {source}")]
    Invalid {
        line: usize,
        id: String,
        #[source]
        source: DocumentError,
    },
}

/// Violations of the [`Document`] invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("document has no sentences")]
    NoSentences,
    #[error("label length mismatch: {labels} labels for {sentences} sentences")]
    LabelLengthMismatch { labels: usize, sentences: usize },
    #[error("labels select no sentence")]
    NoPositiveLabel,
}

/// A normalized word: lowercase, non-empty, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) || text.to_lowercase() != text
        {
            return Err(CorpusError::InvalidToken(text));
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Splits `text` into normalized tokens.
///
/// The text is lowercased and split on Unicode whitespace. Every character
/// that is not alphanumeric counts as punctuation and is stripped from both
/// ends of each piece; punctuation inside a piece is kept, so `"world—again"`
/// and `"don't"` stay single tokens. Pieces that become empty are dropped.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.to_lowercase()
        .split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|piece| !piece.is_empty())
        .map(|piece| Token(piece.to_owned()))
        .collect()
}

/// Abbreviations after which a period never ends a sentence. Compared
/// case-insensitively against the whitespace-delimited word carrying the
/// period.
pub const ABBREVIATIONS: &[&str] = &[
    "a.m.", "adm.", "apr.", "approx.", "aug.", "capt.", "cmdr.", "co.", "col.", "corp.", "dec.",
    "dept.", "dr.", "e.g.", "est.", "etc.", "feb.", "fig.", "ft.", "gen.", "gov.", "i.e.", "inc.",
    "jan.", "jr.", "jul.", "jun.", "lt.", "ltd.", "maj.", "mar.", "mr.", "mrs.", "ms.", "mt.",
    "no.", "nov.", "oct.", "p.m.", "pres.", "prof.", "rep.", "rev.", "sen.", "sep.", "sept.",
    "sgt.", "sr.", "st.", "u.k.", "u.n.", "u.s.", "vs.",
];

const TERMINATORS: &[char] = &['.', '?', '!'];
const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '(', '['];

/// Rule-based sentence splitter for raw text.
///
/// A boundary is a run of `.`, `?` or `!` (optionally followed by closing
/// quotes or brackets), then whitespace, then an uppercase letter, a digit
/// or an opening quote/bracket. A period ending one of [`ABBREVIATIONS`]
/// never splits. Single-letter initials are not special-cased, so
/// `"J. Smith"` splits after `"J."`.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (_, c) = chars[i];
        if !TERMINATORS.contains(&c) {
            i += 1;
            continue;
        }
        let first_terminator = i;
        let mut end = i + 1;
        while end < chars.len() && TERMINATORS.contains(&chars[end].1) {
            end += 1;
        }
        let single_period = c == '.' && end == first_terminator + 1;
        while end < chars.len() && CLOSERS.contains(&chars[end].1) {
            end += 1;
        }
        let mut next = end;
        while next < chars.len() && chars[next].1.is_whitespace() {
            next += 1;
        }
        let boundary = next > end
            && next < chars.len()
            && {
                let n = chars[next].1;
                n.is_uppercase() || n.is_ascii_digit() || OPENERS.contains(&n)
            }
            && !(single_period && ends_with_abbreviation(text, &chars, start, first_terminator));

        if boundary {
            let byte_end = chars.get(end).map_or(text.len(), |&(b, _)| b);
            push_trimmed(&mut sentences, &text[chars.get(start).map_or(text.len(), |&(b, _)| b)..byte_end]);
            start = next;
        }
        i = next.max(i + 1);
    }
    if start < chars.len() {
        push_trimmed(&mut sentences, &text[chars[start].0..]);
    }
    sentences
}

fn ends_with_abbreviation(text: &str, chars: &[(usize, char)], start: usize, period: usize) -> bool {
    let mut word_start = period;
    while word_start > start && !chars[word_start - 1].1.is_whitespace() {
        word_start -= 1;
    }
    let from = chars[word_start].0;
    let to = chars[period].0 + 1;
    let word = text[from..to]
        .trim_start_matches(|c: char| OPENERS.contains(&c))
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_owned());
    }
}

/// A sentence's surface text and its tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub raw: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Sentence { raw, tokens }
    }
}

/// An article: ordered sentences, an optional abstractive summary and
/// optional extractive labels (one per sentence).
///
/// Fields are public; [`Document::validate`] checks the invariants and is
/// applied to every record read from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
    pub abstractive: Option<Vec<Sentence>>,
    pub labels: Option<Vec<bool>>,
}

impl Document {
    pub fn new<S: Into<String>>(id: impl Into<String>, sentences: impl IntoIterator<Item = S>) -> Self {
        Document {
            id: id.into(),
            sentences: sentences.into_iter().map(Sentence::new).collect(),
            abstractive: None,
            labels: None,
        }
    }

    pub fn with_abstractive<S: Into<String>>(mut self, summary: impl IntoIterator<Item = S>) -> Self {
        self.abstractive = Some(summary.into_iter().map(Sentence::new).collect());
        self
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Self {
        self.labels = Some(labels);
        self
    }

    /// Splits raw article text into sentences.
    pub fn from_raw_text(id: impl Into<String>, text: &str) -> Self {
        Document::new(id, split_sentences(text))
    }

    pub fn validate(&self) -> Result<(), DocumentError> {
        if self.sentences.is_empty() {
            return Err(DocumentError::NoSentences);
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.sentences.len() {
                return Err(DocumentError::LabelLengthMismatch {
                    labels: labels.len(),
                    sentences: self.sentences.len(),
                });
            }
            if !labels.iter().any(|&l| l) {
                return Err(DocumentError::NoPositiveLabel);
            }
        }
        Ok(())
    }

    /// Indices of label-1 sentences, ascending. Empty when unlabeled.
    pub fn gold_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .flatten()
            .enumerate()
            .filter_map(|(i, &l)| l.then_some(i))
            .collect()
    }

    /// All tokens of the abstractive summary, sentence after sentence.
    pub fn abstractive_tokens(&self) -> Option<Vec<Token>> {
        self.abstractive
            .as_ref()
            .map(|sents| sents.iter().flat_map(|s| s.tokens.iter().cloned()).collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    abstractive: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<u8>>,
}

impl From<&Document> for Record {
    fn from(doc: &Document) -> Self {
        Record {
            id: doc.id.clone(),
            sentences: doc.sentences.iter().map(|s| s.raw.clone()).collect(),
            abstractive: doc
                .abstractive
                .as_ref()
                .map(|a| a.iter().map(|s| s.raw.clone()).collect()),
            labels: doc
                .labels
                .as_ref()
                .map(|l| l.iter().map(|&b| u8::from(b)).collect()),
        }
    }
}

/// Parses one JSONL line into a validated document. `line` is 1-based and
/// only used in error messages.
pub fn parse_record(text: &str, line: usize) -> Result<Document, CorpusError> {
    let record: Record = serde_json::from_str(text).map_err(|e| CorpusError::Malformed {
        line,
        reason: e.to_string(),
    })?;
    let labels = record
        .labels
        .map(|labels| {
            labels
                .into_iter()
                .map(|l| match l {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(CorpusError::Malformed {
                        line,
                        reason: format!("label {other} is not 0 or 1"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    let doc = Document {
        id: record.id,
        sentences: record.sentences.into_iter().map(Sentence::new).collect(),
        abstractive: record
            .abstractive
            .map(|a| a.into_iter().map(Sentence::new).collect()),
        labels,
    };
    doc.validate().map_err(|source| CorpusError::Invalid {
        line,
        id: doc.id.clone(),
        source,
    })?;
    Ok(doc)
}

/// Serializes one document as a single JSON line (no trailing newline).
pub fn to_record_line(doc: &Document) -> String {
    serde_json::to_string(&Record::from(doc)).expect("record serialization cannot fail")
}

pub fn read_corpus_from<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_record(&line, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: doc.id,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_corpus_from(BufReader::new(file))
}

pub fn write_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for doc in docs {
        writeln!(out, "{}", to_record_line(doc)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
