//! Static word vectors and averaged sentence embeddings.
//!
//! Vector files use the plain text layout of published embeddings: one
//! entry per line, `<token> <f1> <f2> ... <fd>`, single-space separated.
//! The dimension is taken from the first entry. There is no header line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use log::warn;
use thiserror::Error;

use crate::corpus::{Document, Sentence};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Read {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("word-vector file is empty")]
    Empty,
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {value:?} as a finite float")]
    BadFloat { line: usize, value: String },
    #[error("line {line}: entry has no vector values")]
    MissingValues { line: usize },
    #[error("vector for {token:?} has length {found}, store dimension is {expected}")]
    WrongLength {
        token: String,
        expected: usize,
        found: usize,
    },
    #[error("vector dimension must be at least 1")]
    ZeroDimension,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorStore {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
    duplicates: usize,
}

impl WordVectorStore {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        let mut table = HashMap::new();
        let mut duplicates = 0;
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(EmbedError::WrongLength {
                    token,
                    expected: dim,
                    found: vector.len(),
                });
            }
            if table.insert(token, vector).is_some() {
                duplicates += 1;
            }
        }
        Ok(WordVectorStore {
            dim,
            table,
            duplicates,
        })
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, EmbedError> {
        let mut dim = None;
        let mut table = HashMap::new();
        let mut duplicates = 0;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| EmbedError::Read {
                line: line_no,
                source,
            })?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default().to_owned();
            let values = fields
                .map(|v| match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(EmbedError::BadFloat {
                        line: line_no,
                        value: v.to_owned(),
                    }),
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let expected = *dim.get_or_insert(values.len());
            if expected == 0 {
                return Err(EmbedError::MissingValues { line: line_no });
            }
            if values.len() != expected {
                return Err(EmbedError::DimensionMismatch {
                    line: line_no,
                    expected,
                    found: values.len(),
                });
            }
            if table.insert(token.clone(), values).is_some() {
                warn!("line {line_no}: duplicate vector for {token:?}, keeping the later one");
                duplicates += 1;
            }
        }
        let dim = dim.ok_or(EmbedError::Empty)?;
        Ok(WordVectorStore {
            dim,
            table,
            duplicates,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Entries overwritten by a later line with the same token.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.table.get(token).map(Vec::as_slice)
    }
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<WordVectorStore, EmbedError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| EmbedError::Io {
        path: path.to_owned(),
        source,
    })?;
    WordVectorStore::from_reader(BufReader::new(file))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding {
    pub values: Vec<f64>,
    /// Set when no token was in vocabulary and `values` is the zero vector.
    pub fallback: bool,
}

impl AsRef<[f64]> for SentenceEmbedding {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Mean of the in-vocabulary token vectors; OOV tokens are skipped.
pub fn embed_sentence(store: &WordVectorStore, sentence: &Sentence) -> SentenceEmbedding {
    let mut values = vec![0.0; store.dim];
    let mut known = 0usize;
    for vector in sentence.tokens.iter().filter_map(|t| store.get(t.as_str())) {
        for (acc, v) in values.iter_mut().zip(vector) {
            *acc += v;
        }
        known += 1;
    }
    if known > 0 {
        let n = known as f64;
        values.iter_mut().for_each(|v| *v /= n);
    }
    SentenceEmbedding {
        values,
        fallback: known == 0,
    }
}

pub fn embed_document(store: &WordVectorStore, doc: &Document) -> Vec<SentenceEmbedding> {
    doc.sentences.iter().map(|s| embed_sentence(store, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(text: &str) -> WordVectorStore {
        WordVectorStore::from_reader(text.as_bytes()).unwrap()
    }

    #[test]
    fn load_simple_file() {
        let s = store("a 1.0 0.0\nb 0.0 1.0\n");
        assert_eq!(s.dim(), 2);
        assert_eq!(s.len(), 2);
        assert_eq!(s.get("b"), Some(&[0.0, 1.0][..]));
        assert_eq!(s.duplicates(), 0);
    }

    #[test]
    fn duplicate_tokens_last_wins() {
        let s = store("a 1 2\na 3 4");
        assert_eq!(s.dim(), 2);
        assert_eq!(s.get("a"), Some(&[3.0, 4.0][..]));
        assert_eq!(s.duplicates(), 1);
    }

    #[test]
    fn load_errors() {
        let err = WordVectorStore::from_reader("a 1 2 3\nb 1 2 3 4\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            EmbedError::DimensionMismatch {
                line: 2,
                expected: 3,
                found: 4
            }
        ));
        let err = WordVectorStore::from_reader("a 1 2\nb 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EmbedError::BadFloat { line: 2, .. }));
        let err = WordVectorStore::from_reader("a 1 nan\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EmbedError::BadFloat { line: 1, .. }));
        assert!(matches!(
            WordVectorStore::from_reader("".as_bytes()).unwrap_err(),
            EmbedError::Empty
        ));
        assert!(matches!(
            WordVectorStore::from_reader("lonely\n".as_bytes()).unwrap_err(),
            EmbedError::MissingValues { line: 1 }
        ));
    }

    #[test]
    fn averaging_and_oov() {
        let s = store("a 1 0\nb 0 1");
        let e = embed_sentence(&s, &Sentence::new("a b"));
        assert_eq!(e.values, [0.5, 0.5]);
        assert!(!e.fallback);

        let e = embed_sentence(&s, &Sentence::new("A zzz."));
        assert_eq!(e.values, [1.0, 0.0]);

        let e = embed_sentence(&s, &Sentence::new("zzz yyy"));
        assert_eq!(e.values, [0.0, 0.0]);
        assert!(e.fallback);
        assert!(embed_sentence(&s, &Sentence::new("")).fallback);
    }

    #[test]
    fn document_embedding_is_per_sentence() {
        let s = store("a 1 0\nb 0 1\nc 2 -2");
        let doc = Document::new("d", ["c", "a b", "zzz"]);
        let e = embed_document(&s, &doc);
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].values, s.get("c").unwrap());

        let swapped = Document::new("d", ["zzz", "a b", "c"]);
        let f = embed_document(&s, &swapped);
        assert_eq!(e[0], f[2]);
        assert_eq!(e[2], f[0]);
    }

    #[test]
    fn constructor_checks_lengths() {
        assert!(WordVectorStore::new(2, [("a".to_owned(), vec![1.0])]).is_err());
        assert!(WordVectorStore::new(0, []).is_err());
    }
}
