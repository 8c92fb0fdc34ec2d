//! # extsum
//!
//! Supervised extractive summarization of news articles, end to end:
//!
//! - [`corpus`]: documents, tokenization, sentence splitting, JSONL I/O
//! - [`rouge`]: clipped ROUGE-N precision/recall/F1
//! - [`labeler`]: turn abstractive summaries into extractive 0/1 labels
//! - [`embed`]: static word vectors and averaged sentence embeddings
//! - [`net`]: bidirectional GRU over sentences with a
//!   content/salience/novelty logistic head and exact gradients
//! - [`train`]: Adam training loop, config files, determinism
//! - [`summarize`]: top-N extraction with a trained model
//! - [`eval`]: sentence matching, ROUGE-1 and ROUGE-2 over a corpus
//! - [`pipeline`]: label → train → summarize → evaluate in one run directory
//!
//! ```
//! use extsum::corpus::tokenize;
//! use extsum::rouge::rouge_n;
//!
//! let cand = tokenize("The cat sat on the mat.");
//! let refr = tokenize("The cat is on the mat.");
//! let score = rouge_n(&cand, &refr, 1).unwrap();
//! assert!((score.f1 - 5.0 / 6.0).abs() < 1e-12);
//! ```

pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod labeler;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod rouge;
pub mod select;
pub mod summarize;
pub mod train;

pub use error::{Error, Result};
