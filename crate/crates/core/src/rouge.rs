//! ROUGE-N with clipped n-gram matching.
//!
//! Overlap is `Σ_g min(count_cand(g), count_ref(g))`; precision divides it by
//! the candidate's n-gram total, recall by the reference's. No stemming and
//! no stopword removal: inputs are already-normalized [`Token`]s.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::Token;
use crate::metrics::{MatchCounts, Prf};

/// ROUGE precision/recall/F1 for one n-gram order.
pub type RougeScore = Prf;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RougeError {
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
}

/// Multiset of contiguous n-grams borrowed from token slices.
#[derive(Debug, Clone)]
pub struct NGramBag<'a> {
    order: usize,
    counts: HashMap<&'a [Token], usize>,
    total: usize,
}

impl<'a> NGramBag<'a> {
    pub fn new(order: usize) -> Result<Self, RougeError> {
        if order == 0 {
            return Err(RougeError::InvalidOrder(order));
        }
        Ok(NGramBag {
            order,
            counts: HashMap::new(),
            total: 0,
        })
    }

    /// Adds every window of `tokens`. Windows never span separate calls,
    /// which is how sentence boundaries are respected.
    pub fn add_sequence(&mut self, tokens: &'a [Token]) {
        for gram in tokens.windows(self.order) {
            *self.counts.entry(gram).or_insert(0) += 1;
            self.total += 1;
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, gram: &[Token]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a [Token], usize)> + '_ {
        self.counts.iter().map(|(&g, &c)| (g, c))
    }

    /// Clipped overlap against another bag of the same order.
    pub fn clipped_overlap(&self, other: &NGramBag<'_>) -> usize {
        debug_assert_eq!(self.order, other.order);
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .map(|(gram, &c)| c.min(large.count(gram)))
            .sum()
    }
}

pub fn ngrams(tokens: &[Token], order: usize) -> Result<NGramBag<'_>, RougeError> {
    let mut bag = NGramBag::new(order)?;
    bag.add_sequence(tokens);
    Ok(bag)
}

fn counts_of(candidate: &NGramBag<'_>, reference: &NGramBag<'_>) -> MatchCounts {
    MatchCounts {
        matched: candidate.clipped_overlap(reference),
        predicted: candidate.total(),
        actual: reference.total(),
    }
}

/// Raw overlap counts behind [`rouge_n`].
pub fn rouge_n_counts(
    candidate: &[Token],
    reference: &[Token],
    order: usize,
) -> Result<MatchCounts, RougeError> {
    Ok(counts_of(&ngrams(candidate, order)?, &ngrams(reference, order)?))
}

pub fn rouge_n(candidate: &[Token], reference: &[Token], order: usize) -> Result<RougeScore, RougeError> {
    rouge_n_counts(candidate, reference, order).map(MatchCounts::prf)
}

/// Raw overlap counts behind [`rouge_n_multi`].
pub fn rouge_n_multi_counts<C, R>(
    candidates: &[C],
    references: &[R],
    order: usize,
) -> Result<MatchCounts, RougeError>
where
    C: AsRef<[Token]>,
    R: AsRef<[Token]>,
{
    let mut cand = NGramBag::new(order)?;
    for sentence in candidates {
        cand.add_sequence(sentence.as_ref());
    }
    let mut refs = NGramBag::new(order)?;
    for sentence in references {
        refs.add_sequence(sentence.as_ref());
    }
    Ok(counts_of(&cand, &refs))
}

/// Summary-level ROUGE-N: each side is a list of sentences pooled into one
/// bag, with no n-gram crossing a sentence boundary.
pub fn rouge_n_multi<C, R>(candidates: &[C], references: &[R], order: usize) -> Result<RougeScore, RougeError>
where
    C: AsRef<[Token]>,
    R: AsRef<[Token]>,
{
    rouge_n_multi_counts(candidates, references, order).map(MatchCounts::prf)
}
