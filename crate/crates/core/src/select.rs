//! Deterministic top-N selection shared by the labeler and inference.

use std::cmp::Ordering;

/// Indices of the `n` highest scores, returned in ascending index order.
///
/// Ranking is by score descending with ties going to the lower index.
/// Scores compare with [`f64::total_cmp`], so the result is defined for any
/// input. `n` larger than `scores.len()` selects everything.
pub fn top_n_indices(scores: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    order.truncate(n);
    order.sort_unstable();
    order
}
