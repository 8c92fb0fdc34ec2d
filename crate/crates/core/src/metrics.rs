//! Precision/recall/F1 triples shared by ROUGE and sentence matching.

use serde::{Deserialize, Serialize};

/// Match counts behind a precision/recall/F1 triple.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: usize,
    pub predicted: usize,
    pub actual: usize,
}

impl MatchCounts {
    pub fn prf(self) -> Prf {
        Prf::from_counts(self.matched, self.predicted, self.actual)
    }
}

impl std::ops::Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, rhs: Self) -> Self {
        MatchCounts {
            matched: self.matched + rhs.matched,
            predicted: self.predicted + rhs.predicted,
            actual: self.actual + rhs.actual,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// A zero denominator makes its component 0.
    pub fn from_counts(matched: usize, predicted: usize, actual: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Prf::from_pr(ratio(matched, predicted), ratio(matched, actual))
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }

    /// Component-wise arithmetic mean; `None` for an empty input.
    pub fn mean<'a>(rows: impl IntoIterator<Item = &'a Prf>) -> Option<Prf> {
        let mut n = 0usize;
        let mut sum = Prf::default();
        for row in rows {
            n += 1;
            sum.precision += row.precision;
            sum.recall += row.recall;
            sum.f1 += row.f1;
        }
        (n > 0).then(|| Prf {
            precision: sum.precision / n as f64,
            recall: sum.recall / n as f64,
            f1: sum.f1 / n as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_denominators() {
        assert_eq!(Prf::from_counts(0, 0, 5), Prf::default());
        assert_eq!(Prf::from_counts(0, 3, 0), Prf::default());
    }

    #[test]
    fn harmonic_mean() {
        let p = Prf::from_counts(1, 1, 2);
        assert_eq!(p.precision, 1.0);
        assert_eq!(p.recall, 0.5);
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mean_of_identical_rows_is_the_row() {
        let row = Prf::from_counts(2, 3, 7);
        let m = Prf::mean(&[row, row, row]).unwrap();
        assert!((m.f1 - row.f1).abs() < 1e-15);
        assert!(Prf::mean(&[]).is_none());
    }
}
