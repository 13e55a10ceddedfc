use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Chronological partition of `[0, T)` into train, validation and test weeks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl SplitIndex {
    pub fn weeks(&self) -> usize {
        self.test.end
    }

    /// Weeks available before the test period (train + validation).
    pub fn pre_test(&self) -> Range<usize> {
        self.train.start..self.validation.end
    }
}

/// Test = last `test_weeks`; validation = last `floor(vf * (T - test))` weeks
/// before the test block; train = everything earlier.
pub fn chronological_split(
    weeks: usize,
    test_weeks: usize,
    validation_fraction: f64,
) -> Result<SplitIndex> {
    if test_weeks >= weeks {
        return Err(Error::invalid(format!(
            "test weeks ({test_weeks}) must be fewer than total weeks ({weeks})"
        )));
    }
    if !(0.0..1.0).contains(&validation_fraction) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in [0, 1), got {validation_fraction}"
        )));
    }
    let pre_test = weeks - test_weeks;
    let validation = (validation_fraction * pre_test as f64).floor() as usize;
    let train_end = pre_test - validation;
    Ok(SplitIndex {
        train: 0..train_end,
        validation: train_end..pre_test,
        test: pre_test..weeks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn desk_scale_split_with_validation() {
        let s = chronological_split(209, 52, 0.10).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (142, 15, 52));
    }

    #[test]
    fn small_split_without_validation() {
        let s = chronological_split(10, 2, 0.0).unwrap();
        assert_eq!(s.train, 0..8);
        assert!(s.validation.is_empty());
        assert_eq!(s.test, 8..10);
    }

    #[test]
    fn train_test_only() {
        let s = chronological_split(209, 52, 0.0).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (157, 0, 52));
    }

    #[test]
    fn rejects_oversized_test_block() {
        assert!(chronological_split(10, 10, 0.0).is_err());
        assert!(chronological_split(10, 2, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_disjoint_ordered_exhaustive(
            weeks in 1usize..500,
            test_frac in 0.0f64..1.0,
            vf in 0.0f64..0.999,
        ) {
            let test = ((weeks as f64) * test_frac) as usize % weeks;
            let s = chronological_split(weeks, test, vf).unwrap();
            prop_assert_eq!(s.train.start, 0);
            prop_assert_eq!(s.train.end, s.validation.start);
            prop_assert_eq!(s.validation.end, s.test.start);
            prop_assert_eq!(s.test.end, weeks);
            prop_assert_eq!(s.test.len(), test);
            prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), weeks);
        }
    }
}
