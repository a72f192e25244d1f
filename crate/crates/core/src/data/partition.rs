use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint respondent-id sets. `validation` is empty for a two-way split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded two-thirds / one-third split. The training set gets `ceil(2n/3)`
/// ids. Both halves keep the input order.
pub fn partition<S: AsRef<str>>(ids: &[S], seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    let n = ids.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("cannot partition {n} respondents")));
    }
    let n_train = (2 * n).div_ceil(3);
    let split = split_by_counts(ids, &[n_train, 0], seed);
    Ok((split.train, split.test))
}

/// Seeded three-way split for a train/validation/test protocol. Fractions
/// must be nonnegative with `train + validation < 1`; sizes round up for the
/// training set and down for validation.
pub fn partition_three<S: AsRef<str>>(ids: &[S], train: f64, validation: f64, seed: u64) -> Result<Split> {
    if !(train > 0.0 && validation >= 0.0 && train + validation < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid split fractions train={train} validation={validation}"
        )));
    }
    let n = ids.len();
    let n_train = ((n as f64) * train).ceil() as usize;
    let n_val = ((n as f64) * validation).floor() as usize;
    if n_train + n_val >= n || n_train == 0 {
        return Err(Error::InvalidArgument(format!(
            "{n} respondents is too few for this split"
        )));
    }
    Ok(split_by_counts(ids, &[n_train, n_val], seed))
}

fn split_by_counts<S: AsRef<str>>(ids: &[S], counts: &[usize; 2], seed: u64) -> Split {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |range: std::ops::Range<usize>| {
        let mut chosen: Vec<usize> = order[range].to_vec();
        chosen.sort_unstable();
        chosen
            .into_iter()
            .map(|i| ids[i].as_ref().to_string())
            .collect::<Vec<_>>()
    };
    let (a, b) = (counts[0], counts[0] + counts[1]);
    Split {
        train: take(0..a),
        validation: take(a..b),
        test: take(b..ids.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("r{i}")).collect()
    }

    #[test]
    fn reported_split_sizes() {
        let (train, test) = partition(&ids(693), 1).unwrap();
        assert_eq!((train.len(), test.len()), (462, 231));
        let (train, test) = partition(&ids(3000), 1).unwrap();
        assert_eq!((train.len(), test.len()), (2000, 1000));
    }

    #[test]
    fn seeded_and_deterministic() {
        assert_eq!(partition(&ids(50), 9).unwrap(), partition(&ids(50), 9).unwrap());
        assert_ne!(partition(&ids(50), 9).unwrap(), partition(&ids(50), 10).unwrap());
        assert!(partition(&ids(2), 0).is_err());
    }

    #[test]
    fn three_way() {
        let s = partition_three(&ids(100), 0.6, 0.2, 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (60, 20, 20));
        assert!(partition_three(&ids(100), 0.8, 0.2, 3).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_a_permutation(n in 3usize..400, seed in any::<u64>()) {
            let all = ids(n);
            let (train, test) = partition(&all, seed).unwrap();
            let a: HashSet<_> = train.iter().collect();
            let b: HashSet<_> = test.iter().collect();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), n);
            prop_assert_eq!(train.len(), (2 * n).div_ceil(3));
        }
    }
}
