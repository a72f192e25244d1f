use serde::{Deserialize, Serialize};

use super::QuadratureGrid;
use crate::error::{Error, Result};
use crate::irt::Item;

/// Posterior mean and posterior standard deviation of θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitEstimate {
    pub theta: f64,
    pub se: f64,
}

/// Expected a posteriori estimate of θ for a response pattern aligned with
/// `items`. Missing responses are skipped; an all-missing pattern returns the
/// prior moments.
pub fn eap(responses: &[Option<u8>], items: &[Item], grid: &QuadratureGrid) -> Result<TraitEstimate> {
    if responses.len() != items.len() {
        return Err(Error::PatternLength {
            expected: items.len(),
            got: responses.len(),
        });
    }
    let mut log_post = grid.log_weights().to_vec();
    for (item, response) in items.iter().zip(responses) {
        if let Some(r) = *response {
            if !item.kind().accepts(r) {
                return Err(Error::OutOfRangeResponse {
                    item: item.id().to_string(),
                    value: r,
                });
            }
            accumulate(&mut log_post, item, r, grid);
        }
    }
    Ok(posterior_moments(&log_post, grid))
}

/// Adds one observed response to an unnormalized log posterior over the grid.
#[inline]
pub fn accumulate(log_post: &mut [f64], item: &Item, response: u8, grid: &QuadratureGrid) {
    for (lp, &theta) in log_post.iter_mut().zip(grid.nodes()) {
        *lp += item.log_prob_unchecked(response, theta);
    }
}

/// Mean and SD of the distribution proportional to `exp(log_post)` on the grid.
pub fn posterior_moments(log_post: &[f64], grid: &QuadratureGrid) -> TraitEstimate {
    let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut first = 0.0;
    for (lp, &x) in log_post.iter().zip(grid.nodes()) {
        let w = (lp - max).exp();
        total += w;
        first += w * x;
    }
    let mean = first / total;
    let var: f64 = log_post
        .iter()
        .zip(grid.nodes())
        .map(|(lp, &x)| (lp - max).exp() * (x - mean) * (x - mean))
        .sum::<f64>()
        / total;
    TraitEstimate {
        theta: mean,
        se: var.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irt::{DichotomousItem, GradedItem};

    #[test]
    fn empty_pattern_recovers_prior() {
        let grid = QuadratureGrid::default();
        let items: Vec<Item> = vec![DichotomousItem::new("x", 1.0, 0.0).into()];
        let est = eap(&[None], &items, &grid).unwrap();
        assert!(est.theta.abs() < 1e-3);
        assert!((est.se - 1.0).abs() < 1e-3);
    }

    #[test]
    fn all_positive_responses_raise_theta() {
        let grid = QuadratureGrid::default();
        let items: Vec<Item> = (0..5)
            .map(|i| DichotomousItem::new(format!("x{i}"), 1.0 + 0.2 * i as f64, -1.0 + 0.5 * i as f64).into())
            .collect();
        let est = eap(&[Some(1); 5], &items, &grid).unwrap();
        assert!(est.theta > 0.0);
        assert!(est.theta.abs() <= grid.max_abs_node());
    }

    #[test]
    fn rejects_bad_responses() {
        let grid = QuadratureGrid::default();
        let items: Vec<Item> = vec![GradedItem::new("g", 1.0, [-1.0, 0.0, 1.0, 2.0]).into()];
        assert!(matches!(
            eap(&[Some(0)], &items, &grid),
            Err(Error::OutOfRangeResponse { .. })
        ));
        assert!(eap(&[], &items, &grid).is_err());
    }
}
