//! Offline stand-in for the text → LLM → score channel: scores are drawn from
//! a graded item's category probabilities at the respondent's θ.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::client::{ChatBackend, ScoreRequest};
use super::corpus::ScoreRecord;
use super::prompts::PromptId;
use crate::irt::{grm_cumulative, GradedItem};

/// Inverse-CDF draw of a 1..=5 score.
pub fn sample_graded<R: Rng + ?Sized>(channel: &GradedItem, theta: f64, rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    1 + grm_cumulative(channel, theta).iter().filter(|&&c| u < c).count() as u8
}

pub fn mock_score(theta: f64, channel: &GradedItem, seed: u64) -> u8 {
    sample_graded(channel, theta, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Scores for many respondents from one seeded stream.
pub fn mock_scores(thetas: &[f64], channel: &GradedItem, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    thetas.iter().map(|&t| sample_graded(channel, t, &mut rng)).collect()
}

/// Backend that answers each request with a pre-computed score, emulating a
/// model whose replies are already known. Unknown keys and missing scores get
/// a reply that fails strict parsing.
#[derive(Debug, Clone, Default)]
pub struct LookupBackend {
    scores: HashMap<(String, String, PromptId), Option<u8>>,
}

impl LookupBackend {
    pub fn from_records(records: &[ScoreRecord]) -> Self {
        Self {
            scores: records
                .iter()
                .map(|r| ((r.respondent_id.clone(), r.task.clone(), r.prompt), r.score))
                .collect(),
        }
    }
}

impl ChatBackend for LookupBackend {
    fn complete(&self, request: &ScoreRequest<'_>) -> Result<String, String> {
        let key = (
            request.respondent_id.to_string(),
            request.task.to_string(),
            request.prompt_id,
        );
        Ok(match self.scores.get(&key) {
            Some(Some(s)) => s.to_string(),
            _ => "no score".to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irt::grm_category_probs;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn channel(a: f64) -> GradedItem {
        GradedItem::new("c", a, [-1.2, -0.4, 0.4, 1.2])
    }

    fn chi_square_p(observed: &[[f64; 5]]) -> f64 {
        let rows = observed.len();
        let row_tot: Vec<f64> = observed.iter().map(|r| r.iter().sum()).collect();
        let col_tot: Vec<f64> = (0..5).map(|c| observed.iter().map(|r| r[c]).sum()).collect();
        let n: f64 = row_tot.iter().sum();
        let mut stat = 0.0;
        let mut used_cols = 0;
        for c in 0..5 {
            if col_tot[c] == 0.0 {
                continue;
            }
            used_cols += 1;
            for r in 0..rows {
                let e = row_tot[r] * col_tot[c] / n;
                stat += (observed[r][c] - e).powi(2) / e;
            }
        }
        let df = ((rows - 1) * (used_cols - 1)) as f64;
        1.0 - ChiSquared::new(df).unwrap().cdf(stat)
    }

    #[test]
    fn flat_channel_is_independent_of_theta() {
        let n = 5000;
        let thetas: Vec<f64> = (0..n).map(|i| -2.5 + 5.0 * i as f64 / n as f64).collect();
        let scores = mock_scores(&thetas, &channel(1e-9), 11);
        // low vs high θ halves
        let mut table = [[0.0; 5]; 2];
        for (i, s) in scores.iter().enumerate() {
            table[usize::from(i >= n / 2)][*s as usize - 1] += 1.0;
        }
        assert!(chi_square_p(&table) > 0.01);
    }

    #[test]
    fn discriminating_channel_tracks_theta() {
        let n = 2000;
        let thetas: Vec<f64> = (0..n).map(|i| -2.5 + 5.0 * i as f64 / n as f64).collect();
        let scores = mock_scores(&thetas, &channel(1.5), 3);
        let spearman = spearman(&thetas, &scores.iter().map(|&s| s as f64).collect::<Vec<_>>());
        assert!(spearman > 0.3, "{spearman}");
    }

    #[test]
    fn marginals_match_model_probabilities() {
        let n = 10_000;
        let item = channel(1.0);
        let scores = mock_scores(&vec![0.3; n], &item, 5);
        let probs = grm_category_probs(&item, 0.3);
        for (k, p) in probs.iter().enumerate() {
            let observed = scores.iter().filter(|&&s| s as usize == k + 1).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((observed - p).abs() < 4.0 * se, "category {}: {observed} vs {p}", k + 1);
        }
    }

    #[test]
    fn seeded() {
        let thetas = [0.1, -0.4, 1.2];
        assert_eq!(
            mock_scores(&thetas, &channel(1.0), 8),
            mock_scores(&thetas, &channel(1.0), 8)
        );
        assert_eq!(mock_score(0.2, &channel(1.0), 4), mock_score(0.2, &channel(1.0), 4));
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }

    fn spearman(x: &[f64], y: &[f64]) -> f64 {
        crate::evaluation::pearson(&ranks(x), &ranks(y))
    }
}
