use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::irt::{DichotomousItem, GradedItem, Item, ItemBank, ItemKind};
use crate::scoring::{sample_graded, CandidateKey, PromptId, QualitativeTask, ScoreRecord};

/// Version tag of the generating-bank fixture layout.
pub const FIXTURE_VERSION: u32 = 1;
pub const FIXTURE_ITEMS: usize = 19;

/// Simulated respondents: standardized true θ, binary rating responses and
/// mock LLM scores for every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub seed: u64,
    pub thetas: Vec<f64>,
    pub responses: ResponseMatrix,
    /// Graded matrix with one column per channel (`{task}_{prompt}`).
    pub scores: ResponseMatrix,
}

impl SyntheticCohort {
    pub fn respondent_ids(&self) -> &[String] {
        self.responses.respondent_ids()
    }

    /// Mock scores in the line-delimited score-record shape.
    pub fn score_records(&self) -> Result<Vec<ScoreRecord>> {
        let keys = self
            .scores
            .item_ids()
            .iter()
            .map(|id| CandidateKey::parse_column(id))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(self.scores.n_respondents() * keys.len());
        for (i, rid) in self.respondent_ids().iter().enumerate() {
            for (j, key) in keys.iter().enumerate() {
                let score = self.scores.get(i, j);
                out.push(ScoreRecord {
                    respondent_id: rid.clone(),
                    task: key.task.clone(),
                    prompt: key.prompt,
                    score,
                    raw_reply: score.map(|s| s.to_string()).unwrap_or_default(),
                    attempts: 1,
                });
            }
        }
        Ok(out)
    }
}

/// Respondent id for the `i`-th (0-based) synthetic row.
pub fn synthetic_id(i: usize) -> String {
    format!("s{:04}", i + 1)
}

/// Draws `n` standard-normal θ, rescales them to sample mean 0 and sample SD
/// 1, then simulates every bank item and every channel from one seeded stream.
pub fn generate_synthetic(n: usize, bank: &ItemBank, channels: &[GradedItem], seed: u64) -> Result<SyntheticCohort> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 respondents, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut thetas: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    standardize(&mut thetas);

    let ids: Vec<String> = (0..n).map(synthetic_id).collect();
    let mut cells = Vec::with_capacity(n * bank.len());
    for &theta in &thetas {
        for item in bank.items() {
            cells.push(Some(match item {
                Item::Dichotomous(d) => u8::from(rng.random::<f64>() < crate::irt::prob_2pl(d, theta)),
                Item::Graded(g) => sample_graded(g, theta, &mut rng),
            }));
        }
    }
    let responses = ResponseMatrix::new(
        ids.clone(),
        bank.items().iter().map(|i| (i.id().to_string(), i.kind())).collect(),
        cells,
    )?;

    let mut score_cells = Vec::with_capacity(n * channels.len());
    for &theta in &thetas {
        for ch in channels {
            score_cells.push(Some(sample_graded(ch, theta, &mut rng)));
        }
    }
    let scores = ResponseMatrix::new(
        ids,
        channels.iter().map(|c| (c.id.clone(), ItemKind::Graded)).collect(),
        score_cells,
    )?;
    Ok(SyntheticCohort {
        seed,
        thetas,
        responses,
        scores,
    })
}

/// In-place rescaling to mean 0 and (n − 1)-denominator SD 1.
pub fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// The 19-item generating bank: discriminations equally spaced on
/// [0.8, 2.2], difficulties equally spaced on [−2, 2] and paired with the
/// discriminations by a seeded shuffle.
pub fn fixture_bank(seed: u64) -> ItemBank {
    let mut difficulties: Vec<f64> = linspace(-2.0, 2.0, FIXTURE_ITEMS).collect();
    difficulties.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let items = linspace(0.8, 2.2, FIXTURE_ITEMS)
        .zip(difficulties)
        .enumerate()
        .map(|(i, (a, b))| Item::from(DichotomousItem::new(format!("item_{:02}", i + 1), a, b)))
        .collect();
    ItemBank::free(items).expect("fixture bank is valid")
}

/// Mock scoring channels for every task × prompt. Each task gets one
/// seeded "strong" prompt with discrimination drawn from
/// `strong_range`; the other prompts get 25–70% of it. Thresholds are
/// spread around a small seeded offset.
pub fn default_channels(tasks: &[QualitativeTask], strong_range: (f64, f64), seed: u64) -> Vec<GradedItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(tasks.len() * PromptId::ALL.len());
    for task in tasks {
        let strong = PromptId::ALL[rng.random_range(0..PromptId::ALL.len())];
        let strong_a = rng.random_range(strong_range.0..=strong_range.1);
        for prompt in PromptId::ALL {
            let a = if prompt == strong {
                strong_a
            } else {
                strong_a * rng.random_range(0.25..0.7)
            };
            let center: f64 = rng.random_range(-0.3..0.5);
            let gaps: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.6..1.1));
            let span: f64 = gaps.iter().sum();
            let mut t = [center - span / 2.0; 4];
            for k in 1..4 {
                t[k] = t[k - 1] + gaps[k - 1];
            }
            out.push(GradedItem::new(
                CandidateKey::new(task.code.clone(), prompt).column_id(),
                a,
                t,
            ));
        }
    }
    out
}

/// Appends a copy of column `source` named `copy_id`, producing a pair of
/// perfectly locally dependent items.
pub fn plant_duplicate(matrix: &ResponseMatrix, source: &str, copy_id: &str) -> Result<ResponseMatrix> {
    let j = matrix
        .item_index(source)
        .ok_or_else(|| Error::UnknownItem(source.to_string()))?;
    let col = ResponseMatrix::new(
        matrix.respondent_ids().to_vec(),
        vec![(copy_id.to_string(), matrix.kinds()[j])],
        matrix.column(j),
    )?;
    matrix.hstack(&col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::standard_tasks;

    #[test]
    fn thetas_are_exactly_standardized() {
        let c = generate_synthetic(3000, &fixture_bank(42), &[], 42).unwrap();
        let n = c.thetas.len() as f64;
        let mean = c.thetas.iter().sum::<f64>() / n;
        let sd = (c.thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_cohorts_repeat() {
        let channels = default_channels(&standard_tasks(), (1.0, 2.0), 3);
        let a = generate_synthetic(50, &fixture_bank(1), &channels, 9).unwrap();
        let b = generate_synthetic(50, &fixture_bank(1), &channels, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scores.n_items(), 52);
        assert_eq!(a.score_records().unwrap().len(), 50 * 52);
    }

    #[test]
    fn response_rate_at_difficulty_is_one_half() {
        let bank = ItemBank::free(vec![DichotomousItem::new("x", 1.0, 0.0).into()]).unwrap();
        let c = generate_synthetic(200_000, &bank, &[], 17).unwrap();
        let near: Vec<u8> = c
            .thetas
            .iter()
            .zip(c.responses.column(0))
            .filter(|(t, _)| t.abs() <= 0.05)
            .map(|(_, r)| r.unwrap())
            .collect();
        let n = near.len() as f64;
        let rate = near.iter().map(|&v| v as f64).sum::<f64>() / n;
        assert!((rate - 0.5).abs() < 3.0 * (0.25 / n).sqrt(), "{rate} over {n}");
    }

    #[test]
    fn fixture_bank_layout() {
        let bank = fixture_bank(42);
        assert_eq!(bank.len(), 19);
        let mut a: Vec<f64> = bank.items().iter().map(Item::discrimination).collect();
        a.sort_by(f64::total_cmp);
        assert!((a[0] - 0.8).abs() < 1e-12 && (a[18] - 2.2).abs() < 1e-12);
        assert_eq!(bank.items()[0].id(), "item_01");
    }

    #[test]
    fn channels_are_valid() {
        let channels = default_channels(&standard_tasks(), (1.0, 2.0), 5);
        assert_eq!(channels.len(), 52);
        for task in channels.chunks(4) {
            let max = task.iter().map(|c| c.a).fold(0.0, f64::max);
            assert!((1.0..=2.0).contains(&max));
        }
        for c in &channels {
            Item::from(c.clone()).validate().unwrap();
        }
    }

    #[test]
    fn duplicate_column() {
        let c = generate_synthetic(20, &fixture_bank(1), &[], 2).unwrap();
        let d = plant_duplicate(&c.responses, "item_01", "item_20").unwrap();
        assert_eq!(d.n_items(), 20);
        assert_eq!(d.column(0), d.column(19));
    }
}
