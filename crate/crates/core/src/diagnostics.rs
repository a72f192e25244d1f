//! Local dependence (Yen's Q3), item purification and the full-range check.

use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::estimation::{eap_all, fit_2pl_mml, FitConfig, QuadratureGrid};
use crate::evaluation::pearson;
use crate::irt::{ItemBank, ItemKind};

pub const DEFAULT_Q3_THRESHOLD: f64 = 0.25;
pub const MIN_Q3_RESPONDENTS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q3Pair {
    pub item_a: String,
    pub item_b: String,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q3Report {
    /// Every unordered item pair, in bank order (`a` before `b`).
    pub pairs: Vec<Q3Pair>,
    pub threshold: f64,
    /// Indices into `pairs` with `|q3| > threshold`.
    pub flagged: Vec<usize>,
}

impl Q3Report {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.flagged = flag(&self.pairs, threshold);
        self
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.pairs
            .iter()
            .find(|p| (p.item_a == a && p.item_b == b) || (p.item_a == b && p.item_b == a))
            .map(|p| p.q3)
    }

    pub fn flagged_pairs(&self) -> impl Iterator<Item = &Q3Pair> {
        self.flagged.iter().map(|&i| &self.pairs[i])
    }

    pub fn mean_q3(&self) -> f64 {
        self.pairs.iter().map(|p| p.q3).sum::<f64>() / self.pairs.len() as f64
    }
}

fn flag(pairs: &[Q3Pair], threshold: f64) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.q3.abs() > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Residual correlations between every pair of bank items. Residuals are
/// observed minus expected score at each respondent's EAP estimate under the
/// full bank; correlations use pairwise-complete observations.
pub fn yen_q3(matrix: &ResponseMatrix, bank: &ItemBank, grid: &QuadratureGrid) -> Result<Q3Report> {
    if bank.len() < 3 {
        return Err(Error::TooFewItems {
            needed: 3,
            got: bank.len(),
        });
    }
    if matrix.n_respondents() < MIN_Q3_RESPONDENTS {
        return Err(Error::InvalidArgument(format!(
            "Q3 needs at least {MIN_Q3_RESPONDENTS} respondents, got {}",
            matrix.n_respondents()
        )));
    }
    let aligned = matrix.aligned_to(bank)?;
    let estimates = eap_all(&aligned, bank, grid)?;
    let residuals: Vec<Vec<Option<f64>>> = bank
        .items()
        .iter()
        .enumerate()
        .map(|(j, item)| {
            estimates
                .iter()
                .enumerate()
                .map(|(i, est)| aligned.get(i, j).map(|x| x as f64 - item.expected_score(est.theta)))
                .collect()
        })
        .collect();
    for (j, col) in residuals.iter().enumerate() {
        let values: Vec<f64> = col.iter().flatten().copied().collect();
        if values.len() < 2 || variance(&values) <= 1e-24 {
            return Err(Error::DegenerateResiduals(bank.items()[j].id().to_string()));
        }
    }

    let mut pairs = Vec::with_capacity(bank.len() * (bank.len() - 1) / 2);
    for j in 0..bank.len() {
        for k in j + 1..bank.len() {
            let (x, y): (Vec<f64>, Vec<f64>) = residuals[j]
                .iter()
                .zip(&residuals[k])
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            let r = pearson(&x, &y);
            pairs.push(Q3Pair {
                item_a: bank.items()[j].id().to_string(),
                item_b: bank.items()[k].id().to_string(),
                q3: if r.is_finite() { r.clamp(-1.0, 1.0) } else { 0.0 },
            });
        }
    }
    let flagged = flag(&pairs, DEFAULT_Q3_THRESHOLD);
    Ok(Q3Report {
        pairs,
        threshold: DEFAULT_Q3_THRESHOLD,
        flagged,
    })
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub iteration: usize,
    pub removed: String,
    pub removed_a: f64,
    pub partner: String,
    pub partner_a: f64,
    pub q3: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    pub retained: Vec<String>,
    pub removals: Vec<Removal>,
    /// Free 2PL calibration of the retained items.
    pub bank: ItemBank,
}

/// Repeatedly fits a 2PL model and drops the lower-discrimination member of
/// the pair with the largest |Q3| above `q3_threshold`, until no pair is
/// flagged. Equal discriminations drop the later item.
pub fn purify(matrix: &ResponseMatrix, config: &FitConfig, q3_threshold: f64) -> Result<Purification> {
    if matrix.n_items() < 3 {
        return Err(Error::TooFewItems {
            needed: 3,
            got: matrix.n_items(),
        });
    }
    if matrix.kinds().iter().any(|k| *k != ItemKind::Binary) {
        return Err(Error::InvalidArgument(
            "purification expects binary rating items".into(),
        ));
    }
    let mut retained: Vec<String> = matrix.item_ids().to_vec();
    let mut removals = Vec::new();
    loop {
        let current = matrix.select_items(&retained)?;
        let bank = fit_2pl_mml(&current, config)?.bank;
        let report = yen_q3(&current, &bank, &config.grid)?.with_threshold(q3_threshold);
        let worst = report.flagged_pairs().max_by(|p, q| p.q3.abs().total_cmp(&q.q3.abs()));
        let Some(pair) = worst else {
            return Ok(Purification {
                retained,
                removals,
                bank,
            });
        };
        if retained.len() <= 3 {
            return Err(Error::TooFewItemsRemaining);
        }
        let ia = bank.position(&pair.item_a).expect("pair item in bank");
        let ib = bank.position(&pair.item_b).expect("pair item in bank");
        let (aa, ab) = (bank.items()[ia].discrimination(), bank.items()[ib].discrimination());
        let (drop, keep, drop_a, keep_a) = if aa < ab || (aa == ab && ia > ib) {
            (ia, ib, aa, ab)
        } else {
            (ib, ia, ab, aa)
        };
        let removed = retained[drop].clone();
        removals.push(Removal {
            iteration: removals.len() + 1,
            removed: removed.clone(),
            removed_a: drop_a,
            partner: retained[keep].clone(),
            partner_a: keep_a,
            q3: pair.q3,
            reason: format!(
                "local dependence with `{}` (Q3 = {:.3} > {q3_threshold}); {}",
                retained[keep],
                pair.q3,
                if drop_a == keep_a {
                    "equal discrimination, later item dropped".to_string()
                } else {
                    format!("lower discrimination ({drop_a:.4} vs {keep_a:.4})")
                }
            ),
        });
        retained.remove(drop);
    }
}

/// True when every category 1..=5 occurs among the observed scores.
pub fn full_range_filter(scores: &[Option<u8>]) -> bool {
    ItemKind::Graded.categories().all(|c| scores.contains(&Some(c)))
}
