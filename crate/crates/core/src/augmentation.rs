//! Candidate LLM items: co-calibration against the frozen baseline,
//! information gain, per-task selection and assembly of augmented banks.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::diagnostics::{full_range_filter, yen_q3, Q3Pair, Q3Report};
use crate::error::{Error, Result};
use crate::estimation::{fit_fixed_anchor, FitConfig};
use crate::irt::{GradedItem, Item, ItemBank, ItemKind, GRADED_CATEGORIES};
use crate::scoring::{CandidateKey, PromptId};

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateItem {
    pub key: CandidateKey,
    /// Present only when the co-calibration converged.
    pub calibrated: Option<GradedItem>,
    pub info_gain: f64,
    pub full_range: bool,
    pub converged: bool,
}

impl CandidateItem {
    pub fn eligible(&self) -> bool {
        self.full_range && self.converged && self.calibrated.is_some()
    }
}

/// One line of the persisted pool report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRow {
    pub task: String,
    pub prompt: PromptId,
    pub a: Option<f64>,
    pub thresholds: Option<[f64; GRADED_CATEGORIES - 1]>,
    pub info_gain: f64,
    pub full_range: bool,
    pub converged: bool,
}

impl From<&CandidateItem> for PoolRow {
    fn from(c: &CandidateItem) -> Self {
        Self {
            task: c.key.task.clone(),
            prompt: c.key.prompt,
            a: c.calibrated.as_ref().map(|g| g.a),
            thresholds: c.calibrated.as_ref().map(|g| g.thresholds),
            info_gain: c.info_gain,
            full_range: c.full_range,
            converged: c.converged,
        }
    }
}

impl From<PoolRow> for CandidateItem {
    fn from(r: PoolRow) -> Self {
        let key = CandidateKey::new(r.task, r.prompt);
        let calibrated = match (r.a, r.thresholds) {
            (Some(a), Some(t)) => Some(GradedItem::new(key.column_id(), a, t)),
            _ => None,
        };
        Self {
            key,
            calibrated,
            info_gain: r.info_gain,
            full_range: r.full_range,
            converged: r.converged,
        }
    }
}

/// Mean information of `item` over the given θ estimates.
pub fn information_gain(item: &GradedItem, thetas: &[f64]) -> f64 {
    if thetas.is_empty() {
        return 0.0;
    }
    let item = Item::Graded(item.clone());
    thetas.iter().map(|&t| item.information(t)).sum::<f64>() / thetas.len() as f64
}

fn with_scores(
    matrix: &ResponseMatrix,
    baseline: &ItemBank,
    scores: &ResponseMatrix,
    ids: &[String],
) -> Result<ResponseMatrix> {
    let anchor = matrix.aligned_to(baseline)?;
    let extra = scores.select_items(ids)?.select_respondents(anchor.respondent_ids())?;
    anchor.hstack(&extra)
}

/// Co-calibrates one candidate column of `scores` against the frozen
/// `baseline` on the rows of `matrix`, then scores it by information gain
/// over `training_thetas`.
pub fn evaluate_candidate(
    key: &CandidateKey,
    scores: &ResponseMatrix,
    baseline: &ItemBank,
    matrix: &ResponseMatrix,
    training_thetas: &[f64],
    config: &FitConfig,
) -> Result<CandidateItem> {
    if training_thetas.len() != matrix.n_respondents() {
        return Err(Error::MismatchedRespondents(format!(
            "{} training thetas for {} respondents",
            training_thetas.len(),
            matrix.n_respondents()
        )));
    }
    let id = key.column_id();
    let combined = with_scores(matrix, baseline, scores, std::slice::from_ref(&id))?;
    let column = combined.column(combined.n_items() - 1);
    let full_range = full_range_filter(&column);
    let (calibrated, converged) = match fit_fixed_anchor(&combined, baseline, &[&id], config) {
        Ok(fit) => match fit.bank.items().last() {
            Some(Item::Graded(g)) if fit.converged => (Some(g.clone()), true),
            _ => (None, false),
        },
        Err(Error::InsufficientVariation(_)) => (None, false),
        Err(e) => return Err(e),
    };
    let info_gain = calibrated
        .as_ref()
        .map_or(0.0, |g| information_gain(g, training_thetas));
    Ok(CandidateItem {
        key: key.clone(),
        calibrated,
        info_gain,
        full_range,
        converged,
    })
}

fn rank(pool: &mut [CandidateItem]) {
    pool.sort_by(|x, y| y.info_gain.total_cmp(&x.info_gain).then_with(|| x.key.cmp(&y.key)));
}

/// Evaluates every graded column of `scores` and ranks the candidates by
/// information gain (descending), then by (task, prompt).
pub fn build_pool(
    scores: &ResponseMatrix,
    baseline: &ItemBank,
    matrix: &ResponseMatrix,
    training_thetas: &[f64],
    config: &FitConfig,
) -> Result<Vec<CandidateItem>> {
    let keys = scores
        .item_ids()
        .iter()
        .zip(scores.kinds())
        .map(|(id, kind)| {
            if *kind != ItemKind::Graded {
                return Err(Error::InvalidArgument(format!("score column `{id}` is not graded")));
            }
            CandidateKey::parse_column(id)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pool = keys
        .par_iter()
        .map(|key| evaluate_candidate(key, scores, baseline, matrix, training_thetas, config))
        .collect::<Result<Vec<_>>>()?;
    rank(&mut pool);
    Ok(pool)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// One candidate per task, in pool rank order.
    pub winners: Vec<CandidateItem>,
    /// Tasks with no full-range, converged candidate.
    pub skipped_tasks: Vec<String>,
}

/// Picks the highest-gain eligible candidate of every task.
pub fn select_best_per_task(pool: &[CandidateItem]) -> Result<Selection> {
    let mut ranked = pool.to_vec();
    rank(&mut ranked);
    let tasks: BTreeSet<&str> = ranked.iter().map(|c| c.key.task.as_str()).collect();
    let mut seen = BTreeSet::new();
    let mut winners = Vec::new();
    for c in &ranked {
        if c.eligible() && seen.insert(c.key.task.clone()) {
            winners.push(c.clone());
        }
    }
    if winners.is_empty() {
        return Err(Error::EmptySelection);
    }
    let skipped_tasks = tasks
        .into_iter()
        .filter(|t| !seen.contains(*t))
        .map(str::to_string)
        .collect();
    Ok(Selection { winners, skipped_tasks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugmentedName {
    BestAllItems,
    TopK(usize),
}

impl fmt::Display for AugmentedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentedName::BestAllItems => f.write_str("best_all_items"),
            AugmentedName::TopK(k) => write!(f, "top_{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTest {
    pub name: AugmentedName,
    /// Frozen baseline items followed by the jointly recalibrated LLM items.
    pub bank: ItemBank,
    pub selection_log: Vec<String>,
    pub converged: bool,
    pub q3: Q3Report,
    /// Flagged pairs that involve at least one LLM item.
    pub q3_warnings: Vec<Q3Pair>,
}

/// Adds the winners (or the `k` highest-gain winners) to the frozen
/// baseline and recalibrates all of them in one fixed-anchor fit.
pub fn assemble_augmented(
    winners: &[CandidateItem],
    k: Option<usize>,
    baseline: &ItemBank,
    matrix: &ResponseMatrix,
    scores: &ResponseMatrix,
    config: &FitConfig,
    q3_threshold: f64,
) -> Result<AugmentedTest> {
    let mut chosen = winners.to_vec();
    rank(&mut chosen);
    let mut tasks = BTreeSet::new();
    for c in &chosen {
        if !tasks.insert(c.key.task.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "two winners share task `{}`",
                c.key.task
            )));
        }
    }
    let mut log = Vec::new();
    let name = match k {
        Some(0) => return Err(Error::InvalidArgument("k must be at least 1".into())),
        Some(k) => {
            for c in chosen.iter().skip(k) {
                log.push(format!(
                    "dropped {} (rank beyond top {k}, gain {:.6})",
                    c.key, c.info_gain
                ));
            }
            chosen.truncate(k);
            AugmentedName::TopK(k)
        }
        None => AugmentedName::BestAllItems,
    };
    if chosen.is_empty() {
        return Err(Error::EmptySelection);
    }
    for c in &chosen {
        log.push(format!("added {} (gain {:.6})", c.key, c.info_gain));
    }
    let ids: Vec<String> = chosen.iter().map(|c| c.key.column_id()).collect();
    let combined = with_scores(matrix, baseline, scores, &ids)?;
    let fit = fit_fixed_anchor(&combined, baseline, &ids, config)?;
    if !fit.converged {
        log.push(format!(
            "joint recalibration stopped after {} cycles without converging",
            fit.cycles_used
        ));
    }
    let q3 = yen_q3(&combined, &fit.bank, &config.grid)?.with_threshold(q3_threshold);
    let q3_warnings: Vec<Q3Pair> = q3
        .flagged_pairs()
        .filter(|p| ids.contains(&p.item_a) || ids.contains(&p.item_b))
        .cloned()
        .collect();
    for p in &q3_warnings {
        log.push(format!("Q3 warning: {} / {} = {:.3}", p.item_a, p.item_b, p.q3));
    }
    Ok(AugmentedTest {
        name,
        bank: fit.bank,
        selection_log: log,
        converged: fit.converged,
        q3,
        q3_warnings,
    })
}
