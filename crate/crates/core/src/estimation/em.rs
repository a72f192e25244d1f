//! Bock–Aitkin marginal maximum likelihood via EM.
//!
//! The latent prior is the standard-normal grid of [`QuadratureGrid`] and is
//! never re-estimated, so frozen anchor items pin the scale. Each M-step runs
//! Fisher-scoring iterations per free item in slope–intercept form with
//! step-halving; a step is only accepted when it does not lower the item's
//! expected complete-data log-likelihood, which keeps the marginal
//! log-likelihood nondecreasing across cycles.

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::QuadratureGrid;
use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::irt::{DichotomousItem, GradedItem, Item, ItemBank, ItemKind, GRADED_CATEGORIES};

pub const MIN_DISCRIMINATION: f64 = 0.05;
pub const MAX_DISCRIMINATION: f64 = 6.0;
/// Bound on |b| and on every |threshold|.
pub const MAX_LOCATION: f64 = 6.0;

const MAX_NEWTON_STEPS: usize = 10;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_em_cycles: usize,
    /// Converged once no parameter moves by more than this in a cycle.
    pub param_tolerance: f64,
    pub grid: QuadratureGrid,
    /// Drives the jitter applied to degenerate starting thresholds.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_em_cycles: 500,
            param_tolerance: 1e-4,
            grid: QuadratureGrid::default(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_em_cycles == 0 {
            return Err(Error::InvalidConfig("max_em_cycles must be at least 1".into()));
        }
        if self.param_tolerance.is_nan() || self.param_tolerance <= 0.0 {
            return Err(Error::InvalidConfig("param_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub bank: ItemBank,
    /// Marginal log-likelihood evaluated at the start of each cycle.
    pub marginal_ll_trace: Vec<f64>,
    pub converged: bool,
    pub cycles_used: usize,
}

/// Calibrates a free 2PL model on a binary response matrix.
pub fn fit_2pl_mml(matrix: &ResponseMatrix, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if matrix.n_items() < 2 {
        return Err(Error::TooFewItems {
            needed: 2,
            got: matrix.n_items(),
        });
    }
    if let Some(j) = matrix.kinds().iter().position(|k| *k != ItemKind::Binary) {
        return Err(Error::InvalidArgument(format!(
            "column `{}` is not binary",
            matrix.item_ids()[j]
        )));
    }
    for (i, row) in matrix.rows().enumerate() {
        if row.iter().all(Option::is_none) {
            return Err(Error::EmptyRow(matrix.respondent_ids()[i].clone()));
        }
    }
    let columns: Vec<Vec<Option<u8>>> = (0..matrix.n_items()).map(|j| matrix.column(j)).collect();
    let free = initial_items(matrix.item_ids(), matrix.kinds(), &columns, config.seed)?;
    let base = vec![0.0; matrix.n_respondents() * config.grid.len()];
    let engine = Engine::new(&config.grid, base, columns);
    let (items, trace, converged, cycles) = engine.run(free, config);
    Ok(FitResult {
        bank: ItemBank::free(items)?,
        marginal_ll_trace: trace,
        converged,
        cycles_used: cycles,
    })
}

/// Calibrates the `free_ids` columns of `matrix` with every anchor item held
/// at its given parameters. The returned bank lists the anchor items (frozen,
/// copied unchanged) followed by the newly calibrated free items.
pub fn fit_fixed_anchor<S: AsRef<str>>(
    matrix: &ResponseMatrix,
    anchor: &ItemBank,
    free_ids: &[S],
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    for id in free_ids {
        if anchor.position(id.as_ref()).is_some() {
            return Err(Error::OverlappingItems(id.as_ref().to_string()));
        }
    }
    let anchor_matrix = matrix.aligned_to(anchor)?;
    let free_matrix = matrix.select_items(free_ids)?;
    let grid = &config.grid;
    let q = grid.len();
    let n = matrix.n_respondents();

    for i in 0..n {
        let observed = anchor_matrix
            .row(i)
            .iter()
            .chain(free_matrix.row(i))
            .any(Option::is_some);
        if !observed {
            return Err(Error::EmptyRow(matrix.respondent_ids()[i].clone()));
        }
    }

    // Frozen items contribute a constant log-likelihood surface per respondent.
    let anchor_items = anchor.items();
    let base: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = anchor_matrix.row(i);
            grid.nodes()
                .iter()
                .map(|&theta| {
                    anchor_items
                        .iter()
                        .zip(row)
                        .filter_map(|(item, r)| r.map(|r| item.log_prob_unchecked(r, theta)))
                        .sum::<f64>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    debug_assert_eq!(base.len(), n * q);

    let columns: Vec<Vec<Option<u8>>> = (0..free_matrix.n_items()).map(|j| free_matrix.column(j)).collect();
    let free = initial_items(free_matrix.item_ids(), free_matrix.kinds(), &columns, config.seed)?;
    let engine = Engine::new(grid, base, columns);

    let (items, trace, converged, cycles) = if free.is_empty() {
        (Vec::new(), vec![engine.e_step(&[]).0], true, 0)
    } else {
        engine.run(free, config)
    };

    let mut all = anchor.items().to_vec();
    let mut frozen = vec![true; all.len()];
    frozen.extend(std::iter::repeat_n(false, items.len()));
    all.extend(items);
    Ok(FitResult {
        bank: ItemBank::new(all, frozen)?,
        marginal_ll_trace: trace,
        converged,
        cycles_used: cycles,
    })
}

/// Expected category counts at each node: `[node][category]`.
type Counts = Vec<[f64; GRADED_CATEGORIES]>;

struct Engine<'a> {
    grid: &'a QuadratureGrid,
    /// Row-major n × nodes log-likelihood of the frozen items.
    base: Vec<f64>,
    columns: Vec<Vec<Option<u8>>>,
}

#[inline]
fn category_index(kind: ItemKind, response: u8) -> usize {
    match kind {
        ItemKind::Binary => response as usize,
        ItemKind::Graded => response as usize - 1,
    }
}

#[inline]
fn response_of(kind: ItemKind, index: usize) -> u8 {
    match kind {
        ItemKind::Binary => index as u8,
        ItemKind::Graded => index as u8 + 1,
    }
}

fn n_categories(kind: ItemKind) -> usize {
    match kind {
        ItemKind::Binary => 2,
        ItemKind::Graded => GRADED_CATEGORIES,
    }
}

impl<'a> Engine<'a> {
    fn new(grid: &'a QuadratureGrid, base: Vec<f64>, columns: Vec<Vec<Option<u8>>>) -> Self {
        Self { grid, base, columns }
    }

    fn n_respondents(&self) -> usize {
        self.base.len() / self.grid.len()
    }

    fn run(&self, mut items: Vec<Item>, config: &FitConfig) -> (Vec<Item>, Vec<f64>, bool, usize) {
        let mut trace = Vec::new();
        let mut converged = false;
        let mut cycles = 0;
        while cycles < config.max_em_cycles {
            let (ll, counts) = self.e_step(&items);
            trace.push(ll);
            cycles += 1;
            let updated: Vec<Item> = items
                .par_iter()
                .zip(counts.par_iter())
                .map(|(item, c)| m_step(item, c, self.grid))
                .collect();
            let change = items
                .iter()
                .zip(&updated)
                .map(|(old, new)| max_param_change(old, new))
                .fold(0.0, f64::max);
            items = updated;
            if change < config.param_tolerance {
                converged = true;
                break;
            }
        }
        (items, trace, converged, cycles)
    }

    /// Marginal log-likelihood at the current parameters and the expected
    /// counts for each free item.
    fn e_step(&self, items: &[Item]) -> (f64, Vec<Counts>) {
        let grid = self.grid;
        let nq = grid.len();
        let tables: Vec<Vec<[f64; GRADED_CATEGORIES]>> = items
            .iter()
            .map(|item| {
                grid.nodes()
                    .iter()
                    .map(|&theta| {
                        let mut row = [0.0; GRADED_CATEGORIES];
                        for (c, slot) in row.iter_mut().enumerate().take(n_categories(item.kind())) {
                            *slot = item.log_prob_unchecked(response_of(item.kind(), c), theta);
                        }
                        row
                    })
                    .collect()
            })
            .collect();

        let posteriors: Vec<(f64, Vec<f64>)> = (0..self.n_respondents())
            .into_par_iter()
            .map(|i| {
                let mut lp: Vec<f64> = self.base[i * nq..(i + 1) * nq]
                    .iter()
                    .zip(grid.log_weights())
                    .map(|(b, w)| b + w)
                    .collect();
                for (j, item) in items.iter().enumerate() {
                    if let Some(r) = self.columns[j][i] {
                        let c = category_index(item.kind(), r);
                        for (v, t) in lp.iter_mut().zip(&tables[j]) {
                            *v += t[c];
                        }
                    }
                }
                let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = lp.iter().map(|v| (v - max).exp()).sum();
                let log_marginal = max + sum.ln();
                for v in lp.iter_mut() {
                    *v = (*v - log_marginal).exp();
                }
                (log_marginal, lp)
            })
            .collect();

        // ordered reduction keeps results independent of thread count
        let mut counts: Vec<Counts> = vec![vec![[0.0; GRADED_CATEGORIES]; nq]; items.len()];
        let mut total = 0.0;
        for (i, (ll, post)) in posteriors.iter().enumerate() {
            total += ll;
            for (j, item) in items.iter().enumerate() {
                if let Some(r) = self.columns[j][i] {
                    let c = category_index(item.kind(), r);
                    for (slot, w) in counts[j].iter_mut().zip(post) {
                        slot[c] += w;
                    }
                }
            }
        }
        (total, counts)
    }
}

fn max_param_change(old: &Item, new: &Item) -> f64 {
    match (old, new) {
        (Item::Dichotomous(o), Item::Dichotomous(n)) => (o.a - n.a).abs().max((o.b - n.b).abs()),
        (Item::Graded(o), Item::Graded(n)) => o
            .thresholds
            .iter()
            .zip(&n.thresholds)
            .map(|(x, y)| (x - y).abs())
            .fold((o.a - n.a).abs(), f64::max),
        _ => f64::INFINITY,
    }
}

/// Expected complete-data log-likelihood of one item.
fn expected_ll(item: &Item, counts: &Counts, grid: &QuadratureGrid) -> f64 {
    let kind = item.kind();
    grid.nodes()
        .iter()
        .zip(counts)
        .map(|(&theta, row)| {
            (0..n_categories(kind))
                .filter(|&c| row[c] > 0.0)
                .map(|c| row[c] * item.log_prob_unchecked(response_of(kind, c), theta))
                .sum::<f64>()
        })
        .sum()
}

fn m_step(item: &Item, counts: &Counts, grid: &QuadratureGrid) -> Item {
    match item {
        Item::Dichotomous(d) => Item::Dichotomous(m_step_binary(d, counts, grid)),
        Item::Graded(g) => Item::Graded(m_step_graded(g, counts, grid)),
    }
}

fn binary_from_slope_intercept(id: &str, a: f64, d: f64) -> Option<DichotomousItem> {
    if a.is_nan() || a <= 0.0 || !d.is_finite() {
        return None;
    }
    let a = a.clamp(MIN_DISCRIMINATION, MAX_DISCRIMINATION);
    let b = (-d / a).clamp(-MAX_LOCATION, MAX_LOCATION);
    Some(DichotomousItem::new(id, a, b))
}

fn m_step_binary(item: &DichotomousItem, counts: &Counts, grid: &QuadratureGrid) -> DichotomousItem {
    let mut current = item.clone();
    let mut q_current = expected_ll(&Item::Dichotomous(current.clone()), counts, grid);
    for _ in 0..MAX_NEWTON_STEPS {
        let (a, d) = (current.a, -current.a * current.b);
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&theta, row) in grid.nodes().iter().zip(counts) {
            let n = row[0] + row[1];
            if n <= 0.0 {
                continue;
            }
            let p = crate::irt::logistic(a * theta + d);
            let resid = row[1] - n * p;
            let w = n * p * (1.0 - p);
            g0 += resid * theta;
            g1 += resid;
            h00 += w * theta * theta;
            h01 += w * theta;
            h11 += w;
        }
        let det = h00 * h11 - h01 * h01;
        if det.is_nan() || det <= 0.0 {
            break;
        }
        let da = (h11 * g0 - h01 * g1) / det;
        let dd = (h00 * g1 - h01 * g0) / det;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            if let Some(cand) = binary_from_slope_intercept(&current.id, a + step * da, d + step * dd) {
                let q = expected_ll(&Item::Dichotomous(cand.clone()), counts, grid);
                if q >= q_current {
                    accepted = Some((cand, q));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, q)) = accepted else { break };
        let moved = (cand.a - current.a).abs().max((cand.b - current.b).abs());
        current = cand;
        q_current = q;
        if moved < 1e-10 {
            break;
        }
    }
    current
}

type Vec5 = SVector<f64, 5>;
type Mat5 = SMatrix<f64, 5, 5>;

fn graded_from_slope_intercepts(id: &str, params: &Vec5) -> Option<GradedItem> {
    let a = params[0];
    if a.is_nan() || a <= 0.0 || params.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let a = a.clamp(MIN_DISCRIMINATION, MAX_DISCRIMINATION);
    let mut t = [0.0; GRADED_CATEGORIES - 1];
    for (k, slot) in t.iter_mut().enumerate() {
        *slot = (-params[k + 1] / a).clamp(-MAX_LOCATION, MAX_LOCATION);
    }
    if t.windows(2).any(|w| w[0] >= w[1]) {
        return None;
    }
    Some(GradedItem::new(id, a, t))
}

fn m_step_graded(item: &GradedItem, counts: &Counts, grid: &QuadratureGrid) -> GradedItem {
    let mut current = item.clone();
    let mut q_current = expected_ll(&Item::Graded(current.clone()), counts, grid);
    for _ in 0..MAX_NEWTON_STEPS {
        let a = current.a;
        let mut params = Vec5::zeros();
        params[0] = a;
        for k in 0..4 {
            params[k + 1] = -a * current.thresholds[k];
        }
        let mut grad = Vec5::zeros();
        let mut info = Mat5::zeros();
        for (&theta, row) in grid.nodes().iter().zip(counts) {
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                continue;
            }
            // boundary curves, padded with the constant outer boundaries
            let mut cum = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            let mut w = [0.0; 6];
            for k in 0..4 {
                let c = crate::irt::logistic(params[0] * theta + params[k + 1]);
                cum[k + 1] = c;
                w[k + 1] = c * (1.0 - c);
            }
            for c in 0..GRADED_CATEGORIES {
                let p = (cum[c] - cum[c + 1]).max(crate::irt::PROB_FLOOR);
                let mut dp = Vec5::zeros();
                dp[0] = theta * (w[c] - w[c + 1]);
                if c >= 1 {
                    dp[c] = w[c];
                }
                if c < 4 {
                    dp[c + 1] = -w[c + 1];
                }
                grad += dp * (row[c] / p);
                info += dp * dp.transpose() * (total / p);
            }
        }
        let Some(chol) = info.cholesky() else { break };
        let delta = chol.solve(&grad);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            if let Some(cand) = graded_from_slope_intercepts(&current.id, &(params + delta * step)) {
                let q = expected_ll(&Item::Graded(cand.clone()), counts, grid);
                if q >= q_current {
                    accepted = Some((cand, q));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, q)) = accepted else { break };
        let moved = max_param_change(&Item::Graded(current.clone()), &Item::Graded(cand.clone()));
        current = cand;
        q_current = q;
        if moved < 1e-10 {
            break;
        }
    }
    current
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Starting values from classical proportions: `a = 1` and locations from the
/// logit of the observed proportion, rescaled by the logistic–normal
/// approximation `sqrt(1 + π/8)`.
fn initial_items(ids: &[String], kinds: &[ItemKind], columns: &[Vec<Option<u8>>], seed: u64) -> Result<Vec<Item>> {
    let scale = (1.0 + std::f64::consts::PI / 8.0).sqrt();
    ids.iter()
        .zip(kinds)
        .zip(columns)
        .enumerate()
        .map(|(j, ((id, kind), col))| {
            let observed: Vec<u8> = col.iter().flatten().copied().collect();
            let first = observed.first().copied();
            if first.is_none() || observed.iter().all(|&v| Some(v) == first) {
                return Err(Error::InsufficientVariation(id.clone()));
            }
            let n = observed.len() as f64;
            match kind {
                ItemKind::Binary => {
                    let p = (observed.iter().filter(|&&v| v == 1).count() as f64 / n).clamp(0.01, 0.99);
                    let b = (-logit(p) * scale).clamp(-MAX_LOCATION, MAX_LOCATION);
                    Ok(Item::Dichotomous(DichotomousItem::new(id.clone(), 1.0, b)))
                }
                ItemKind::Graded => {
                    let mut t = [0.0; GRADED_CATEGORIES - 1];
                    for (k, slot) in t.iter_mut().enumerate() {
                        let at_least = observed.iter().filter(|&&v| v as usize >= k + 2).count() as f64;
                        let p = (at_least / n).clamp(0.005, 0.995);
                        *slot = (-logit(p) * scale).clamp(-5.5, 5.5);
                    }
                    if t.windows(2).any(|w| w[1] - w[0] < 1e-3) {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                        for k in 1..t.len() {
                            if t[k] - t[k - 1] < 1e-3 {
                                t[k] = t[k - 1] + 0.05 + rng.random_range(0.0..0.05);
                            }
                        }
                    }
                    Ok(Item::Graded(GradedItem::new(id.clone(), 1.0, t)))
                }
            }
        })
        .collect()
}
