//! Response probabilities, likelihoods and Fisher information for binary
//! 2PL items and five-category graded items.
//!
//! Binary items follow `P(x = 1 | θ) = 1 / (1 + exp(-a (θ - b)))`. Graded
//! items use cumulative logistic boundaries `P(x ≥ k+1 | θ) = logistic(a (θ - t_k))`
//! for four ordered thresholds, giving categories scored 1 through 5.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of ordered categories of a graded (LLM-scored) item.
pub const GRADED_CATEGORIES: usize = 5;

/// Logistic outputs are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

#[inline]
fn safe_ln(p: f64) -> f64 {
    p.max(f64::MIN_POSITIVE).ln()
}

/// Response format of an item column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    /// Rating-scale item scored 0/1.
    Binary,
    /// Ordinal item scored 1..=5.
    Graded,
}

impl ItemKind {
    pub fn accepts(self, value: u8) -> bool {
        match self {
            ItemKind::Binary => value <= 1,
            ItemKind::Graded => (1..=GRADED_CATEGORIES as u8).contains(&value),
        }
    }

    pub fn categories(self) -> std::ops::RangeInclusive<u8> {
        match self {
            ItemKind::Binary => 0..=1,
            ItemKind::Graded => 1..=GRADED_CATEGORIES as u8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomousItem {
    pub id: String,
    /// Discrimination.
    pub a: f64,
    /// Difficulty, on the θ scale.
    pub b: f64,
}

impl DichotomousItem {
    pub fn new(id: impl Into<String>, a: f64, b: f64) -> Self {
        Self { id: id.into(), a, b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedItem {
    pub id: String,
    pub a: f64,
    /// Category boundaries; strictly increasing.
    pub thresholds: [f64; GRADED_CATEGORIES - 1],
}

impl GradedItem {
    pub fn new(id: impl Into<String>, a: f64, thresholds: [f64; GRADED_CATEGORIES - 1]) -> Self {
        Self {
            id: id.into(),
            a,
            thresholds,
        }
    }
}

/// Probability of a positive response to a binary item.
pub fn prob_2pl(item: &DichotomousItem, theta: f64) -> f64 {
    logistic(item.a * (theta - item.b))
}

/// Fisher information of a binary item: `a² P (1 - P)`.
pub fn info_2pl(item: &DichotomousItem, theta: f64) -> f64 {
    let p = prob_2pl(item, theta);
    item.a * item.a * p * (1.0 - p)
}

/// Boundary probabilities `P(x ≥ k+1)` for k = 1..=4.
pub fn grm_cumulative(item: &GradedItem, theta: f64) -> [f64; GRADED_CATEGORIES - 1] {
    item.thresholds.map(|t| logistic(item.a * (theta - t)))
}

/// Category probabilities for scores 1..=5 (index 0 holds score 1).
pub fn grm_category_probs(item: &GradedItem, theta: f64) -> [f64; GRADED_CATEGORIES] {
    let cum = grm_cumulative(item, theta);
    let mut probs = [0.0; GRADED_CATEGORIES];
    let mut upper = 1.0;
    for (k, &c) in cum.iter().enumerate() {
        probs[k] = (upper - c).max(0.0);
        upper = c;
    }
    probs[GRADED_CATEGORIES - 1] = upper;
    probs
}

/// Fisher information of a graded item, `Σ_k P_k'(θ)² / P_k(θ)`.
pub fn grm_info(item: &GradedItem, theta: f64) -> f64 {
    let cum = grm_cumulative(item, theta);
    let probs = grm_category_probs(item, theta);
    // derivative of each boundary curve; the outer boundaries are constant
    let mut slopes = [0.0; GRADED_CATEGORIES + 1];
    for (k, &c) in cum.iter().enumerate() {
        slopes[k + 1] = item.a * c * (1.0 - c);
    }
    probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let dp = slopes[k] - slopes[k + 1];
            if p > 0.0 {
                dp * dp / p.max(PROB_FLOOR)
            } else {
                0.0
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Dichotomous(DichotomousItem),
    Graded(GradedItem),
}

impl From<DichotomousItem> for Item {
    fn from(item: DichotomousItem) -> Self {
        Item::Dichotomous(item)
    }
}

impl From<GradedItem> for Item {
    fn from(item: GradedItem) -> Self {
        Item::Graded(item)
    }
}

impl Item {
    pub fn id(&self) -> &str {
        match self {
            Item::Dichotomous(i) => &i.id,
            Item::Graded(i) => &i.id,
        }
    }

    pub fn kind(&self) -> ItemKind {
        match self {
            Item::Dichotomous(_) => ItemKind::Binary,
            Item::Graded(_) => ItemKind::Graded,
        }
    }

    pub fn discrimination(&self) -> f64 {
        match self {
            Item::Dichotomous(i) => i.a,
            Item::Graded(i) => i.a,
        }
    }

    pub fn information(&self, theta: f64) -> f64 {
        match self {
            Item::Dichotomous(i) => info_2pl(i, theta),
            Item::Graded(i) => grm_info(i, theta),
        }
    }

    /// Probability of observing `response`, or an error if it lies outside the
    /// item's category range.
    pub fn response_prob(&self, response: u8, theta: f64) -> Result<f64> {
        if !self.kind().accepts(response) {
            return Err(Error::OutOfRangeResponse {
                item: self.id().to_string(),
                value: response,
            });
        }
        Ok(self.response_prob_unchecked(response, theta))
    }

    #[inline]
    pub(crate) fn response_prob_unchecked(&self, response: u8, theta: f64) -> f64 {
        match self {
            Item::Dichotomous(i) => {
                let p = prob_2pl(i, theta);
                if response == 1 {
                    p
                } else {
                    1.0 - p
                }
            }
            Item::Graded(i) => grm_category_probs(i, theta)[response as usize - 1],
        }
    }

    #[inline]
    pub(crate) fn log_prob_unchecked(&self, response: u8, theta: f64) -> f64 {
        safe_ln(self.response_prob_unchecked(response, theta))
    }

    /// Model-implied mean score at `theta`.
    pub fn expected_score(&self, theta: f64) -> f64 {
        match self {
            Item::Dichotomous(i) => prob_2pl(i, theta),
            Item::Graded(i) => grm_category_probs(i, theta)
                .iter()
                .enumerate()
                .map(|(k, p)| (k + 1) as f64 * p)
                .sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.id();
        if id.is_empty() {
            return Err(Error::invalid_item(id, "empty identifier"));
        }
        let a = self.discrimination();
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid_item(id, format!("discrimination {a} must be positive")));
        }
        match self {
            Item::Dichotomous(i) if !i.b.is_finite() => Err(Error::invalid_item(id, "difficulty must be finite")),
            Item::Graded(i) => {
                if i.thresholds.iter().any(|t| !t.is_finite()) {
                    return Err(Error::invalid_item(id, "thresholds must be finite"));
                }
                if i.thresholds.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid_item(id, "thresholds must be strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Ordered collection of items with per-item calibration freeze flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemBank {
    items: Vec<Item>,
    frozen: Vec<bool>,
}

impl ItemBank {
    pub fn new(items: Vec<Item>, frozen: Vec<bool>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidBank("bank is empty".into()));
        }
        if items.len() != frozen.len() {
            return Err(Error::InvalidBank(format!(
                "{} items but {} freeze flags",
                items.len(),
                frozen.len()
            )));
        }
        let mut seen = HashSet::new();
        for item in &items {
            item.validate()?;
            if !seen.insert(item.id()) {
                return Err(Error::InvalidBank(format!("duplicate item id `{}`", item.id())));
            }
        }
        Ok(Self { items, frozen })
    }

    /// A bank with every item free.
    pub fn free(items: Vec<Item>) -> Result<Self> {
        let n = items.len();
        Self::new(items, vec![false; n])
    }

    /// A bank with every item frozen.
    pub fn frozen(items: Vec<Item>) -> Result<Self> {
        let n = items.len();
        Self::new(items, vec![true; n])
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn frozen_flags(&self) -> &[bool] {
        &self.frozen
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        self.frozen[index]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.id() == id)
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.id() == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(Item::id)
    }

    pub fn information(&self, theta: f64) -> f64 {
        test_information(&self.items, theta)
    }

    /// Same items with every freeze flag set.
    pub fn into_frozen(self) -> Self {
        let n = self.items.len();
        Self {
            items: self.items,
            frozen: vec![true; n],
        }
    }

    /// Items of one response format, in bank order.
    pub fn items_of_kind(&self, kind: ItemKind) -> impl Iterator<Item = (usize, &Item)> {
        self.items.iter().enumerate().filter(move |(_, i)| i.kind() == kind)
    }
}

/// Sum of item informations at `theta`; zero for an empty slice.
pub fn test_information(items: &[Item], theta: f64) -> f64 {
    items.iter().map(|i| i.information(theta)).sum()
}

/// Log-likelihood of a response pattern aligned with `items`. Missing
/// responses (`None`) contribute nothing.
pub fn log_likelihood(responses: &[Option<u8>], items: &[Item], theta: f64) -> Result<f64> {
    if responses.len() != items.len() {
        return Err(Error::PatternLength {
            expected: items.len(),
            got: responses.len(),
        });
    }
    let mut ll = 0.0;
    for (item, response) in items.iter().zip(responses) {
        if let Some(r) = *response {
            ll += item.response_prob(r, theta).map(safe_ln)?;
        }
    }
    Ok(ll)
}

/// Anything with an information function over θ.
pub trait InformationFunction {
    fn information(&self, theta: f64) -> f64;
}

impl InformationFunction for Item {
    fn information(&self, theta: f64) -> f64 {
        Item::information(self, theta)
    }
}

impl<T: InformationFunction + ?Sized> InformationFunction for &T {
    fn information(&self, theta: f64) -> f64 {
        (**self).information(theta)
    }
}

impl InformationFunction for ItemBank {
    fn information(&self, theta: f64) -> f64 {
        ItemBank::information(self, theta)
    }
}

/// A block of items informs additively.
impl<T: InformationFunction> InformationFunction for [T] {
    fn information(&self, theta: f64) -> f64 {
        self.iter().map(|i| i.information(theta)).sum()
    }
}

impl<T: InformationFunction> InformationFunction for Vec<T> {
    fn information(&self, theta: f64) -> f64 {
        self.as_slice().information(theta)
    }
}

/// Per-item mean information of a set of items.
#[derive(Debug, Clone, Copy)]
pub struct MeanInformation<'a>(pub &'a [Item]);

impl InformationFunction for MeanInformation<'_> {
    fn information(&self, theta: f64) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            test_information(self.0, theta) / self.0.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym_graded() -> GradedItem {
        GradedItem::new("g", 1.0, [-1.5, -0.5, 0.5, 1.5])
    }

    #[test]
    fn prob_2pl_examples() {
        assert_eq!(prob_2pl(&DichotomousItem::new("i", 1.0, 0.0), 0.0), 0.5);
        assert_eq!(prob_2pl(&DichotomousItem::new("i", 2.0, 1.0), 1.0), 0.5);
        let p = prob_2pl(&DichotomousItem::new("i", 1.0, 0.0), 3f64.ln());
        assert!((p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn info_2pl_examples() {
        assert_eq!(info_2pl(&DichotomousItem::new("i", 1.0, 0.0), 0.0), 0.25);
        assert_eq!(info_2pl(&DichotomousItem::new("i", 2.0, 0.0), 0.0), 1.0);
        assert!(info_2pl(&DichotomousItem::new("i", 1.0, 0.0), 10.0) < 1e-3);
    }

    #[test]
    fn grm_symmetric_probabilities() {
        // oracle: direct differences of the boundary logistics
        let l = |x: f64| 1.0 / (1.0 + (-x).exp());
        let cum = [1.0, l(1.5), l(0.5), l(-0.5), l(-1.5), 0.0];
        let oracle: Vec<f64> = cum.windows(2).map(|w| w[0] - w[1]).collect();
        let probs = grm_category_probs(&sym_graded(), 0.0);
        for (p, o) in probs.iter().zip(&oracle) {
            assert!((p - o).abs() < 1e-14);
        }
        assert!((probs[0] - probs[4]).abs() < 1e-15);
        let frozen = [0.182, 0.195, 0.245, 0.195, 0.182];
        for (p, f) in probs.iter().zip(frozen) {
            assert!((p - f).abs() < 5e-4, "{p} vs {f}");
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    fn expected_neg_second_derivative(item: &GradedItem, theta: f64, h: f64) -> f64 {
        let probs = grm_category_probs(item, theta);
        (0..GRADED_CATEGORIES)
            .map(|k| {
                let lp = |t: f64| grm_category_probs(item, t)[k].ln();
                let d2 = (lp(theta + h) - 2.0 * lp(theta) + lp(theta - h)) / (h * h);
                -probs[k] * d2
            })
            .sum()
    }

    #[test]
    fn grm_info_matches_finite_difference_oracle() {
        let item = sym_graded();
        let fd = expected_neg_second_derivative(&item, 0.0, 1e-4);
        assert!((grm_info(&item, 0.0) - fd).abs() < 1e-6);
    }

    #[test]
    fn grm_info_flat_and_symmetric() {
        let flat = GradedItem::new("g", 1e-8, [-1.5, -0.5, 0.5, 1.5]);
        assert!(grm_info(&flat, 0.3) < 1e-12);
        let item = sym_graded();
        for t in [0.2, 0.9, 2.5] {
            assert!((grm_info(&item, t) - grm_info(&item, -t)).abs() < 1e-12);
        }
    }

    #[test]
    fn test_information_additivity() {
        let items: Vec<Item> = vec![
            DichotomousItem::new("x", 1.0, 0.0).into(),
            DichotomousItem::new("y", 1.0, 0.0).into(),
        ];
        assert_eq!(test_information(&items, 0.0), 0.5);
        assert_eq!(test_information(&[], 0.0), 0.0);
        assert_eq!(test_information(&items[..1], 0.7), items[0].information(0.7));
    }

    #[test]
    fn log_likelihood_cases() {
        let items: Vec<Item> = vec![DichotomousItem::new("x", 1.3, 0.2).into(), sym_graded().into()];
        assert_eq!(log_likelihood(&[None, None], &items, 0.4).unwrap(), 0.0);
        let single = log_likelihood(&[Some(1)], &items[..1], 0.4).unwrap();
        assert_eq!(single, prob_2pl(&DichotomousItem::new("x", 1.3, 0.2), 0.4).ln());

        let ll = log_likelihood(&[Some(0), Some(4)], &items, -0.3).unwrap();
        let oracle =
            (1.0 - 1.0 / (1.0 + (-1.3f64 * (-0.3 - 0.2)).exp())).ln() + grm_category_probs(&sym_graded(), -0.3)[3].ln();
        assert!((ll - oracle).abs() < 1e-12);

        let err = log_likelihood(&[Some(2), None], &items, 0.0).unwrap_err();
        assert!(matches!(err, Error::OutOfRangeResponse { value: 2, .. }));
        let err = log_likelihood(&[None, Some(0)], &items, 0.0).unwrap_err();
        assert!(matches!(err, Error::OutOfRangeResponse { value: 0, .. }));
    }

    #[test]
    fn bank_validation() {
        let dup = vec![
            Item::from(DichotomousItem::new("x", 1.0, 0.0)),
            Item::from(DichotomousItem::new("x", 1.0, 1.0)),
        ];
        assert!(ItemBank::free(dup).is_err());
        assert!(ItemBank::free(vec![]).is_err());
        let bad = GradedItem::new("g", 1.0, [0.0, 0.0, 1.0, 2.0]);
        assert!(ItemBank::free(vec![bad.into()]).is_err());
        let neg = DichotomousItem::new("n", -1.0, 0.0);
        assert!(ItemBank::free(vec![neg.into()]).is_err());
    }

    fn arb_graded() -> impl Strategy<Value = GradedItem> {
        (0.1f64..4.0, -3.0f64..3.0, prop::array::uniform4(0.05f64..1.5)).prop_map(|(a, start, gaps)| {
            let mut t = [0.0; 4];
            let mut acc = start;
            for (k, g) in gaps.iter().enumerate() {
                t[k] = acc;
                acc += g;
            }
            GradedItem::new("g", a, t)
        })
    }

    proptest! {
        #[test]
        fn prob_2pl_is_monotone(a in 0.05f64..5.0, b in -4.0f64..4.0) {
            let item = DichotomousItem::new("i", a, b);
            let grid: Vec<f64> = (0..81).map(|i| -4.0 + 0.1 * i as f64).collect();
            for w in grid.windows(2) {
                let (lo, hi) = (prob_2pl(&item, w[0]), prob_2pl(&item, w[1]));
                prop_assert!(hi >= lo);
                if lo > PROB_FLOOR && hi < 1.0 - PROB_FLOOR {
                    prop_assert!(hi > lo);
                }
            }
        }

        #[test]
        fn grm_probabilities_are_a_distribution(item in arb_graded(), theta in -5.0f64..5.0) {
            let probs = grm_category_probs(&item, theta);
            prop_assert!(probs.iter().all(|&p| p >= 0.0));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let cum = grm_cumulative(&item, theta);
            prop_assert!(cum.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(grm_info(&item, theta) >= 0.0);
        }

        #[test]
        fn grm_info_is_expected_curvature(item in arb_graded(), theta in -2.5f64..2.5) {
            let fd = expected_neg_second_derivative(&item, theta, 1e-4);
            prop_assert!((grm_info(&item, theta) - fd).abs() < 1e-5, "{} vs {}", grm_info(&item, theta), fd);
        }

        #[test]
        fn log_likelihood_ignores_item_order(
            theta in -3.0f64..3.0,
            responses in prop::collection::vec((0u8..2, 1u8..6), 4),
        ) {
            let items: Vec<Item> = (0..4).flat_map(|i| {
                [
                    Item::from(DichotomousItem::new(format!("d{i}"), 0.5 + 0.3 * i as f64, -1.0 + 0.6 * i as f64)),
                    Item::from(GradedItem::new(format!("g{i}"), 0.8 + 0.2 * i as f64, [-1.2, -0.3, 0.4, 1.3 + i as f64])),
                ]
            }).collect();
            let pattern: Vec<Option<u8>> = responses.iter().flat_map(|&(b, g)| [Some(b), Some(g)]).collect();
            let forward = log_likelihood(&pattern, &items, theta).unwrap();
            let rev_items: Vec<Item> = items.iter().rev().cloned().collect();
            let rev_pattern: Vec<Option<u8>> = pattern.iter().rev().cloned().collect();
            let backward = log_likelihood(&rev_pattern, &rev_items, theta).unwrap();
            prop_assert!((forward - backward).abs() < 1e-10);
            let split = test_information(&items[..3], theta) + test_information(&items[3..], theta);
            prop_assert!((split - test_information(&items, theta)).abs() < 1e-12);
        }
    }
}
