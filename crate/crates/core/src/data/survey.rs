use std::collections::HashSet;

use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::irt::ItemKind;

/// Scale maximum of the raw 0–10 rating items.
pub const RAW_MAX: i64 = 10;
/// Raw ratings at or above this value are coded 1.
pub const BINARY_CUTOFF: i64 = 5;

/// Raw 0–10 rating-scale responses before reverse scoring and dichotomization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSurvey {
    pub respondent_ids: Vec<String>,
    pub item_ids: Vec<String>,
    /// One row per respondent, aligned with `item_ids`.
    pub rows: Vec<Vec<Option<i64>>>,
    pub reverse_keyed: Vec<String>,
    /// External criterion (e.g. a sliding-scale value), used unmodified.
    pub external: Option<Vec<f64>>,
}

/// Reverse-scores the negatively keyed items (`10 - x`) and then codes
/// `x >= 5` as 1 and everything else as 0.
pub fn preprocess_ratings(raw: &RawSurvey) -> Result<ResponseMatrix> {
    let reversed: HashSet<&str> = raw.reverse_keyed.iter().map(String::as_str).collect();
    for id in &reversed {
        if !raw.item_ids.iter().any(|i| i == id) {
            return Err(Error::UnknownItem(id.to_string()));
        }
    }
    let flags: Vec<bool> = raw.item_ids.iter().map(|id| reversed.contains(id.as_str())).collect();
    let mut cells = Vec::with_capacity(raw.rows.len() * raw.item_ids.len());
    for row in &raw.rows {
        if row.len() != raw.item_ids.len() {
            return Err(Error::PatternLength {
                expected: raw.item_ids.len(),
                got: row.len(),
            });
        }
        for ((value, &reverse), id) in row.iter().zip(&flags).zip(&raw.item_ids) {
            cells.push(match *value {
                None => None,
                Some(v) if !(0..=RAW_MAX).contains(&v) => {
                    return Err(Error::OutOfRangeRaw {
                        item: id.clone(),
                        value: v,
                    })
                }
                Some(v) => {
                    let scored = if reverse { RAW_MAX - v } else { v };
                    Some(u8::from(scored >= BINARY_CUTOFF))
                }
            });
        }
    }
    ResponseMatrix::new(
        raw.respondent_ids.clone(),
        raw.item_ids.iter().map(|id| (id.clone(), ItemKind::Binary)).collect(),
        cells,
    )
}
