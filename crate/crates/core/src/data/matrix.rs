use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::irt::{ItemBank, ItemKind};

/// Respondents × items table of binary or ordinal responses, stored
/// row-major. `None` marks a missing response.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    respondent_ids: Vec<String>,
    item_ids: Vec<String>,
    kinds: Vec<ItemKind>,
    cells: Vec<Option<u8>>,
}

impl ResponseMatrix {
    pub fn new(respondent_ids: Vec<String>, columns: Vec<(String, ItemKind)>, cells: Vec<Option<u8>>) -> Result<Self> {
        let (item_ids, kinds): (Vec<_>, Vec<_>) = columns.into_iter().unzip();
        if cells.len() != respondent_ids.len() * item_ids.len() {
            return Err(Error::InvalidArgument(format!(
                "{} cells for a {}×{} matrix",
                cells.len(),
                respondent_ids.len(),
                item_ids.len()
            )));
        }
        check_unique(&respondent_ids, "respondent")?;
        check_unique(&item_ids, "item")?;
        let width = item_ids.len();
        for (idx, cell) in cells.iter().enumerate() {
            if let Some(v) = *cell {
                let j = idx % width;
                if !kinds[j].accepts(v) {
                    return Err(Error::OutOfRangeResponse {
                        item: item_ids[j].clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            respondent_ids,
            item_ids,
            kinds,
            cells,
        })
    }

    pub fn from_rows(
        respondent_ids: Vec<String>,
        columns: Vec<(String, ItemKind)>,
        rows: &[Vec<Option<u8>>],
    ) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::PatternLength {
                expected: columns.len(),
                got: bad.len(),
            });
        }
        Self::new(respondent_ids, columns, rows.concat())
    }

    pub fn n_respondents(&self) -> usize {
        self.respondent_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn respondent_ids(&self) -> &[String] {
        &self.respondent_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn kinds(&self) -> &[ItemKind] {
        &self.kinds
    }

    pub fn columns(&self) -> Vec<(String, ItemKind)> {
        self.item_ids.iter().cloned().zip(self.kinds.iter().copied()).collect()
    }

    pub fn get(&self, respondent: usize, item: usize) -> Option<u8> {
        self.cells[respondent * self.n_items() + item]
    }

    pub fn row(&self, respondent: usize) -> &[Option<u8>] {
        let w = self.n_items();
        &self.cells[respondent * w..(respondent + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<u8>]> {
        // chunks_exact would panic on width zero
        (0..self.n_respondents()).map(move |i| self.row(i))
    }

    pub fn column(&self, item: usize) -> Vec<Option<u8>> {
        (0..self.n_respondents()).map(|i| self.get(i, item)).collect()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|i| i == id)
    }

    pub fn respondent_index(&self, id: &str) -> Option<usize> {
        self.respondent_ids.iter().position(|i| i == id)
    }

    /// Columns reordered/subset to `ids`.
    pub fn select_items<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let idx = ids
            .iter()
            .map(|id| {
                self.item_index(id.as_ref())
                    .ok_or_else(|| Error::UnknownItem(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::with_capacity(self.n_respondents() * idx.len());
        for row in self.rows() {
            cells.extend(idx.iter().map(|&j| row[j]));
        }
        Self::new(
            self.respondent_ids.clone(),
            idx.iter().map(|&j| (self.item_ids[j].clone(), self.kinds[j])).collect(),
            cells,
        )
    }

    /// Rows reordered/subset to `ids`.
    pub fn select_respondents<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let lookup: HashMap<&str, usize> = self
            .respondent_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut cells = Vec::with_capacity(ids.len() * self.n_items());
        for id in ids {
            let i = *lookup
                .get(id.as_ref())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown respondent `{}`", id.as_ref())))?;
            cells.extend_from_slice(self.row(i));
        }
        Self::new(
            ids.iter().map(|s| s.as_ref().to_string()).collect(),
            self.columns(),
            cells,
        )
    }

    /// Columns of `self` followed by those of `other`; rows are matched by
    /// respondent id and follow `self`'s order.
    pub fn hstack(&self, other: &ResponseMatrix) -> Result<Self> {
        let other = other.select_respondents(&self.respondent_ids)?;
        let mut cells = Vec::with_capacity(self.cells.len() + other.cells.len());
        for i in 0..self.n_respondents() {
            cells.extend_from_slice(self.row(i));
            cells.extend_from_slice(other.row(i));
        }
        let mut columns = self.columns();
        columns.extend(other.columns());
        Self::new(self.respondent_ids.clone(), columns, cells)
    }

    /// Columns ordered to match the bank, with item kinds checked.
    pub fn aligned_to(&self, bank: &ItemBank) -> Result<Self> {
        let ids: Vec<&str> = bank.ids().collect();
        let out = self.select_items(&ids)?;
        for (item, kind) in bank.items().iter().zip(&out.kinds) {
            if item.kind() != *kind {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` is {:?} but the bank item is {:?}",
                    item.id(),
                    kind,
                    item.kind()
                )));
            }
        }
        Ok(out)
    }
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ResponseMatrix {
        ResponseMatrix::from_rows(
            vec!["r1".into(), "r2".into()],
            vec![("x".into(), ItemKind::Binary), ("g".into(), ItemKind::Graded)],
            &[vec![Some(1), Some(5)], vec![None, Some(2)]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_cells() {
        let err = ResponseMatrix::from_rows(
            vec!["r1".into()],
            vec![("x".into(), ItemKind::Binary)],
            &[vec![Some(7)]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutOfRangeResponse { value: 7, .. }));
    }

    #[test]
    fn select_and_stack() {
        let m = small();
        let g = m.select_items(&["g"]).unwrap();
        assert_eq!(g.column(0), vec![Some(5), Some(2)]);
        let flipped = m.select_respondents(&["r2", "r1"]).unwrap();
        assert_eq!(flipped.row(0), &[None, Some(2)]);
        let x = m.select_items(&["x"]).unwrap();
        let stacked = x.hstack(&flipped.select_items(&["g"]).unwrap()).unwrap();
        assert_eq!(stacked, m);
        assert!(m.select_items(&["nope"]).is_err());
    }
}
