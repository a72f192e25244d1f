//! Item calibration and trait estimation.

mod eap;
mod em;
mod grid;

pub use eap::{accumulate, eap, posterior_moments, TraitEstimate};
pub use em::{
    fit_2pl_mml, fit_fixed_anchor, FitConfig, FitResult, MAX_DISCRIMINATION, MAX_LOCATION, MIN_DISCRIMINATION,
};
pub use grid::{build_grid, QuadratureGrid, DEFAULT_BOUND, DEFAULT_NODES};

use rayon::prelude::*;

use crate::data::ResponseMatrix;
use crate::error::Result;
use crate::irt::ItemBank;

/// EAP estimates for every respondent of `matrix` under `bank`.
pub fn eap_all(matrix: &ResponseMatrix, bank: &ItemBank, grid: &QuadratureGrid) -> Result<Vec<TraitEstimate>> {
    let aligned = matrix.aligned_to(bank)?;
    (0..aligned.n_respondents())
        .into_par_iter()
        .map(|i| eap(aligned.row(i), bank.items(), grid))
        .collect()
}
