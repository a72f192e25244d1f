//! Adaptive testing with LLM-scored items: IRT models, calibration, trait
//! estimation, diagnostics, candidate-item augmentation, CAT simulation and
//! evaluation.

pub mod augmentation;
pub mod cat;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod irt;
pub mod scoring;

pub use data::{ResponseMatrix, SyntheticCohort};
pub use error::{Error, Result};
pub use estimation::{FitConfig, FitResult, QuadratureGrid, TraitEstimate};
pub use irt::{DichotomousItem, GradedItem, Item, ItemBank, ItemKind};
