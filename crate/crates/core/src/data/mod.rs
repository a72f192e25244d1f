//! Response tables, preprocessing, partitioning, synthetic cohorts and file I/O.

pub mod io;
mod matrix;
mod partition;
mod survey;
mod synthetic;

pub use matrix::ResponseMatrix;
pub use partition::{partition, partition_three, Split};
pub use survey::{preprocess_ratings, RawSurvey, BINARY_CUTOFF, RAW_MAX};
pub use synthetic::{
    default_channels, fixture_bank, generate_synthetic, plant_duplicate, standardize, synthetic_id, SyntheticCohort,
    FIXTURE_ITEMS, FIXTURE_VERSION,
};
