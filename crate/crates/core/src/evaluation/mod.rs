//! Per-step CAT metrics, information equivalence, test comparisons and
//! plot-ready exports.

mod metrics;
mod panels;
mod stats;

pub use metrics::{
    bank_information_equivalence, information_equivalence, information_ratio, integrate_information, quartile_groups,
    step_metrics, StepMetrics, StepRow, TestRun, EQUIVALENCE_LOWER, EQUIVALENCE_STEP, EQUIVALENCE_UPPER,
};
pub use panels::{information_thetas, write_panels, DataSource, PanelInputs};
pub use stats::{compare_tests, mean, pearson, ComparisonReport, PostHoc, MIN_COMPARISON_RESPONDENTS};
