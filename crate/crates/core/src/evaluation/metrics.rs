use serde::{Deserialize, Serialize};

use super::stats::{mean, pearson};
use crate::cat::CatTrace;
use crate::error::{Error, Result};
use crate::irt::{InformationFunction, Item, ItemBank, ItemKind, MeanInformation};

/// Traces of one test over a common respondent set.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub name: String,
    pub traces: Vec<CatTrace>,
}

impl TestRun {
    pub fn new(name: impl Into<String>, traces: Vec<CatTrace>) -> Self {
        Self {
            name: name.into(),
            traces,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self::new(
            self.name.clone(),
            indices.iter().map(|&i| self.traces[i].clone()).collect(),
        )
    }

    /// Per-respondent mean standard error over the adaptive steps (1..).
    pub fn trace_mean_se(&self) -> Vec<f64> {
        self.traces
            .iter()
            .map(|t| mean(&t.steps[1..].iter().map(|s| s.se).collect::<Vec<_>>()))
            .collect()
    }

    /// Per-respondent mean absolute error over the adaptive steps (1..).
    pub fn trace_mean_abs_error(&self, true_thetas: &[f64]) -> Vec<f64> {
        self.traces
            .iter()
            .zip(true_thetas)
            .map(|(t, truth)| mean(&t.steps[1..].iter().map(|s| (s.theta - truth).abs()).collect::<Vec<_>>()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub test: String,
    pub step: usize,
    pub mean_theta: f64,
    pub mean_se: f64,
    pub mae: Option<f64>,
    pub bias: Option<f64>,
    pub correlation: Option<f64>,
    pub r_squared: Option<f64>,
    pub divergence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// Test-major, then step.
    pub rows: Vec<StepRow>,
}

impl StepMetrics {
    pub fn for_test<'a>(&'a self, test: &'a str) -> impl Iterator<Item = &'a StepRow> + 'a {
        self.rows.iter().filter(move |r| r.test == test)
    }

    pub fn get(&self, test: &str, step: usize) -> Option<&StepRow> {
        self.rows.iter().find(|r| r.test == test && r.step == step)
    }
}

/// Correlation that reads a constant vector as uncorrelated.
fn correlation_or_zero(x: &[f64], y: &[f64]) -> f64 {
    let r = pearson(x, y);
    if r.is_nan() {
        0.0
    } else {
        r
    }
}

fn check_runs(tests: &[TestRun]) -> Result<(usize, usize)> {
    let first = tests
        .first()
        .ok_or_else(|| Error::InvalidArgument("no tests to evaluate".into()))?;
    let n = first.traces.len();
    if n == 0 {
        return Err(Error::InvalidArgument(format!("test `{}` has no traces", first.name)));
    }
    let steps = first.traces[0].steps.len();
    for run in tests {
        if run.traces.len() != n {
            return Err(Error::MismatchedRespondents(format!(
                "`{}` has {} traces, `{}` has {n}",
                run.name,
                run.traces.len(),
                first.name
            )));
        }
        for (t, f) in run.traces.iter().zip(&first.traces) {
            if t.respondent_id != f.respondent_id {
                return Err(Error::MismatchedRespondents(format!(
                    "`{}` lists `{}` where `{}` lists `{}`",
                    run.name, t.respondent_id, first.name, f.respondent_id
                )));
            }
            if t.steps.len() != steps {
                return Err(Error::InvalidArgument(format!(
                    "trace for `{}` in `{}` has {} steps, expected {steps}",
                    t.respondent_id,
                    run.name,
                    t.steps.len()
                )));
            }
        }
    }
    Ok((n, steps))
}

/// Per-step means over respondents for every test. Divergence is measured
/// against the final estimates of the `reference` test. `true_thetas` and
/// `external` follow the trace order.
pub fn step_metrics(
    tests: &[TestRun],
    reference: &str,
    true_thetas: Option<&[f64]>,
    external: Option<&[f64]>,
) -> Result<StepMetrics> {
    let (n, steps) = check_runs(tests)?;
    for v in [true_thetas, external].into_iter().flatten() {
        if v.len() != n {
            return Err(Error::MismatchedRespondents(format!(
                "{} reference values for {n} respondents",
                v.len()
            )));
        }
    }
    let reference_final: Vec<f64> = tests
        .iter()
        .find(|t| t.name == reference)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown reference test `{reference}`")))?
        .traces
        .iter()
        .map(|t| t.final_step().theta)
        .collect();

    let mut rows = Vec::with_capacity(tests.len() * steps);
    for run in tests {
        for step in 0..steps {
            let thetas: Vec<f64> = run.traces.iter().map(|t| t.steps[step].theta).collect();
            let ses: Vec<f64> = run.traces.iter().map(|t| t.steps[step].se).collect();
            let errors: Option<Vec<f64>> =
                true_thetas.map(|truth| thetas.iter().zip(truth).map(|(e, t)| e - t).collect());
            rows.push(StepRow {
                test: run.name.clone(),
                step,
                mean_theta: mean(&thetas),
                mean_se: mean(&ses),
                mae: errors
                    .as_ref()
                    .map(|e| mean(&e.iter().map(|x| x.abs()).collect::<Vec<_>>())),
                bias: errors.as_ref().map(|e| mean(e)),
                correlation: true_thetas.map(|truth| correlation_or_zero(&thetas, truth)),
                r_squared: external.map(|ext| correlation_or_zero(&thetas, ext).powi(2)),
                divergence: mean(
                    &thetas
                        .iter()
                        .zip(&reference_final)
                        .map(|(a, b)| (a - b).abs())
                        .collect::<Vec<_>>(),
                ),
            });
        }
    }
    Ok(StepMetrics { rows })
}

/// Respondent indices split into four groups by ascending true θ; ties keep
/// input order. Group sizes differ by at most one.
pub fn quartile_groups(true_thetas: &[f64]) -> [Vec<usize>; 4] {
    let mut order: Vec<usize> = (0..true_thetas.len()).collect();
    order.sort_by(|&a, &b| true_thetas[a].total_cmp(&true_thetas[b]).then(a.cmp(&b)));
    let n = order.len();
    std::array::from_fn(|q| {
        let mut g = order[q * n / 4..(q + 1) * n / 4].to_vec();
        g.sort_unstable();
        g
    })
}

pub const EQUIVALENCE_LOWER: f64 = -2.0;
pub const EQUIVALENCE_UPPER: f64 = 2.0;
pub const EQUIVALENCE_STEP: f64 = 0.01;

/// Trapezoid-rule integral of an information function on a uniform grid.
pub fn integrate_information<F: InformationFunction + ?Sized>(f: &F, lower: f64, upper: f64, step: f64) -> f64 {
    let n = ((upper - lower) / step).round() as usize;
    let h = (upper - lower) / n as f64;
    let mut total = 0.5 * (f.information(lower) + f.information(upper));
    for i in 1..n {
        total += f.information(lower + i as f64 * h);
    }
    total * h
}

/// Integrated information of `numerator` relative to `denominator` over
/// θ ∈ [−2, 2].
pub fn information_ratio<N, D>(numerator: &N, denominator: &D) -> f64
where
    N: InformationFunction + ?Sized,
    D: InformationFunction + ?Sized,
{
    let num = integrate_information(numerator, EQUIVALENCE_LOWER, EQUIVALENCE_UPPER, EQUIVALENCE_STEP);
    if num == 0.0 {
        return 0.0;
    }
    num / integrate_information(denominator, EQUIVALENCE_LOWER, EQUIVALENCE_UPPER, EQUIVALENCE_STEP)
}

/// How many average baseline items the LLM block is worth.
pub fn information_equivalence(llm_items: &[Item], baseline_items: &[Item]) -> f64 {
    information_ratio(llm_items, &MeanInformation(baseline_items))
}

/// Equivalence of an augmented bank: graded items against the mean of its
/// binary items.
pub fn bank_information_equivalence(bank: &ItemBank) -> f64 {
    let (llm, rating): (Vec<Item>, Vec<Item>) =
        bank.items().iter().cloned().partition(|i| i.kind() == ItemKind::Graded);
    information_equivalence(&llm, &rating)
}
