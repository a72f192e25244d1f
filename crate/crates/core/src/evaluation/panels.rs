//! Plot-ready CSV tables, one per figure panel.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{quartile_groups, step_metrics, StepMetrics, TestRun};
use crate::error::{Error, Result};
use crate::irt::{InformationFunction, Item, ItemBank, ItemKind, MeanInformation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Real,
}

impl DataSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DataSource::Synthetic => "synthetic",
            DataSource::Real => "real",
        }
    }
}

/// θ points for the information panels.
pub fn information_thetas() -> Vec<f64> {
    (0..=80).map(|i| -4.0 + i as f64 * 0.1).collect()
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_step_panel(
    path: &Path,
    metrics: &StepMetrics,
    columns: &[&str],
    values: impl Fn(&super::metrics::StepRow) -> Vec<String>,
) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["test_name", "step"];
    header.extend_from_slice(columns);
    w.write_record(&header).map_err(csv_err)?;
    for row in &metrics.rows {
        let mut rec = vec![row.test.clone(), row.step.to_string()];
        rec.extend(values(row));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_curve_panel<'a>(
    path: &Path,
    column: &str,
    curves: impl IntoIterator<Item = (&'a str, &'a dyn InformationFunction)>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["test_name", "theta", column]).map_err(csv_err)?;
    for (name, f) in curves {
        for theta in information_thetas() {
            w.write_record([name, &format!("{theta:.1}"), &f.information(theta).to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to emit one data source's panels.
pub struct PanelInputs<'a> {
    pub source: DataSource,
    pub tests: &'a [TestRun],
    /// Name of the rating-scale-only test; divergence is measured against
    /// its final estimates.
    pub reference: &'a str,
    pub banks: &'a [(String, ItemBank)],
    pub true_thetas: Option<&'a [f64]>,
    pub external: Option<&'a [f64]>,
}

/// Writes panels A–F (plus the subgroup and divergence tables for synthetic
/// data) into `dir` and returns the written paths in order.
pub fn write_panels(dir: &Path, inputs: &PanelInputs<'_>) -> Result<Vec<PathBuf>> {
    let source = inputs.source;
    if source == DataSource::Synthetic && inputs.true_thetas.is_none() {
        return Err(Error::InvalidArgument("synthetic panels need true thetas".into()));
    }
    let metrics = step_metrics(inputs.tests, inputs.reference, inputs.true_thetas, inputs.external)?;
    let prefix = source.as_str();
    let mut written = Vec::new();
    let mut path = |name: &str| {
        let p = dir.join(format!("{prefix}_{name}.csv"));
        written.push(p.clone());
        p
    };

    write_step_panel(&path("panel_A_mean_theta"), &metrics, &["mean_theta"], |r| {
        vec![r.mean_theta.to_string()]
    })?;
    write_step_panel(&path("panel_B_mean_se"), &metrics, &["mean_se"], |r| {
        vec![r.mean_se.to_string()]
    })?;
    match source {
        DataSource::Synthetic => {
            write_step_panel(&path("panel_C_accuracy"), &metrics, &["mae", "correlation"], |r| {
                vec![opt(r.mae), opt(r.correlation)]
            })?;
            write_step_panel(&path("panel_D_bias"), &metrics, &["bias"], |r| vec![opt(r.bias)])?;
        }
        DataSource::Real => {
            write_step_panel(&path("panel_C_divergence"), &metrics, &["divergence"], |r| {
                vec![r.divergence.to_string()]
            })?;
            write_step_panel(&path("panel_D_r_squared"), &metrics, &["r_squared"], |r| {
                vec![opt(r.r_squared)]
            })?;
        }
    }

    let split: Vec<(&str, Vec<Item>, Vec<Item>)> = inputs
        .banks
        .iter()
        .map(|(name, bank)| {
            let (llm, rating): (Vec<Item>, Vec<Item>) =
                bank.items().iter().cloned().partition(|i| i.kind() == ItemKind::Graded);
            (name.as_str(), llm, rating)
        })
        .collect();
    write_curve_panel(
        &path("panel_E_test_information"),
        "information",
        inputs
            .banks
            .iter()
            .map(|(n, b)| (n.as_str(), b as &dyn InformationFunction)),
    )?;
    let average = split
        .iter()
        .find(|(_, llm, _)| llm.is_empty())
        .or(split.first())
        .map(|(_, _, rating)| MeanInformation(rating));
    let mut curves: Vec<(&str, &dyn InformationFunction)> = split
        .iter()
        .filter(|(_, llm, _)| !llm.is_empty())
        .map(|(n, llm, _)| (*n, llm as &dyn InformationFunction))
        .collect();
    if let Some(avg) = average.as_ref() {
        curves.push(("average_rating_item", avg as &dyn InformationFunction));
    }
    write_curve_panel(&path("panel_F_llm_information"), "information", curves)?;

    if let (DataSource::Synthetic, Some(truth)) = (source, inputs.true_thetas) {
        write_step_panel(&path("si2_divergence"), &metrics, &["divergence"], |r| {
            vec![r.divergence.to_string()]
        })?;
        let p = path("si3_subgroups");
        let mut w = writer(&p)?;
        w.write_record(["test_name", "quartile", "step", "mae", "bias"])
            .map_err(csv_err)?;
        for (q, group) in quartile_groups(truth).iter().enumerate() {
            let runs: Vec<TestRun> = inputs.tests.iter().map(|t| t.subset(group)).collect();
            let sub_truth: Vec<f64> = group.iter().map(|&i| truth[i]).collect();
            let m = step_metrics(&runs, inputs.reference, Some(&sub_truth), None)?;
            for r in &m.rows {
                w.write_record([
                    r.test.clone(),
                    format!("Q{}", q + 1),
                    r.step.to_string(),
                    opt(r.mae),
                    opt(r.bias),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }
    Ok(written)
}
