//! Adaptive-testing simulation by replaying pre-collected responses.
//!
//! Rating-scale (binary) items are administered one at a time by maximum
//! Fisher information at the current EAP estimate. In augmented mode every
//! LLM (graded) item is scored up front, so step 0 already carries their
//! evidence.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::estimation::{accumulate, posterior_moments, QuadratureGrid};
use crate::irt::{ItemBank, ItemKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatMode {
    Baseline,
    Augmented,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatConfig {
    bank: ItemBank,
    grid: QuadratureGrid,
    mode: CatMode,
    rating: Vec<usize>,
    llm: Vec<usize>,
}

impl CatConfig {
    pub fn new(bank: ItemBank, grid: QuadratureGrid, mode: CatMode) -> Result<Self> {
        let rating: Vec<usize> = bank.items_of_kind(ItemKind::Binary).map(|(i, _)| i).collect();
        let llm: Vec<usize> = bank.items_of_kind(ItemKind::Graded).map(|(i, _)| i).collect();
        if rating.is_empty() {
            return Err(Error::InvalidCatConfig("bank has no rating-scale items".into()));
        }
        match mode {
            CatMode::Augmented if llm.is_empty() => {
                return Err(Error::InvalidCatConfig(
                    "augmented mode needs at least one LLM item".into(),
                ))
            }
            CatMode::Baseline if !llm.is_empty() => {
                return Err(Error::InvalidCatConfig("baseline mode bank contains LLM items".into()))
            }
            _ => {}
        }
        Ok(Self {
            bank,
            grid,
            mode,
            rating,
            llm,
        })
    }

    pub fn bank(&self) -> &ItemBank {
        &self.bank
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn mode(&self) -> CatMode {
        self.mode
    }

    /// Number of adaptive steps after step 0.
    pub fn n_steps(&self) -> usize {
        self.rating.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatStep {
    pub step: usize,
    /// Rating-scale item administered at this step; `None` at step 0.
    pub item: Option<String>,
    pub theta: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatTrace {
    pub respondent_id: String,
    pub steps: Vec<CatStep>,
}

impl CatTrace {
    pub fn final_step(&self) -> &CatStep {
        self.steps.last().expect("trace has a step 0")
    }
}

/// Index of the unadministered rating-scale item with the largest
/// information at `theta`; the lowest index wins ties.
pub fn mfi_select(bank: &ItemBank, administered: &[usize], theta: f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, item) in bank.items_of_kind(ItemKind::Binary) {
        if administered.contains(&i) {
            continue;
        }
        let info = item.information(theta);
        if best.is_none_or(|(_, b)| info > b) {
            best = Some((i, info));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::BankExhausted)
}

/// Replays one respondent's responses (aligned with the bank) adaptively.
pub fn simulate_respondent(config: &CatConfig, respondent_id: &str, responses: &[Option<u8>]) -> Result<CatTrace> {
    let bank = &config.bank;
    if responses.len() != bank.len() {
        return Err(Error::PatternLength {
            expected: bank.len(),
            got: responses.len(),
        });
    }
    let mut log_post = config.grid.log_weights().to_vec();
    if config.mode == CatMode::Augmented {
        for &j in &config.llm {
            if let Some(r) = responses[j] {
                let item = &bank.items()[j];
                if !item.kind().accepts(r) {
                    return Err(Error::OutOfRangeResponse {
                        item: item.id().to_string(),
                        value: r,
                    });
                }
                accumulate(&mut log_post, item, r, &config.grid);
            }
        }
    }
    let start = posterior_moments(&log_post, &config.grid);
    let mut steps = Vec::with_capacity(config.rating.len() + 1);
    steps.push(CatStep {
        step: 0,
        item: None,
        theta: start.theta,
        se: start.se,
    });
    let mut administered = Vec::with_capacity(config.rating.len());
    let mut theta = start.theta;
    for step in 1..=config.rating.len() {
        let j = mfi_select(bank, &administered, theta)?;
        let item = &bank.items()[j];
        let r = responses[j].ok_or_else(|| Error::IncompleteResponses {
            respondent: respondent_id.to_string(),
            item: item.id().to_string(),
        })?;
        if !item.kind().accepts(r) {
            return Err(Error::OutOfRangeResponse {
                item: item.id().to_string(),
                value: r,
            });
        }
        accumulate(&mut log_post, item, r, &config.grid);
        administered.push(j);
        let est = posterior_moments(&log_post, &config.grid);
        theta = est.theta;
        steps.push(CatStep {
            step,
            item: Some(item.id().to_string()),
            theta: est.theta,
            se: est.se,
        });
    }
    Ok(CatTrace {
        respondent_id: respondent_id.to_string(),
        steps,
    })
}

/// One trace per matrix row, in row order.
pub fn simulate_batch(config: &CatConfig, matrix: &ResponseMatrix) -> Result<Vec<CatTrace>> {
    let aligned = matrix.aligned_to(&config.bank)?;
    (0..aligned.n_respondents())
        .into_par_iter()
        .map(|i| simulate_respondent(config, &aligned.respondent_ids()[i], aligned.row(i)))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    respondent_id: String,
    step: usize,
    item_id: String,
    theta_hat: f64,
    se: f64,
}

pub fn write_traces_csv(path: &Path, traces: &[CatTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for t in traces {
        for s in &t.steps {
            w.serialize(TraceRow {
                respondent_id: t.respondent_id.clone(),
                step: s.step,
                item_id: s.item.clone().unwrap_or_default(),
                theta_hat: s.theta,
                se: s.se,
            })
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_traces_csv(path: &Path) -> Result<Vec<CatTrace>> {
    let label = path.display().to_string();
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut traces: Vec<CatTrace> = Vec::new();
    for row in reader.deserialize::<TraceRow>() {
        let row = row.map_err(|e| Error::Parse {
            path: label.clone(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            column: 0,
            message: e.to_string(),
        })?;
        let step = CatStep {
            step: row.step,
            item: (!row.item_id.is_empty()).then_some(row.item_id),
            theta: row.theta_hat,
            se: row.se,
        };
        match traces.last_mut() {
            Some(t) if t.respondent_id == row.respondent_id && row.step == t.steps.len() => t.steps.push(step),
            _ if row.step == 0 => traces.push(CatTrace {
                respondent_id: row.respondent_id,
                steps: vec![step],
            }),
            _ => {
                return Err(Error::Schema {
                    path: label,
                    message: format!("non-contiguous steps for respondent `{}`", row.respondent_id),
                })
            }
        }
    }
    Ok(traces)
}
