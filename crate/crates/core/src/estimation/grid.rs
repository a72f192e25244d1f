use crate::error::{Error, Result};

/// Equally spaced θ nodes carrying normalized standard-normal prior mass.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

pub const DEFAULT_NODES: usize = 61;
pub const DEFAULT_BOUND: f64 = 6.0;

impl QuadratureGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_abs_node(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Prior mean and standard deviation under the discretized prior.
    pub fn prior_moments(&self) -> (f64, f64) {
        let mean: f64 = self.nodes.iter().zip(&self.weights).map(|(x, w)| x * w).sum();
        let var: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - mean) * (x - mean))
            .sum();
        (mean, var.sqrt())
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        build_grid(DEFAULT_NODES, -DEFAULT_BOUND, DEFAULT_BOUND).expect("default grid is valid")
    }
}

/// Equally spaced grid on `[lower, upper]` with weights proportional to the
/// standard-normal density, normalized to sum to one.
pub fn build_grid(n_nodes: usize, lower: f64, upper: f64) -> Result<QuadratureGrid> {
    if n_nodes < 11 {
        return Err(Error::InvalidBounds(format!("need at least 11 nodes, got {n_nodes}")));
    }
    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
        return Err(Error::InvalidBounds(format!("[{lower}, {upper}]")));
    }
    let step = (upper - lower) / (n_nodes - 1) as f64;
    let nodes: Vec<f64> = (0..n_nodes).map(|i| lower + step * i as f64).collect();
    let log_density: Vec<f64> = nodes.iter().map(|x| -0.5 * x * x).collect();
    let max = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_density.iter().map(|l| (l - max).exp()).sum();
    let log_norm = max + total.ln();
    let log_weights: Vec<f64> = log_density.iter().map(|l| l - log_norm).collect();
    let weights = log_weights.iter().map(|l| l.exp()).collect();
    Ok(QuadratureGrid {
        nodes,
        weights,
        log_weights,
    })
}
