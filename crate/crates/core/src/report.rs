use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Measured ratios over a parameter grid with a fitted slope and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    /// Label of the swept parameter.
    pub parameter: String,
    pub grid: Vec<f64>,
    /// Extra coordinates per grid point, e.g. `(eps, T)` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coordinates: Vec<Vec<f64>>,
    pub ratios: Vec<f64>,
    pub slope: Option<f64>,
    pub expected_slope: Option<f64>,
    /// Whether the weight sits inside the window where a uniform bound is expected.
    pub in_window: bool,
    pub verdict: bool,
}

impl EstimateReport {
    pub fn new(name: &str, parameter: &str, grid: Vec<f64>, ratios: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            parameter: parameter.to_string(),
            grid,
            coordinates: Vec::new(),
            ratios,
            slope: None,
            expected_slope: None,
            in_window: true,
            verdict: false,
        }
    }

    /// `max / min` of the ratios; infinite if any is zero or non-finite.
    pub fn spread(&self) -> f64 {
        let max = self.ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) || !max.is_finite() {
            return f64::INFINITY;
        }
        max / min
    }
}

/// Convergence history of a Picard iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub iterations: usize,
    /// Weighted norm of each update.
    pub updates: Vec<f64>,
    /// Largest ratio of successive updates.
    pub contraction: f64,
    /// Final damping factor.
    pub damping: f64,
    /// Sup of the pointwise system residual at the fixed point.
    pub residual: f64,
}
