//! Binned calibration diagnostics.
//!
//! A prediction `m` is calibrated for the functional when, for every bin
//! `[η, η + a)` of prediction values,
//!
//! ```text
//! E 1{m ∈ [η, η + a)} V(η, Y) ≤ 0 ≤ E 1{m ∈ [η, η + a)} V(η + a, Y).
//! ```
//!
//! [`calibration_diagnostic`] checks both one-sided inequalities on sample
//! bins up to `z_threshold` standard errors. [`theorem1_harness`] fits the
//! model at many `η`, reports how much the per-`η` minimisers disagree, and
//! runs the diagnostic at their coordinatewise median.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empirics::{delta_right, predictions, Dataset, FitError, OptimizerConfig};
use crate::functionals::FunctionalSpec;
use crate::models::{ParamVector, PredictionModel};
use crate::pareto::{eta_scan, EtaFit, ParetoError};

/// Minimum average bin occupancy.
pub const MIN_PER_BIN: usize = 5;

pub const DEFAULT_BINS: usize = 10;

pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("{n} predictions cannot fill {bins} bins with at least {MIN_PER_BIN} each; use at most {} bins", n / MIN_PER_BIN)]
    WidthError { n: usize, bins: usize },
    #[error("no predictions")]
    EmptyInput,
    #[error("{predictions} predictions but {observations} observations")]
    LengthMismatch {
        predictions: usize,
        observations: usize,
    },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("bin edges must be finite, strictly increasing and at least two")]
    InvalidEdges,
    #[error("prediction {0} lies outside the explicit bin edges")]
    Uncovered(f64),
    #[error("z threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("no η in the scan produced a fit")]
    NoSuccessfulFit,
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Scan(#[from] ParetoError),
}

/// How predictions are grouped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Bins holding (up to ties) equally many predictions.
    EqualCount(usize),
    /// Bins of equal length between the smallest and largest prediction.
    EqualWidth(usize),
    /// Explicit strictly increasing edges covering every prediction.
    Edges(Vec<f64>),
}

impl Default for Binning {
    fn default() -> Self {
        Binning::EqualCount(DEFAULT_BINS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    /// Members satisfy `lo ≤ m < hi`.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Mean of `V(lo, y_i)` over members; should be `≤ 0`.
    pub mean_v: f64,
    pub se: f64,
    /// Mean of `V(hi, y_i)` over members; should be `≥ 0`.
    pub mean_v_right: f64,
    pub se_right: f64,
    /// Mean of `V(m_i, y_i)` over members divided by its standard error.
    pub standardized_mean: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bins: Vec<BinReport>,
    /// Largest `|standardized_mean|` over non-empty bins.
    pub overall: f64,
    pub pass: bool,
    pub z_threshold: f64,
    /// All predictions coincide; the report has one bin at that value.
    pub degenerate: bool,
    /// Whether the model family admits intercept shifts; `None` when the
    /// diagnostic ran on bare predictions.
    pub applicable: Option<bool>,
}

impl CalibrationReport {
    /// `bin_center,standardized_mean` rows for plotting.
    pub fn plot_rows(&self) -> Vec<(f64, f64)> {
        self.bins
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| (0.5 * (b.lo + b.hi), b.standardized_mean))
            .collect()
    }
}

/// Mean and standard error of the mean (sample standard deviation).
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn standardize(mean: f64, se: f64) -> f64 {
    if se > 0.0 {
        mean / se
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    }
}

fn edges_for(binning: &Binning, sorted: &[f64]) -> Result<Vec<f64>, CalibrationError> {
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let mut edges = match binning {
        Binning::EqualCount(b) | Binning::EqualWidth(b) => {
            let b = *b;
            if b == 0 || n < b * MIN_PER_BIN {
                return Err(CalibrationError::WidthError { n, bins: b });
            }
            let mut e: Vec<f64> = if matches!(binning, Binning::EqualCount(_)) {
                (0..b).map(|k| sorted[k * n / b]).collect()
            } else {
                (0..b)
                    .map(|k| min + (max - min) * k as f64 / b as f64)
                    .collect()
            };
            e.push(max + delta_right(max));
            e
        }
        Binning::Edges(e) => {
            if e.len() < 2 || e.iter().any(|v| !v.is_finite()) || e.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(CalibrationError::InvalidEdges);
            }
            if n < (e.len() - 1) * MIN_PER_BIN {
                return Err(CalibrationError::WidthError {
                    n,
                    bins: e.len() - 1,
                });
            }
            if min < e[0] {
                return Err(CalibrationError::Uncovered(min));
            }
            if max >= e[e.len() - 1] {
                return Err(CalibrationError::Uncovered(max));
            }
            e.clone()
        }
    };
    // Ties in equal-count bins can repeat an edge.
    edges.dedup();
    Ok(edges)
}

/// Runs the two-sided bin check on `(m_i, y_i)` pairs.
pub fn calibration_diagnostic(
    spec: &FunctionalSpec,
    predictions: &[f64],
    y: &[f64],
    binning: &Binning,
    z_threshold: f64,
) -> Result<CalibrationReport, CalibrationError> {
    if predictions.is_empty() {
        return Err(CalibrationError::EmptyInput);
    }
    if predictions.len() != y.len() {
        return Err(CalibrationError::LengthMismatch {
            predictions: predictions.len(),
            observations: y.len(),
        });
    }
    if let Some(i) = (0..y.len()).find(|&i| !predictions[i].is_finite() || !y[i].is_finite()) {
        return Err(CalibrationError::NonFinite(i));
    }
    if !(z_threshold > 0.0) {
        return Err(CalibrationError::InvalidThreshold(z_threshold));
    }

    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| predictions[i]).collect();
    let degenerate = sorted[0] == sorted[sorted.len() - 1];
    let edges = if degenerate {
        vec![sorted[0], sorted[0] + delta_right(sorted[0])]
    } else {
        edges_for(binning, &sorted)?
    };

    let mut bins = Vec::with_capacity(edges.len() - 1);
    let mut next = 0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let start = next;
        while next < sorted.len() && sorted[next] < hi {
            next += 1;
        }
        let members = &order[start..next];
        if members.is_empty() {
            bins.push(BinReport {
                lo,
                hi,
                count: 0,
                mean_v: 0.0,
                se: 0.0,
                mean_v_right: 0.0,
                se_right: 0.0,
                standardized_mean: 0.0,
                pass: true,
            });
            continue;
        }
        let at = |eta: f64| -> Vec<f64> {
            members
                .iter()
                .map(|&i| spec.identification_value(eta, y[i]))
                .collect()
        };
        let (mean_v, se) = mean_se(&at(lo));
        let (mean_v_right, se_right) = mean_se(&at(hi));
        let own: Vec<f64> = members
            .iter()
            .map(|&i| spec.identification_value(predictions[i], y[i]))
            .collect();
        let (own_mean, own_se) = mean_se(&own);
        bins.push(BinReport {
            lo,
            hi,
            count: members.len(),
            mean_v,
            se,
            mean_v_right,
            se_right,
            standardized_mean: standardize(own_mean, own_se),
            pass: mean_v <= z_threshold * se && mean_v_right >= -z_threshold * se_right,
        });
    }
    let overall = bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| b.standardized_mean.abs())
        .fold(0.0, f64::max);
    Ok(CalibrationReport {
        pass: bins.iter().all(|b| b.pass),
        bins,
        overall,
        z_threshold,
        degenerate,
        applicable: None,
    })
}

#[derive(Debug)]
pub struct HarnessReport {
    /// Largest `ℓ∞` distance between per-`η` representatives.
    pub spread: f64,
    pub per_eta: Vec<EtaFit>,
    /// Coordinatewise median of the per-`η` representatives.
    pub consensus: ParamVector,
    pub calibration: CalibrationReport,
    /// Whether the family admits intercept shifts.
    pub applicable: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits at every `η`, measures disagreement, and checks calibration at the
/// consensus parameter.
pub fn theorem1_harness(
    spec: &FunctionalSpec,
    model: &dyn PredictionModel,
    data: &Dataset,
    eta_grid: &[f64],
    opt: &OptimizerConfig,
    binning: &Binning,
    z_threshold: f64,
) -> Result<HarnessReport, CalibrationError> {
    let per_eta = eta_scan(spec, model, data, eta_grid, opt)?;
    let reps: Vec<ParamVector> = per_eta
        .iter()
        .filter_map(|e| e.result.as_ref().ok().map(|r| r.representative()))
        .collect();
    if reps.is_empty() {
        return Err(CalibrationError::NoSuccessfulFit);
    }
    let mut spread: f64 = 0.0;
    for (i, a) in reps.iter().enumerate() {
        for b in &reps[i + 1..] {
            let d =
                a.0.iter()
                    .zip(&b.0)
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max);
            spread = spread.max(d);
        }
    }
    let p = reps[0].len();
    let consensus = ParamVector::new(
        (0..p)
            .map(|k| median(reps.iter().map(|r| r.0[k]).collect()))
            .collect::<Vec<_>>(),
    );
    let preds = predictions(model, &consensus, data)?;
    let mut calibration = calibration_diagnostic(spec, &preds, data.y(), binning, z_threshold)?;
    let applicable = model.supports_shift();
    calibration.applicable = Some(applicable);
    Ok(HarnessReport {
        spread,
        per_eta,
        consensus,
        calibration,
        applicable,
    })
}
