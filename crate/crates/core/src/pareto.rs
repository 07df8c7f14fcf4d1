//! Dominance between parameters through their Murphy curves.
//!
//! `β₂` dominates `β₁` when its empirical elementary risk is no larger at
//! every `η`. Every mixture risk is a positive combination of elementary
//! risks, so this is dominance under all consistent losses at once.
//!
//! Curves are piecewise affine between knots, so comparing values at the
//! union of both knot sets together with the right limits there decides the
//! relation exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empirics::Dataset;
use crate::empirics::{
    fit_elementary, murphy_curve, FitError, FitResult, MurphyCurve, OptimizerConfig,
};
use crate::functionals::FunctionalSpec;
use crate::models::{ParamVector, PredictionModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("curves were built from different functionals or observations")]
    FingerprintMismatch,
    #[error("no candidates")]
    NoCandidates,
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("η grid must be non-empty, finite and sorted")]
    InvalidGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    StrictlyDominates,
    StrictlyDominatedBy,
    Equal,
    Incomparable,
}

/// Outcome of comparing curve `A` with curve `B`.
///
/// `margin` is the largest `|A − B|` over the comparison points. The witness
/// is where `B − A` is largest for `StrictlyDominates`, where `A − B` is
/// largest for `StrictlyDominatedBy` and `Incomparable`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub relation: Relation,
    pub witness_eta: Option<f64>,
    pub margin: f64,
}

/// Visits `(η, A(η) − B(η))` at the union of knots and at right limits there.
fn scan_differences(a: &MurphyCurve, b: &MurphyCurve, mut visit: impl FnMut(f64, f64) -> bool) {
    let (ka, kb) = (a.knots(), b.knots());
    let (mut i, mut j) = (0, 0);
    while i < ka.len() || j < kb.len() {
        let eta = match (ka.get(i), kb.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (_, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if !visit(eta, a.evaluate(eta) - b.evaluate(eta)) {
            return;
        }
        if !visit(eta, a.right_limit(eta) - b.right_limit(eta)) {
            return;
        }
    }
}

fn check_pair(a: &MurphyCurve, b: &MurphyCurve, tol: f64) -> Result<(), ParetoError> {
    if a.fingerprint() != b.fingerprint() {
        return Err(ParetoError::FingerprintMismatch);
    }
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(ParetoError::InvalidTolerance(tol));
    }
    Ok(())
}

/// Compares `A` against `B` with slack `tol ≥ 0`.
pub fn dominates(
    a: &MurphyCurve,
    b: &MurphyCurve,
    tol: f64,
) -> Result<DominanceVerdict, ParetoError> {
    check_pair(a, b, tol)?;
    // Largest B − A and largest A − B, with where they occur.
    let (mut b_over, mut b_over_at) = (f64::NEG_INFINITY, f64::NAN);
    let (mut a_over, mut a_over_at) = (f64::NEG_INFINITY, f64::NAN);
    scan_differences(a, b, |eta, d| {
        if -d > b_over {
            (b_over, b_over_at) = (-d, eta);
        }
        if d > a_over {
            (a_over, a_over_at) = (d, eta);
        }
        true
    });
    let a_le_b = a_over <= tol;
    let b_le_a = b_over <= tol;
    let margin = a_over.max(b_over).max(0.0);
    let (relation, witness_eta) = match (a_le_b, b_le_a) {
        (true, true) => (Relation::Equal, None),
        (true, false) => (Relation::StrictlyDominates, Some(b_over_at)),
        (false, true) => (Relation::StrictlyDominatedBy, Some(a_over_at)),
        (false, false) => (Relation::Incomparable, Some(a_over_at)),
    };
    Ok(DominanceVerdict {
        relation,
        witness_eta,
        margin,
    })
}

/// `A ≤ B + tol` everywhere and `A < B − tol` somewhere.
fn strictly_dominates(a: &MurphyCurve, b: &MurphyCurve, tol: f64) -> bool {
    let (mut violated, mut strict) = (false, false);
    scan_differences(a, b, |_, d| {
        if d > tol {
            violated = true;
            return false;
        }
        if d < -tol {
            strict = true;
        }
        true
    });
    strict && !violated
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParetoStatus {
    Optimal,
    /// Strictly dominated; `by` is the first strict dominator in input order.
    Dominated {
        by: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoEntry {
    pub beta: ParamVector,
    pub curve: MurphyCurve,
    pub status: ParetoStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSet {
    pub entries: Vec<ParetoEntry>,
    pub tolerance: f64,
}

impl ParetoSet {
    pub fn optimal(&self) -> impl Iterator<Item = (usize, &ParetoEntry)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.status == ParetoStatus::Optimal)
    }
}

/// Marks every candidate strictly `tol`-dominated by another one.
pub fn pareto_filter(
    candidates: Vec<(ParamVector, MurphyCurve)>,
    tol: f64,
) -> Result<ParetoSet, ParetoError> {
    let first = candidates.first().ok_or(ParetoError::NoCandidates)?;
    for (_, c) in &candidates {
        check_pair(&first.1, c, tol)?;
    }
    let statuses: Vec<ParetoStatus> = (0..candidates.len())
        .into_par_iter()
        .map(|i| {
            (0..candidates.len())
                .find(|&j| j != i && strictly_dominates(&candidates[j].1, &candidates[i].1, tol))
                .map_or(ParetoStatus::Optimal, |by| ParetoStatus::Dominated { by })
        })
        .collect();
    let entries = candidates
        .into_iter()
        .zip(statuses)
        .map(|((beta, curve), status)| ParetoEntry {
            beta,
            curve,
            status,
        })
        .collect();
    Ok(ParetoSet {
        entries,
        tolerance: tol,
    })
}

/// `2·SE` of an empirical elementary risk, estimated from the even/odd
/// half-sample split and maximised over candidates.
///
/// For each candidate the half-sample curves `C₁, C₂` are compared on a grid
/// of 256 points over the pooled range; `SE(η) ≈ |C₁(η) − C₂(η)| / 2` and the
/// root mean square over the grid is used.
pub fn half_sample_tolerance(
    spec: &FunctionalSpec,
    predictions: &[Vec<f64>],
    y: &[f64],
) -> Result<f64, ParetoError> {
    if predictions.is_empty() || y.len() < 2 {
        return Err(ParetoError::NoCandidates);
    }
    let split = |v: &[f64], parity: usize| -> Vec<f64> {
        v.iter().skip(parity).step_by(2).copied().collect()
    };
    let (y0, y1) = (split(y, 0), split(y, 1));
    let se: Vec<f64> = predictions
        .par_iter()
        .map(|z| {
            let (Ok(c0), Ok(c1)) = (
                murphy_curve(spec, &split(z, 0), &y0, 0),
                murphy_curve(spec, &split(z, 1), &y1, 0),
            ) else {
                return 0.0;
            };
            let lo = c0.range().0.min(c1.range().0);
            let hi = c0.range().1.max(c1.range().1);
            const POINTS: usize = 256;
            let ms = (0..POINTS)
                .map(|k| {
                    let eta = lo + (hi - lo) * (k as f64 + 0.5) / POINTS as f64;
                    let d = 0.5 * (c0.evaluate(eta) - c1.evaluate(eta));
                    d * d
                })
                .sum::<f64>()
                / POINTS as f64;
            ms.sqrt()
        })
        .collect();
    Ok(2.0 * se.into_iter().fold(0.0, f64::max))
}

/// One entry of an `η` scan.
#[derive(Debug)]
pub struct EtaFit {
    pub eta: f64,
    pub result: Result<FitResult, FitError>,
}

/// [`fit_elementary`] at every grid point; failures are kept in place.
pub fn eta_scan(
    spec: &FunctionalSpec,
    model: &dyn PredictionModel,
    data: &Dataset,
    eta_grid: &[f64],
    opt: &OptimizerConfig,
) -> Result<Vec<EtaFit>, ParetoError> {
    if eta_grid.is_empty()
        || eta_grid.iter().any(|e| !e.is_finite())
        || eta_grid.windows(2).any(|w| w[0] > w[1])
    {
        return Err(ParetoError::InvalidGrid);
    }
    Ok(eta_grid
        .par_iter()
        .map(|&eta| EtaFit {
            eta,
            result: fit_elementary(spec, eta, model, data, opt),
        })
        .collect())
}
