//! Empirical risks and multistart M-estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{DataError, Dataset};
use super::simplex::{nelder_mead, SimplexOutcome};
use super::window::{adaptive_fit, window_mixture};
use crate::functionals::FunctionalSpec;
use crate::mixtures::{mixture_loss, MixtureMeasure};
use crate::models::{CoordinateRole, ModelError, ParamVector, PredictionModel};

/// Largest supported parameter dimension.
pub const MAX_PARAMETER_DIM: usize = 8;

/// Default search box half-width, in data-scale units.
const BOX_SCALE: f64 = 4.0;

/// Multistart searches first stop at this fraction of the start spacing.
const COARSE_FRACTION: f64 = 1e-2;

/// Best coarse searches refined to `xtol`.
const REFINED_STARTS: usize = 2;

/// Rows per partial sum; fixed so results do not depend on thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("no feasible start: {0}")]
    NoFeasibleStart(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Number of multistart points.
    pub starts: usize,
    /// Simplex diameter at which a local search stops.
    pub xtol: f64,
    /// Relative objective gap between the best two starts that clears `converged`.
    pub ftol_flag: f64,
    /// Grid resolution of the 1-D pre-scan.
    pub grid: usize,
    /// Evaluation budget per local search.
    pub max_evals: usize,
    /// Explicit `(lo, hi)` per coordinate; otherwise derived from data scale.
    pub search_box: Option<Vec<(f64, f64)>>,
    /// Half-width `w` of the uniform `η`-window used by elementary fits.
    ///
    /// With `w > 0` the objective is the mixture risk for `H` uniform on
    /// `[η − w, η + w]` with unit mass. `None` means `0` for one-parameter
    /// models and a data-driven choice from
    /// [`WINDOW_LADDER`](super::WINDOW_LADDER)`·sd(y)` otherwise.
    pub eta_window: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            xtol: 1e-6,
            ftol_flag: 1e-4,
            grid: 401,
            max_evals: 4000,
            search_box: None,
            eta_window: None,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::InvalidConfig(m.to_string()));
        if self.starts == 0 {
            return bad("starts must be ≥ 1");
        }
        if self.grid < 3 {
            return bad("grid must be ≥ 3");
        }
        if !(self.xtol > 0.0) || !(self.ftol_flag >= 0.0) {
            return bad("xtol must be > 0 and ftol_flag ≥ 0");
        }
        if self
            .eta_window
            .is_some_and(|w| !(w >= 0.0) || !w.is_finite())
        {
            return bad("eta_window must be finite and ≥ 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: ParamVector,
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Flat optimum `[lo, hi]` of a one-parameter objective, capped at the
    /// search box.
    pub minimizer_interval: Option<(f64, f64)>,
    /// `η`-window half-width an elementary fit used, when positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_window: Option<f64>,
}

impl FitResult {
    /// `β̂`, or the midpoint of the flat optimum when there is one.
    pub fn representative(&self) -> ParamVector {
        match self.minimizer_interval {
            Some((lo, hi)) => ParamVector::new([0.5 * (lo + hi)]),
            None => self.beta.clone(),
        }
    }
}

/// `(1/n) Σ f(i)` reduced over fixed chunks in index order.
pub(crate) fn ordered_mean(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    if n <= CHUNK {
        return (0..n).map(f).sum::<f64>() / n as f64;
    }
    let partials: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum::<f64>())
        .collect();
    partials.iter().sum::<f64>() / n as f64
}

fn check_covariates(model: &dyn PredictionModel, data: &Dataset) -> Result<(), FitError> {
    if let Some(d) = model.covariate_dim() {
        if d != data.d() {
            return Err(ModelError::DimensionMismatch {
                what: "covariates",
                expected: d,
                got: data.d(),
            }
            .into());
        }
    }
    Ok(())
}

/// `m(x_i; β)` for every row.
pub fn predictions(
    model: &dyn PredictionModel,
    beta: &ParamVector,
    data: &Dataset,
) -> Result<Vec<f64>, FitError> {
    model.check_beta(beta.as_slice())?;
    check_covariates(model, data)?;
    Ok((0..data.n())
        .map(|i| model.predict_unchecked(beta.as_slice(), data.row(i)))
        .collect())
}

/// `(1/n) Σ L_H(m(x_i; β), y_i)`.
pub fn empirical_risk(
    spec: &FunctionalSpec,
    mixture: &MixtureMeasure,
    model: &dyn PredictionModel,
    beta: &ParamVector,
    data: &Dataset,
) -> Result<f64, FitError> {
    model.check_beta(beta.as_slice())?;
    check_covariates(model, data)?;
    if !model.contains(beta.as_slice()) {
        return Err(ModelError::OutsideParameterSpace(beta.clone()).into());
    }
    let b = beta.as_slice();
    let y = data.y();
    Ok(ordered_mean(data.n(), |i| {
        mixture_loss(spec, mixture, model.predict_unchecked(b, data.row(i)), y[i])
    }))
}

/// `(1/n) Σ S_η(m(x_i; β), y_i)`.
pub fn empirical_elementary_risk(
    spec: &FunctionalSpec,
    eta: f64,
    model: &dyn PredictionModel,
    beta: &ParamVector,
    data: &Dataset,
) -> Result<f64, FitError> {
    model.check_beta(beta.as_slice())?;
    check_covariates(model, data)?;
    let b = beta.as_slice();
    let y = data.y();
    Ok(ordered_mean(data.n(), |i| {
        spec.elementary_score(eta, model.predict_unchecked(b, data.row(i)), y[i])
    }))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// The fixed `η`-window half-width `fit_elementary` will use, or `None`
/// when it is chosen from the data.
pub fn effective_eta_window(opt: &OptimizerConfig, model: &dyn PredictionModel) -> Option<f64> {
    match opt.eta_window {
        Some(w) => Some(w),
        None if model.parameter_dim() <= 1 => Some(0.0),
        None => None,
    }
}

/// `sd(y)`, or `1` for a constant response.
pub(super) fn response_scale(data: &Dataset) -> f64 {
    let sd = mean_sd(data.y()).1;
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

/// The box searched by [`fit`]: either `opt.search_box` or a data-scaled
/// default, intersected with the model's open bounds.
pub fn search_box(
    model: &dyn PredictionModel,
    data: &Dataset,
    opt: &OptimizerConfig,
) -> Result<Vec<(f64, f64)>, FitError> {
    let p = model.parameter_dim();
    let bounds = model.bounds();
    let (y_mean, y_sd) = mean_sd(data.y());
    let scale = y_sd.max(0.05 * y_mean.abs().max(1.0));
    let requested: Vec<(f64, f64)> = match &opt.search_box {
        Some(b) => {
            if b.len() != p {
                return Err(ModelError::DimensionMismatch {
                    what: "search box",
                    expected: p,
                    got: b.len(),
                }
                .into());
            }
            if b.iter()
                .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
            {
                return Err(FitError::InvalidConfig(
                    "search box needs finite lo < hi".into(),
                ));
            }
            b.clone()
        }
        None => (0..p)
            .map(|k| match model.coordinate_role(k) {
                CoordinateRole::Intercept => {
                    (y_mean - BOX_SCALE * scale, y_mean + BOX_SCALE * scale)
                }
                CoordinateRole::Slope(j) if j < data.d() => {
                    let sd = mean_sd(&data.x_column(j)).1;
                    let half = BOX_SCALE * scale / if sd > 0.0 { sd } else { 1.0 };
                    (-half, half)
                }
                _ => (-BOX_SCALE * scale, BOX_SCALE * scale),
            })
            .collect(),
    };

    let explicit = opt.search_box.is_some();
    let mut out = Vec::with_capacity(p);
    for (k, (&(lo, hi), &(blo, bhi))) in requested.iter().zip(&bounds).enumerate() {
        let inner_lo = blo.map(|b| b + 1e-9 * (1.0 + b.abs()));
        let inner_hi = bhi.map(|b| b - 1e-9 * (1.0 + b.abs()));
        let mut l = inner_lo.map_or(lo, |b| b.max(lo));
        let mut h = inner_hi.map_or(hi, |b| b.min(hi));
        if l >= h && !explicit {
            // The data-scaled box misses a one-sided parameter space.
            let width = hi - lo;
            match (inner_lo, inner_hi) {
                (Some(a), Some(b)) => (l, h) = (a, b),
                (Some(a), None) => (l, h) = (a, a + width),
                (None, Some(b)) => (l, h) = (b - width, b),
                (None, None) => {}
            }
        }
        if !(l < h) {
            return Err(FitError::NoFeasibleStart(format!(
                "coordinate {k}: search box [{lo}, {hi}] misses the parameter space"
            )));
        }
        out.push((l, h));
    }
    Ok(out)
}

fn validate(
    model: &dyn PredictionModel,
    data: &Dataset,
    opt: &OptimizerConfig,
) -> Result<(), FitError> {
    opt.validate()?;
    let p = model.parameter_dim();
    if p == 0 || p > MAX_PARAMETER_DIM {
        return Err(FitError::InvalidConfig(format!(
            "parameter dimension {p} outside 1..={MAX_PARAMETER_DIM}"
        )));
    }
    check_covariates(model, data)
}

/// Minimises the empirical mixture risk over the parameter space.
pub fn fit(
    spec: &FunctionalSpec,
    mixture: &MixtureMeasure,
    model: &dyn PredictionModel,
    data: &Dataset,
    opt: &OptimizerConfig,
) -> Result<FitResult, FitError> {
    validate(model, data, opt)?;
    let bx = search_box(model, data, opt)?;
    let y = data.y();
    let objective = |b: &[f64]| {
        if !model.contains(b) {
            return f64::INFINITY;
        }
        ordered_mean(data.n(), |i| {
            mixture_loss(spec, mixture, model.predict_unchecked(b, data.row(i)), y[i])
        })
    };
    minimize(&objective, &bx, opt)
}

/// Minimises the empirical elementary risk at level `η`.
///
/// See [`OptimizerConfig::eta_window`] for how multi-parameter fits pick one
/// element of the (typically non-unique) minimiser set.
pub fn fit_elementary(
    spec: &FunctionalSpec,
    eta: f64,
    model: &dyn PredictionModel,
    data: &Dataset,
    opt: &OptimizerConfig,
) -> Result<FitResult, FitError> {
    if !eta.is_finite() {
        return Err(FitError::InvalidConfig(format!("η = {eta} is not finite")));
    }
    validate(model, data, opt)?;
    match effective_eta_window(opt, model) {
        None => return adaptive_fit(spec, eta, model, data, opt, response_scale(data)),
        Some(w) if w > 0.0 => {
            let mut result = fit(spec, &window_mixture(eta, w)?, model, data, opt)?;
            result.eta_window = Some(w);
            return Ok(result);
        }
        Some(_) => {}
    }
    let bx = search_box(model, data, opt)?;
    let y = data.y();
    let objective = |b: &[f64]| {
        if !model.contains(b) {
            return f64::INFINITY;
        }
        ordered_mean(data.n(), |i| {
            spec.elementary_score(eta, model.predict_unchecked(b, data.row(i)), y[i])
        })
    };
    minimize(&objective, &bx, opt)
}

type Objective<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

pub(super) fn minimize(
    f: &Objective<'_>,
    bx: &[(f64, f64)],
    opt: &OptimizerConfig,
) -> Result<FitResult, FitError> {
    if bx.len() == 1 {
        minimize_1d(f, bx[0], opt)
    } else {
        minimize_nd(f, bx, opt)
    }
}

fn same_objective(f1: f64, f2: f64, rel: f64) -> bool {
    (f2 - f1).abs() <= rel * f1.abs().max(f2.abs()).max(1e-8)
}

/// Sorts refined outcomes and assembles the result.
fn finish(
    mut outcomes: Vec<SimplexOutcome>,
    evaluations: usize,
    opt: &OptimizerConfig,
) -> (FitResult, f64) {
    let evaluations = evaluations + outcomes.iter().map(|o| o.evaluations).sum::<usize>();
    outcomes.sort_by(|a, b| a.f.total_cmp(&b.f));
    let best = &outcomes[0];
    let agree = outcomes
        .get(1)
        .is_none_or(|second| same_objective(best.f, second.f, opt.ftol_flag));
    (
        FitResult {
            beta: ParamVector::new(best.x.clone()),
            objective: best.f,
            evaluations,
            converged: best.converged && agree,
            minimizer_interval: None,
            eta_window: None,
        },
        best.f,
    )
}

fn minimize_nd(
    f: &Objective<'_>,
    bx: &[(f64, f64)],
    opt: &OptimizerConfig,
) -> Result<FitResult, FitError> {
    let p = bx.len();
    let per_dim = ((opt.starts as f64).powf(1.0 / p as f64).ceil() as usize).max(2);
    let total = per_dim.pow(p as u32);
    let point = |mut idx: usize| -> Vec<f64> {
        bx.iter()
            .map(|&(lo, hi)| {
                let k = idx % per_dim;
                idx /= per_dim;
                lo + (hi - lo) * (k as f64 + 0.5) / per_dim as f64
            })
            .collect()
    };
    let values: Vec<f64> = (0..total).into_par_iter().map(|i| f(&point(i))).collect();
    let mut order: Vec<usize> = (0..total).filter(|&i| values[i].is_finite()).collect();
    if order.is_empty() {
        return Err(FitError::NoFeasibleStart(
            "objective is infinite at every start".into(),
        ));
    }
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order.truncate(opt.starts);
    let steps: Vec<f64> = bx
        .iter()
        .map(|&(lo, hi)| 0.5 * (hi - lo) / per_dim as f64)
        .collect();
    let coarse_tol = opt
        .xtol
        .max(COARSE_FRACTION * steps.iter().copied().fold(f64::INFINITY, f64::min));
    let mut coarse: Vec<SimplexOutcome> = order
        .par_iter()
        .map(|&i| nelder_mead(f, &point(i), &steps, coarse_tol, opt.max_evals))
        .collect();
    if coarse_tol <= opt.xtol {
        return Ok(finish(coarse, total, opt).0);
    }
    let evaluations = total + coarse.iter().map(|o| o.evaluations).sum::<usize>();
    coarse.sort_by(|a, b| a.f.total_cmp(&b.f));
    coarse.truncate(REFINED_STARTS);
    let polish = vec![10.0 * coarse_tol; p];
    let refined: Vec<SimplexOutcome> = coarse
        .par_iter()
        .map(|o| nelder_mead(f, &o.x, &polish, opt.xtol, opt.max_evals))
        .collect();
    Ok(finish(refined, evaluations, opt).0)
}

fn minimize_1d(
    f: &Objective<'_>,
    (lo, hi): (f64, f64),
    opt: &OptimizerConfig,
) -> Result<FitResult, FitError> {
    let g = opt.grid;
    let spacing = (hi - lo) / (g - 1) as f64;
    let grid: Vec<f64> = (0..g)
        .map(|k| {
            if k == g - 1 {
                hi
            } else {
                lo + spacing * k as f64
            }
        })
        .collect();
    let values: Vec<f64> = grid.par_iter().map(|&b| f(&[b])).collect();

    // Runs of equal grid values lower than both neighbouring runs.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=g {
        if k == g || values[k] != values[start] {
            runs.push((start, k - 1));
            start = k;
        }
    }
    let mut candidates: Vec<(usize, usize)> = (0..runs.len())
        .filter(|&r| {
            let v = values[runs[r].0];
            v.is_finite()
                && (r == 0 || values[runs[r - 1].0] > v)
                && (r + 1 == runs.len() || values[runs[r + 1].0] > v)
        })
        .map(|r| runs[r])
        .collect();
    if candidates.is_empty() {
        return Err(FitError::NoFeasibleStart(
            "objective is infinite on the whole grid".into(),
        ));
    }
    candidates.sort_by(|a, b| values[a.0].total_cmp(&values[b.0]).then(a.0.cmp(&b.0)));
    candidates.truncate(opt.starts);

    let outcomes: Vec<SimplexOutcome> = candidates
        .par_iter()
        .map(|&(a, b)| {
            let x0 = grid[(a + b) / 2];
            nelder_mead(f, &[x0], &[0.5 * spacing], opt.xtol, opt.max_evals)
        })
        .collect();
    let (mut result, best) = finish(outcomes, g, opt);

    // Flat optimum: expand along grid points within a rounding tolerance of
    // the optimum, then bisect each edge down to `xtol`.
    let tol = 1e-12 * best.abs().max(1.0);
    let flat = |v: f64| v <= best + tol;
    let x = result.beta.0[0];
    let mut evals = 0usize;
    let mut edge = |toward_lo: bool| -> (f64, bool) {
        let mut inner = x;
        let mut crossed_grid = false;
        let outer = if toward_lo {
            let mut k = grid.partition_point(|&b| b < x);
            loop {
                if k == 0 {
                    break None;
                }
                k -= 1;
                if !flat(values[k]) {
                    break Some(grid[k]);
                }
                inner = grid[k];
                crossed_grid = true;
            }
        } else {
            let mut k = grid.partition_point(|&b| b <= x);
            loop {
                if k == g {
                    break None;
                }
                if !flat(values[k]) {
                    break Some(grid[k]);
                }
                inner = grid[k];
                crossed_grid = true;
                k += 1;
            }
        };
        let Some(mut outer) = outer else {
            return (if toward_lo { lo } else { hi }, crossed_grid);
        };
        while (outer - inner).abs() > 0.5 * opt.xtol {
            let mid = 0.5 * (outer + inner);
            evals += 1;
            if flat(f(&[mid])) {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        (inner, crossed_grid)
    };
    let (left, crossed_left) = edge(true);
    let (right, crossed_right) = edge(false);
    result.evaluations += evals;
    if (crossed_left || crossed_right) && right - left > opt.xtol {
        result.minimizer_interval = Some((left, right));
    }
    Ok(result)
}
