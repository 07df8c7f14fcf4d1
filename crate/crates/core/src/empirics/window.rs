//! Data-driven `η`-window for multi-parameter elementary fits.
//!
//! A single elementary score depends on `β` only through which predictions
//! reach `η`, so with two or more parameters its minimiser set is a ridge.
//! Spreading `η` uniformly over `[η − w, η + w]` turns the objective into a
//! clipped least-squares fit that selects the line matching the regression
//! function near the crossing, with a bias of order `w²` times its local
//! curvature and a variance that shrinks as `w` grows.
//!
//! The window is picked on a dyadic ladder. Fits run from the widest window
//! inward, each warm-started from the previous one. The `w²` bias law gives
//! two bias estimates per window, `(β̂(2w) − β̂(w)) / 3` from above and
//! `4 (β̂(w) − β̂(w/2)) / 3` from below. The second guards against windows so
//! wide that the law saturates, and is discounted by the narrower fit's
//! noise. Sandwich standard errors give the variance, and the window with
//! the smallest estimated mean squared error is kept.

use nalgebra::DMatrix;

use super::dataset::Dataset;
use super::fit::{minimize, ordered_mean, search_box, FitError, FitResult, OptimizerConfig};
use super::simplex::nelder_mead;
use crate::functionals::FunctionalSpec;
use crate::mixtures::{mixture_loss, MixtureMeasure};
use crate::models::{ParamVector, PredictionModel};

/// Window half-widths fitted, in units of `sd(y)`, narrowest first, each
/// twice the previous. The widest only supplies the bias estimate of the
/// one below it.
pub const WINDOW_LADDER: [f64; 6] = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6];

/// Fewest predictions inside a window, per parameter, for its standard
/// errors to be trusted.
const MIN_ACTIVE_PER_PARAMETER: usize = 25;

/// Unit mass spread uniformly over `[η − w, η + w]`.
pub fn window_mixture(eta: f64, w: f64) -> Result<MixtureMeasure, FitError> {
    MixtureMeasure::lebesgue(eta - w, eta + w, 0.5 / w)
        .map_err(|e| FitError::InvalidConfig(e.to_string()))
}

struct Rung {
    result: FitResult,
    se: Option<Vec<f64>>,
}

pub(super) fn adaptive_fit(
    spec: &FunctionalSpec,
    eta: f64,
    model: &dyn PredictionModel,
    data: &Dataset,
    opt: &OptimizerConfig,
    scale: f64,
) -> Result<FitResult, FitError> {
    let bx = search_box(model, data, opt)?;
    let y = data.y();
    let mut rungs: Vec<Rung> = Vec::with_capacity(WINDOW_LADDER.len());
    for &c in WINDOW_LADDER.iter().rev() {
        let w = c * scale;
        let h = window_mixture(eta, w)?;
        let objective = |b: &[f64]| {
            if !model.contains(b) {
                return f64::INFINITY;
            }
            ordered_mean(data.n(), |i| {
                mixture_loss(spec, &h, model.predict_unchecked(b, data.row(i)), y[i])
            })
        };
        let mut result = match rungs.last() {
            None => minimize(&objective, &bx, opt)?,
            Some(prev) => {
                let x0 = prev.result.beta.as_slice();
                let steps: Vec<f64> = bx
                    .iter()
                    .enumerate()
                    .map(|(k, &(lo, hi))| {
                        let from_se = prev.se.as_ref().map(|se| 2.0 * se[k]);
                        from_se
                            .unwrap_or(0.05 * (hi - lo))
                            .max(1e-6 * (1.0 + x0[k].abs()))
                    })
                    .collect();
                let out = nelder_mead(&objective, x0, &steps, opt.xtol, opt.max_evals);
                FitResult {
                    beta: ParamVector::new(out.x),
                    objective: out.f,
                    evaluations: out.evaluations,
                    converged: out.converged,
                    minimizer_interval: None,
                    eta_window: None,
                }
            }
        };
        result.eta_window = Some(w);
        let se = sandwich_se(spec, eta, w, model, data, &result.beta);
        rungs.push(Rung { result, se });
    }
    rungs.reverse();

    let evaluations: usize = rungs.iter().map(|r| r.result.evaluations).sum();
    let chosen = select(&rungs);
    let mut result = rungs.swap_remove(chosen).result;
    result.evaluations = evaluations;
    Ok(result)
}

/// Standard errors of the narrower rung that its difference must exceed
/// before counting as bias.
const NOISE_DISCOUNT: f64 = 2.0;

/// Index of the rung with the smallest `Σ_k bias_k² + se_k²`; rungs are
/// ordered narrowest first. Without any standard errors the widest
/// candidate is used.
fn select(rungs: &[Rung]) -> usize {
    let candidates = rungs.len() - 1;
    let mut best: Option<(usize, f64)> = None;
    for k in 0..candidates {
        let Some(se) = &rungs[k].se else { continue };
        let b = rungs[k].result.beta.as_slice();
        let wide = rungs[k + 1].result.beta.as_slice();
        let narrow = k
            .checked_sub(1)
            .and_then(|j| Some((rungs[j].result.beta.as_slice(), rungs[j].se.as_ref()?)));
        let mse: f64 = (0..b.len())
            .map(|i| {
                let above = (wide[i] - b[i]).abs() / 3.0;
                let below = narrow.map_or(0.0, |(nb, nse)| {
                    4.0 / 3.0 * ((b[i] - nb[i]).abs() - NOISE_DISCOUNT * nse[i]).max(0.0)
                });
                above.max(below).powi(2) + se[i] * se[i]
            })
            .sum();
        if best.is_none_or(|(_, m)| mse < m) {
            best = Some((k, mse));
        }
    }
    best.map_or(candidates - 1, |(k, _)| k)
}

/// Sandwich standard errors `sqrt(diag(A⁻¹ B A⁻¹ / n))` of a window fit.
///
/// The score of row `i` is `h(m_i) V(m_i, y_i) ∇m_i` with `h` the window
/// density; `B` is its second moment and `A` is the derivative of the mean
/// score, taken by central differences at the window's own scale.
fn sandwich_se(
    spec: &FunctionalSpec,
    eta: f64,
    w: f64,
    model: &dyn PredictionModel,
    data: &Dataset,
    beta: &ParamVector,
) -> Option<Vec<f64>> {
    let n = data.n();
    let p = beta.len();
    let b = beta.as_slice();
    let (lo, hi, density) = (eta - w, eta + w, 0.5 / w);
    let predict = |b: &[f64], i: usize| model.predict_unchecked(b, data.row(i));

    let mut jac = vec![0.0; n * p];
    let mut shifted = b.to_vec();
    for k in 0..p {
        let eps = 1e-6 * (1.0 + b[k].abs());
        for i in 0..n {
            shifted[k] = b[k] + eps;
            let up = predict(&shifted, i);
            shifted[k] = b[k] - eps;
            let down = predict(&shifted, i);
            jac[i * p + k] = (up - down) / (2.0 * eps);
        }
        shifted[k] = b[k];
    }

    let inside = |m: f64| m > lo && m < hi;
    let active: Vec<usize> = (0..n).filter(|&i| inside(predict(b, i))).collect();
    if active.len() < MIN_ACTIVE_PER_PARAMETER * p {
        return None;
    }

    let mean_score = |at: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; p];
        for i in 0..n {
            let m = predict(at, i);
            if inside(m) {
                let s = density * spec.identification_value(m, data.y()[i]);
                for k in 0..p {
                    g[k] += s * jac[i * p + k];
                }
            }
        }
        g.iter().map(|v| v / n as f64).collect()
    };

    let mut bmat = DMatrix::<f64>::zeros(p, p);
    for &i in &active {
        let s = density * spec.identification_value(predict(b, i), data.y()[i]);
        let row = &jac[i * p..(i + 1) * p];
        for r in 0..p {
            for c in 0..p {
                bmat[(r, c)] += s * s * row[r] * row[c];
            }
        }
    }
    bmat /= n as f64;

    let mut amat = DMatrix::<f64>::zeros(p, p);
    for k in 0..p {
        let rms = (active.iter().map(|&i| jac[i * p + k].powi(2)).sum::<f64>()
            / active.len() as f64)
            .sqrt();
        if !(rms > 0.0) {
            return None;
        }
        let delta = 0.25 * w / rms;
        shifted[k] = b[k] + delta;
        let up = mean_score(&shifted);
        shifted[k] = b[k] - delta;
        let down = mean_score(&shifted);
        shifted[k] = b[k];
        for r in 0..p {
            amat[(r, k)] = (up[r] - down[r]) / (2.0 * delta);
        }
    }
    let amat = (&amat + amat.transpose()) * 0.5;
    let inv = amat.try_inverse()?;
    let cov = &inv * bmat * &inv / n as f64;
    let se: Vec<f64> = (0..p).map(|k| cov[(k, k)].sqrt()).collect();
    se.iter().all(|v| v.is_finite() && *v > 0.0).then_some(se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelFamily;

    fn rung(beta: [f64; 2], se: Option<[f64; 2]>) -> Rung {
        Rung {
            result: FitResult {
                beta: ParamVector::new(beta),
                objective: 0.0,
                evaluations: 0,
                converged: true,
                minimizer_interval: None,
                eta_window: None,
            },
            se: se.map(|s| s.to_vec()),
        }
    }

    #[test]
    fn selection_trades_bias_against_variance() {
        // The first rung is noisy, the third is biased relative to the fourth.
        let rungs = [
            rung([1.0, 2.0], Some([0.5, 0.5])),
            rung([1.1, 2.0], Some([0.05, 0.05])),
            rung([1.1, 2.0], Some([0.02, 0.02])),
            rung([1.7, 2.3], Some([0.01, 0.01])),
        ];
        assert_eq!(select(&rungs), 1);
        // The third rung has saturated: it matches the fourth but has moved
        // well beyond the second rung's noise.
        let rungs = [
            rung([1.0, 2.0], Some([0.1, 0.1])),
            rung([1.0, 2.0], Some([0.01, 0.01])),
            rung([1.3, 2.0], Some([0.005, 0.005])),
            rung([1.3, 2.0], Some([0.004, 0.004])),
        ];
        assert_eq!(select(&rungs), 1);
        // Rungs without standard errors are never chosen.
        let rungs = [
            rung([0.0, 0.0], None),
            rung([1.0, 1.0], Some([9.0, 9.0])),
            rung([1.0, 1.0], None),
        ];
        assert_eq!(select(&rungs), 1);
        let rungs = [
            rung([0.0, 0.0], None),
            rung([1.0, 1.0], None),
            rung([1.0, 1.0], None),
        ];
        assert_eq!(select(&rungs), 1);
    }

    #[test]
    fn sandwich_matches_least_squares_for_a_wide_window() {
        // With every prediction inside the window the fit is ordinary least
        // squares, whose sandwich (HC0) errors have a closed form.
        let n = 2000;
        let x: Vec<f64> = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| 1.0 + 2.0 * xi + if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        let data = Dataset::univariate(x.clone(), y.clone()).unwrap();
        let model = ModelFamily::linear(1, true).unwrap();
        let beta = ParamVector::new([1.0, 2.0]);
        let se = sandwich_se(&FunctionalSpec::Mean, 1.0, 100.0, &model, &data, &beta).unwrap();

        let sxx = x.iter().map(|v| v * v).sum::<f64>();
        let (s0, s1) = (n as f64, x.iter().sum::<f64>());
        let det = s0 * sxx - s1 * s1;
        let inv = [[sxx / det, -s1 / det], [-s1 / det, s0 / det]];
        let mut meat = [[0.0; 2]; 2];
        for i in 0..n {
            let r = 1.0 + 2.0 * x[i] - y[i];
            let g = [1.0, x[i]];
            for a in 0..2 {
                for c in 0..2 {
                    meat[a][c] += r * r * g[a] * g[c];
                }
            }
        }
        for k in 0..2 {
            let mut v = 0.0;
            for a in 0..2 {
                for c in 0..2 {
                    v += inv[k][a] * meat[a][c] * inv[c][k];
                }
            }
            assert!(
                (se[k] - v.sqrt()).abs() < 1e-6 * v.sqrt(),
                "{k}: {} vs {}",
                se[k],
                v.sqrt()
            );
        }
    }

    #[test]
    fn too_few_active_predictions_give_no_errors() {
        let data = Dataset::univariate(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).unwrap();
        let model = ModelFamily::linear(1, true).unwrap();
        let beta = ParamVector::new([0.0, 1.0]);
        assert!(sandwich_se(&FunctionalSpec::Mean, 1.0, 0.5, &model, &data, &beta).is_none());
    }
}
