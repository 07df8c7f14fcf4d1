//! Nelder–Mead simplex descent.
//!
//! Objectives here are piecewise constant in `β` (elementary scores) or only
//! piecewise smooth (mixture losses), so no derivatives are used. Points
//! outside the feasible region are expected to evaluate to `+∞`.

// Indexed loops read better for simplex vertex arithmetic.
#![allow(clippy::needless_range_loop)]

pub(crate) struct SimplexOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Simplex diameter fell below `xtol` before the evaluation budget ran out.
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `f` from `x0` with initial edge lengths `steps`.
///
/// A step that lands on an infeasible point is flipped once; the search
/// stops when every vertex is within `xtol` (max-norm) of the best vertex.
pub(crate) fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    xtol: f64,
    max_evals: usize,
) -> SimplexOutcome {
    let n = x0.len();
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        f(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    values.push(eval(x0));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        let mut fv = eval(&v);
        if !fv.is_finite() {
            v[i] = x0[i] - steps[i];
            fv = eval(&v);
        }
        simplex.push(v);
        values.push(fv);
    }

    let mut converged = false;
    loop {
        // Stable order keeps ties deterministic.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if diameter <= xtol {
            converged = true;
            break;
        }
        if evaluations.get() >= max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for j in 0..n {
                centroid[j] += v[j] / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + t * (simplex[n][j] - centroid[j]))
                .collect()
        };

        let reflected = along(-REFLECT);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(-EXPAND);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(-CONTRACT);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(CONTRACT);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            for j in 0..n {
                simplex[i][j] = simplex[0][j] + SHRINK * (simplex[i][j] - simplex[0][j]);
            }
            values[i] = eval(&simplex[i]);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    SimplexOutcome {
        x: simplex[best].clone(),
        f: values[best],
        evaluations: evaluations.get(),
        converged,
    }
}
