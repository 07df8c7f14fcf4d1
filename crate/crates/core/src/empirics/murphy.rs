//! Empirical Murphy curves `η ↦ (1/n) Σ S_η(z_i, y_i)`.
//!
//! Each pair contributes an affine function of `η` on `(min(z_i, y_i),
//! max(z_i, y_i)]`, so the curve is piecewise affine with breakpoints at the
//! pooled sample values. It is stored as one `(intercept, slope)` pair per
//! interval between consecutive knots and can be evaluated exactly anywhere.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::dataset::DataError;
use crate::functionals::FunctionalSpec;

/// Default number of points inserted between consecutive pooled values.
pub const DEFAULT_REFINEMENT: usize = 1;

/// `δ_right(η) = 1e−9 · (1 + |η|)`, the offset used for `value_right`.
pub fn delta_right(eta: f64) -> f64 {
    1e-9 * (1.0 + eta.abs())
}

/// Identifies the `(functional, observations)` pair a curve was built from.
///
/// Curves compare only when fingerprints agree.
pub fn fingerprint(spec: &FunctionalSpec, y: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    spec.to_string().hash(&mut h);
    y.len().hash(&mut h);
    for v in y {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Compensated running sum; `value` is exact for sums of few terms.
#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MurphyCurve {
    spec: FunctionalSpec,
    fingerprint: u64,
    n: usize,
    knots: Vec<f64>,
    value_at: Vec<f64>,
    value_right: Vec<f64>,
    /// Summed coefficients on `(knots[j], knots[j+1]]`, not yet divided by `n`.
    intercepts: Vec<f64>,
    slopes: Vec<f64>,
}

impl MurphyCurve {
    pub fn spec(&self) -> &FunctionalSpec {
        &self.spec
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Number of pairs averaged.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn value_at(&self) -> &[f64] {
        &self.value_at
    }

    pub fn value_right(&self) -> &[f64] {
        &self.value_right
    }

    /// `(η_min, η_max)`; the curve vanishes for `η ≤ η_min` and `η > η_max`.
    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn interval_value(&self, j: usize, eta: f64) -> f64 {
        let (a, b) = (self.intercepts[j], self.slopes[j]);
        if a == 0.0 && b == 0.0 {
            return 0.0;
        }
        let v = (a + b * eta) / self.n as f64;
        // Rounding must not push a sum of non-negative scores below zero.
        if self.spec.has_nonnegative_scores() {
            v.max(0.0)
        } else {
            v
        }
    }

    /// The curve at `η`.
    pub fn evaluate(&self, eta: f64) -> f64 {
        let (lo, hi) = self.range();
        if !(eta > lo && eta <= hi) {
            return 0.0;
        }
        let j = self.knots.partition_point(|&k| k < eta) - 1;
        self.interval_value(j, eta)
    }

    /// `lim_{t↓η}` of the curve, from the affine piece to the right of `η`.
    pub fn right_limit(&self, eta: f64) -> f64 {
        let (lo, hi) = self.range();
        if !(eta >= lo && eta < hi) {
            return 0.0;
        }
        let j = self.knots.partition_point(|&k| k <= eta) - 1;
        self.interval_value(j, eta)
    }
}

/// Builds the curve from predictions `z_i` and observations `y_i`.
///
/// Knots are the sorted distinct pooled values with `refinement` evenly
/// spaced points inserted in every gap.
pub fn murphy_curve(
    spec: &FunctionalSpec,
    predictions: &[f64],
    y: &[f64],
    refinement: usize,
) -> Result<MurphyCurve, DataError> {
    if y.is_empty() {
        return Err(DataError::EmptyInput("no observations"));
    }
    if predictions.len() != y.len() {
        return Err(DataError::LengthMismatch {
            what: "predictions",
            expected: y.len(),
            got: predictions.len(),
        });
    }
    for (i, (&z, &v)) in predictions.iter().zip(y).enumerate() {
        if !z.is_finite() {
            return Err(DataError::NonFiniteValue {
                row: i + 1,
                column: "prediction".into(),
            });
        }
        if !v.is_finite() {
            return Err(DataError::NonFiniteValue {
                row: i + 1,
                column: "y".into(),
            });
        }
    }
    let n = y.len();

    let mut pooled: Vec<f64> = predictions.iter().chain(y).copied().collect();
    pooled.sort_by(f64::total_cmp);
    // `dedup` uses `==`, so −0.0 and 0.0 merge into one knot.
    pooled.dedup();

    let mut knots = Vec::with_capacity(pooled.len() * (refinement + 1));
    for w in pooled.windows(2) {
        knots.push(w[0]);
        for r in 1..=refinement {
            let t = w[0] + (w[1] - w[0]) * (r as f64 / (refinement + 1) as f64);
            if t > *knots.last().unwrap() && t < w[1] {
                knots.push(t);
            }
        }
    }
    knots.push(pooled[pooled.len() - 1]);

    // Events: a piece switches on at its `lo` knot and off at its `hi` knot.
    let index_of = |v: f64| knots.partition_point(|&k| k < v);
    let mut events: Vec<(usize, f64, f64, i64)> = Vec::with_capacity(2 * n);
    for (&z, &v) in predictions.iter().zip(y) {
        if let Some(p) = spec.score_piece(z, v) {
            events.push((index_of(p.lo), p.intercept, p.slope, 1));
            events.push((index_of(p.hi), -p.intercept, -p.slope, -1));
        }
    }
    events.sort_by_key(|e| e.0);

    let intervals = knots.len() - 1;
    let mut intercepts = vec![0.0; intervals];
    let mut slopes = vec![0.0; intervals];
    let (mut a, mut b, mut active) = (Neumaier::default(), Neumaier::default(), 0i64);
    let mut next = 0;
    for j in 0..intervals {
        while next < events.len() && events[next].0 <= j {
            let (_, da, db, dc) = events[next];
            a.add(da);
            b.add(db);
            active += dc;
            next += 1;
        }
        if active == 0 {
            a = Neumaier::default();
            b = Neumaier::default();
        } else {
            intercepts[j] = a.value();
            slopes[j] = b.value();
        }
    }

    let mut curve = MurphyCurve {
        spec: *spec,
        fingerprint: fingerprint(spec, y),
        n,
        knots,
        value_at: Vec::new(),
        value_right: Vec::new(),
        intercepts,
        slopes,
    };
    curve.value_at = curve.knots.iter().map(|&k| curve.evaluate(k)).collect();
    curve.value_right = curve
        .knots
        .iter()
        .map(|&k| curve.evaluate(k + delta_right(k)))
        .collect();
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(spec: &FunctionalSpec, z: &[f64], y: &[f64], eta: f64) -> f64 {
        z.iter()
            .zip(y)
            .map(|(&z, &y)| spec.elementary_score(eta, z, y))
            .sum::<f64>()
            / y.len() as f64
    }

    #[test]
    fn single_mean_pair() {
        let c = murphy_curve(&FunctionalSpec::Mean, &[1.0], &[0.0], 1).unwrap();
        assert_eq!(c.knots(), &[0.0, 0.5, 1.0]);
        assert_eq!(c.value_at(), &[0.0, 0.5, 1.0]);
        assert_eq!(c.evaluate(-0.3), 0.0);
        assert_eq!(c.evaluate(1.0 + 1e-12), 0.0);
        assert!((c.evaluate(0.25) - 0.25).abs() < 1e-15);
        assert_eq!(c.value_right()[2], 0.0);
        assert!((c.value_right()[0] - 1e-9).abs() < 1e-18);
        assert_eq!(c.right_limit(0.0), 0.0);
        assert_eq!(c.right_limit(1.0), 0.0);
    }

    #[test]
    fn predictions_equal_observations() {
        let y = [0.3, -1.0, 2.0, 2.0];
        for spec in ["mean", "quantile:0.3", "expectile:0.8", "moment2"] {
            let spec: FunctionalSpec = spec.parse().unwrap();
            let c = murphy_curve(&spec, &y, &y, 3).unwrap();
            assert!(c
                .value_at()
                .iter()
                .chain(c.value_right())
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn median_two_pairs() {
        let spec = FunctionalSpec::quantile(0.5).unwrap();
        let c = murphy_curve(&spec, &[0.0, 0.0], &[-1.0, 1.0], 1).unwrap();
        for (eta, want) in [
            (-1.0, 0.0),
            (-0.5, 0.25),
            (0.0, 0.25),
            (0.3, 0.25),
            (1.0, 0.25),
            (1.01, 0.0),
        ] {
            assert_eq!(c.evaluate(eta), want, "η = {eta}");
        }
    }

    #[test]
    fn gaps_between_clusters_are_exact_zeros() {
        let c = murphy_curve(&FunctionalSpec::Mean, &[0.1, 10.1], &[0.0, 10.0], 2).unwrap();
        assert_eq!(c.evaluate(5.0), 0.0);
        assert!(c.evaluate(10.05) > 0.0);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            murphy_curve(&FunctionalSpec::Mean, &[], &[], 1),
            Err(DataError::EmptyInput(_))
        ));
        assert!(matches!(
            murphy_curve(&FunctionalSpec::Mean, &[1.0], &[1.0, 2.0], 1),
            Err(DataError::LengthMismatch { .. })
        ));
        assert!(matches!(
            murphy_curve(&FunctionalSpec::Mean, &[f64::NAN], &[1.0], 1),
            Err(DataError::NonFiniteValue { row: 1, .. })
        ));
    }

    fn spec_strategy() -> impl Strategy<Value = FunctionalSpec> {
        prop_oneof![
            Just(FunctionalSpec::Mean),
            Just(FunctionalSpec::SecondMoment),
            (0.05f64..0.95).prop_map(|a| FunctionalSpec::quantile(a).unwrap()),
            (0.05f64..0.95).prop_map(|t| FunctionalSpec::expectile(t).unwrap()),
        ]
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec(((-20i32..20), (-20i32..20)), 1..40).prop_map(|v| {
            v.into_iter()
                .map(|(a, b)| (a as f64 / 4.0, b as f64 / 4.0))
                .unzip()
        })
    }

    proptest! {
        #[test]
        fn matches_naive_average((z, y) in pairs(), spec in spec_strategy(), etas in prop::collection::vec(-6.0f64..6.0, 20), refinement in 0usize..4) {
            let c = murphy_curve(&spec, &z, &y, refinement).unwrap();
            for &eta in etas.iter().chain(c.knots()) {
                prop_assert!((c.evaluate(eta) - naive(&spec, &z, &y, eta)).abs() <= 1e-12);
            }
        }

        #[test]
        fn vanishes_outside_pooled_range((z, y) in pairs(), spec in spec_strategy()) {
            let c = murphy_curve(&spec, &z, &y, 1).unwrap();
            let (lo, hi) = c.range();
            prop_assert_eq!(c.evaluate(lo), 0.0);
            prop_assert_eq!(c.evaluate(lo - 1.0), 0.0);
            prop_assert_eq!(c.evaluate(hi + 0.5), 0.0);
            prop_assert_eq!(c.right_limit(hi), 0.0);
        }

        #[test]
        fn nonnegative_for_consistent_specs((z, y) in pairs(), spec in spec_strategy()) {
            prop_assume!(spec.has_nonnegative_scores());
            let c = murphy_curve(&spec, &z, &y, 1).unwrap();
            prop_assert!(c.value_at().iter().chain(c.value_right()).all(|&v| v >= 0.0));
        }

        #[test]
        fn right_limit_is_the_limit((z, y) in pairs(), spec in spec_strategy()) {
            let c = murphy_curve(&spec, &z, &y, 0).unwrap();
            for &k in c.knots() {
                let near = c.evaluate(k + 1e-9);
                prop_assert!((c.right_limit(k) - near).abs() < 1e-7);
            }
        }
    }
}
