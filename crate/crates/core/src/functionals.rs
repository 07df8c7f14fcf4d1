//! Identification functions and the functionals they induce.
//!
//! A functional `T` is described by an identification function `V(z, y)`
//! that is non-decreasing and left-continuous in `z`. For a distribution `P`
//! the functional is the interval `[T⁻, T⁺]` where the expected
//! identification value `V̄(z, P)` changes sign. Every `V` also yields a
//! family of elementary scores
//!
//! ```text
//! S_η(z, y) = (1{η ≤ z} − 1{η ≤ y}) · V(η, y)
//! ```
//!
//! which are consistent for `T`; positive mixtures of them are the
//! consistent losses handled in [`crate::mixtures`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("level {0} is outside the open interval (0, 1)")]
    InvalidLevel(f64),
    #[error(
        "unrecognised functional `{0}` (expected mean, moment2, quantile:<a> or expectile:<t>)"
    )]
    UnknownFunctional(String),
    #[error("distribution has no atoms")]
    EmptyDistribution,
    #[error("atom {index} is invalid: value {value}, probability {probability}")]
    InvalidAtom {
        index: usize,
        value: f64,
        probability: f64,
    },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error(
        "expected identification value vanishes on an unbounded set; {side} endpoint is unbounded"
    )]
    DegenerateInterval { side: &'static str },
}

/// A probability level strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Level(f64);

impl Level {
    pub fn new(value: f64) -> Result<Self, FunctionalError> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(FunctionalError::InvalidLevel(value))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Which identifiable functional is being modelled.
///
/// The textual form (`mean`, `moment2`, `quantile:0.25`, `expectile:0.9`) is
/// used on the command line and in JSON configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FunctionalSpec {
    Mean,
    Quantile(Level),
    Expectile(Level),
    SecondMoment,
}

/// `S_η(z, y) = intercept + slope · η` for `η ∈ (lo, hi]`, zero elsewhere.
///
/// All built-in identification functions are affine in `η` on the support of
/// the elementary score, which makes Murphy curves and mixture losses
/// computable in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePiece {
    pub lo: f64,
    pub hi: f64,
    pub intercept: f64,
    pub slope: f64,
}

impl ScorePiece {
    /// `∫_{(lo, hi] ∩ [a, b]} (intercept + slope · η) dη`.
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        let lo = self.lo.max(a);
        let hi = self.hi.min(b);
        if hi <= lo {
            return 0.0;
        }
        self.intercept * (hi - lo) + 0.5 * self.slope * (hi - lo) * (hi + lo)
    }
}

impl FunctionalSpec {
    pub fn quantile(alpha: f64) -> Result<Self, FunctionalError> {
        Ok(Self::Quantile(Level::new(alpha)?))
    }

    pub fn expectile(tau: f64) -> Result<Self, FunctionalError> {
        Ok(Self::Expectile(Level::new(tau)?))
    }

    /// `V(z, y)`.
    pub fn identification_value(&self, z: f64, y: f64) -> f64 {
        match *self {
            Self::Mean => z - y,
            Self::SecondMoment => z - y * y,
            Self::Quantile(alpha) => {
                let below = if y < z { 1.0 } else { 0.0 };
                below - alpha.get()
            }
            Self::Expectile(tau) => {
                let below = if y < z { 1.0 } else { 0.0 };
                2.0 * (below - tau.get()).abs() * (z - y)
            }
        }
    }

    /// `S_η(z, y)` evaluated directly from the indicator definition.
    pub fn elementary_score(&self, eta: f64, z: f64, y: f64) -> f64 {
        let at_z = if eta <= z { 1.0 } else { 0.0 };
        let at_y = if eta <= y { 1.0 } else { 0.0 };
        let weight = at_z - at_y;
        if weight == 0.0 {
            0.0
        } else {
            weight * self.identification_value(eta, y)
        }
    }

    /// Affine representation of `η ↦ S_η(z, y)`; `None` when `z == y`.
    pub fn score_piece(&self, z: f64, y: f64) -> Option<ScorePiece> {
        if z == y {
            return None;
        }
        let (intercept, slope) = if z > y {
            // η ∈ (y, z]: S_η = V(η, y) with η > y.
            match *self {
                Self::Mean => (-y, 1.0),
                Self::SecondMoment => (-y * y, 1.0),
                Self::Quantile(alpha) => (1.0 - alpha.get(), 0.0),
                Self::Expectile(tau) => {
                    let w = 2.0 * (1.0 - tau.get());
                    (-w * y, w)
                }
            }
        } else {
            // η ∈ (z, y]: S_η = −V(η, y) with η ≤ y.
            match *self {
                Self::Mean => (y, -1.0),
                Self::SecondMoment => (y * y, -1.0),
                Self::Quantile(alpha) => (alpha.get(), 0.0),
                Self::Expectile(tau) => (2.0 * tau.get() * y, -2.0 * tau.get()),
            }
        };
        Some(ScorePiece {
            lo: z.min(y),
            hi: z.max(y),
            intercept,
            slope,
        })
    }

    /// Whether every elementary score of this functional is non-negative.
    pub fn has_nonnegative_scores(&self) -> bool {
        !matches!(self, Self::SecondMoment)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Quantile(_) => "quantile",
            Self::Expectile(_) => "expectile",
            Self::SecondMoment => "moment2",
        }
    }

    pub fn level(&self) -> Option<f64> {
        match self {
            Self::Quantile(l) | Self::Expectile(l) => Some(l.get()),
            _ => None,
        }
    }
}

impl fmt::Display for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.level() {
            Some(level) => write!(f, "{}:{}", self.name(), level),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for FunctionalSpec {
    type Err = FunctionalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let unknown = || FunctionalError::UnknownFunctional(s.to_string());
        let (name, level) = match s.split_once(':') {
            Some((name, level)) => (
                name,
                Some(level.trim().parse::<f64>().map_err(|_| unknown())?),
            ),
            None => (s, None),
        };
        match (name.to_ascii_lowercase().as_str(), level) {
            ("mean", None) => Ok(Self::Mean),
            ("moment2" | "second-moment", None) => Ok(Self::SecondMoment),
            ("quantile", Some(a)) => Self::quantile(a),
            ("expectile", Some(t)) => Self::expectile(t),
            _ => Err(unknown()),
        }
    }
}

impl TryFrom<String> for FunctionalSpec {
    type Error = FunctionalError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<FunctionalSpec> for String {
    fn from(spec: FunctionalSpec) -> Self {
        spec.to_string()
    }
}

/// A finitely supported probability distribution, atoms sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, FunctionalError> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(FunctionalError::EmptyDistribution);
        }
        for (index, &(value, probability)) in atoms.iter().enumerate() {
            if !value.is_finite() || !probability.is_finite() || probability < 0.0 {
                return Err(FunctionalError::InvalidAtom {
                    index,
                    value,
                    probability,
                });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FunctionalError::NotNormalized(total));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (value, probability) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == value => last.1 += probability,
                _ => merged.push((value, probability)),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn min(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// `E g(Y)`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(y, p)| p * g(y)).sum()
    }
}

/// `T(P) = [T⁻, T⁺]`, endpoints possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalInterval {
    pub lower: f64,
    pub upper: f64,
}

impl FunctionalInterval {
    pub fn point(value: f64) -> Self {
        Self {
            lower: value,
            upper: value,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lower <= t && t <= self.upper
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }
}

/// `V̄(z, P) = Σ p_i V(z, y_i)`.
pub fn mean_identification_bar(spec: &FunctionalSpec, z: f64, dist: &DiscreteDistribution) -> f64 {
    dist.expect(|y| spec.identification_value(z, y))
}

/// `[sup{z : V̄(z,P) < 0}, inf{z : V̄(z,P) > 0}]` for a discrete `P`.
pub fn functional_interval(
    spec: &FunctionalSpec,
    dist: &DiscreteDistribution,
) -> Result<FunctionalInterval, FunctionalError> {
    match *spec {
        FunctionalSpec::Mean => Ok(FunctionalInterval::point(dist.expect(|y| y))),
        FunctionalSpec::SecondMoment => Ok(FunctionalInterval::point(dist.expect(|y| y * y))),
        FunctionalSpec::Quantile(alpha) => Ok(quantile_interval(alpha.get(), dist)),
        FunctionalSpec::Expectile(_) => {
            let vbar = |z: f64| mean_identification_bar(spec, z, dist);
            let root = bracketed_root(&vbar, dist)?;
            Ok(FunctionalInterval::point(root))
        }
    }
}

/// `P(Y < z) − α` is a left-continuous step function with jumps right after
/// each atom, so both endpoints are atoms.
fn quantile_interval(alpha: f64, dist: &DiscreteDistribution) -> FunctionalInterval {
    let mut cumulative = 0.0;
    let mut lower = None;
    let mut upper = None;
    for &(value, p) in dist.atoms() {
        cumulative += p;
        if lower.is_none() && cumulative >= alpha {
            lower = Some(value);
        }
        if upper.is_none() && cumulative > alpha {
            upper = Some(value);
            break;
        }
    }
    FunctionalInterval {
        lower: lower.unwrap_or(f64::INFINITY),
        upper: upper.unwrap_or(f64::INFINITY),
    }
}

const BISECTION_TOL: f64 = 1e-10;
const MAX_BRACKET_DOUBLINGS: usize = 64;

/// Root of a continuous, strictly increasing `V̄` that is affine between atoms.
///
/// Bisection on `[min − 1, max + 1]` (expanded geometrically until the sign
/// condition holds) localises the root to `BISECTION_TOL`; the final answer
/// is the exact root of the affine piece containing it.
fn bracketed_root(
    vbar: &dyn Fn(f64) -> f64,
    dist: &DiscreteDistribution,
) -> Result<f64, FunctionalError> {
    let mut lo = dist.min() - 1.0;
    let mut hi = dist.max() + 1.0;
    let mut width = 1.0;
    let mut doublings = 0;
    while vbar(lo) >= 0.0 {
        if vbar(lo) == 0.0 && vbar(lo - width) == 0.0 {
            return Err(FunctionalError::DegenerateInterval { side: "lower" });
        }
        width *= 2.0;
        lo -= width;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(FunctionalError::DegenerateInterval { side: "lower" });
        }
    }
    width = 1.0;
    doublings = 0;
    while vbar(hi) <= 0.0 {
        if vbar(hi) == 0.0 && vbar(hi + width) == 0.0 {
            return Err(FunctionalError::DegenerateInterval { side: "upper" });
        }
        width *= 2.0;
        hi += width;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(FunctionalError::DegenerateInterval { side: "upper" });
        }
    }

    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if vbar(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Breakpoints inside the bracket split it into affine pieces.
    let mut points = vec![lo];
    points.extend(
        dist.atoms()
            .iter()
            .map(|a| a.0)
            .filter(|&v| v > lo && v < hi),
    );
    points.push(hi);
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (fa, fb) = (vbar(a), vbar(b));
        if fa == 0.0 {
            return Ok(a);
        }
        if fb == 0.0 {
            return Ok(b);
        }
        if fa < 0.0 && fb > 0.0 {
            let root = a - fa * (b - a) / (fb - fa);
            return Ok(root.clamp(a, b));
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_point() -> DiscreteDistribution {
        DiscreteDistribution::new([(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn identification_examples() {
        assert_eq!(FunctionalSpec::Mean.identification_value(2.0, 0.0), 2.0);
        let median = FunctionalSpec::quantile(0.5).unwrap();
        assert_eq!(median.identification_value(1.0, 1.0), -0.5);
        assert_eq!(
            FunctionalSpec::SecondMoment.identification_value(4.0, -2.0),
            0.0
        );
    }

    #[test]
    fn levels_must_be_interior() {
        assert!(FunctionalSpec::quantile(0.0).is_err());
        assert!(FunctionalSpec::quantile(1.0).is_err());
        assert!(FunctionalSpec::expectile(1.0).is_err());
        assert!(FunctionalSpec::expectile(-0.1).is_err());
        assert!(FunctionalSpec::expectile(f64::NAN).is_err());
    }

    #[test]
    fn parses_textual_form() {
        assert_eq!(
            "mean".parse::<FunctionalSpec>().unwrap(),
            FunctionalSpec::Mean
        );
        assert_eq!(
            "moment2".parse::<FunctionalSpec>().unwrap(),
            FunctionalSpec::SecondMoment
        );
        let q: FunctionalSpec = "quantile:0.25".parse().unwrap();
        assert_eq!(q.level(), Some(0.25));
        assert_eq!(q.to_string(), "quantile:0.25");
        assert!("quantile".parse::<FunctionalSpec>().is_err());
        assert!("expectile:1.5".parse::<FunctionalSpec>().is_err());
        assert!("median".parse::<FunctionalSpec>().is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::new([(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(DiscreteDistribution::new([(f64::NAN, 1.0)]).is_err());
        assert!(DiscreteDistribution::new([(0.0, -0.5), (1.0, 1.5)]).is_err());
        assert!(DiscreteDistribution::new(Vec::new()).is_err());
        let d = DiscreteDistribution::new([(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap();
        assert_eq!(d.atoms(), &[(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn vbar_examples() {
        let d = two_point();
        assert_eq!(mean_identification_bar(&FunctionalSpec::Mean, 0.5, &d), 0.0);
        // V(0.5, 0) = 1 − 0.5, V(0.5, 1) = 0 − 0.5.
        let median = FunctionalSpec::quantile(0.5).unwrap();
        assert_eq!(mean_identification_bar(&median, 0.5, &d), 0.0);
        let sym = DiscreteDistribution::new([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(
            mean_identification_bar(&FunctionalSpec::SecondMoment, 1.0, &sym),
            0.0
        );
    }

    #[test]
    fn interval_examples() {
        let d = two_point();
        assert_eq!(
            functional_interval(&FunctionalSpec::Mean, &d).unwrap(),
            FunctionalInterval::point(0.5)
        );
        let median = FunctionalSpec::quantile(0.5).unwrap();
        let t = functional_interval(&median, &d).unwrap();
        assert_eq!((t.lower, t.upper), (0.0, 1.0));
        let e = functional_interval(&FunctionalSpec::expectile(0.5).unwrap(), &d).unwrap();
        assert!((e.lower - 0.5).abs() < 1e-12 && e.is_point());
    }

    #[test]
    fn expectile_root_on_an_atom() {
        // Symmetric three-point law: every expectile level 0.5 sits on the middle atom.
        let d = DiscreteDistribution::new([(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap();
        let e = functional_interval(&FunctionalSpec::expectile(0.5).unwrap(), &d).unwrap();
        assert_eq!(e.lower, 0.0);
        // On z ∈ (0, 1): V̄(z) = 0.25·2(1−τ)(z+1) + 0.5·2(1−τ)z + 0.25·2τ(z−1).
        let tau = 0.8;
        let e = functional_interval(&FunctionalSpec::expectile(tau).unwrap(), &d).unwrap();
        let expected = (0.5 * tau - 0.5 * (1.0 - tau)) / (1.5 * (1.0 - tau) + 0.5 * tau);
        assert!(expected > 0.0 && expected < 1.0);
        assert!(
            (e.lower - expected).abs() < 1e-14,
            "{} vs {expected}",
            e.lower
        );
    }

    #[test]
    fn elementary_score_examples() {
        assert_eq!(FunctionalSpec::Mean.elementary_score(1.0, 2.0, 0.0), 1.0);
        for spec in all_specs() {
            for eta in [-5.0, 0.0, 3.0, 3.5] {
                assert_eq!(spec.elementary_score(eta, 3.0, 3.0), 0.0);
            }
        }
        let median = FunctionalSpec::quantile(0.5).unwrap();
        // 1{0.5 ≤ 0} − 1{0.5 ≤ 1} = −1, V(0.5, 1) = 0 − 0.5.
        assert_eq!(median.elementary_score(0.5, 0.0, 1.0), 0.5);
        assert_eq!(
            FunctionalSpec::SecondMoment.elementary_score(-1.0, 0.0, -2.0),
            -5.0
        );
    }

    #[test]
    fn score_vanishes_outside_the_pair() {
        for spec in all_specs() {
            assert_eq!(spec.elementary_score(5.0, 1.0, 2.0), 0.0);
            assert_eq!(spec.elementary_score(1.0, 1.0, 2.0), 0.0);
            assert_eq!(spec.elementary_score(0.5, 2.0, 1.0), 0.0);
        }
    }

    pub(crate) fn all_specs() -> Vec<FunctionalSpec> {
        vec![
            FunctionalSpec::Mean,
            FunctionalSpec::quantile(0.3).unwrap(),
            FunctionalSpec::expectile(0.7).unwrap(),
            FunctionalSpec::SecondMoment,
        ]
    }

    fn spec_strategy() -> impl Strategy<Value = FunctionalSpec> {
        prop_oneof![
            Just(FunctionalSpec::Mean),
            Just(FunctionalSpec::SecondMoment),
            (0.01f64..0.99).prop_map(|a| FunctionalSpec::quantile(a).unwrap()),
            (0.01f64..0.99).prop_map(|t| FunctionalSpec::expectile(t).unwrap()),
        ]
    }

    fn dist_strategy() -> impl Strategy<Value = DiscreteDistribution> {
        prop::collection::vec((-5i32..=5, 1u32..10), 1..=5).prop_map(|raw| {
            let total: u32 = raw.iter().map(|r| r.1).sum();
            let mut atoms: Vec<(f64, f64)> = raw
                .iter()
                .map(|&(v, w)| (v as f64 * 0.5, w as f64 / total as f64))
                .collect();
            // Put the rounding residual on the last atom so the sum is exactly 1.
            let head: f64 = atoms[..atoms.len() - 1].iter().map(|a| a.1).sum();
            let last = atoms.len() - 1;
            atoms[last].1 = 1.0 - head;
            DiscreteDistribution::new(atoms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn identification_is_monotone(spec in spec_strategy(), y in -10.0f64..10.0, z1 in -10.0f64..10.0, dz in 0.0f64..5.0) {
            let z2 = z1 + dz;
            prop_assert!(spec.identification_value(z1, y) <= spec.identification_value(z2, y));
        }

        #[test]
        fn score_piece_matches_indicator_form(spec in spec_strategy(), eta in -6.0f64..6.0, z in -5.0f64..5.0, y in -5.0f64..5.0) {
            let direct = spec.elementary_score(eta, z, y);
            let via_piece = match spec.score_piece(z, y) {
                Some(p) if eta > p.lo && eta <= p.hi => p.intercept + p.slope * eta,
                _ => 0.0,
            };
            prop_assert!((direct - via_piece).abs() <= 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn interval_agrees_with_sign_scan(spec in spec_strategy(), dist in dist_strategy()) {
            let t = functional_interval(&spec, &dist).unwrap();
            // Brute force: scan z on a fine grid and locate the sign changes of V̄.
            let step = 1e-3;
            let lo = dist.min() - 2.0;
            let hi = dist.max().max(dist.expect(|y| y * y)) + 2.0;
            let n = ((hi - lo) / step) as usize;
            let mut last_negative = f64::NEG_INFINITY;
            let mut first_positive = f64::INFINITY;
            for k in 0..=n {
                let z = lo + k as f64 * step;
                let v = mean_identification_bar(&spec, z, &dist);
                if v < 0.0 { last_negative = z; }
                if v > 0.0 && first_positive.is_infinite() { first_positive = z; }
            }
            prop_assert!((t.lower - last_negative).abs() <= step + 1e-9, "{:?} {}", t, last_negative);
            prop_assert!((t.upper - first_positive).abs() <= step + 1e-9, "{:?} {}", t, first_positive);
        }

        #[test]
        fn elementary_scores_are_consistent(spec in spec_strategy(), dist in dist_strategy(), eta in -4.0f64..4.0) {
            let t = functional_interval(&spec, &dist).unwrap();
            let risk = |z: f64| dist.expect(|y| spec.elementary_score(eta, z, y));
            let candidates = [t.lower, t.upper, 0.5 * (t.lower + t.upper)];
            for &tv in candidates.iter().filter(|v| v.is_finite()) {
                for k in 0..=40 {
                    let z = -3.0 + 0.15 * k as f64;
                    prop_assert!(risk(tv) <= risk(z) + 1e-12);
                }
            }
        }

        #[test]
        fn nonnegativity_except_second_moment(spec in spec_strategy(), eta in -6.0f64..6.0, z in -5.0f64..5.0, y in -5.0f64..5.0) {
            if spec.has_nonnegative_scores() {
                prop_assert!(spec.elementary_score(eta, z, y) >= 0.0);
            }
        }
    }
}
