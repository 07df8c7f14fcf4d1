//! Parametric prediction maps `m(x; β)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} values for {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("intercept shift is not supported: {0}")]
    Unsupported(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("parameter {0} lies outside the parameter space")]
    OutsideParameterSpace(ParamVector),
}

/// A parameter vector `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Self(coords.into())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Open interval `(lo, hi)` for one parameter coordinate; `None` is unbounded.
pub type Bound = (Option<f64>, Option<f64>);

/// What a parameter coordinate does; used to scale default search boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinateRole {
    /// Additive level of the prediction.
    Intercept,
    /// Coefficient of covariate `j` (0-based).
    Slope(usize),
    Other,
}

/// Anything that maps `(β, x)` to a real prediction.
///
/// Estimation, Murphy curves and calibration only talk to models through
/// this trait, so user-defined families can be plugged in.
pub trait PredictionModel: Send + Sync {
    /// Length of `β`.
    fn parameter_dim(&self) -> usize;

    /// Length of `x`, or `None` when the model ignores covariates.
    fn covariate_dim(&self) -> Option<usize>;

    /// `m(x; β)` without dimension checks.
    fn predict_unchecked(&self, beta: &[f64], x: &[f64]) -> f64;

    /// Open per-coordinate bounds of the parameter space.
    fn bounds(&self) -> Vec<Bound> {
        vec![(None, None); self.parameter_dim()]
    }

    fn coordinate_role(&self, _k: usize) -> CoordinateRole {
        CoordinateRole::Other
    }

    /// `β′` with `m(·; β′) = m(·; β) + a`.
    fn shift(&self, _beta: &ParamVector, _a: f64) -> Result<ParamVector, ModelError> {
        Err(ModelError::Unsupported("model has no intercept coordinate"))
    }

    /// Whether intercept shifts are available at all (the precondition of
    /// the all-η calibration guarantee).
    fn supports_shift(&self) -> bool {
        false
    }

    fn check_beta(&self, beta: &[f64]) -> Result<(), ModelError> {
        if beta.len() != self.parameter_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "parameters",
                expected: self.parameter_dim(),
                got: beta.len(),
            });
        }
        Ok(())
    }

    /// `m(x; β)` with dimension checks.
    fn predict(&self, beta: &ParamVector, x: &[f64]) -> Result<f64, ModelError> {
        self.check_beta(beta.as_slice())?;
        if let Some(d) = self.covariate_dim() {
            if x.len() != d {
                return Err(ModelError::DimensionMismatch {
                    what: "covariates",
                    expected: d,
                    got: x.len(),
                });
            }
        }
        Ok(self.predict_unchecked(beta.as_slice(), x))
    }

    /// Finite and strictly inside the open bounds.
    fn contains(&self, beta: &[f64]) -> bool {
        beta.len() == self.parameter_dim()
            && beta.iter().all(|v| v.is_finite())
            && beta
                .iter()
                .zip(self.bounds())
                .all(|(&v, (lo, hi))| lo.is_none_or(|l| v > l) && hi.is_none_or(|h| v < h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `m(x; β) = β₀`.
    Constant,
    /// `m(x; β) = β · x`.
    LinearNoIntercept { dim: usize },
    /// `m(x; β) = β₀ + β₁..d · x`.
    LinearWithIntercept { dim: usize },
}

/// Built-in model families.
///
/// JSON form: `{"family":"linear","intercept":true,"dim":1,"bounds":[[null,null],[0,null]]}`
/// or `{"family":"constant"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily", into = "RawFamily")]
pub struct ModelFamily {
    kind: ModelKind,
    bounds: Option<Vec<Bound>>,
    shift_radius: f64,
}

#[derive(Serialize, Deserialize)]
struct RawFamily {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intercept: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<Vec<Bound>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift_radius: Option<f64>,
}

impl TryFrom<RawFamily> for ModelFamily {
    type Error = ModelError;

    fn try_from(raw: RawFamily) -> Result<Self, Self::Error> {
        let kind = match raw.family.to_ascii_lowercase().as_str() {
            "constant" => ModelKind::Constant,
            "linear" => {
                let dim = raw.dim.unwrap_or(1);
                if raw.intercept.unwrap_or(true) {
                    ModelKind::LinearWithIntercept { dim }
                } else {
                    ModelKind::LinearNoIntercept { dim }
                }
            }
            other => {
                return Err(ModelError::InvalidModel(format!(
                    "unknown family `{other}`"
                )))
            }
        };
        let mut family = ModelFamily::new(kind)?;
        if let Some(bounds) = raw.bounds {
            family = family.with_bounds(bounds)?;
        }
        if let Some(radius) = raw.shift_radius {
            family = family.with_shift_radius(radius)?;
        }
        Ok(family)
    }
}

impl From<ModelFamily> for RawFamily {
    fn from(f: ModelFamily) -> Self {
        let (family, intercept, dim) = match f.kind {
            ModelKind::Constant => ("constant", None, None),
            ModelKind::LinearNoIntercept { dim } => ("linear", Some(false), Some(dim)),
            ModelKind::LinearWithIntercept { dim } => ("linear", Some(true), Some(dim)),
        };
        RawFamily {
            family: family.to_string(),
            intercept,
            dim,
            bounds: f.bounds,
            shift_radius: f.shift_radius.is_finite().then_some(f.shift_radius),
        }
    }
}

impl ModelFamily {
    pub fn new(kind: ModelKind) -> Result<Self, ModelError> {
        match kind {
            ModelKind::LinearNoIntercept { dim: 0 } | ModelKind::LinearWithIntercept { dim: 0 } => {
                Err(ModelError::InvalidModel(
                    "linear families need dim ≥ 1".into(),
                ))
            }
            _ => Ok(Self {
                kind,
                bounds: None,
                shift_radius: f64::INFINITY,
            }),
        }
    }

    pub fn constant() -> Self {
        Self::new(ModelKind::Constant).expect("constant family is always valid")
    }

    pub fn linear(dim: usize, intercept: bool) -> Result<Self, ModelError> {
        if intercept {
            Self::new(ModelKind::LinearWithIntercept { dim })
        } else {
            Self::new(ModelKind::LinearNoIntercept { dim })
        }
    }

    /// Restricts `β` to an open box; every finite pair needs `lo < hi`.
    pub fn with_bounds(mut self, bounds: Vec<Bound>) -> Result<Self, ModelError> {
        if bounds.len() != self.parameter_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "bounds",
                expected: self.parameter_dim(),
                got: bounds.len(),
            });
        }
        for &(lo, hi) in &bounds {
            if lo.is_some_and(f64::is_nan) || hi.is_some_and(f64::is_nan) {
                return Err(ModelError::InvalidModel("NaN bound".into()));
            }
            if let (Some(l), Some(h)) = (lo, hi) {
                if l >= h {
                    return Err(ModelError::InvalidModel(format!("empty bound ({l}, {h})")));
                }
            }
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    /// Largest `|a|` accepted by [`PredictionModel::shift`].
    pub fn with_shift_radius(mut self, radius: f64) -> Result<Self, ModelError> {
        if !(radius > 0.0) {
            return Err(ModelError::InvalidModel(format!(
                "shift radius {radius} must be positive"
            )));
        }
        self.shift_radius = radius;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    fn intercept_index(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Constant | ModelKind::LinearWithIntercept { .. } => Some(0),
            ModelKind::LinearNoIntercept { .. } => None,
        }
    }
}

impl PredictionModel for ModelFamily {
    fn parameter_dim(&self) -> usize {
        match self.kind {
            ModelKind::Constant => 1,
            ModelKind::LinearNoIntercept { dim } => dim,
            ModelKind::LinearWithIntercept { dim } => dim + 1,
        }
    }

    fn covariate_dim(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Constant => None,
            ModelKind::LinearNoIntercept { dim } | ModelKind::LinearWithIntercept { dim } => {
                Some(dim)
            }
        }
    }

    #[inline]
    fn predict_unchecked(&self, beta: &[f64], x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Constant => beta[0],
            ModelKind::LinearNoIntercept { .. } => beta.iter().zip(x).map(|(b, v)| b * v).sum(),
            ModelKind::LinearWithIntercept { .. } => {
                beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
        }
    }

    fn bounds(&self) -> Vec<Bound> {
        self.bounds
            .clone()
            .unwrap_or_else(|| vec![(None, None); self.parameter_dim()])
    }

    fn coordinate_role(&self, k: usize) -> CoordinateRole {
        match self.kind {
            ModelKind::Constant => CoordinateRole::Intercept,
            ModelKind::LinearNoIntercept { .. } => CoordinateRole::Slope(k),
            ModelKind::LinearWithIntercept { .. } if k == 0 => CoordinateRole::Intercept,
            ModelKind::LinearWithIntercept { .. } => CoordinateRole::Slope(k - 1),
        }
    }

    fn shift(&self, beta: &ParamVector, a: f64) -> Result<ParamVector, ModelError> {
        self.check_beta(beta.as_slice())?;
        let index = self
            .intercept_index()
            .ok_or(ModelError::Unsupported("model has no intercept coordinate"))?;
        if !(a.abs() < self.shift_radius) {
            return Err(ModelError::Unsupported("shift exceeds the declared radius"));
        }
        let mut shifted = beta.clone();
        shifted.0[index] += a;
        if !self.contains(shifted.as_slice()) {
            return Err(ModelError::Unsupported(
                "shifted parameter leaves the parameter space",
            ));
        }
        Ok(shifted)
    }

    fn supports_shift(&self) -> bool {
        self.intercept_index().is_some()
    }
}
