//! Seeded data generators and the analytic oracles that go with them.
//!
//! Three processes, all with `X ~ N(0, 1)`:
//!
//! - `Quadratic`: `Y = X² + ε`, `ε ~ N(0, 1)`;
//! - `Logistic`: `Y = eˣ/(1 + eˣ) + σε`;
//! - `Cubic`: `Y = X³ + σε`.
//!
//! For a linear model fitted with elementary scores at level `η`, the
//! minimisers are lines crossing the regression function where it equals
//! `η`; the tangent lines are the Pareto-optimal ones.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empirics::Dataset;
use crate::quadrature::integrate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntheticError {
    #[error("sample size must be ≥ 1")]
    EmptySample,
    #[error("noise sd {0} is invalid for this example")]
    InvalidNoise(f64),
    #[error("unknown example `{0}` (expected quadratic, logistic or cubic)")]
    UnknownExample(String),
    #[error("slope b = 0 has no derivative formula")]
    ZeroSlope,
    #[error("η = {0} is outside the open interval (0, 1)")]
    OutOfRange(f64),
    #[error("slope must be positive and finite, got {0}")]
    InvalidSlope(f64),
    #[error("window [{0}, {1}] is empty or not finite")]
    InvalidWindow(f64, f64),
    #[error("a root pair near η = {near} is narrower than the grid; raise the resolution")]
    WindowTooCoarse { near: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleKind {
    Quadratic,
    Logistic,
    Cubic,
}

impl ExampleKind {
    /// Default additive noise level.
    pub fn default_noise_sd(self) -> f64 {
        match self {
            ExampleKind::Quadratic => 1.0,
            ExampleKind::Logistic | ExampleKind::Cubic => 0.5,
        }
    }

    /// `E[Y | X = x]`.
    pub fn regression(self, x: f64) -> f64 {
        match self {
            ExampleKind::Quadratic => x * x,
            ExampleKind::Logistic => logistic(x),
            ExampleKind::Cubic => x * x * x,
        }
    }

    fn stream(self) -> u64 {
        match self {
            ExampleKind::Quadratic => 1,
            ExampleKind::Logistic => 2,
            ExampleKind::Cubic => 3,
        }
    }
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleKind::Quadratic => "quadratic",
            ExampleKind::Logistic => "logistic",
            ExampleKind::Cubic => "cubic",
        })
    }
}

impl FromStr for ExampleKind {
    type Err = SyntheticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quadratic" => Ok(ExampleKind::Quadratic),
            "logistic" => Ok(ExampleKind::Logistic),
            "cubic" => Ok(ExampleKind::Cubic),
            other => Err(SyntheticError::UnknownExample(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: ExampleKind,
    pub n: usize,
    pub seed: u64,
    pub noise_sd: f64,
}

impl GeneratorSpec {
    /// A spec with the example's default noise level.
    pub fn new(kind: ExampleKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            seed,
            noise_sd: kind.default_noise_sd(),
        }
    }

    pub fn with_noise_sd(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Draws `(x_i, y_i)` from one ChaCha8 stream keyed by `(kind, seed)`;
/// each row consumes `x_i` then `ε_i`.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset, SyntheticError> {
    if spec.n == 0 {
        return Err(SyntheticError::EmptySample);
    }
    let sd = spec.noise_sd;
    let quadratic_ok = spec.kind != ExampleKind::Quadratic || sd == 1.0;
    if !(sd >= 0.0 && sd.is_finite()) || !quadratic_ok {
        return Err(SyntheticError::InvalidNoise(sd));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.kind.stream());
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi: f64 = StandardNormal.sample(&mut rng);
        let eps: f64 = StandardNormal.sample(&mut rng);
        let mean = spec.kind.regression(xi);
        x.push(xi);
        y.push(if sd == 0.0 { mean } else { mean + sd * eps });
    }
    Ok(Dataset::univariate(x, y).expect("generated samples are finite"))
}

/// Minimisers `b` of `E S_η(bX, Y)` for the quadratic example.
pub fn oracle_b_eta_quadratic(eta: f64) -> Vec<f64> {
    if eta > 0.0 {
        let r = eta.sqrt();
        vec![-r, r]
    } else {
        vec![0.0]
    }
}

/// Integration cut-off for the standard normal density.
const TAIL: f64 = 14.0;

/// `E 1{η ≤ bX}(η − X²)` by adaptive quadrature.
///
/// This is the population elementary risk of `bX` for the quadratic example,
/// up to a term that does not depend on `b`.
pub fn quadratic_objective(b: f64, eta: f64) -> f64 {
    let integrand = |x: f64| (eta - x * x) * normal_pdf(x);
    if b == 0.0 {
        return if eta <= 0.0 { eta - 1.0 } else { 0.0 };
    }
    let t = eta / b;
    let (lo, hi) = if b > 0.0 {
        (t.max(-TAIL), TAIL)
    } else {
        (-TAIL, t.min(TAIL))
    };
    if lo >= hi {
        return 0.0;
    }
    integrate(integrand, lo, hi, 1e-15, 1e-13)
}

/// Fourth-order central difference of [`quadratic_objective`] in `b`, with a
/// step proportional to `|b|/(1 + (η/b)²)`, the scale on which it varies.
pub fn quadratic_objective_fd(eta: f64, b: f64) -> f64 {
    let t = eta / b;
    let h = 1e-3 * b.abs() / (1.0 + t * t);
    central_difference_with(|b| quadratic_objective(b, eta), b, h)
}

fn central_difference_with(f: impl Fn(f64) -> f64, b: f64, h: f64) -> f64 {
    (f(b - 2.0 * h) - 8.0 * f(b - h) + 8.0 * f(b + h) - f(b + 2.0 * h)) / (12.0 * h)
}

/// `∂/∂b` of [`quadratic_objective`].
pub fn quadratic_objective_derivative(b: f64, eta: f64) -> Result<f64, SyntheticError> {
    if b == 0.0 {
        return Err(SyntheticError::ZeroSlope);
    }
    let core = eta * eta * normal_pdf(eta / b) / b.powi(4);
    Ok(if b > 0.0 {
        (b * b - eta) * core
    } else {
        (eta - b * b) * core
    })
}

/// A tangent line `β₀ + β₁x` at level `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub eta: f64,
    pub beta0: f64,
    pub beta1: f64,
    /// The slope is strictly positive, as the parameter space requires.
    pub admissible: bool,
}

/// Tangent line to the logistic curve where it equals `η ∈ (0, 1)`.
pub fn oracle_frontier_logistic(eta: f64) -> Result<FrontierPoint, SyntheticError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(SyntheticError::OutOfRange(eta));
    }
    let beta1 = eta * (1.0 - eta);
    let beta0 = eta * (1.0 - (1.0 - eta) * (eta / (1.0 - eta)).ln());
    Ok(FrontierPoint {
        eta,
        beta0,
        beta1,
        admissible: true,
    })
}

/// Tangent line to `x³` where it equals `η`; `η = 0` gives slope 0.
pub fn oracle_frontier_cubic(eta: f64) -> FrontierPoint {
    let beta1 = 3.0 * (eta * eta).cbrt();
    FrontierPoint {
        eta,
        beta0: -2.0 * eta,
        beta1,
        admissible: beta1 > 0.0,
    }
}

/// The regression curve whose crossings with a line are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Logistic,
    Cubic,
}

impl Link {
    fn apply(self, x: f64) -> f64 {
        match self {
            Link::Logistic => logistic(x),
            Link::Cubic => x * x * x,
        }
    }
}

/// Tolerance below which a non-crossing local minimum of `|h|` is a root.
pub const TANGENT_TOL: f64 = 1e-8;

/// Number of roots of `h(η) = η − g((η − β₀)/β₁)` in `[lo, hi]`.
///
/// Sign changes between the `resolution + 1` grid points count one root
/// each, and grid points with `h = 0` count once. Between those, every
/// local minimum of `|h|` without a sign change is refined by golden-section
/// search; it counts as a tangential root when `|h| < 1e-8`, and a sign
/// change found inside the cell means two roots the grid cannot separate.
pub fn zero_count(
    g: Link,
    beta0: f64,
    beta1: f64,
    window: (f64, f64),
    resolution: usize,
) -> Result<usize, SyntheticError> {
    if !(beta1 > 0.0 && beta1.is_finite()) {
        return Err(SyntheticError::InvalidSlope(beta1));
    }
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(SyntheticError::InvalidWindow(lo, hi));
    }
    let h = |eta: f64| eta - g.apply((eta - beta0) / beta1);
    let r = resolution.max(2);
    let grid: Vec<f64> = (0..=r)
        .map(|k| lo + (hi - lo) * k as f64 / r as f64)
        .collect();
    let v: Vec<f64> = grid.iter().map(|&e| h(e)).collect();

    let mut count = v.iter().filter(|&&x| x == 0.0).count();
    count += v.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    for k in 1..r {
        let (a, b, c) = (v[k - 1], v[k], v[k + 1]);
        let same_sign = a * b > 0.0 && b * c > 0.0;
        if !same_sign || b.abs() > a.abs() || b.abs() > c.abs() {
            continue;
        }
        let s = b.signum();
        let (m, value) = golden_min(|e| s * h(e), grid[k - 1], grid[k + 1]);
        if value < -TANGENT_TOL {
            return Err(SyntheticError::WindowTooCoarse { near: m });
        }
        if value < TANGENT_TOL {
            count += 1;
        }
    }
    Ok(count)
}

/// Minimum of a unimodal `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if fc < -TANGENT_TOL {
            return (c, fc);
        }
        if fd < -TANGENT_TOL {
            return (d, fd);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
