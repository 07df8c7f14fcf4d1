//! Mixture (Choquet) losses `L_H(z, y) = ∫ S_η(z, y) dH(η)` and Bregman losses.
//!
//! `H` is restricted to finitely many atoms plus a piecewise-constant density
//! on finitely many disjoint segments. That is enough to express elementary
//! scores (single atoms), squared error and pinball losses on a window
//! (Lebesgue segments), and discretised Bregman losses (via
//! [`mixture_from_generator`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::FunctionalSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixtureError {
    #[error("atom {index} has invalid location {eta} or weight {weight}")]
    InvalidAtom { index: usize, eta: f64, weight: f64 },
    #[error("segment {index} [{lo}, {hi}] with density {density} is invalid")]
    InvalidSegment {
        index: usize,
        lo: f64,
        hi: f64,
        density: f64,
    },
    #[error("segments [{0}, {1}] and [{2}, {3}] overlap")]
    OverlappingSegments(f64, f64, f64, f64),
    #[error(
        "tabulated generator needs at least two points with strictly increasing, finite abscissae"
    )]
    InvalidTable,
    #[error(
        "tabulated generator is not convex near t = {at} (second difference {second_difference})"
    )]
    NonConvex { at: f64, second_difference: f64 },
    #[error("{value} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("window [{lo}, {hi}] with resolution {resolution} is invalid")]
    InvalidWindow { lo: f64, hi: f64, resolution: usize },
}

/// A piece of Lebesgue density `density` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

/// A positive measure `H` made of atoms and piecewise-constant density.
///
/// Serialises as `{"atoms": [[eta, w], ...], "segments": [[lo, hi, density], ...]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct MixtureMeasure {
    atoms: Vec<(f64, f64)>,
    /// Sorted by `lo`, disjoint interiors.
    segments: Vec<Segment>,
}

#[derive(Serialize, Deserialize)]
struct RawMixture {
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    segments: Vec<(f64, f64, f64)>,
}

impl TryFrom<RawMixture> for MixtureMeasure {
    type Error = MixtureError;

    fn try_from(raw: RawMixture) -> Result<Self, Self::Error> {
        let segments = raw
            .segments
            .into_iter()
            .map(|(lo, hi, density)| Segment { lo, hi, density })
            .collect();
        MixtureMeasure::new(raw.atoms, segments)
    }
}

impl From<MixtureMeasure> for RawMixture {
    fn from(m: MixtureMeasure) -> Self {
        RawMixture {
            atoms: m.atoms,
            segments: m
                .segments
                .into_iter()
                .map(|s| (s.lo, s.hi, s.density))
                .collect(),
        }
    }
}

impl MixtureMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, mut segments: Vec<Segment>) -> Result<Self, MixtureError> {
        for (index, &(eta, weight)) in atoms.iter().enumerate() {
            if !eta.is_finite() || !weight.is_finite() || weight < 0.0 {
                return Err(MixtureError::InvalidAtom { index, eta, weight });
            }
        }
        for (index, s) in segments.iter().enumerate() {
            let ok = s.lo.is_finite()
                && s.hi.is_finite()
                && s.lo < s.hi
                && s.density.is_finite()
                && s.density >= 0.0;
            if !ok {
                return Err(MixtureError::InvalidSegment {
                    index,
                    lo: s.lo,
                    hi: s.hi,
                    density: s.density,
                });
            }
        }
        segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for pair in segments.windows(2) {
            if pair[0].hi > pair[1].lo {
                return Err(MixtureError::OverlappingSegments(
                    pair[0].lo, pair[0].hi, pair[1].lo, pair[1].hi,
                ));
            }
        }
        Ok(Self { atoms, segments })
    }

    /// The zero measure.
    pub fn empty() -> Self {
        Self::default()
    }

    /// A single atom of weight `weight` at `eta`; `L_H = weight · S_η`.
    pub fn atom(eta: f64, weight: f64) -> Result<Self, MixtureError> {
        Self::new(vec![(eta, weight)], Vec::new())
    }

    /// Lebesgue measure with constant `density` on `[lo, hi]`.
    pub fn lebesgue(lo: f64, hi: f64, density: f64) -> Result<Self, MixtureError> {
        Self::new(Vec::new(), vec![Segment { lo, hi, density }])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.1 == 0.0) && self.segments.iter().all(|s| s.density == 0.0)
    }

    /// Density of the absolutely continuous part at `eta` (segments are
    /// half-open `[lo, hi)` for this lookup, the last one closed).
    pub fn density_at(&self, eta: f64) -> f64 {
        let last = self.segments.len().saturating_sub(1);
        self.segments
            .iter()
            .enumerate()
            .find(|(i, s)| s.lo <= eta && (eta < s.hi || (*i == last && eta == s.hi)))
            .map_or(0.0, |(_, s)| s.density)
    }

    /// `c · H`.
    pub fn scaled(&self, c: f64) -> Result<Self, MixtureError> {
        Self::new(
            self.atoms.iter().map(|&(e, w)| (e, c * w)).collect(),
            self.segments
                .iter()
                .map(|s| Segment {
                    density: c * s.density,
                    ..*s
                })
                .collect(),
        )
    }

    /// `H₁ + H₂`, splitting overlapping segments at their breakpoints.
    pub fn combine(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let all: Vec<Segment> = self
            .segments
            .iter()
            .chain(&other.segments)
            .copied()
            .collect();
        let mut cuts: Vec<f64> = all.iter().flat_map(|s| [s.lo, s.hi]).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut segments = Vec::new();
        for pair in cuts.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let mid = 0.5 * (lo + hi);
            let density: f64 = all
                .iter()
                .filter(|s| s.lo <= mid && mid < s.hi)
                .map(|s| s.density)
                .sum();
            if density > 0.0 {
                segments.push(Segment { lo, hi, density });
            }
        }
        Self { atoms, segments }
    }
}

/// `L_H(z, y) = Σ_atoms w · S_η(z, y) + Σ_segments density · ∫_{(min, max]} S_η(z, y) dη`.
///
/// Every built-in identification function is affine in `η` on the support of
/// `S_η(z, y)`, so segment integrals are evaluated in closed form.
pub fn mixture_loss(spec: &FunctionalSpec, mixture: &MixtureMeasure, z: f64, y: f64) -> f64 {
    let Some(piece) = spec.score_piece(z, y) else {
        return 0.0;
    };
    let mut total = 0.0;
    for &(eta, weight) in &mixture.atoms {
        if weight != 0.0 && eta > piece.lo && eta <= piece.hi {
            total += weight * spec.elementary_score(eta, z, y);
        }
    }
    let segments = &mixture.segments;
    let start = segments.partition_point(|s| s.hi <= piece.lo);
    for s in segments[start..].iter().take_while(|s| s.lo < piece.hi) {
        if s.density != 0.0 {
            total += s.density * piece.integral_over(s.lo, s.hi);
        }
    }
    total
}

/// Convex generator `φ` of a Bregman loss.
#[derive(Debug, Clone, PartialEq)]
pub enum BregmanGenerator {
    /// `φ(t) = t²`, giving squared error.
    Square,
    /// `φ(t) = t⁴`.
    Quartic,
    /// Piecewise-linear interpolation of `(t, φ(t))` pairs.
    Tabulated(Vec<(f64, f64)>),
}

impl BregmanGenerator {
    /// Validates abscissae and convexity (slope increments ≥ −1e−10).
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self, MixtureError> {
        if points.len() < 2
            || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite())
            || points.windows(2).any(|w| w[0].0 >= w[1].0)
        {
            return Err(MixtureError::InvalidTable);
        }
        for w in points.windows(3) {
            let left = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let right = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            if right - left < -1e-10 {
                return Err(MixtureError::NonConvex {
                    at: w[1].0,
                    second_difference: right - left,
                });
            }
        }
        Ok(Self::Tabulated(points))
    }

    fn check_range(&self, t: f64) -> Result<(), MixtureError> {
        if let Self::Tabulated(points) = self {
            let (lo, hi) = (points[0].0, points[points.len() - 1].0);
            if !(lo..=hi).contains(&t) {
                return Err(MixtureError::OutOfRange { value: t, lo, hi });
            }
        }
        Ok(())
    }

    /// `φ(t)`; tabulated generators are extended linearly past their ends.
    pub fn phi(&self, t: f64) -> f64 {
        match self {
            Self::Square => t * t,
            Self::Quartic => t * t * t * t,
            Self::Tabulated(points) => {
                let k = segment_index(points, t);
                let (a, b) = (points[k], points[k + 1]);
                a.1 + (b.1 - a.1) / (b.0 - a.0) * (t - a.0)
            }
        }
    }

    /// `φ′(t)`; for tabulated generators the slope of the segment ending at `t`.
    pub fn slope(&self, t: f64) -> f64 {
        match self {
            Self::Square => 2.0 * t,
            Self::Quartic => 4.0 * t * t * t,
            Self::Tabulated(points) => {
                let k = segment_index(points, t);
                let (a, b) = (points[k], points[k + 1]);
                (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }
}

/// Index `k` of the table segment `(t_k, t_{k+1}]` containing `t`, clamped to
/// the first and last segment.
fn segment_index(points: &[(f64, f64)], t: f64) -> usize {
    let upper = points.partition_point(|p| p.0 < t);
    upper.clamp(1, points.len() - 1) - 1
}

/// `L_φ(z, y) = φ(y) − φ(z) − φ′(z)(y − z)`.
pub fn bregman_loss(generator: &BregmanGenerator, z: f64, y: f64) -> Result<f64, MixtureError> {
    generator.check_range(z)?;
    generator.check_range(y)?;
    let loss = generator.phi(y) - generator.phi(z) - generator.slope(z) * (y - z);
    Ok(loss.max(0.0))
}

/// Density `φ″` on `[lo, hi]` as a piecewise-constant mixture.
///
/// Nodes `t_k = lo + k·h`, `h = (hi − lo)/resolution`, each carry the density
/// `(φ(t_k − h) − 2φ(t_k) + φ(t_k + h)) / h²` on the cell `[t_k − h/2, t_k + h/2]`
/// clipped to the window.
pub fn mixture_from_generator(
    generator: &BregmanGenerator,
    window: (f64, f64),
    resolution: usize,
) -> Result<MixtureMeasure, MixtureError> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || resolution < 2 {
        return Err(MixtureError::InvalidWindow { lo, hi, resolution });
    }
    let h = (hi - lo) / resolution as f64;
    let node = |k: usize| lo + k as f64 * h;
    let boundary = |k: usize| -> f64 {
        if k == 0 {
            lo
        } else if k > resolution {
            hi
        } else {
            lo + (k as f64 - 0.5) * h
        }
    };
    let mut segments = Vec::with_capacity(resolution + 1);
    for k in 0..=resolution {
        let t = node(k);
        let second = generator.phi(t - h) - 2.0 * generator.phi(t) + generator.phi(t + h);
        if second < -1e-10 {
            return Err(MixtureError::NonConvex {
                at: t,
                second_difference: second,
            });
        }
        segments.push(Segment {
            lo: boundary(k),
            hi: boundary(k + 1),
            density: second.max(0.0) / (h * h),
        });
    }
    MixtureMeasure::new(Vec::new(), segments)
}
