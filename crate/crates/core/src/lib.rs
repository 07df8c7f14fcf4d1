//! Elicitable functionals, their consistent losses, and what they say about
//! semi-parametric models.
//!
//! The crate is organised bottom-up:
//!
//! - [`functionals`]: identification functions `V(z, y)`, the induced
//!   (possibly interval-valued) functional of a discrete distribution, and the
//!   elementary scores `S_η`.
//! - [`mixtures`]: positive mixing measures `H`, the mixture loss
//!   `L_H = ∫ S_η dH(η)`, and Bregman losses.
//! - [`models`]: parametric prediction maps `m(x; β)`.
//! - [`empirics`]: datasets, Murphy curves, empirical risks, and multistart
//!   M-estimation.
//! - [`pareto`]: dominance between parameters and Pareto filtering.
//! - [`calibration`]: the binned identification diagnostic and the
//!   all-η harness.
//! - [`synthetic`]: seeded data generators with analytic oracles.

// `!(a < b)` deliberately rejects NaN along with the failed comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod empirics;
pub mod functionals;
pub mod mixtures;
pub mod models;
pub mod pareto;
pub mod quadrature;
pub mod synthetic;

pub use calibration::{
    calibration_diagnostic, theorem1_harness, Binning, CalibrationError, CalibrationReport,
    HarnessReport,
};
pub use empirics::{
    empirical_risk, fit, fit_elementary, load_dataset, murphy_curve, DataError, Dataset, FitError,
    FitResult, MurphyCurve, OptimizerConfig,
};
pub use functionals::{
    functional_interval, mean_identification_bar, DiscreteDistribution, FunctionalError,
    FunctionalInterval, FunctionalSpec,
};
pub use mixtures::{
    bregman_loss, mixture_from_generator, mixture_loss, BregmanGenerator, MixtureError,
    MixtureMeasure,
};
pub use models::{ModelError, ModelFamily, ParamVector, PredictionModel};
pub use pareto::{dominates, eta_scan, pareto_filter, DominanceVerdict, ParetoError, ParetoSet};
