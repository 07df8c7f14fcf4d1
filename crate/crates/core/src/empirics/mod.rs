//! Samples, empirical Murphy curves, empirical risks, and M-estimation.

mod dataset;
mod fit;
mod murphy;
mod simplex;
mod window;

pub use dataset::{load_dataset, read_dataset, DataError, Dataset, LoadReport, Schema};
pub use fit::{
    effective_eta_window, empirical_elementary_risk, empirical_risk, fit, fit_elementary,
    predictions, search_box, FitError, FitResult, OptimizerConfig, MAX_PARAMETER_DIM,
};
pub use murphy::{delta_right, fingerprint, murphy_curve, MurphyCurve, DEFAULT_REFINEMENT};
pub use window::{window_mixture, WINDOW_LADDER};
