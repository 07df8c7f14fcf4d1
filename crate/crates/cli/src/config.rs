//! Run configuration: JSON file, echoed output headers, and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use elicit::synthetic::ExampleKind;
use elicit::{FunctionalSpec, MixtureMeasure, ModelFamily, OptimizerConfig, ParamVector};
use serde::{Deserialize, Serialize};

use crate::grid::Range;

/// Everything that determines a run's output.
///
/// Output paths are accepted from JSON but never echoed, so an output file
/// does not depend on where it was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub functional: FunctionalSpec,
    pub model: ModelFamily,
    pub mixture: Option<MixtureMeasure>,
    pub beta: Option<ParamVector>,
    pub eta_grid: Option<Range>,
    pub optimizer: OptimizerConfig,
    /// Dominance tolerance; filled from the half-sample estimate when absent.
    pub tolerance: Option<f64>,
    pub bins: usize,
    pub equal_width: bool,
    pub z_threshold: f64,
    pub refinement: usize,
    pub seed: u64,
    pub example: Option<ExampleKind>,
    pub n: Option<usize>,
    pub noise_sd: Option<f64>,
    /// `b0=lo:hi:step,b1=lo:hi:step`.
    pub candidates: Option<String>,
    pub candidates_file: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub svg: Option<PathBuf>,
    /// Secondary JSON output (`pareto`).
    #[serde(skip_serializing)]
    pub json: Option<PathBuf>,
    /// Secondary plot-data CSV (`calibrate`).
    #[serde(skip_serializing)]
    pub plot_csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            functional: FunctionalSpec::Mean,
            model: ModelFamily::linear(1, true).expect("dimension 1 is valid"),
            mixture: None,
            beta: None,
            eta_grid: None,
            optimizer: OptimizerConfig::default(),
            tolerance: None,
            bins: elicit::calibration::DEFAULT_BINS,
            equal_width: false,
            z_threshold: elicit::calibration::DEFAULT_Z_THRESHOLD,
            refinement: elicit::empirics::DEFAULT_REFINEMENT,
            seed: 42,
            example: None,
            n: None,
            noise_sd: None,
            candidates: None,
            candidates_file: None,
            out: None,
            svg: None,
            json: None,
            plot_csv: None,
        }
    }
}

/// Prefix of the config line in CSV headers.
pub const CONFIG_PREFIX: &str = "# config: ";

impl RunConfig {
    /// Reads a JSON config, a JSON output (`{"config": ...}`), or the
    /// `# config:` line of a CSV output.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let trimmed = text.trim_start();
        let json = if trimmed.starts_with('{') {
            let value: serde_json::Value = serde_json::from_str(trimmed)
                .with_context(|| format!("{} is not valid JSON", path.display()))?;
            match value.get("config") {
                Some(inner) if value.get("result").is_some() || value.get("report").is_some() => {
                    inner.clone()
                }
                _ => value,
            }
        } else {
            let line = text
                .lines()
                .find_map(|l| l.strip_prefix(CONFIG_PREFIX))
                .ok_or_else(|| {
                    anyhow!(
                        "{} has neither JSON nor a `{}` header",
                        path.display(),
                        CONFIG_PREFIX.trim()
                    )
                })?;
            serde_json::from_str(line)
                .with_context(|| format!("bad config header in {}", path.display()))?
        };
        serde_json::from_value(json)
            .with_context(|| format!("invalid config in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// The `#` header lines written at the top of every CSV output.
    pub fn header(&self, command: &str) -> String {
        format!("# elicit {command}\n{CONFIG_PREFIX}{}\n", self.to_json())
    }

    pub fn require_data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| anyhow!("--data is required"))
    }

    pub fn require_beta(&self) -> Result<&ParamVector> {
        self.beta
            .as_ref()
            .ok_or_else(|| anyhow!("--beta is required"))
    }

    pub fn require_grid(&self) -> Result<&Range> {
        self.eta_grid
            .as_ref()
            .ok_or_else(|| anyhow!("--eta-grid is required"))
    }
}

/// Model shorthand: `constant`, `linear[:d]`, `linear-nointercept[:d]`,
/// `linear-positive[:d]` (slopes bounded below by 0) or a JSON object.
pub fn parse_model(s: &str) -> Result<ModelFamily> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).context("invalid model JSON");
    }
    let (name, dim) = match s.split_once(':') {
        Some((name, d)) => (
            name,
            d.parse::<usize>()
                .with_context(|| format!("bad dimension in `{s}`"))?,
        ),
        None => (s, 1),
    };
    let family = match name {
        "constant" => ModelFamily::constant(),
        "linear" => ModelFamily::linear(dim, true)?,
        "linear-nointercept" => ModelFamily::linear(dim, false)?,
        "linear-positive" => {
            let mut bounds = vec![(None, None)];
            bounds.extend(std::iter::repeat_n((Some(0.0), None), dim));
            ModelFamily::linear(dim, true)?.with_bounds(bounds)?
        }
        other => bail!("unknown model `{other}`"),
    };
    Ok(family)
}

/// Comma-separated parameter vector.
pub fn parse_beta(s: &str) -> Result<ParamVector> {
    let coords = s
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad coordinate `{v}` in --beta"))
        })
        .collect::<Result<Vec<_>>>()?;
    if coords.iter().any(|v| !v.is_finite()) {
        bail!("--beta coordinates must be finite");
    }
    Ok(ParamVector::new(coords))
}
