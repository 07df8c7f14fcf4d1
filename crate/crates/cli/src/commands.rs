//! One function per subcommand.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use elicit::calibration::MIN_PER_BIN;
use elicit::empirics::{predictions, Schema};
use elicit::pareto::{half_sample_tolerance, ParetoStatus};
use elicit::synthetic::{
    generate, oracle_b_eta_quadratic, oracle_frontier_cubic, oracle_frontier_logistic, ExampleKind,
    GeneratorSpec,
};
use elicit::{
    calibration_diagnostic, eta_scan, load_dataset, murphy_curve, pareto_filter, theorem1_harness,
    Binning, Dataset, MixtureMeasure, ParamVector, PredictionModel,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::grid::candidate_grid;
use crate::output::{csv_row, emit, write_atomic};
use crate::svg::{plot, Series, Style};
use crate::{Classify, Failure, Outcome};

type CmdResult = Result<Outcome, Failure>;

fn load(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let path = cfg.require_data().usage()?;
    let (data, _) = load_dataset(path, &Schema::default()).usage()?;
    Ok(data)
}

fn write_svg(cfg: &RunConfig, svg: impl FnOnce() -> String) -> Result<(), Failure> {
    if let Some(path) = &cfg.svg {
        write_atomic(path, svg().as_bytes()).compute()?;
    }
    Ok(())
}

fn num(v: f64) -> String {
    v.to_string()
}

fn beta_header(p: usize) -> Vec<String> {
    (0..p).map(|k| format!("b{k}")).collect()
}

/// Lebesgue measure of density 1 over the data range widened by its span on
/// each side; on that range the mean's mixture loss is half squared error.
fn default_mixture(y: &[f64]) -> Result<MixtureMeasure, Failure> {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1.0);
    MixtureMeasure::lebesgue(lo - span, hi + span, 1.0).compute()
}

fn binning(cfg: &RunConfig) -> Binning {
    if cfg.equal_width {
        Binning::EqualWidth(cfg.bins)
    } else {
        Binning::EqualCount(cfg.bins)
    }
}

pub fn murphy(cfg: RunConfig) -> CmdResult {
    let data = load(&cfg)?;
    let beta = cfg.require_beta().usage()?;
    let preds = predictions(&cfg.model, beta, &data).usage()?;
    let curve = murphy_curve(&cfg.functional, &preds, data.y(), cfg.refinement).compute()?;

    let mut out = cfg.header("murphy");
    out.push_str("eta,value,value_right\n");
    for ((&eta, &v), &vr) in curve
        .knots()
        .iter()
        .zip(curve.value_at())
        .zip(curve.value_right())
    {
        out.push_str(&csv_row([num(eta), num(v), num(vr)]));
    }
    emit(cfg.out.as_deref(), &out).compute()?;
    write_svg(&cfg, || {
        let points = curve
            .knots()
            .iter()
            .copied()
            .zip(curve.value_at().iter().copied())
            .collect();
        plot(
            &format!("Murphy curve ({})", cfg.functional),
            "η",
            "mean elementary score",
            &[Series {
                label: format!("β = {:?}", beta.0),
                points,
                style: Style::Line,
            }],
        )
    })?;
    Ok(Outcome::Ok)
}

pub fn fit(mut cfg: RunConfig) -> CmdResult {
    let data = load(&cfg)?;
    if cfg.mixture.is_none() {
        cfg.mixture = Some(default_mixture(data.y())?);
    }
    let mixture = cfg.mixture.as_ref().expect("mixture was filled in");
    let result =
        elicit::fit(&cfg.functional, mixture, &cfg.model, &data, &cfg.optimizer).compute()?;
    let doc = json!({ "command": "fit", "config": &cfg, "result": &result });
    let text = serde_json::to_string_pretty(&doc).compute()? + "\n";
    emit(cfg.out.as_deref(), &text).compute()?;
    Ok(Outcome::Ok)
}

pub fn scan(cfg: RunConfig) -> CmdResult {
    let data = load(&cfg)?;
    let grid = cfg.require_grid().usage()?.points();
    let fits = eta_scan(&cfg.functional, &cfg.model, &data, &grid, &cfg.optimizer).usage()?;
    if fits.iter().all(|f| f.result.is_err()) {
        let first = fits
            .into_iter()
            .find_map(|f| f.result.err())
            .expect("grid is non-empty");
        return Err(Failure::Compute(
            anyhow!(first).context("every fit in the scan failed"),
        ));
    }
    let p = cfg.model.parameter_dim();

    let mut out = cfg.header("scan");
    let mut cols = vec!["eta".to_string()];
    cols.extend(beta_header(p));
    cols.extend(
        [
            "objective",
            "converged",
            "interval_lo",
            "interval_hi",
            "eta_window",
            "error",
        ]
        .map(String::from),
    );
    out.push_str(&csv_row(cols));
    for f in &fits {
        let mut row = vec![num(f.eta)];
        match &f.result {
            Ok(r) => {
                row.extend(r.beta.0.iter().map(|&v| num(v)));
                row.push(num(r.objective));
                row.push(r.converged.to_string());
                let (lo, hi) = r
                    .minimizer_interval
                    .map_or((String::new(), String::new()), |(a, b)| (num(a), num(b)));
                row.extend([
                    lo,
                    hi,
                    r.eta_window.map_or(String::new(), num),
                    String::new(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), p + 5));
                row.push(e.to_string().replace([',', '\n'], ";"));
            }
        }
        out.push_str(&csv_row(row));
    }
    emit(cfg.out.as_deref(), &out).compute()?;
    write_svg(&cfg, || {
        let series: Vec<Series> = (0..p)
            .map(|k| Series {
                label: format!("b{k}"),
                points: fits
                    .iter()
                    .filter_map(|f| f.result.as_ref().ok().map(|r| (f.eta, r.beta.0[k])))
                    .collect(),
                style: Style::Line,
            })
            .collect();
        plot(
            &format!("Elementary fits ({})", cfg.functional),
            "η",
            "β̂(η)",
            &series,
        )
    })?;
    Ok(Outcome::Ok)
}

fn read_candidates(path: &Path, dim: usize) -> anyhow::Result<Vec<ParamVector>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| anyhow!("{} is empty", path.display()))?
        .split(',')
        .map(str::trim)
        .collect();
    let columns: Vec<usize> = (0..dim)
        .map(|k| {
            header
                .iter()
                .position(|h| *h == format!("b{k}"))
                .ok_or_else(|| anyhow!("{} has no column b{k}", path.display()))
        })
        .collect::<anyhow::Result<_>>()?;
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let coords = columns
                .iter()
                .map(|&c| {
                    let v: f64 = fields
                        .get(c)
                        .ok_or_else(|| anyhow!("row {} is too short", i + 1))?
                        .parse()
                        .with_context(|| format!("bad number in row {}", i + 1))?;
                    if !v.is_finite() {
                        bail!("non-finite value in row {}", i + 1);
                    }
                    Ok(v)
                })
                .collect::<anyhow::Result<Vec<f64>>>()?;
            Ok(ParamVector::new(coords))
        })
        .collect()
}

pub fn pareto(mut cfg: RunConfig) -> CmdResult {
    let data = load(&cfg)?;
    let p = cfg.model.parameter_dim();
    let candidates = match (&cfg.candidates, &cfg.candidates_file) {
        (Some(spec), None) => candidate_grid(spec, p).usage()?,
        (None, Some(path)) => read_candidates(path, p).usage()?,
        _ => {
            return Err(Failure::Usage(anyhow!(
                "give exactly one of --candidates or --candidates-file"
            )))
        }
    };
    if candidates.is_empty() {
        return Err(Failure::Usage(anyhow!("no candidates")));
    }
    let preds: Vec<Vec<f64>> = candidates
        .par_iter()
        .map(|b| predictions(&cfg.model, b, &data))
        .collect::<Result<_, _>>()
        .usage()?;
    if cfg.tolerance.is_none() {
        cfg.tolerance = Some(half_sample_tolerance(&cfg.functional, &preds, data.y()).compute()?);
    }
    let tol = cfg.tolerance.expect("tolerance was filled in");
    let curves: Vec<_> = preds
        .par_iter()
        .map(|z| murphy_curve(&cfg.functional, z, data.y(), 0))
        .collect::<Result<_, _>>()
        .compute()?;
    let set = pareto_filter(candidates.into_iter().zip(curves).collect(), tol).usage()?;

    let mut out = cfg.header("pareto");
    let mut cols = beta_header(p);
    cols.extend(["status", "dominated_by"].map(String::from));
    out.push_str(&csv_row(cols));
    for e in &set.entries {
        let mut row: Vec<String> = e.beta.0.iter().map(|&v| num(v)).collect();
        match e.status {
            ParetoStatus::Optimal => row.extend(["optimal".into(), String::new()]),
            ParetoStatus::Dominated { by } => row.extend(["dominated".into(), by.to_string()]),
        }
        out.push_str(&csv_row(row));
    }
    emit(cfg.out.as_deref(), &out).compute()?;

    if let Some(path) = &cfg.json {
        let entries: Vec<_> = set
            .entries
            .iter()
            .map(|e| json!({ "beta": &e.beta, "status": e.status }))
            .collect();
        let doc = json!({
            "command": "pareto",
            "config": &cfg,
            "result": { "tolerance": set.tolerance, "entries": entries },
        });
        write_atomic(
            path,
            (serde_json::to_string_pretty(&doc).compute()? + "\n").as_bytes(),
        )
        .compute()?;
    }
    write_svg(&cfg, || {
        let coords = |e: &elicit::pareto::ParetoEntry| {
            if p >= 2 {
                (e.beta.0[0], e.beta.0[1])
            } else {
                (e.beta.0[0], 0.0)
            }
        };
        let split = |optimal: bool| -> Vec<(f64, f64)> {
            set.entries
                .iter()
                .filter(|e| (e.status == ParetoStatus::Optimal) == optimal)
                .map(coords)
                .collect()
        };
        plot(
            "Pareto optimal parameters",
            "b0",
            if p >= 2 { "b1" } else { "" },
            &[
                Series {
                    label: "optimal".into(),
                    points: split(true),
                    style: Style::Points,
                },
                Series {
                    label: "dominated".into(),
                    points: split(false),
                    style: Style::Points,
                },
            ],
        )
    })?;
    Ok(Outcome::Ok)
}

/// Diagnoses a given `--beta`, or the all-η consensus when `--eta-grid` is
/// set, or otherwise the mixture-loss fit.
pub fn calibrate(mut cfg: RunConfig) -> CmdResult {
    let data = load(&cfg)?;
    if cfg.bins == 0 || data.n() < MIN_PER_BIN {
        return Err(Failure::Usage(anyhow!(
            "need at least one bin and {MIN_PER_BIN} observations"
        )));
    }
    let binning = binning(&cfg);
    let (report, beta, spread) = if let Some(beta) = cfg.beta.clone() {
        let preds = predictions(&cfg.model, &beta, &data).usage()?;
        let mut report =
            calibration_diagnostic(&cfg.functional, &preds, data.y(), &binning, cfg.z_threshold)
                .compute()?;
        report.applicable = Some(cfg.model.supports_shift());
        (report, beta, None)
    } else if let Some(grid) = &cfg.eta_grid {
        let h = theorem1_harness(
            &cfg.functional,
            &cfg.model,
            &data,
            &grid.points(),
            &cfg.optimizer,
            &binning,
            cfg.z_threshold,
        )
        .compute()?;
        (h.calibration, h.consensus, Some(h.spread))
    } else {
        if cfg.mixture.is_none() {
            cfg.mixture = Some(default_mixture(data.y())?);
        }
        let mixture = cfg.mixture.as_ref().expect("mixture was filled in");
        let fit =
            elicit::fit(&cfg.functional, mixture, &cfg.model, &data, &cfg.optimizer).compute()?;
        let beta = fit.representative();
        let preds = predictions(&cfg.model, &beta, &data).compute()?;
        let mut report =
            calibration_diagnostic(&cfg.functional, &preds, data.y(), &binning, cfg.z_threshold)
                .compute()?;
        report.applicable = Some(cfg.model.supports_shift());
        (report, beta, None)
    };

    let doc = json!({
        "command": "calibrate",
        "config": &cfg,
        "report": &report,
        "beta": &beta,
        "spread": spread,
    });
    emit(
        cfg.out.as_deref(),
        &(serde_json::to_string_pretty(&doc).compute()? + "\n"),
    )
    .compute()?;
    if let Some(path) = &cfg.plot_csv {
        let mut csv = cfg.header("calibrate");
        csv.push_str("bin_center,standardized_mean\n");
        for (c, z) in report.plot_rows() {
            csv.push_str(&csv_row([num(c), num(z)]));
        }
        write_atomic(path, csv.as_bytes()).compute()?;
    }
    write_svg(&cfg, || {
        let mut title = String::new();
        let _ = write!(
            title,
            "Standardized bin means ({})",
            if report.pass { "pass" } else { "fail" }
        );
        plot(
            &title,
            "bin center",
            "standardized mean",
            &[Series {
                label: format!("|z| ≤ {}", report.z_threshold),
                points: report.plot_rows(),
                style: Style::Bars,
            }],
        )
    })?;
    Ok(if report.pass {
        Outcome::Ok
    } else {
        Outcome::CalibrationFail
    })
}

fn require_example(cfg: &RunConfig) -> Result<ExampleKind, Failure> {
    cfg.example
        .ok_or_else(|| Failure::Usage(anyhow!("--example is required")))
}

pub fn simulate(cfg: RunConfig) -> CmdResult {
    let kind = require_example(&cfg)?;
    let n = cfg
        .n
        .ok_or_else(|| Failure::Usage(anyhow!("--n is required")))?;
    let mut spec = GeneratorSpec::new(kind, n, cfg.seed);
    if let Some(sd) = cfg.noise_sd {
        spec = spec.with_noise_sd(sd);
    }
    let data = generate(&spec).usage()?;
    let mut bytes = cfg.header("simulate").into_bytes();
    data.write_csv(&mut bytes).compute()?;
    let text = String::from_utf8(bytes).compute()?;
    emit(cfg.out.as_deref(), &text).compute()?;
    Ok(Outcome::Ok)
}

pub fn oracle(cfg: RunConfig) -> CmdResult {
    let kind = require_example(&cfg)?;
    let grid = cfg.require_grid().usage()?.points();
    let mut rows: Vec<(f64, f64, f64, bool)> = Vec::new();
    for &eta in &grid {
        match kind {
            ExampleKind::Quadratic => {
                rows.extend(
                    oracle_b_eta_quadratic(eta)
                        .into_iter()
                        .map(|b| (eta, 0.0, b, true)),
                );
            }
            ExampleKind::Logistic => match oracle_frontier_logistic(eta) {
                Ok(p) => rows.push((p.eta, p.beta0, p.beta1, p.admissible)),
                Err(e) => eprintln!("warning: skipping η = {eta}: {e}"),
            },
            ExampleKind::Cubic => {
                let p = oracle_frontier_cubic(eta);
                rows.push((p.eta, p.beta0, p.beta1, p.admissible));
            }
        }
    }
    if rows.is_empty() {
        return Err(Failure::Compute(anyhow!(
            "no grid point has an oracle value"
        )));
    }
    let mut out = cfg.header("oracle");
    out.push_str("eta,beta0,beta1,admissible\n");
    for &(eta, b0, b1, ok) in &rows {
        out.push_str(&csv_row([num(eta), num(b0), num(b1), ok.to_string()]));
    }
    emit(cfg.out.as_deref(), &out).compute()?;
    write_svg(&cfg, || {
        let line = |f: fn(&(f64, f64, f64, bool)) -> f64, label: &str| Series {
            label: label.into(),
            points: rows.iter().map(|r| (r.0, f(r))).collect(),
            style: if kind == ExampleKind::Quadratic {
                Style::Points
            } else {
                Style::Line
            },
        };
        plot(
            &format!("Oracle frontier ({kind})"),
            "η",
            "β(η)",
            &[line(|r| r.1, "beta0"), line(|r| r.2, "beta1")],
        )
    })?;
    Ok(Outcome::Ok)
}
