//! `lo:hi:step` ranges and candidate grids.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use elicit::ParamVector;
use serde::{Deserialize, Serialize};

/// An inclusive arithmetic progression written `lo:hi:step`.
///
/// Points are rounded to the decimal precision of the written bounds, so
/// `0:1:0.1` yields `0.3` rather than `0.30000000000000004`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Range {
    text: String,
    lo: f64,
    hi: f64,
    step: f64,
    decimals: usize,
}

/// Upper bound on the number of points in one range.
const MAX_POINTS: usize = 1_000_000;

fn decimals(s: &str) -> usize {
    let mantissa = s.split(['e', 'E']).next().unwrap_or(s);
    mantissa.split_once('.').map_or(0, |(_, frac)| frac.len())
}

impl FromStr for Range {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [lo_s, hi_s, step_s] = parts[..] else {
            bail!("range `{s}` is not of the form lo:hi:step");
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number `{t}` in range `{s}`"))
        };
        let (lo, hi, step) = (num(lo_s)?, num(hi_s)?, num(step_s)?);
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || lo > hi || !(step > 0.0) {
            bail!("range `{s}` needs finite lo ≤ hi and step > 0");
        }
        if (hi - lo) / step >= MAX_POINTS as f64 {
            bail!("range `{s}` has more than {MAX_POINTS} points");
        }
        let has_exponent = [lo_s, hi_s, step_s].iter().any(|t| t.contains(['e', 'E']));
        let decimals = if has_exponent {
            usize::MAX
        } else {
            decimals(lo_s).max(decimals(hi_s)).max(decimals(step_s))
        };
        Ok(Range {
            text: s.trim().to_string(),
            lo,
            hi,
            step,
            decimals,
        })
    }
}

impl TryFrom<String> for Range {
    type Error = anyhow::Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Range> for String {
    fn from(r: Range) -> String {
        r.text
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| {
                let v = self.lo + k as f64 * self.step;
                if self.decimals == usize::MAX {
                    v
                } else {
                    format!("{v:.*}", self.decimals)
                        .parse()
                        .expect("formatted float parses")
                }
            })
            .collect()
    }
}

/// Cartesian product of per-coordinate ranges written
/// `b0=lo:hi:step,b1=lo:hi:step`; coordinate 0 varies slowest.
pub fn candidate_grid(spec: &str, dim: usize) -> Result<Vec<ParamVector>> {
    let mut ranges: Vec<Option<Vec<f64>>> = vec![None; dim];
    for part in spec.split(',') {
        let (name, range) = part.split_once('=').ok_or_else(|| {
            anyhow!("candidate grid entry `{part}` is not of the form bK=lo:hi:step")
        })?;
        let k: usize = name
            .trim()
            .strip_prefix('b')
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| anyhow!("bad coordinate name `{name}`; expected b0, b1, ..."))?;
        if k >= dim {
            bail!("coordinate b{k} is out of range for a {dim}-parameter model");
        }
        if ranges[k]
            .replace(range.parse::<Range>()?.points())
            .is_some()
        {
            bail!("coordinate b{k} given twice");
        }
    }
    let ranges: Vec<Vec<f64>> = ranges
        .into_iter()
        .enumerate()
        .map(|(k, r)| r.ok_or_else(|| anyhow!("candidate grid is missing b{k}")))
        .collect::<Result<_>>()?;
    let total = ranges
        .iter()
        .try_fold(1usize, |acc, r| acc.checked_mul(r.len()));
    if total.is_none_or(|t| t > MAX_POINTS) {
        bail!("candidate grid has more than {MAX_POINTS} points");
    }
    let mut out = vec![Vec::with_capacity(dim)];
    for r in &ranges {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                r.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    Ok(out.into_iter().map(ParamVector::new).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_points_are_clean() {
        let r: Range = "0:1:0.1".parse().unwrap();
        let p = r.points();
        assert_eq!(p.len(), 11);
        assert_eq!(p[3], 0.3);
        assert_eq!(p[10], 1.0);
        assert_eq!("-3:3:0.05".parse::<Range>().unwrap().points()[60], 0.0);
    }

    #[test]
    fn degenerate_and_invalid_ranges() {
        assert_eq!("2:2:1".parse::<Range>().unwrap().points(), vec![2.0]);
        assert!("1:0:0.1".parse::<Range>().is_err());
        assert!("0:1:0".parse::<Range>().is_err());
        assert!("0:1".parse::<Range>().is_err());
    }

    #[test]
    fn grid_is_a_product() {
        let g = candidate_grid("b1=0:1:1,b0=-1:1:1", 2).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0].0, vec![-1.0, 0.0]);
        assert_eq!(g[5].0, vec![1.0, 1.0]);
        assert!(candidate_grid("b0=0:1:1", 2).is_err());
        assert!(candidate_grid("b2=0:1:1", 2).is_err());
    }
}
