//! Linear scan-to-frequency calibration against known spectral lines.

use std::path::Path;

use crate::error::{Error, Result};
use crate::signal_chain::{slope_fit, FitPoint};

const BUILTIN_RB_D2: &str = include_str!("../data/rb_d2_lines.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLine {
    pub label: String,
    /// Offset from the anchor line, Hz.
    pub relative_frequency: f64,
    pub source: String,
}

/// Parses `label  offset_MHz  source note...` records; `#` starts a comment.
/// Offsets must be strictly increasing.
pub fn parse_reference_lines(text: &str) -> Result<Vec<ReferenceLine>> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let label = parts.next().unwrap_or("");
        let value = parts.next().unwrap_or("");
        let mhz: f64 = value.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("'{value}' is not a frequency in MHz"),
        })?;
        lines.push(ReferenceLine {
            label: label.to_string(),
            relative_frequency: mhz * 1e6,
            source: parts.collect::<Vec<_>>().join(" "),
        });
    }
    if lines.windows(2).any(|w| !(w[1].relative_frequency > w[0].relative_frequency)) {
        return Err(Error::validation(
            "reference lines must be listed in strictly increasing frequency",
        ));
    }
    Ok(lines)
}

pub fn load_reference_lines(path: impl AsRef<Path>) -> Result<Vec<ReferenceLine>> {
    parse_reference_lines(&std::fs::read_to_string(path)?)
}

/// The six Rb D2 features (three per isotope) shipped with the crate.
pub fn rb_d2_reference_lines() -> Vec<ReferenceLine> {
    parse_reference_lines(BUILTIN_RB_D2).expect("built-in line table parses")
}

/// Observed scan positions, one number per record (`#` comments allowed).
pub fn parse_positions(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split('#').next().unwrap_or("").trim();
            (!body.is_empty()).then(|| {
                body.split([',', ' ', '\t'])
                    .next()
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        line: i + 1,
                        msg: e.to_string(),
                    })
            })
        })
        .collect()
}

/// `frequency = slope * position + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanCalibration {
    /// Hz per scan unit.
    pub slope: f64,
    /// Hz, relative to the anchor line.
    pub intercept: f64,
    /// Residual standard deviation with `n - 2` degrees of freedom, Hz
    /// (zero for two lines).
    pub residual_rms: f64,
    pub slope_error: f64,
    pub intercept_error: f64,
    /// Observed minus fitted frequency per line, Hz.
    pub residuals: Vec<f64>,
}

impl ScanCalibration {
    pub fn frequency(&self, position: f64) -> f64 {
        self.slope * position + self.intercept
    }

    pub fn fractional_slope_error(&self) -> f64 {
        self.slope_error / self.slope.abs()
    }
}

/// Ordinary least squares of line frequency against observed position.
/// Lines and positions correspond by index.
pub fn fit_scan_calibration(positions: &[f64], references: &[ReferenceLine]) -> Result<ScanCalibration> {
    if positions.len() != references.len() {
        return Err(Error::validation(format!(
            "{} positions for {} reference lines",
            positions.len(),
            references.len()
        )));
    }
    if references.len() < 2 {
        return Err(Error::validation("calibration needs at least two lines"));
    }
    let mut sorted = positions.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DegenerateFit("two lines observed at the same scan position".into()));
    }
    let points: Vec<FitPoint> = positions
        .iter()
        .zip(references)
        .map(|(&p, r)| FitPoint::new(p, r.relative_frequency))
        .collect();
    let fit = slope_fit(&points)?;
    if fit.slope == 0.0 {
        return Err(Error::DegenerateFit("calibration slope is zero".into()));
    }
    let residuals: Vec<f64> = points.iter().map(|p| p.y - fit.predict(p.x)).collect();
    let n = residuals.len();
    let residual_rms = if n > 2 {
        (residuals.iter().map(|r| r * r).sum::<f64>() / (n - 2) as f64).sqrt()
    } else {
        0.0
    };
    Ok(ScanCalibration {
        slope: fit.slope,
        intercept: fit.intercept,
        residual_rms,
        slope_error: fit.slope_error,
        intercept_error: fit.intercept_error,
        residuals,
    })
}

/// `|value|` times the fractional slope uncertainty.
pub fn propagate_calibration_error(cal: &ScanCalibration, value: f64) -> f64 {
    value.abs() * cal.fractional_slope_error()
}
