//! Physical constants and unit-suffixed quantity parsing.
//!
//! Everything inside the crate is SI (m, Hz, rad, s, W). Suffixes such as
//! `388um`, `2mW` or `9.1pm/MHz` are only understood here, at the boundary.

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant, J s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Physical dimension of a parsed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Frequency,
    Time,
    Power,
    Angle,
    /// Plain number or percentage.
    Ratio,
    /// Deflection per optical frequency change, m/Hz.
    LengthPerFrequency,
    /// Photon/dark count rate, 1/s.
    Rate,
}

fn prefix_scale(p: &str) -> Option<f64> {
    Some(match p {
        "" => 1.0,
        "T" => 1e12,
        "G" => 1e9,
        "M" => 1e6,
        "k" => 1e3,
        "c" => 1e-2,
        "m" => 1e-3,
        "u" | "µ" => 1e-6,
        "n" => 1e-9,
        "p" => 1e-12,
        "f" => 1e-15,
        _ => return None,
    })
}

fn unit_scale(unit: &str, dim: Dimension) -> Option<f64> {
    match dim {
        Dimension::Ratio => match unit {
            "" => Some(1.0),
            "%" => Some(1e-2),
            "ppm" => Some(1e-6),
            _ => None,
        },
        Dimension::Angle => match unit {
            "" | "rad" => Some(1.0),
            "mrad" => Some(1e-3),
            "urad" => Some(1e-6),
            "deg" => Some(std::f64::consts::PI / 180.0),
            _ => None,
        },
        Dimension::LengthPerFrequency => {
            let (num, den) = unit.split_once('/')?;
            let num = num.strip_suffix('m').and_then(prefix_scale)?;
            let den = den.strip_suffix("Hz").and_then(prefix_scale)?;
            Some(num / den)
        }
        Dimension::Rate => match unit {
            "" | "/s" | "Hz" => Some(1.0),
            _ => unit.strip_suffix("Hz").and_then(prefix_scale),
        },
        _ => {
            let base = match dim {
                Dimension::Length => "m",
                Dimension::Frequency => "Hz",
                Dimension::Time => "s",
                Dimension::Power => "W",
                _ => unreachable!(),
            };
            if unit.is_empty() {
                return Some(1.0);
            }
            unit.strip_suffix(base).and_then(prefix_scale)
        }
    }
}

/// Parses `"<number><unit>"` into an SI value of the requested dimension.
///
/// A bare number is taken as already being in SI units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && text[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| Error::validation(format!("'{text}' does not start with a number")))?;
    let scale = unit_scale(unit.trim(), dim)
        .ok_or_else(|| Error::validation(format!("unit '{unit}' is not a valid {dim:?}")))?;
    Ok(decimal_shift(num, scale).unwrap_or(value * scale))
}

/// `num * 10^k` rounded once, when `scale` is exactly `10^k`.
fn decimal_shift(num: &str, scale: f64) -> Option<f64> {
    let k = scale.log10().round() as i32;
    if format!("1e{k}").parse::<f64>().ok()? != scale {
        return None;
    }
    let (mantissa, exp) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().ok()?),
        None => (num, 0),
    };
    format!("{mantissa}e{}", exp.checked_add(k)?).parse().ok()
}
