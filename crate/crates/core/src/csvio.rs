//! Comma-separated output with `#`-prefixed metadata.
//!
//! Numbers are written with 17 significant digits so every `f64` reads back
//! bit-identical.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::signal_chain::{Spectrum, TimeSeries, Window};

/// Ordered `key = value` metadata lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn push_num(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, fmt_f64(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_num(&self, key: &str) -> Result<f64> {
        let v = self
            .get(key)
            .ok_or_else(|| Error::validation(format!("metadata '{key}' missing")))?;
        v.parse()
            .map_err(|_| Error::validation(format!("metadata '{key}' = '{v}' is not a number")))
    }

    pub fn extend(&mut self, other: &Metadata) -> &mut Self {
        self.0.extend(other.0.iter().cloned());
        self
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A parsed CSV: metadata, column names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::validation(format!("column '{name}' missing")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn write_table(meta: &Metadata, columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (k, v) in &meta.0 {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let _ = writeln!(out, "{}", columns.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn read_table(text: &str) -> Result<Table> {
    let mut meta = Metadata::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        if let Some(m) = line.strip_prefix('#') {
            if let Some((k, v)) = m.split_once('=') {
                meta.push(k.trim(), v.trim());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(|c| c.trim().to_string()).collect()),
            Some(cols) => {
                let row = line
                    .split(',')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(e.to_string()))?;
                if row.len() != cols.len() {
                    return Err(parse_err(format!("expected {} fields, found {}", cols.len(), row.len())));
                }
                rows.push(row);
            }
        }
    }
    Ok(Table {
        meta,
        columns: columns.ok_or_else(|| Error::validation("CSV has no header row"))?,
        rows,
    })
}

pub fn write_time_series(series: &TimeSeries, extra: &Metadata) -> String {
    let mut meta = Metadata::new();
    meta.push("kind", "time_series")
        .push_num("sample_rate", series.sample_rate())
        .push_num("t0", series.t0())
        .extend(extra);
    let rows: Vec<Vec<f64>> = series
        .samples()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![series.time(i), *v])
        .collect();
    write_table(&meta, &["time_s", "position_m"], &rows)
}

pub fn read_time_series(text: &str) -> Result<(TimeSeries, Metadata)> {
    let table = read_table(text)?;
    let series = TimeSeries::new(
        table.meta.get_num("sample_rate")?,
        table.meta.get_num("t0")?,
        table.column("position_m")?,
    )?;
    Ok((series, table.meta))
}

pub fn write_spectrum(spectrum: &Spectrum, extra: &Metadata) -> String {
    let mut meta = Metadata::new();
    meta.push("kind", "spectrum")
        .push_num("resolution_bw", spectrum.resolution_bw())
        .push_num("reference_power", spectrum.reference())
        .push("window", spectrum.window())
        .push("segments", spectrum.segments())
        .extend(extra);
    let rows: Vec<Vec<f64>> = spectrum
        .frequencies()
        .iter()
        .zip(spectrum.power_db())
        .map(|(f, p)| vec![*f, *p])
        .collect();
    write_table(&meta, &["frequency_hz", "power_db"], &rows)
}

pub fn read_spectrum(text: &str) -> Result<(Spectrum, Metadata)> {
    let table = read_table(text)?;
    let window: Window = table
        .meta
        .get("window")
        .ok_or_else(|| Error::validation("metadata 'window' missing"))?
        .parse()?;
    let segments = table.meta.get_num("segments")? as usize;
    let spectrum = Spectrum::from_parts(
        table.column("frequency_hz")?,
        table.column("power_db")?,
        table.meta.get_num("resolution_bw")?,
        table.meta.get_num("reference_power")?,
        window,
        segments,
    )?;
    Ok((spectrum, table.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_chain::{power_spectrum, SpectrumConfig};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn time_series_round_trip_is_bit_exact(
            samples in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..200),
            fs in 1e-3f64..1e9,
            t0 in -1e3f64..1e3,
        ) {
            let s = TimeSeries::new(fs, t0, samples).unwrap();
            let mut meta = Metadata::new();
            meta.push("seed", 7).push("config_hash", "abc");
            let text = write_time_series(&s, &meta);
            let (back, m) = read_time_series(&text).unwrap();
            prop_assert_eq!(back.sample_rate().to_bits(), s.sample_rate().to_bits());
            prop_assert_eq!(back.t0().to_bits(), s.t0().to_bits());
            for (a, b) in back.samples().iter().zip(s.samples()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(m.get("seed"), Some("7"));
        }
    }

    #[test]
    fn spectrum_round_trip() {
        let s = TimeSeries::new(100.0, 0.0, (0..256).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        let sp = power_spectrum(&s, &SpectrumConfig::default()).unwrap();
        let (back, _) = read_spectrum(&write_spectrum(&sp, &Metadata::new())).unwrap();
        assert_eq!(back, sp);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matches!(read_table("a,b\n1,2\n3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(read_table("# only = meta\n").is_err());
    }
}
