use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::{num_complex::Complex, FftPlanner};

use super::TimeSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
    Blackman,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        if len == 1 {
            return vec![1.0];
        }
        // Periodic (DFT-even) form.
        let n = len as f64;
        (0..len)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * t.cos(),
                    Window::Blackman => 0.42 - 0.5 * t.cos() + 0.08 * (2.0 * t).cos(),
                }
            })
            .collect()
    }

    /// Bins either side of a bin-centred tone that carry main-lobe power.
    pub fn main_lobe_half_width(self) -> usize {
        match self {
            Window::Rectangular => 0,
            Window::Hann => 1,
            Window::Blackman => 2,
        }
    }

    /// Guaranteed drop from a bin-centred tone to any bin outside the main
    /// lobe, dB.
    pub fn sidelobe_rejection_db(self) -> f64 {
        match self {
            Window::Rectangular => f64::INFINITY,
            Window::Hann => 31.0,
            Window::Blackman => 58.0,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
            Window::Blackman => "blackman",
        })
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "boxcar" | "none" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            "blackman" => Ok(Window::Blackman),
            other => Err(Error::validation(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    pub window: Window,
    /// Samples per averaged segment; `None` uses the whole record as one
    /// segment. Trailing samples that do not fill a segment are dropped.
    pub segment_len: Option<usize>,
    /// Amplitude whose sine maps to 0 dB.
    pub full_scale: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            window: Window::Hann,
            segment_len: None,
            full_scale: 1.0,
        }
    }
}

/// One-sided averaged periodogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    frequencies: Vec<f64>,
    power_db: Vec<f64>,
    resolution_bw: f64,
    /// Linear power (unit^2) of 0 dB.
    reference: f64,
    window: Window,
    segments: usize,
}

impl Spectrum {
    /// Rebuilds a spectrum from stored values.
    pub fn from_parts(
        frequencies: Vec<f64>,
        power_db: Vec<f64>,
        resolution_bw: f64,
        reference: f64,
        window: Window,
        segments: usize,
    ) -> Result<Self> {
        if frequencies.len() != power_db.len() || frequencies.len() < 2 {
            return Err(Error::validation("spectrum needs matching frequency and power columns"));
        }
        if !(reference > 0.0 && resolution_bw > 0.0) {
            return Err(Error::validation("spectrum reference and resolution must be positive"));
        }
        Ok(Self {
            frequencies,
            power_db,
            resolution_bw,
            reference,
            window,
            segments,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn power_db(&self) -> &[f64] {
        &self.power_db
    }

    /// Equivalent noise bandwidth of one bin, Hz.
    pub fn resolution_bw(&self) -> f64 {
        self.resolution_bw
    }

    pub fn reference(&self) -> f64 {
        self.reference
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn bin_spacing(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    pub fn bin_of(&self, frequency: f64) -> usize {
        ((frequency / self.bin_spacing()).round().max(0.0) as usize).min(self.frequencies.len() - 1)
    }

    pub fn power_linear(&self, bin: usize) -> f64 {
        self.reference * 10f64.powf(self.power_db[bin] / 10.0)
    }

    /// Same data expressed against a different 0 dB power.
    pub fn rereferenced(&self, reference: f64) -> Result<Self> {
        if !(reference > 0.0) {
            return Err(Error::validation("reference power must be positive"));
        }
        let shift = 10.0 * (self.reference / reference).log10();
        Ok(Self {
            power_db: self.power_db.iter().map(|p| p + shift).collect(),
            reference,
            ..self.clone()
        })
    }

    /// Total power of a tone at `frequency`, summed over its main lobe and
    /// corrected for the window's noise bandwidth, in dB.
    pub fn tone_level_db(&self, frequency: f64) -> f64 {
        let (lo, hi) = self.lobe(self.bin_of(frequency));
        let sum: f64 = (lo..=hi).map(|b| self.power_linear(b)).sum();
        let enbw_bins = self.resolution_bw / self.bin_spacing();
        10.0 * (sum / enbw_bins / self.reference).log10()
    }

    /// Mean bin power in `[f_lo, f_hi]`, skipping the main lobes of DC and
    /// of every frequency in `exclude`, in dB.
    pub fn floor_db(&self, f_lo: f64, f_hi: f64, exclude: &[f64]) -> Result<f64> {
        let bins = self.band_bins(f_lo, f_hi, exclude);
        if bins.is_empty() {
            return Err(Error::validation("no bins left to estimate the floor"));
        }
        let mean = bins.iter().map(|&b| self.power_linear(b)).sum::<f64>() / bins.len() as f64;
        Ok(10.0 * (mean / self.reference).log10())
    }

    /// Bins in `[f_lo, f_hi]` outside the main lobes of DC and `exclude`.
    pub fn band_bins(&self, f_lo: f64, f_hi: f64, exclude: &[f64]) -> Vec<usize> {
        let mut blocked: Vec<(usize, usize)> = vec![self.lobe(0)];
        blocked.extend(exclude.iter().map(|&f| self.lobe(self.bin_of(f))));
        (0..self.frequencies.len())
            .filter(|&b| self.frequencies[b] >= f_lo && self.frequencies[b] <= f_hi)
            .filter(|&b| blocked.iter().all(|&(lo, hi)| b < lo || b > hi))
            .collect()
    }

    fn lobe(&self, bin: usize) -> (usize, usize) {
        let h = self.window.main_lobe_half_width();
        (bin.saturating_sub(h), (bin + h).min(self.frequencies.len() - 1))
    }
}

/// Windowed, segment-averaged periodogram in dB relative to a full-scale sine
/// (`full_scale^2 / 2`). A bin-centred sine of amplitude `A` reads
/// `20 log10(A / full_scale)` at its bin under the rectangular window.
pub fn power_spectrum(series: &TimeSeries, config: &SpectrumConfig) -> Result<Spectrum> {
    if !(config.full_scale > 0.0) {
        return Err(Error::validation("full scale must be positive"));
    }
    let len = config.segment_len.unwrap_or(series.len());
    if len < 2 {
        return Err(Error::validation("spectrum needs at least two samples per segment"));
    }
    let segments = series.len() / len;
    if segments == 0 {
        return Err(Error::validation(format!(
            "series of {} samples is shorter than one {len}-sample segment",
            series.len()
        )));
    }
    let w = config.window.coefficients(len);
    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let bins = len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for seg in series.samples().chunks_exact(len) {
        for ((b, &x), &wi) in buf.iter_mut().zip(seg).zip(&w) {
            *b = Complex::new(x * wi, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
    }
    let fs = series.sample_rate();
    let reference = config.full_scale * config.full_scale / 2.0;
    let power_db = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (len % 2 == 0 && k == len / 2) { 1.0 } else { 2.0 };
            let p = one_sided * a / segments as f64 / (sum_w * sum_w);
            10.0 * (p.max(f64::MIN_POSITIVE) / reference).log10()
        })
        .collect();
    Ok(Spectrum {
        frequencies: (0..bins).map(|k| k as f64 * fs / len as f64).collect(),
        power_db,
        resolution_bw: fs * sum_w2 / (sum_w * sum_w),
        reference,
        window: config.window,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(a: f64, f: f64, fs: f64, n: usize) -> TimeSeries {
        TimeSeries::new(fs, 0.0, (0..n).map(|i| a * (2.0 * PI * f * i as f64 / fs).sin()).collect()).unwrap()
    }

    #[test]
    fn bin_centred_sine_reads_its_amplitude() {
        let s = sine(0.5, 10.0, 1000.0, 4000);
        for window in [Window::Rectangular, Window::Hann, Window::Blackman] {
            let cfg = SpectrumConfig { window, ..Default::default() };
            let sp = power_spectrum(&s, &cfg).unwrap();
            assert!((sp.power_db()[sp.bin_of(10.0)] - 20.0 * 0.5f64.log10()).abs() < 1e-9);
            assert!((sp.tone_level_db(10.0) - 20.0 * 0.5f64.log10()).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_sine_neighbours_are_far_down() {
        let s = sine(1.0, 10.0, 1000.0, 10_000);
        for window in [Window::Rectangular, Window::Hann, Window::Blackman] {
            let sp = power_spectrum(&s, &SpectrumConfig { window, ..Default::default() }).unwrap();
            let peak_bin = (0..sp.frequencies().len())
                .max_by(|&a, &b| sp.power_db()[a].total_cmp(&sp.power_db()[b]))
                .unwrap();
            assert_eq!(peak_bin, sp.bin_of(10.0));
            let peak = sp.power_db()[peak_bin];
            let h = window.main_lobe_half_width();
            for (b, p) in sp.power_db().iter().enumerate() {
                if b + h < peak_bin || b > peak_bin + h {
                    assert!(peak - p >= 40.0f64.min(window.sidelobe_rejection_db()), "{window} bin {b}");
                }
            }
        }
    }

    #[test]
    fn parseval_for_white_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, 2.0).unwrap();
        let s = TimeSeries::new(1000.0, 0.0, (0..100_000).map(|_| n.sample(&mut rng)).collect()).unwrap();
        let sp = power_spectrum(&s, &SpectrumConfig { segment_len: Some(1000), ..Default::default() }).unwrap();
        // Summed bin power / ENBW-in-bins recovers the variance.
        let total: f64 = (0..sp.frequencies().len()).map(|b| sp.power_linear(b)).sum();
        let var = total * sp.bin_spacing() / sp.resolution_bw();
        assert!((var / 4.0 - 1.0).abs() < 0.02, "{var}");
        assert!((sp.resolution_bw() - 1.5).abs() < 1e-12);
        assert_eq!(sp.segments(), 100);
    }

    #[test]
    fn rereference_shifts_levels() {
        let sp = power_spectrum(&sine(1.0, 10.0, 1000.0, 1000), &SpectrumConfig::default()).unwrap();
        let r = sp.rereferenced(sp.power_linear(10)).unwrap();
        assert!(r.power_db()[10].abs() < 1e-9);
        assert!((r.power_linear(3) - sp.power_linear(3)).abs() <= 1e-12 * sp.power_linear(3).abs());
    }

    #[test]
    fn window_parse() {
        assert_eq!("Hann".parse::<Window>().unwrap(), Window::Hann);
        assert!("kaiser".parse::<Window>().is_err());
    }
}
