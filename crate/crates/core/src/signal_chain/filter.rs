use std::f64::consts::PI;

use super::TimeSeries;
use crate::error::{Error, Result};

/// Band-pass amplifier: `stages` identical sections centred on `center`,
/// followed by a flat `gain`.
///
/// Each section is `H(s) = (w0/Q) s / (s^2 + (w0/Q) s + w0^2)`, unity at the
/// centre and falling 6 dB/octave on both skirts. With `Q = 1` the band edges
/// sit at about 0.62 and 1.62 times the centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub center: f64,
    pub stages: usize,
    pub q: f64,
    pub gain: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            center: 10.0,
            stages: 2,
            q: 1.0,
            gain: 1e4,
        }
    }
}

impl FilterSpec {
    /// Skirt slope of one section, dB/octave.
    pub const STAGE_SLOPE_DB_PER_OCTAVE: f64 = 6.0;

    /// Passband gain at the centre frequency (all sections are unity there).
    pub fn center_gain(&self) -> f64 {
        self.gain
    }

    fn validate(&self) -> Result<()> {
        if !(self.center > 0.0 && self.q > 0.0 && self.gain.is_finite() && self.stages >= 1) {
            return Err(Error::validation(format!("invalid filter spec {self:?}")));
        }
        Ok(())
    }
}

/// Magnitude of the continuous-time prototype cascade (without the flat gain).
pub fn analog_response(spec: &FilterSpec, frequency: f64) -> f64 {
    let r = frequency / spec.center;
    let stage = (r / spec.q) / ((1.0 - r * r).powi(2) + (r / spec.q).powi(2)).sqrt();
    stage.powi(spec.stages as i32)
}

/// Second-order section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    /// Bilinear mapping of the band-pass section, pre-warped so the digital
    /// centre lands exactly on `center`.
    pub fn bandpass(center: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * center;
        let k = w0 / (w0 / (2.0 * sample_rate)).tan();
        let bw = w0 / q;
        let a0 = k * k + bw * k + w0 * w0;
        let b0 = bw * k / a0;
        Self {
            b: [b0, 0.0, -b0],
            a: [2.0 * (w0 * w0 - k * k) / a0, (k * k - bw * k + w0 * w0) / a0],
            z: [0.0; 2],
        }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    pub fn reset(&mut self) {
        self.z = [0.0; 2];
    }

    /// |H(e^{j w T})| of the designed section.
    pub fn magnitude(&self, frequency: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * frequency / sample_rate;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = -(self.b[1] * s1 + self.b[2] * s2);
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = -(self.a[0] * s1 + self.a[1] * s2);
        ((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im)).sqrt()
    }
}

/// Designed digital cascade for a given sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCascade {
    sections: Vec<Biquad>,
    gain: f64,
    sample_rate: f64,
}

impl FilterCascade {
    pub fn design(spec: &FilterSpec, sample_rate: f64) -> Result<Self> {
        spec.validate()?;
        if sample_rate < 20.0 * spec.center {
            return Err(Error::Aliasing {
                sample_rate,
                center: spec.center,
            });
        }
        Ok(Self {
            sections: vec![Biquad::bandpass(spec.center, spec.q, sample_rate); spec.stages],
            gain: spec.gain,
            sample_rate,
        })
    }

    /// Cascade magnitude including the flat gain.
    pub fn magnitude(&self, frequency: f64) -> f64 {
        self.gain
            * self
                .sections
                .iter()
                .map(|s| s.magnitude(frequency, self.sample_rate))
                .product::<f64>()
    }

    pub fn process(&mut self, x: f64) -> f64 {
        self.gain * self.sections.iter_mut().fold(x, |acc, s| s.process(acc))
    }
}

/// Filters `series` from rest through the cascade and applies the gain.
///
/// Phase is zero at the centre and tends to +-90 degrees per section far
/// below / above it.
pub fn bandpass(series: &TimeSeries, spec: &FilterSpec) -> Result<TimeSeries> {
    let mut cascade = FilterCascade::design(spec, series.sample_rate())?;
    let out = series.samples().iter().map(|&x| cascade.process(x)).collect();
    Ok(series.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, seconds: f64) -> TimeSeries {
        let n = (fs * seconds) as usize;
        let s = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect();
        TimeSeries::new(fs, 0.0, s).unwrap()
    }

    fn settled_amplitude(series: &TimeSeries, skip_seconds: f64) -> f64 {
        let skip = (skip_seconds * series.sample_rate()) as usize;
        series.samples()[skip..]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn rejects_dc() {
        let spec = FilterSpec::default();
        let dc = TimeSeries::new(1000.0, 0.0, vec![1.0; 5000]).unwrap();
        let out = bandpass(&dc, &spec).unwrap();
        assert!(settled_amplitude(&out, 2.0) <= 1e-3 * spec.gain);
        assert!(settled_amplitude(&out, 2.0) <= 1e-3 * spec.gain * 1e-3);
    }

    #[test]
    fn unity_at_center_times_gain() {
        let spec = FilterSpec::default();
        let out = bandpass(&sine(10.0, 1000.0, 5.0), &spec).unwrap();
        let a = settled_amplitude(&out, 2.0);
        assert!((a / spec.gain - 1.0).abs() < 0.01, "{a}");
        let cascade = FilterCascade::design(&spec, 1000.0).unwrap();
        assert!((cascade.magnitude(10.0) / spec.gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_octaves_up_is_about_24_db_down() {
        let spec = FilterSpec::default();
        let at40 = settled_amplitude(&bandpass(&sine(40.0, 1000.0, 5.0), &spec).unwrap(), 2.0);
        let at10 = settled_amplitude(&bandpass(&sine(10.0, 1000.0, 5.0), &spec).unwrap(), 2.0);
        let db = 20.0 * (at40 / at10).log10();
        assert!((db + 24.0).abs() <= 2.0, "{db}");
        // Analytic prototype: 2 * 20 log10(4 / sqrt(225 + 16)).
        let analytic = 20.0 * analog_response(&spec, 40.0).log10();
        assert!((analytic - 40.0 * (4.0 / 241f64.sqrt()).log10()).abs() < 1e-12);
    }

    #[test]
    fn digital_matches_analog_prototype() {
        let spec = FilterSpec::default();
        let cascade = FilterCascade::design(&spec, 1000.0).unwrap();
        for i in 0..20 {
            // Log-spaced 1 Hz .. 35 Hz.
            let f = 35f64.powf(i as f64 / 19.0);
            let digital = 20.0 * (cascade.magnitude(f) / spec.gain).log10();
            let analog = 20.0 * analog_response(&spec, f).log10();
            assert!((digital - analog).abs() < 0.1, "{f} Hz: {digital} vs {analog}");
        }
    }

    #[test]
    fn skirts_fall_6_db_per_octave_per_stage() {
        let spec = FilterSpec {
            stages: 1,
            ..FilterSpec::default()
        };
        let hi = 20.0 * (analog_response(&spec, 2000.0) / analog_response(&spec, 1000.0)).log10();
        let lo = 20.0 * (analog_response(&spec, 0.01) / analog_response(&spec, 0.02)).log10();
        assert!((hi + 6.02).abs() < 0.01 && (lo + 6.02).abs() < 0.01);
    }

    #[test]
    fn aliasing_guard() {
        let s = TimeSeries::new(150.0, 0.0, vec![0.0; 10]).unwrap();
        assert!(matches!(
            bandpass(&s, &FilterSpec::default()),
            Err(Error::Aliasing { .. })
        ));
    }
}
