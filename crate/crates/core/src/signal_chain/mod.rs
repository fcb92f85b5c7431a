//! Time-domain emulation of the measurement: modulation, detection,
//! band-pass filtering and gain, peak extraction, slope fit and spectra.

mod filter;
mod fit;
mod peaks;
mod spectrum;
mod synth;

pub use filter::{analog_response, bandpass, Biquad, FilterCascade, FilterSpec};
pub use fit::{slope_fit, FitPoint, LineFit};
pub use peaks::{extract_peaks, PeakStats};
pub use spectrum::{power_spectrum, Spectrum, SpectrumConfig, Window};
pub use synth::{synthesize_run, ModulationConfig, RunPhysics, RunSpec};

use crate::error::{Error, Result};

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    sample_rate: f64,
    t0: f64,
    samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::validation("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::validation("time series must hold at least one sample"));
        }
        Ok(Self {
            sample_rate,
            t0,
            samples,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Amplitude of the component at `frequency` by projection onto sine and
    /// cosine over the whole record.
    pub fn tone_amplitude(&self, frequency: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * frequency;
        let (mut c, mut s) = (0.0, 0.0);
        for (i, v) in self.samples.iter().enumerate() {
            let t = self.time(i);
            c += v * (w * t).cos();
            s += v * (w * t).sin();
        }
        2.0 * (c * c + s * s).sqrt() / self.samples.len() as f64
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            sample_rate: self.sample_rate,
            t0: self.t0,
            samples,
        }
    }
}
