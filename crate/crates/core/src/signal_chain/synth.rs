use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TimeSeries;
use crate::dispersion::DispersionChain;
use crate::error::{Error, Result};
use crate::interferometer::{
    dark_port_profile_with_background, postselection_probability, weak_value_regime, InterferometerState,
};
use crate::noise::{photon_number, simulate_split_detection_with, DetectorNoise, SamplingMode};

/// Sinusoidal optical-frequency modulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationConfig {
    pub frequency: f64,
    /// Peak frequency deviation, Hz.
    pub amplitude: f64,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self {
            frequency: 10.0,
            amplitude: 0.0,
        }
    }
}

impl ModulationConfig {
    pub fn detuning(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency * t).sin()
    }
}

/// Everything upstream of the detector.
#[derive(Debug, Clone)]
pub struct RunPhysics {
    pub state: InterferometerState,
    pub chain: DispersionChain,
    /// Optical power entering the interferometer, W.
    pub power: f64,
    pub background: f64,
    pub noise: DetectorNoise,
    /// Nodes of the per-sample dark-port table.
    pub grid_points: usize,
}

impl RunPhysics {
    pub const DEFAULT_GRID_POINTS: usize = 1025;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub modulation: ModulationConfig,
    pub duration: f64,
    pub sample_rate: f64,
    /// Input photons per sample; defaults to `power / (h nu) / sample_rate`.
    pub photons_per_sample: Option<f64>,
    pub seed: u64,
}

/// Simulated split-detector position record for one modulated run.
///
/// Each sample maps the instantaneous detuning through the prism to a kick,
/// builds the dark-port profile and reads it out with the per-sample photon
/// budget. One generator seeded from `seed` drives the whole record.
pub fn synthesize_run(physics: &RunPhysics, spec: &RunSpec) -> Result<TimeSeries> {
    let m = &spec.modulation;
    if !(m.frequency > 0.0 && m.amplitude >= 0.0 && m.amplitude.is_finite()) {
        return Err(Error::validation(
            "modulation needs frequency > 0 and amplitude >= 0",
        ));
    }
    if !(spec.sample_rate > 0.0 && spec.duration > 0.0) {
        return Err(Error::validation("duration and sample rate must be positive"));
    }
    let cycles = spec.duration * m.frequency;
    if (cycles - cycles.round()).abs() > 1e-9 * cycles.max(1.0) || cycles.round() < 1.0 {
        return Err(Error::validation(format!(
            "duration {} s is not a whole number of {} Hz cycles",
            spec.duration, m.frequency
        )));
    }
    let n_samples = (spec.duration * spec.sample_rate).round() as usize;
    if n_samples == 0 {
        return Err(Error::validation("run holds no samples"));
    }
    let photons = match spec.photons_per_sample {
        Some(n) => n,
        None => photon_number(physics.power, &physics.chain.carrier, 1.0 / spec.sample_rate)?,
    };
    let p_ps = postselection_probability(physics.state.phase())?;
    if !(photons * p_ps >= 10.0) {
        return Err(Error::validation(format!(
            "only {:.3} postselected photons per sample (need >= 10)",
            photons * p_ps
        )));
    }

    let sigma = physics.state.sigma();
    for extreme in [m.amplitude, -m.amplitude] {
        physics
            .chain
            .kick(extreme)
            .and_then(|kick| weak_value_regime(kick, sigma))
            .map_err(|e| e.context(format!("modulation extreme {extreme:e} Hz")))?;
    }

    let grid = physics.state.beam().quadrature_grid(physics.grid_points);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / spec.sample_rate;
        let kick = physics.chain.kick(m.detuning(t))?;
        let profile = dark_port_profile_with_background(kick, &physics.state, &grid, physics.background)?;
        let detected = (photons * profile.detected_fraction()).round();
        if detected < 1.0 {
            return Err(Error::validation("no photons reach the detector"));
        }
        let est = simulate_split_detection_with(
            &profile,
            detected as u64,
            &mut rng,
            SamplingMode::Auto,
            &physics.noise,
        )?;
        samples.push(est.position);
    }
    TimeSeries::new(spec.sample_rate, 0.0, samples)
}
