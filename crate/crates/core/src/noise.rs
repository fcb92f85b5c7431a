//! Photon budget, shot-noise SNR and split-detector Monte Carlo.
//!
//! The shot-noise SNR of the weak-value measurement is
//! `R = sqrt(8 N / pi) k0 sigma delta`, where `N` counts photons entering the
//! interferometer (not those reaching the detector). The Monte Carlo draws
//! individual photon positions from a tabulated dark-port profile and forms
//! the usual split-detector difference-over-sum estimate.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::dispersion::{DispersionChain, OpticalCarrier};
use crate::error::{Error, Result};
use crate::interferometer::{dark_port_profile_with_background, DarkPortProfile, InterferometerState};
use crate::units::{PLANCK, SPEED_OF_LIGHT};

/// Default `k sigma` bound that defines the weak-value working range.
pub const DEFAULT_RANGE_THRESHOLD: f64 = 0.5;

/// Photon counts above which [`SamplingMode::Auto`] switches to aggregated draws.
pub const PER_PHOTON_LIMIT: u64 = 100_000;

/// Number of photons delivered by `power` watts over `integration_time` seconds.
pub fn photon_number(power: f64, carrier: &OpticalCarrier, integration_time: f64) -> Result<f64> {
    if !(power >= 0.0 && power.is_finite()) {
        return Err(Error::validation(format!("power must be >= 0, got {power:e}")));
    }
    if !(integration_time > 0.0 && integration_time.is_finite()) {
        return Err(Error::validation("integration time must be positive"));
    }
    Ok(power * integration_time * carrier.wavelength() / (PLANCK * SPEED_OF_LIGHT))
}

/// Light budget entering the interferometer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonBudget {
    power: f64,
    carrier: OpticalCarrier,
    integration_time: f64,
    n_photons: f64,
}

impl PhotonBudget {
    pub fn new(power: f64, carrier: OpticalCarrier, integration_time: f64) -> Result<Self> {
        let n_photons = photon_number(power, &carrier, integration_time)?;
        Ok(Self {
            power,
            carrier,
            integration_time,
            n_photons,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn carrier(&self) -> &OpticalCarrier {
        &self.carrier
    }

    pub fn integration_time(&self) -> f64 {
        self.integration_time
    }

    /// Photons entering the interferometer (not the detected count).
    pub fn n_photons(&self) -> f64 {
        self.n_photons
    }

    pub fn with_power(self, power: f64) -> Result<Self> {
        Self::new(power, self.carrier, self.integration_time)
    }

    pub fn with_integration_time(self, integration_time: f64) -> Result<Self> {
        Self::new(self.power, self.carrier, integration_time)
    }
}

/// Shot-noise limited SNR `sqrt(8 N / pi) k0 sigma delta`.
///
/// Independent of the dark-port phase: postselection discards photons but
/// amplifies the shift by the same factor.
pub fn shot_noise_snr(n_photons: f64, wavenumber: f64, sigma: f64, deflection: f64) -> Result<f64> {
    if !(n_photons >= 0.0) {
        return Err(Error::validation("photon number must be >= 0"));
    }
    Ok((8.0 * n_photons / PI).sqrt() * wavenumber * sigma * deflection)
}

/// Frequency shift giving unit shot-noise SNR in one second, Hz/sqrt(Hz).
pub fn ideal_sensitivity(power: f64, sigma: f64, chain: &DispersionChain) -> Result<f64> {
    let n = photon_number(power, &chain.carrier, 1.0)?;
    if n <= 0.0 {
        return Err(Error::validation(
            "zero optical power: sensitivity is unbounded",
        ));
    }
    let unit = shot_noise_snr(n, chain.carrier.wavenumber(), sigma, 1.0)?;
    let min_deflection = 1.0 / unit;
    Ok(min_deflection / chain.deflection_slope()?)
}

/// Normalises a minimum detectable shift to one second of integration.
pub fn measured_sensitivity(min_shift: f64, integration_time: f64) -> Result<f64> {
    if !(min_shift > 0.0) {
        return Err(Error::validation("minimum shift must be positive"));
    }
    if !(integration_time > 0.0) {
        return Err(Error::validation("integration time must be positive"));
    }
    Ok(min_shift * integration_time.sqrt())
}

/// Working range of the weak-value measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsableRange {
    /// Largest positive detuning keeping `k sigma` at or below the threshold, Hz.
    pub range: f64,
    /// Set when the material data ran out before the threshold was reached.
    pub clamped: bool,
}

/// Largest detuning with `k(dnu) sigma <= threshold`.
pub fn usable_range(sigma: f64, chain: &DispersionChain, threshold: f64) -> Result<UsableRange> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Domain {
            quantity: "range threshold",
            value: threshold,
            min: 0.0,
            max: 1.0,
        });
    }
    if threshold == 0.0 {
        return Ok(UsableRange {
            range: 0.0,
            clamped: false,
        });
    }
    let (lambda_min, _) = chain.prism.material().valid_range();
    let edge = (SPEED_OF_LIGHT / lambda_min - chain.carrier.frequency()) * (1.0 - 1e-12);
    let excess = |dnu: f64| -> Result<f64> { Ok(chain.kick(dnu)? * sigma - threshold) };
    if excess(edge)? < 0.0 {
        return Ok(UsableRange {
            range: edge,
            clamped: true,
        });
    }
    let range = crate::roots::bisect(excess, 0.0, edge, |_, r| r.abs() <= 1e-12 * threshold)?;
    Ok(UsableRange {
        range,
        clamped: false,
    })
}

/// Summary of a sensitivity estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    pub snr: f64,
    /// Deflection giving unit SNR, rad.
    pub min_deflection: f64,
    /// Detuning giving unit SNR at `integration_time`, Hz.
    pub min_frequency_shift: f64,
    pub integration_time: f64,
    /// Hz/sqrt(Hz).
    pub sensitivity_per_rt_hz: f64,
    /// Hz.
    pub usable_range: f64,
}

impl SensitivityReport {
    pub fn new(
        snr: f64,
        min_deflection: f64,
        min_frequency_shift: f64,
        integration_time: f64,
        usable_range: f64,
    ) -> Result<Self> {
        if [snr, min_deflection, min_frequency_shift, usable_range]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::validation("sensitivity report entries must be >= 0"));
        }
        Ok(Self {
            snr,
            min_deflection,
            min_frequency_shift,
            integration_time,
            sensitivity_per_rt_hz: measured_sensitivity(min_frequency_shift, integration_time)?,
            usable_range,
        })
    }
}

/// How photon positions are realised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Draw every photon position through the inverse CDF.
    PerPhoton,
    /// Draw only the left/right split: a photon from the inverse CDF lands left
    /// of the gap exactly when its uniform variate is below `F(0)`, so the left
    /// count is `Binomial(N, F(0))`. Same distribution, O(1) cost.
    Aggregated,
    /// Per-photon up to [`PER_PHOTON_LIMIT`], aggregated above.
    #[default]
    Auto,
}

/// Optional detector imperfections; all zero by default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectorNoise {
    /// Mean dark counts per readout, split evenly between the two halves.
    pub dark_counts: f64,
    /// Additive Gaussian readout noise on the position estimate, m rms.
    pub electronic_noise: f64,
}

/// One split-detector readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitEstimate {
    /// Estimated centroid, m.
    pub position: f64,
    /// Shot-noise standard error of `position`, m.
    pub std_error: f64,
    pub left: u64,
    pub right: u64,
}

/// Inverse-CDF sampler over a tabulated profile (piecewise-linear CDF).
#[derive(Debug, Clone)]
pub struct PhotonSampler<'a> {
    x: &'a [f64],
    cdf: Vec<f64>,
}

impl<'a> PhotonSampler<'a> {
    pub fn new(profile: &'a DarkPortProfile) -> Self {
        let mut cdf = profile.cdf_table();
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= total);
        Self {
            x: profile.x(),
            cdf,
        }
    }

    /// Position for uniform variate `u` in `[0, 1)`.
    pub fn position(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.x[i - 1] + t * (self.x[i] - self.x[i - 1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.position(rng.random::<f64>())
    }
}

/// Split-detector calibration: a small shift `x` of the profile changes the
/// difference-over-sum signal by `2 p(0) x`.
pub fn split_calibration(profile: &DarkPortProfile) -> Result<f64> {
    let p0 = profile.density_at(0.0);
    if !(p0 > 0.0) {
        return Err(Error::validation("profile has no weight at the detector gap"));
    }
    Ok(1.0 / (2.0 * p0))
}

fn check_profile(profile: &DarkPortProfile) -> Result<()> {
    let area = profile.total();
    if (area - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "profile is not normalized (area {area})"
        )));
    }
    Ok(())
}

/// Detects `n_detected` photons distributed as `profile` on a split detector
/// centred at x = 0 and returns the calibrated centroid estimate.
pub fn simulate_split_detection_with<R: Rng + ?Sized>(
    profile: &DarkPortProfile,
    n_detected: u64,
    rng: &mut R,
    mode: SamplingMode,
    noise: &DetectorNoise,
) -> Result<SplitEstimate> {
    check_profile(profile)?;
    if n_detected < 1 {
        return Err(Error::validation("need at least one detected photon"));
    }
    let scale = split_calibration(profile)?;
    let per_photon = match mode {
        SamplingMode::PerPhoton => true,
        SamplingMode::Aggregated => false,
        SamplingMode::Auto => n_detected <= PER_PHOTON_LIMIT,
    };
    let mut left = if per_photon {
        let sampler = PhotonSampler::new(profile);
        (0..n_detected).filter(|_| sampler.sample(rng) < 0.0).count() as u64
    } else {
        let p_left = profile.cdf_at(0.0).clamp(0.0, 1.0);
        Binomial::new(n_detected, p_left)
            .map_err(|e| Error::Numerical(e.to_string()))?
            .sample(rng)
    };
    let mut right = n_detected - left;
    if noise.dark_counts > 0.0 {
        let half = Poisson::new(noise.dark_counts / 2.0).map_err(|e| Error::Numerical(e.to_string()))?;
        left += half.sample(rng) as u64;
        right += half.sample(rng) as u64;
    }
    let total = (left + right) as f64;
    let d = (right as f64 - left as f64) / total;
    let mut position = d * scale;
    let mut variance = scale * scale * (1.0 - d * d).max(0.0) / total;
    if noise.electronic_noise > 0.0 {
        let e = Normal::new(0.0, noise.electronic_noise).map_err(|e| Error::Numerical(e.to_string()))?;
        position += e.sample(rng);
        variance += noise.electronic_noise * noise.electronic_noise;
    }
    Ok(SplitEstimate {
        position,
        std_error: variance.sqrt(),
        left,
        right,
    })
}

/// Seeded, noise-free [`simulate_split_detection_with`].
pub fn simulate_split_detection(
    profile: &DarkPortProfile,
    n_detected: u64,
    seed: u64,
) -> Result<SplitEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_split_detection_with(profile, n_detected, &mut rng, SamplingMode::Auto, &DetectorNoise::default())
}

/// Statistics of repeated split-detector readouts.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedReadout {
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std_dev: f64,
}

impl RepeatedReadout {
    /// `mean / std_dev`.
    pub fn snr(&self) -> f64 {
        self.mean / self.std_dev
    }
}

/// Runs `repetitions` independent readouts. Repetition `i` uses seed
/// `base_seed + i`, so the result does not depend on the thread count.
pub fn repeat_split_detection(
    profile: &DarkPortProfile,
    n_detected: u64,
    repetitions: usize,
    base_seed: u64,
    mode: SamplingMode,
    noise: &DetectorNoise,
) -> Result<RepeatedReadout> {
    if repetitions < 2 {
        return Err(Error::validation("need at least two repetitions"));
    }
    let estimates = (0..repetitions)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(i as u64));
            simulate_split_detection_with(profile, n_detected, &mut rng, mode, noise).map(|e| e.position)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std_dev) = mean_and_std(&estimates);
    Ok(RepeatedReadout {
        estimates,
        mean,
        std_dev,
    })
}

/// Mean and n-1 standard deviation, summed in index order.
pub(crate) fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0).max(1.0)).sqrt())
}

/// Setup for a Monte Carlo sensitivity estimate.
#[derive(Debug, Clone)]
pub struct SensitivityProbe {
    /// Detuning at which the SNR is measured, Hz.
    pub detuning: f64,
    pub integration_time: f64,
    pub power: f64,
    pub background: f64,
    pub noise: DetectorNoise,
    pub repetitions: usize,
    pub seed: u64,
    pub grid_points: usize,
}

/// Measures the SNR of a detuning step by Monte Carlo and scales it to the
/// unit-SNR shift and its one-second sensitivity.
pub fn simulate_sensitivity(
    state: &InterferometerState,
    chain: &DispersionChain,
    probe: &SensitivityProbe,
    range_threshold: f64,
) -> Result<SensitivityReport> {
    let n = photon_number(probe.power, &chain.carrier, probe.integration_time)?;
    let grid = state.beam().quadrature_grid(probe.grid_points);
    let kick = chain.kick(probe.detuning)?;
    crate::interferometer::weak_value_regime(kick, state.sigma())?;
    let profile = dark_port_profile_with_background(kick, state, &grid, probe.background)?;
    let n_detected = (n * profile.detected_fraction()).round();
    if n_detected < 1.0 {
        return Err(Error::validation(
            "photon budget too small: no photons reach the detector",
        ));
    }
    let readout = repeat_split_detection(
        &profile,
        n_detected as u64,
        probe.repetitions,
        probe.seed,
        SamplingMode::Auto,
        &probe.noise,
    )?;
    let snr = readout.snr();
    if !(snr > 0.0) {
        return Err(Error::Numerical(format!("non-positive simulated SNR {snr}")));
    }
    let range = usable_range(state.sigma(), chain, range_threshold)?.range;
    SensitivityReport::new(
        snr,
        chain.deflection(probe.detuning)? / snr,
        probe.detuning / snr,
        probe.integration_time,
        range,
    )
}
