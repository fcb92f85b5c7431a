//! Sagnac weak measurement of the prism kick.
//!
//! The two counter-propagating arms pick up opposite transverse kicks `+k`
//! and `-k`, and a small misalignment leaves a phase `phi` between them at
//! the dark port. With the meter field `psi(x) ~ exp(-x^2 / (4 sigma^2))`
//! the dark-port intensity is exactly
//!
//! ```text
//! I(x) ~ sin^2(k x + phi/2) exp(-x^2 / (2 sigma^2))
//! ```
//!
//! whose linearisation in `k` gives the weak-value shift
//! `2 k sigma^2 cot(phi/2)`.

use std::f64::consts::PI;

use log::warn;

use crate::dispersion::{grazing_radicand, OpticalCarrier};
use crate::error::{Error, Result};

/// `k sigma` above which the weak-value shift is flagged as marginal.
pub const WEAK_VALUE_WARN: f64 = 0.1;
/// `k sigma` above which the weak-value shift is rejected.
pub const WEAK_VALUE_LIMIT: f64 = 0.5;
/// Quadrature half-width in units of sigma.
pub const QUADRATURE_HALF_WIDTH: f64 = 8.0;
/// Default number of quadrature nodes (odd, so x = 0 is a node).
pub const DEFAULT_QUADRATURE_POINTS: usize = 4097;
/// Dark-port normalisation below which the port is considered empty.
pub const DARK_PORT_FLOOR: f64 = 1e-14;

/// Gaussian meter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamProfile {
    sigma: f64,
    carrier: OpticalCarrier,
}

impl BeamProfile {
    /// `sigma` is the intensity standard deviation, m.
    pub fn new(sigma: f64, carrier: OpticalCarrier) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::validation(format!(
                "beam radius must be positive, got {sigma:e}"
            )));
        }
        Ok(Self { sigma, carrier })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn carrier(&self) -> &OpticalCarrier {
        &self.carrier
    }

    /// Uniform grid over `[-8 sigma, 8 sigma]`.
    pub fn quadrature_grid(&self, points: usize) -> Vec<f64> {
        symmetric_grid(QUADRATURE_HALF_WIDTH * self.sigma, points)
    }
}

/// `points` evenly spaced nodes on `[-half_width, half_width]`.
pub fn symmetric_grid(half_width: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let h = 2.0 * half_width / (points - 1) as f64;
    (0..points).map(|i| -half_width + i as f64 * h).collect()
}

/// Interferometer operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerState {
    phase: f64,
    lever_arm: f64,
    beam: BeamProfile,
}

impl InterferometerState {
    pub fn new(phase: f64, lever_arm: f64, beam: BeamProfile) -> Result<Self> {
        if !(0.0..=PI).contains(&phase) {
            return Err(Error::Domain {
                quantity: "dark-port phase",
                value: phase,
                min: 0.0,
                max: PI,
            });
        }
        if !(lever_arm > 0.0 && lever_arm.is_finite()) {
            return Err(Error::validation("path length must be positive"));
        }
        Ok(Self {
            phase,
            lever_arm,
            beam,
        })
    }

    /// Operating point set by the fraction of light leaking into the dark port.
    pub fn from_postselection(probability: f64, lever_arm: f64, beam: BeamProfile) -> Result<Self> {
        Self::new(phase_for_postselection(probability)?, lever_arm, beam)
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn lever_arm(&self) -> f64 {
        self.lever_arm
    }

    pub fn beam(&self) -> &BeamProfile {
        &self.beam
    }

    pub fn sigma(&self) -> f64 {
        self.beam.sigma
    }
}

fn check_amplifying_phase(phase: f64) -> Result<()> {
    if phase > 0.0 && phase < PI {
        Ok(())
    } else {
        Err(Error::Domain {
            quantity: "dark-port phase",
            value: phase,
            min: 0.0,
            max: PI,
        })
    }
}

/// `|A_w| = cot(phi/2)`. The weak value itself is purely imaginary, which is
/// why it shows up as a position (not momentum) shift at the detector.
pub fn weak_value_magnitude(phase: f64) -> Result<f64> {
    check_amplifying_phase(phase)?;
    Ok(1.0 / (phase / 2.0).tan())
}

/// Dark-port probability `sin^2(phi/2)`.
pub fn postselection_probability(phase: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&phase) {
        return Err(Error::Domain {
            quantity: "dark-port phase",
            value: phase,
            min: 0.0,
            max: PI,
        });
    }
    let s = (phase / 2.0).sin();
    Ok(s * s)
}

/// Bright-port probability `cos^2(phi/2)`.
pub fn bright_port_probability(phase: f64) -> Result<f64> {
    Ok(1.0 - postselection_probability(phase)?)
}

/// Inverse of [`postselection_probability`].
pub fn phase_for_postselection(probability: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(Error::Domain {
            quantity: "postselection probability",
            value: probability,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(2.0 * probability.sqrt().asin())
}

/// Regime of the linearised weak-value shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakRegime {
    /// `k sigma <= 0.1`
    Linear,
    /// `0.1 < k sigma <= 0.5`: still accepted, flagged.
    Marginal,
}

pub fn weak_value_regime(kick: f64, sigma: f64) -> Result<WeakRegime> {
    let k_sigma = (kick * sigma).abs();
    if k_sigma > WEAK_VALUE_LIMIT {
        Err(Error::WeakValueViolation {
            k_sigma,
            bound: WEAK_VALUE_LIMIT,
        })
    } else if k_sigma > WEAK_VALUE_WARN {
        Ok(WeakRegime::Marginal)
    } else {
        Ok(WeakRegime::Linear)
    }
}

/// Weak-value amplified centroid shift `2 k sigma^2 cot(phi/2)`, m.
pub fn amplified_deflection(kick: f64, state: &InterferometerState) -> Result<f64> {
    let sigma = state.sigma();
    if weak_value_regime(kick, sigma)? == WeakRegime::Marginal {
        warn!("k*sigma = {:.3} is outside the linear weak-value regime", kick * sigma);
    }
    Ok(2.0 * kick * sigma * sigma * weak_value_magnitude(state.phase)?)
}

/// The amplified shift written directly in prism quantities with the
/// small-phase weak value `2/phi`:
/// `8 k0 sigma^2 (dn/phi) / sqrt(sin(apex/2)^-2 - n^2)`.
pub fn amplified_deflection_closed_form(
    delta_n: f64,
    apex: f64,
    n: f64,
    phase: f64,
    sigma: f64,
    wavenumber: f64,
) -> Result<f64> {
    check_amplifying_phase(phase)?;
    let radicand = grazing_radicand(n, apex)?;
    Ok(8.0 * wavenumber * sigma * sigma * (delta_n / phase) / radicand.sqrt())
}

/// Plain lever-arm deflection `l k / k0`, m.
pub fn unamplified_deflection(kick: f64, lever_arm: f64, wavenumber: f64) -> f64 {
    lever_arm * kick / wavenumber
}

/// Ratio of amplified to lever-arm deflection, `2 k0 sigma^2 cot(phi/2) / l`.
/// The kick cancels, so this does not depend on the prism.
pub fn amplification_factor(state: &InterferometerState) -> Result<f64> {
    let sigma = state.sigma();
    let k0 = state.beam.carrier.wavenumber();
    Ok(2.0 * k0 * sigma * sigma * weak_value_magnitude(state.phase)? / state.lever_arm)
}

/// Unnormalised exact dark-port intensity at position `x`.
pub fn dark_port_intensity(kick: f64, state: &InterferometerState, x: f64) -> f64 {
    let sigma = state.sigma();
    let s = (kick * x + state.phase / 2.0).sin();
    s * s * (-x * x / (2.0 * sigma * sigma)).exp()
}

/// Trapezoid rule on an arbitrary increasing grid.
pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Centroid of the exact dark-port intensity by trapezoid quadrature over
/// `[-8 sigma, 8 sigma]` with `points` nodes. Valid well beyond `k sigma << 1`.
pub fn exact_dark_port_mean_with(
    kick: f64,
    state: &InterferometerState,
    points: usize,
) -> Result<f64> {
    if points < 4096 {
        return Err(Error::validation("quadrature needs at least 4096 points"));
    }
    let grid = state.beam.quadrature_grid(points);
    let intensity: Vec<f64> = grid
        .iter()
        .map(|&x| dark_port_intensity(kick, state, x))
        .collect();
    let norm = trapezoid(&grid, &intensity);
    let gauss_norm = state.sigma() * (2.0 * PI).sqrt();
    if norm / gauss_norm < DARK_PORT_FLOOR {
        return Err(Error::DarkPortEmpty(norm / gauss_norm));
    }
    let weighted: Vec<f64> = grid.iter().zip(&intensity).map(|(x, i)| x * i).collect();
    Ok(trapezoid(&grid, &weighted) / norm)
}

pub fn exact_dark_port_mean(kick: f64, state: &InterferometerState) -> Result<f64> {
    exact_dark_port_mean_with(kick, state, DEFAULT_QUADRATURE_POINTS)
}

/// Dark-port intensity sampled on a grid and normalised to unit area.
#[derive(Debug, Clone, PartialEq)]
pub struct DarkPortProfile {
    x: Vec<f64>,
    density: Vec<f64>,
    detected_fraction: f64,
}

impl DarkPortProfile {
    /// Wraps tabulated samples; fails unless the trapezoid area is 1 +- 1e-9.
    pub fn from_samples(x: Vec<f64>, density: Vec<f64>, detected_fraction: f64) -> Result<Self> {
        validate_grid(&x)?;
        if density.len() != x.len() {
            return Err(Error::validation("profile and grid lengths differ"));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::validation("profile has negative or non-finite samples"));
        }
        let area = trapezoid(&x, &density);
        if (area - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "profile is not normalized (area {area})"
            )));
        }
        Ok(Self {
            x,
            density,
            detected_fraction,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Photons reaching the detector per photon entering the interferometer.
    pub fn detected_fraction(&self) -> f64 {
        self.detected_fraction
    }

    pub fn total(&self) -> f64 {
        trapezoid(&self.x, &self.density)
    }

    pub fn first_moment(&self) -> f64 {
        let w: Vec<f64> = self.x.iter().zip(&self.density).map(|(x, d)| x * d).collect();
        trapezoid(&self.x, &w)
    }

    /// Linearly interpolated density; zero outside the grid.
    pub fn density_at(&self, x0: f64) -> f64 {
        match self.cell(x0) {
            Some(i) => {
                let t = (x0 - self.x[i]) / (self.x[i + 1] - self.x[i]);
                self.density[i] + t * (self.density[i + 1] - self.density[i])
            }
            None => 0.0,
        }
    }

    /// Cumulative trapezoid table, same length as the grid.
    pub fn cdf_table(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.x.len());
        out.push(0.0);
        for i in 1..self.x.len() {
            acc += 0.5 * (self.x[i] - self.x[i - 1]) * (self.density[i] + self.density[i - 1]);
            out.push(acc);
        }
        out
    }

    /// Probability mass left of `x0` under the piecewise-linear CDF.
    pub fn cdf_at(&self, x0: f64) -> f64 {
        if x0 <= self.x[0] {
            return 0.0;
        }
        let cdf = self.cdf_table();
        match self.cell(x0) {
            Some(i) => {
                let t = (x0 - self.x[i]) / (self.x[i + 1] - self.x[i]);
                cdf[i] + t * (cdf[i + 1] - cdf[i])
            }
            None => *cdf.last().unwrap(),
        }
    }

    fn cell(&self, x0: f64) -> Option<usize> {
        let n = self.x.len();
        if !(x0 >= self.x[0] && x0 <= self.x[n - 1]) {
            return None;
        }
        let i = self.x.partition_point(|&v| v <= x0).saturating_sub(1);
        Some(i.min(n - 2))
    }
}

fn validate_grid(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::validation("grid needs at least two points"));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation("grid must be strictly increasing"));
    }
    Ok(())
}

/// Exact dark-port profile on `grid`, normalised to unit area.
pub fn dark_port_profile(
    kick: f64,
    state: &InterferometerState,
    grid: &[f64],
) -> Result<DarkPortProfile> {
    dark_port_profile_with_background(kick, state, grid, 0.0)
}

/// As [`dark_port_profile`], plus a uniform background carrying a fraction
/// `background` of the input photons (stray light from imperfect optics).
pub fn dark_port_profile_with_background(
    kick: f64,
    state: &InterferometerState,
    grid: &[f64],
    background: f64,
) -> Result<DarkPortProfile> {
    validate_grid(grid)?;
    if !(background >= 0.0 && background.is_finite()) {
        return Err(Error::validation("background fraction must be >= 0"));
    }
    let intensity: Vec<f64> = grid
        .iter()
        .map(|&x| dark_port_intensity(kick, state, x))
        .collect();
    let area = trapezoid(grid, &intensity);
    // With a unit-area Gaussian meter, the transmitted fraction is area / (sigma sqrt(2 pi)).
    let signal_fraction = area / (state.sigma() * (2.0 * PI).sqrt());
    if signal_fraction + background < DARK_PORT_FLOOR {
        return Err(Error::DarkPortEmpty(signal_fraction + background));
    }
    let total = signal_fraction + background;
    let width = grid[grid.len() - 1] - grid[0];
    let density: Vec<f64> = intensity
        .iter()
        .map(|&i| {
            let signal = if area > 0.0 { i / area } else { 0.0 };
            (signal_fraction * signal + background / width) / total
        })
        .collect();
    // Remove the last bit of rounding so the area check is exact to 1e-9.
    let a = trapezoid(grid, &density);
    let density = density.into_iter().map(|d| d / a).collect();
    DarkPortProfile::from_samples(grid.to_vec(), density, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIGMA: f64 = 388e-6;

    fn beam() -> BeamProfile {
        BeamProfile::new(SIGMA, OpticalCarrier::from_wavelength(780e-9).unwrap()).unwrap()
    }

    fn state(phase: f64) -> InterferometerState {
        InterferometerState::new(phase, 0.27, beam()).unwrap()
    }

    /// Gaussian moments of sin^2(kx + phi/2): the centroid is
    /// 2 k s^2 sin(phi) e / (1 - cos(phi) e), e = exp(-2 k^2 s^2).
    fn analytic_mean(k: f64, phase: f64, s: f64) -> f64 {
        let e = (-2.0 * k * k * s * s).exp();
        2.0 * k * s * s * phase.sin() * e / (1.0 - phase.cos() * e)
    }

    #[test]
    fn weak_value_cases() {
        assert!((weak_value_magnitude(PI / 2.0).unwrap() - 1.0).abs() < 1e-15);
        let w = weak_value_magnitude(0.01).unwrap();
        assert!((w / (2.0 / 0.01) - 1.0).abs() < 1e-4);
        let phase = phase_for_postselection(0.013).unwrap();
        assert!((phase - 0.228_532_073_947_624).abs() < 1e-12);
        assert!((weak_value_magnitude(phase).unwrap() - 8.713_384_929_123_52).abs() < 1e-9);
        assert!(weak_value_magnitude(0.0).is_err());
        assert!(weak_value_magnitude(PI).is_err());
        assert!(weak_value_magnitude(-0.1).is_err());
    }

    #[test]
    fn postselection_cases() {
        assert_eq!(postselection_probability(0.0).unwrap(), 0.0);
        assert!((postselection_probability(PI).unwrap() - 1.0).abs() < 1e-15);
        assert!((postselection_probability(0.2284).unwrap() - 0.013).abs() < 1e-4);
        for i in 0..=100 {
            let phi = PI * i as f64 / 100.0;
            let p = postselection_probability(phi).unwrap();
            let c = (phi / 2.0).cos();
            assert!((0.0..=1.0).contains(&p));
            assert!((p + c * c - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn amplified_deflection_cases() {
        let st = InterferometerState::from_postselection(0.013, 0.27, beam()).unwrap();
        assert_eq!(amplified_deflection(0.0, &st).unwrap(), 0.0);
        let a = amplified_deflection(10.0, &st).unwrap();
        assert!(a > 0.0);
        assert_eq!(amplified_deflection(-10.0, &st).unwrap(), -a);
        assert_eq!(weak_value_regime(0.2 / SIGMA, SIGMA).unwrap(), WeakRegime::Marginal);
        assert!(matches!(
            amplified_deflection(0.6 / SIGMA, &st),
            Err(Error::WeakValueViolation { .. })
        ));
    }

    #[test]
    fn closed_form_zero_and_small_phase_gap() {
        assert_eq!(
            amplified_deflection_closed_form(0.0, 0.78, 1.45, 0.2, SIGMA, 8e6).unwrap(),
            0.0
        );
        // Same inputs through the weak-value route: ratio is (2/phi)/cot(phi/2).
        let (dn, apex, n, phase) = (3.4e-11, 0.78, 1.4537, 0.2285);
        let k0 = beam().carrier().wavenumber();
        let closed = amplified_deflection_closed_form(dn, apex, n, phase, SIGMA, k0).unwrap();
        let delta = crate::dispersion::deflection_from_index_change(dn, n, apex).unwrap();
        let weak = amplified_deflection(delta * k0, &state(phase)).unwrap();
        let expected = (2.0 / phase) / weak_value_magnitude(phase).unwrap();
        assert!((closed / weak - expected).abs() < 1e-12);
        assert!((expected - 1.0).abs() < phase * phase / 10.0);
    }

    #[test]
    fn amplification_cases() {
        let st = InterferometerState::from_postselection(0.013, 0.27, beam()).unwrap();
        let a = amplification_factor(&st).unwrap();
        assert!((a - 78.271_174_113_834).abs() < 1e-9);
        let k0 = beam().carrier().wavenumber();
        let half = amplification_factor(&state(PI / 2.0)).unwrap();
        assert!((half - 2.0 * k0 * SIGMA * SIGMA / 0.27).abs() < 1e-12 * half);
        for k in [1e-3, 1.0, 30.0] {
            let ratio = amplified_deflection(k, &st).unwrap() / unamplified_deflection(k, 0.27, k0);
            assert!((ratio / a - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unamplified_is_linear() {
        assert_eq!(unamplified_deflection(0.0, 0.27, 8e6), 0.0);
        let a = unamplified_deflection(3.0, 0.27, 8e6);
        assert!((unamplified_deflection(3.0, 0.54, 8e6) - 2.0 * a).abs() < 1e-25);
    }

    #[test]
    fn exact_mean_matches_analytic_moments() {
        assert!(exact_dark_port_mean(0.0, &state(0.3)).unwrap().abs() < 1e-12 * SIGMA);
        for (k, phase) in [(50.0, 0.3), (300.0, 0.1), (1.0, 1.0), (800.0, 2.0)] {
            let q = exact_dark_port_mean(k, &state(phase)).unwrap();
            let a = analytic_mean(k, phase, SIGMA);
            assert!((q / a - 1.0).abs() < 1e-9, "k={k} phase={phase}: {q} vs {a}");
        }
    }

    #[test]
    fn bright_port_limit_is_symmetric() {
        let st = state(PI);
        for ks in [0.01, 0.05, 0.1] {
            let m = exact_dark_port_mean(ks / SIGMA, &st).unwrap();
            assert!(m.abs() <= 0.01 * SIGMA);
        }
    }

    #[test]
    fn empty_dark_port() {
        assert!(matches!(
            exact_dark_port_mean(0.0, &state(0.0)),
            Err(Error::DarkPortEmpty(_))
        ));
        let grid = beam().quadrature_grid(4097);
        assert!(dark_port_profile(0.0, &state(0.0), &grid).is_err());
    }

    #[test]
    fn profile_normalization_and_moments() {
        let grid = beam().quadrature_grid(4096);
        let st = state(0.3);
        let p0 = dark_port_profile(0.0, &st, &grid).unwrap();
        assert!((p0.total() - 1.0).abs() < 1e-9);
        let peak = p0
            .density()
            .iter()
            .cloned()
            .fold(f64::MIN, f64::max);
        let gauss_peak = 1.0 / (SIGMA * (2.0 * PI).sqrt());
        assert!((peak / gauss_peak - 1.0).abs() < 1e-5);
        let var: f64 = {
            let w: Vec<f64> = grid.iter().zip(p0.density()).map(|(x, d)| x * x * d).collect();
            trapezoid(&grid, &w)
        };
        assert!((var / (SIGMA * SIGMA) - 1.0).abs() < 1e-9);

        let k = 120.0;
        let p = dark_port_profile(k, &st, &grid).unwrap();
        let exact = exact_dark_port_mean(k, &st).unwrap();
        assert!((p.first_moment() / exact - 1.0).abs() < 1e-6);
        let e = (-2.0 * k * k * SIGMA * SIGMA).exp();
        assert!((p.detected_fraction() - (1.0 - 0.3f64.cos() * e) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn background_adds_detected_light() {
        let grid = beam().quadrature_grid(4097);
        let st = state(0.2285);
        let p = dark_port_profile_with_background(0.0, &st, &grid, 0.02).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-9);
        assert!((p.detected_fraction() - (0.013 + 0.02)).abs() < 1e-4);
        assert!(dark_port_profile_with_background(0.0, &st, &grid, -1.0).is_err());
    }

    #[test]
    fn profile_rejects_bad_grid() {
        let st = state(0.3);
        assert!(dark_port_profile(0.0, &st, &[0.0, 0.0, 1.0]).is_err());
        assert!(DarkPortProfile::from_samples(vec![0.0, 1.0], vec![0.5, 0.6], 1.0).is_err());
    }

    #[test]
    fn cdf_and_density_interpolation() {
        let grid = beam().quadrature_grid(4097);
        let p = dark_port_profile(0.0, &state(0.5), &grid).unwrap();
        assert!((p.cdf_at(0.0) - 0.5).abs() < 1e-12);
        assert_eq!(p.cdf_at(-1.0), 0.0);
        assert!((p.cdf_at(1.0) - 1.0).abs() < 1e-12);
        let g0 = 1.0 / (SIGMA * (2.0 * PI).sqrt());
        assert!((p.density_at(0.0) / g0 - 1.0).abs() < 1e-9);
    }
}
