//! End-to-end experiment recipes driven by an [`ExperimentConfig`].
//!
//! Each recipe returns plain data plus a CSV rendering whose header embeds the
//! resolved configuration and its hash.

use rayon::prelude::*;

use crate::calibration::{propagate_calibration_error, ReferenceLine, ScanCalibration};
use crate::config::ExperimentConfig;
use crate::csvio::{write_table, Metadata};
use crate::error::{Error, Result};
use crate::interferometer::{amplification_factor, postselection_probability};
use crate::noise::{
    ideal_sensitivity, measured_sensitivity, simulate_sensitivity, usable_range, SensitivityProbe,
    SensitivityReport, UsableRange,
};
use crate::signal_chain::{
    bandpass, extract_peaks, power_spectrum, slope_fit, synthesize_run, FitPoint, LineFit,
    ModulationConfig, RunPhysics, RunSpec, Spectrum, TimeSeries,
};
use crate::units::SPEED_OF_LIGHT;

const CONFIG_PREFIX: &str = "config.";

/// Header block shared by every output: hash, seed, resolved config and the
/// derived operating point.
pub fn config_metadata(cfg: &ExperimentConfig) -> Result<Metadata> {
    let mut meta = Metadata::new();
    meta.push("config_hash", cfg.hash()).push("seed", cfg.seed);
    for line in cfg.canonical().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            meta.push(format!("{CONFIG_PREFIX}{k}"), v);
        }
    }
    let state = cfg.interferometer()?;
    let chain = cfg.dispersion_chain()?;
    meta.push_num("derived.apex_angle_rad", chain.prism.apex_angle())
        .push_num("derived.phase_rad", state.phase())
        .push_num("derived.postselection", postselection_probability(state.phase())?)
        .push_num("derived.amplification", amplification_factor(&state)?)
        .push_num("derived.unamplified_slope_m_per_hz", chain.unamplified_slope(cfg.lever_arm)?);
    Ok(meta)
}

/// Rebuilds the configuration embedded in an output file's metadata.
pub fn config_from_metadata(meta: &Metadata) -> Result<ExperimentConfig> {
    let text: String = meta
        .0
        .iter()
        .filter_map(|(k, v)| k.strip_prefix(CONFIG_PREFIX).map(|k| format!("{k} = {v}\n")))
        .collect();
    if text.is_empty() {
        return Err(Error::validation("file carries no embedded configuration"));
    }
    let cfg = ExperimentConfig::from_layers([text.as_str()])?;
    if let Some(h) = meta.get("config_hash") {
        if h != cfg.hash() {
            return Err(Error::validation("embedded configuration does not match its hash"));
        }
    }
    Ok(cfg)
}

fn run_spec(cfg: &ExperimentConfig, amplitude: f64, duration: f64, seed: u64) -> RunSpec {
    RunSpec {
        modulation: ModulationConfig {
            frequency: cfg.mod_frequency,
            amplitude,
        },
        duration,
        sample_rate: cfg.sample_rate,
        photons_per_sample: cfg.photons_per_sample,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub detuning: f64,
    /// Mean per-cycle peak referred back to the detector (divided by the gain), m.
    pub mean_deflection: f64,
    pub std_of_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeStudy {
    pub points: Vec<SweepPoint>,
    pub fit: LineFit,
    pub amplification: f64,
    pub unamplified_slope: f64,
}

impl SlopeStudy {
    /// Slope expected from the small-signal model, m/Hz.
    pub fn model_slope(&self) -> f64 {
        self.amplification * self.unamplified_slope
    }
}

/// Measures the filtered peak deflection at one detuning.
pub fn measure_point(
    cfg: &ExperimentConfig,
    physics: &RunPhysics,
    detuning: f64,
    seed: u64,
) -> Result<SweepPoint> {
    let duration = cfg.settle + cfg.cycles as f64 * cfg.cycle_period;
    let raw = synthesize_run(physics, &run_spec(cfg, detuning, duration, seed))?;
    let filtered = bandpass(&raw, &cfg.filter)?;
    let peaks = extract_peaks(&filtered, cfg.cycle_period, cfg.cycles)?;
    Ok(SweepPoint {
        detuning,
        mean_deflection: peaks.mean / cfg.filter.center_gain(),
        std_of_mean: peaks.std_of_mean / cfg.filter.center_gain(),
    })
}

/// Sweep of filtered peak deflection against modulation depth and a weighted
/// line fit through it. Point `i` uses seed `seed + i`.
pub fn run_slope(cfg: &ExperimentConfig) -> Result<SlopeStudy> {
    let mut distinct = cfg.sweep.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "sweep has {} distinct detuning(s); a slope needs at least two",
            distinct.len()
        )));
    }
    let physics = cfg.run_physics()?;
    let points = cfg
        .sweep
        .par_iter()
        .enumerate()
        .map(|(i, &dv)| {
            measure_point(cfg, &physics, dv, cfg.seed.wrapping_add(i as u64))
                .map_err(|e| e.context(format!("sweep point {i} ({dv:e} Hz)")))
        })
        .collect::<Result<Vec<_>>>()?;
    let weighted = points.iter().all(|p| p.std_of_mean > 0.0);
    let fit_points: Vec<FitPoint> = points
        .iter()
        .map(|p| {
            if weighted {
                FitPoint::with_error(p.detuning, p.mean_deflection, p.std_of_mean)
            } else {
                FitPoint::new(p.detuning, p.mean_deflection)
            }
        })
        .collect();
    Ok(SlopeStudy {
        fit: slope_fit(&fit_points)?,
        amplification: amplification_factor(&physics.state)?,
        unamplified_slope: physics.chain.unamplified_slope(cfg.lever_arm)?,
        points,
    })
}

pub fn slope_csv(cfg: &ExperimentConfig, study: &SlopeStudy) -> Result<String> {
    let mut meta = config_metadata(cfg)?;
    meta.push("kind", "slope")
        .push_num("fit.slope_m_per_hz", study.fit.slope)
        .push_num("fit.slope_error_m_per_hz", study.fit.slope_error)
        .push_num("fit.intercept_m", study.fit.intercept)
        .push_num("fit.intercept_error_m", study.fit.intercept_error)
        .push_num("fit.chi_squared", study.fit.chi_squared)
        .push_num("model.slope_m_per_hz", study.model_slope());
    let rows: Vec<Vec<f64>> = study
        .points
        .iter()
        .map(|p| vec![p.detuning, p.mean_deflection, p.std_of_mean, study.fit.predict(p.detuning)])
        .collect();
    Ok(write_table(
        &meta,
        &["detuning_hz", "mean_deflection_m", "std_of_mean_m", "fit_m"],
        &rows,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumStudy {
    /// Both traces are referenced to the driven fundamental (0 dB).
    pub driven: Spectrum,
    pub undriven: Spectrum,
    pub fundamental_db: f64,
    /// Mean bin power of the driven trace over 5 Hz .. 100 Hz, away from DC
    /// and the modulation harmonics.
    pub driven_floor_db: f64,
    /// Mean bin power of the undriven trace over 5 Hz .. 50 Hz.
    pub undriven_floor_db: f64,
    /// Highest undriven bin in 5 Hz .. 50 Hz minus `undriven_floor_db`.
    pub undriven_max_excess_db: f64,
    /// Line fit of undriven dB against frequency over 10 Hz .. 100 Hz.
    pub undriven_trend: LineFit,
}

impl SpectrumStudy {
    pub fn fundamental_to_floor_db(&self) -> f64 {
        self.fundamental_db - self.driven_floor_db
    }
}

fn harmonics(f0: f64, upto: f64) -> Vec<f64> {
    (1..).map(|k| k as f64 * f0).take_while(|f| *f <= upto + f0).collect()
}

/// Raw detector spectra with and without modulation.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<SpectrumStudy> {
    let physics = cfg.run_physics()?;
    let spec_cfg = cfg.spectrum_config();
    let seeds = [cfg.seed, cfg.seed.wrapping_add(1)];
    let amps = [cfg.drive, 0.0];
    let traces = (0..2)
        .into_par_iter()
        .map(|i| {
            let run = synthesize_run(&physics, &run_spec(cfg, amps[i], cfg.spectrum_duration, seeds[i]))?;
            power_spectrum(&run, &spec_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let (driven, undriven) = (&traces[0], &traces[1]);
    let f0 = cfg.mod_frequency;
    let reference = driven.power_linear(driven.bin_of(f0));
    let driven = driven.rereferenced(reference)?;
    let undriven = undriven.rereferenced(reference)?;
    let driven_floor_db = driven.floor_db(5.0, 100.0, &harmonics(f0, 100.0))?;
    let undriven_floor_db = undriven.floor_db(5.0, 50.0, &[])?;
    let undriven_max_excess_db = undriven
        .band_bins(5.0, 50.0, &[])
        .iter()
        .map(|&b| undriven.power_db()[b])
        .fold(f64::NEG_INFINITY, f64::max)
        - undriven_floor_db;
    let trend_points: Vec<FitPoint> = undriven
        .band_bins(10.0, 100.0, &[])
        .iter()
        .map(|&b| FitPoint::new(undriven.frequencies()[b], undriven.power_db()[b]))
        .collect();
    Ok(SpectrumStudy {
        fundamental_db: driven.power_db()[driven.bin_of(f0)],
        driven_floor_db,
        undriven_floor_db,
        undriven_max_excess_db,
        undriven_trend: slope_fit(&trend_points)?,
        driven,
        undriven,
    })
}

pub fn spectrum_csv(cfg: &ExperimentConfig, study: &SpectrumStudy) -> Result<String> {
    let mut meta = config_metadata(cfg)?;
    meta.push("kind", "spectrum_pair")
        .push("db_reference", "driven fundamental")
        .push_num("resolution_bw", study.driven.resolution_bw())
        .push("window", study.driven.window())
        .push("segments", study.driven.segments())
        .push_num("fundamental_to_floor_db", study.fundamental_to_floor_db())
        .push_num("undriven_floor_db", study.undriven_floor_db)
        .push_num("undriven_max_excess_db", study.undriven_max_excess_db);
    let rows: Vec<Vec<f64>> = (0..study.driven.frequencies().len())
        .map(|b| {
            vec![
                study.driven.frequencies()[b],
                study.driven.power_db()[b],
                study.undriven.power_db()[b],
            ]
        })
        .collect();
    Ok(write_table(&meta, &["frequency_hz", "driven_db", "undriven_db"], &rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicStudy {
    pub spectrum: Spectrum,
    pub drive: f64,
    /// `k sigma cot(phi/2)` at the modulation peak.
    pub nonlinearity: f64,
    pub floor_db: f64,
    /// `(frequency, level dB re fundamental)` for the 2nd and 3rd harmonics.
    pub harmonics: Vec<(f64, f64)>,
}

/// Spectrum of a run driven hard enough for the centroid response to bend.
pub fn run_harmonics(cfg: &ExperimentConfig) -> Result<HarmonicStudy> {
    let physics = cfg.run_physics()?;
    let run = synthesize_run(
        &physics,
        &run_spec(cfg, cfg.nonlinear_drive, cfg.spectrum_duration, cfg.seed.wrapping_add(2)),
    )?;
    let raw = power_spectrum(&run, &cfg.spectrum_config())?;
    let f0 = cfg.mod_frequency;
    let spectrum = raw.rereferenced(raw.power_linear(raw.bin_of(f0)))?;
    let floor_db = spectrum.floor_db(5.0, 100.0, &harmonics(f0, 100.0))?;
    let kick = physics.chain.kick(cfg.nonlinear_drive)?;
    let cot = 1.0 / (physics.state.phase() / 2.0).tan();
    Ok(HarmonicStudy {
        harmonics: [2.0, 3.0]
            .iter()
            .map(|k| (k * f0, spectrum.power_db()[spectrum.bin_of(k * f0)]))
            .collect(),
        nonlinearity: kick * physics.state.sigma() * cot,
        drive: cfg.nonlinear_drive,
        floor_db,
        spectrum,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityStudy {
    /// Shot-noise limit at 1 s, Hz/sqrt(Hz).
    pub ideal: f64,
    /// Monte Carlo readout at `min_detuning` with the configured integration time.
    pub simulated: SensitivityReport,
    /// One standard error of the simulated sensitivity from the finite number
    /// of repetitions, Hz/sqrt(Hz).
    pub statistical_error: f64,
    /// Calibration share of the error, when a calibration is supplied.
    pub calibration_error: Option<f64>,
    /// `min_detuning * sqrt(integration_time)`: the sensitivity a unit-SNR
    /// reading at that detuning implies.
    pub unit_snr_sensitivity: f64,
    pub range: UsableRange,
}

impl SensitivityStudy {
    pub fn ratio(&self) -> f64 {
        self.simulated.sensitivity_per_rt_hz / self.ideal
    }
}

pub fn run_sensitivity(cfg: &ExperimentConfig, calibration: Option<&ScanCalibration>) -> Result<SensitivityStudy> {
    let state = cfg.interferometer()?;
    let chain = cfg.dispersion_chain()?;
    let ideal = ideal_sensitivity(cfg.power, cfg.sigma, &chain)?;
    let probe = SensitivityProbe {
        detuning: cfg.min_detuning,
        integration_time: cfg.integration_time,
        power: cfg.power,
        background: cfg.background,
        noise: cfg.detector_noise(),
        repetitions: cfg.repetitions,
        seed: cfg.seed,
        grid_points: crate::interferometer::DEFAULT_QUADRATURE_POINTS,
    };
    let simulated = simulate_sensitivity(&state, &chain, &probe, cfg.range_threshold)?;
    let r = cfg.repetitions as f64;
    let rel = (1.0 / (r * simulated.snr * simulated.snr) + 1.0 / (2.0 * (r - 1.0))).sqrt();
    Ok(SensitivityStudy {
        ideal,
        statistical_error: rel * simulated.sensitivity_per_rt_hz,
        calibration_error: calibration.map(|c| propagate_calibration_error(c, simulated.sensitivity_per_rt_hz)),
        unit_snr_sensitivity: measured_sensitivity(cfg.min_detuning, cfg.integration_time)?,
        range: usable_range(cfg.sigma, &chain, cfg.range_threshold)?,
        simulated,
    })
}

pub fn sensitivity_csv(cfg: &ExperimentConfig, study: &SensitivityStudy) -> Result<String> {
    let mut meta = config_metadata(cfg)?;
    meta.push("kind", "sensitivity");
    let mut rows = vec![
        ("ideal_hz_per_rt_hz", study.ideal),
        ("simulated_hz_per_rt_hz", study.simulated.sensitivity_per_rt_hz),
        ("simulated_statistical_error_hz_per_rt_hz", study.statistical_error),
        ("simulated_to_ideal_ratio", study.ratio()),
        ("simulated_snr", study.simulated.snr),
        ("min_deflection_m", study.simulated.min_deflection),
        ("min_frequency_shift_hz", study.simulated.min_frequency_shift),
        ("unit_snr_sensitivity_hz_per_rt_hz", study.unit_snr_sensitivity),
        ("usable_range_hz", study.range.range),
    ];
    if let Some(c) = study.calibration_error {
        rows.push(("calibration_error_hz_per_rt_hz", c));
    }
    for (i, (name, _)) in rows.iter().enumerate() {
        meta.push(format!("row.{i}"), name);
    }
    let values: Vec<Vec<f64>> = rows.iter().enumerate().map(|(i, (_, v))| vec![i as f64, *v]).collect();
    Ok(write_table(&meta, &["row", "value"], &values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeStudy {
    pub range: UsableRange,
    /// Wavelength span equivalent to `range` at the carrier, m.
    pub wavelength_span: f64,
    pub threshold: f64,
}

pub fn run_range(cfg: &ExperimentConfig) -> Result<RangeStudy> {
    let chain = cfg.dispersion_chain()?;
    let range = usable_range(cfg.sigma, &chain, cfg.range_threshold)?;
    let lambda = chain.carrier.wavelength();
    Ok(RangeStudy {
        wavelength_span: lambda * lambda * range.range / SPEED_OF_LIGHT,
        threshold: cfg.range_threshold,
        range,
    })
}

pub fn range_csv(cfg: &ExperimentConfig, study: &RangeStudy) -> Result<String> {
    let mut meta = config_metadata(cfg)?;
    meta.push("kind", "range").push("clamped_at_material_edge", study.range.clamped);
    Ok(write_table(
        &meta,
        &["threshold", "range_hz", "wavelength_span_m"],
        &[vec![study.threshold, study.range.range, study.wavelength_span]],
    ))
}

pub fn calibration_csv(cal: &ScanCalibration, positions: &[f64], lines: &[ReferenceLine], value: f64) -> String {
    let mut meta = Metadata::new();
    meta.push("kind", "scan_calibration")
        .push_num("slope_hz_per_unit", cal.slope)
        .push_num("slope_error_hz_per_unit", cal.slope_error)
        .push_num("intercept_hz", cal.intercept)
        .push_num("intercept_error_hz", cal.intercept_error)
        .push_num("residual_rms_hz", cal.residual_rms)
        .push_num("fractional_slope_error", cal.fractional_slope_error())
        .push_num("propagated_value_hz", value)
        .push_num("propagated_error_hz", propagate_calibration_error(cal, value));
    for (i, l) in lines.iter().enumerate() {
        meta.push(format!("line.{i}"), &l.label);
    }
    let rows: Vec<Vec<f64>> = positions
        .iter()
        .zip(lines)
        .zip(&cal.residuals)
        .enumerate()
        .map(|(i, ((p, l), r))| vec![i as f64, *p, l.relative_frequency, cal.frequency(*p), *r])
        .collect();
    write_table(
        &meta,
        &["line", "position", "reference_hz", "fitted_hz", "residual_hz"],
        &rows,
    )
}

/// One raw (or band-passed) detector record at the configured drive.
pub fn run_simulate(cfg: &ExperimentConfig, filtered: bool) -> Result<TimeSeries> {
    let physics = cfg.run_physics()?;
    let run = synthesize_run(&physics, &run_spec(cfg, cfg.drive, cfg.duration, cfg.seed))?;
    if filtered {
        bandpass(&run, &cfg.filter)
    } else {
        Ok(run)
    }
}
