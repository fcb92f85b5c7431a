//! Flat `key = value` experiment configuration.
//!
//! Values carry unit suffixes (`388um`, `2mW`, `1.3%`). Layers are merged in
//! order, later layers win; a layer that sets `phi` clears an inherited `pps`
//! and vice versa, likewise for `gamma` / `unamplified_slope`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dispersion::{
    calibrate_apex_angle, DispersionChain, MaterialLibrary, OpticalCarrier, Prism, SellmeierModel,
    DEFAULT_CALIBRATION_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::interferometer::{BeamProfile, InterferometerState};
use crate::noise::DetectorNoise;
use crate::signal_chain::{FilterSpec, RunPhysics, SpectrumConfig, Window};
use crate::units::{parse_quantity, Dimension};

/// Interferometer operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseSetting {
    Phase(f64),
    Postselection(f64),
}

/// How the prism apex is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrismSetting {
    Apex(f64),
    /// Apex solved so the lever-arm deflection has this slope, m/Hz.
    UnamplifiedSlope(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub material: String,
    pub materials_file: Option<PathBuf>,
    pub wavelength: f64,
    pub sigma: f64,
    pub lever_arm: f64,
    pub power: f64,
    pub phase: PhaseSetting,
    pub prism: PrismSetting,
    pub mod_frequency: f64,
    pub sample_rate: f64,
    pub filter: FilterSpec,
    pub sweep: Vec<f64>,
    pub cycles: usize,
    pub cycle_period: f64,
    /// Filter settling time discarded before the measured cycles, s.
    pub settle: f64,
    pub spectrum_duration: f64,
    /// Length of a raw `simulate` record, s.
    pub duration: f64,
    pub drive: f64,
    /// Drive used to show harmonics in the nonlinear regime, Hz.
    pub nonlinear_drive: f64,
    pub window: Window,
    pub segment: f64,
    pub seed: u64,
    pub photons_per_sample: Option<f64>,
    pub background: f64,
    pub dark_counts: f64,
    pub electronic_noise: f64,
    pub range_threshold: f64,
    pub integration_time: f64,
    pub min_detuning: f64,
    pub repetitions: usize,
    pub grid_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sweep = (0..6).map(|i| 0.743e6 + i as f64 * (7.4e6 - 0.743e6) / 5.0).collect();
        Self {
            material: "fused_silica".into(),
            materials_file: None,
            wavelength: 780e-9,
            sigma: 388e-6,
            lever_arm: 0.27,
            power: 2e-3,
            phase: PhaseSetting::Postselection(0.013),
            prism: PrismSetting::UnamplifiedSlope(9.1e-18),
            mod_frequency: 10.0,
            sample_rate: 1000.0,
            filter: FilterSpec::default(),
            sweep,
            cycles: 25,
            cycle_period: 0.1,
            settle: 1.0,
            spectrum_duration: 100.0,
            duration: 2.5,
            drive: 7.4e6,
            nonlinear_drive: 330e9,
            window: Window::Hann,
            segment: 10.0,
            seed: 1,
            photons_per_sample: None,
            background: 0.0,
            dark_counts: 0.0,
            electronic_noise: 0.0,
            range_threshold: 0.5,
            integration_time: 30e-3,
            min_detuning: 743e3,
            repetitions: 400,
            grid_points: RunPhysics::DEFAULT_GRID_POINTS,
        }
    }
}

const KEYS: &[&str] = &[
    "material",
    "materials_file",
    "wavelength",
    "sigma",
    "lever_arm",
    "power",
    "phi",
    "pps",
    "gamma",
    "unamplified_slope",
    "mod_frequency",
    "sample_rate",
    "filter_center",
    "filter_stages",
    "filter_q",
    "gain",
    "sweep",
    "cycles",
    "cycle_period",
    "settle",
    "spectrum_duration",
    "duration",
    "drive",
    "nonlinear_drive",
    "window",
    "segment",
    "seed",
    "photons_per_sample",
    "background",
    "dark_counts",
    "electronic_noise",
    "range_threshold",
    "integration_time",
    "min_detuning",
    "repetitions",
    "grid_points",
];

fn parse_count(v: &str) -> Result<usize> {
    let x = parse_quantity(v, Dimension::Ratio)?;
    if !(x >= 0.0 && x.fract() == 0.0 && x < 1e15) {
        return Err(Error::validation(format!("'{v}' is not a whole count")));
    }
    Ok(x as usize)
}

/// Raw `key -> value` pairs of one layer, with the line they came from.
pub type Layer = BTreeMap<String, (usize, String)>;

/// Splits config text into a layer. Blank lines and `#` comments are ignored.
pub fn parse_layer(text: &str) -> Result<Layer> {
    let mut layer = Layer::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key = value, got '{line}'"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("unknown key '{k}'"),
            });
        }
        if layer.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("duplicate key '{k}'"),
            });
        }
    }
    exclusive(&layer, "phi", "pps")?;
    exclusive(&layer, "gamma", "unamplified_slope")?;
    Ok(layer)
}

fn exclusive(layer: &Layer, a: &str, b: &str) -> Result<()> {
    if layer.contains_key(a) && layer.contains_key(b) {
        return Err(Error::validation(format!("set exactly one of '{a}' and '{b}'")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Applies one layer on top of `self`.
    pub fn apply(&mut self, layer: &Layer) -> Result<()> {
        for (key, (line, value)) in layer {
            self.set(key, value).map_err(|e| match e {
                Error::Parse { .. } => e,
                other => Error::Parse {
                    line: *line,
                    msg: format!("{key}: {other}"),
                },
            })?;
        }
        Ok(())
    }

    /// Defaults, then each text layer in order.
    pub fn from_layers<'a>(layers: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut cfg = Self::default();
        for text in layers {
            cfg.apply(&parse_layer(text)?)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_layers([text.as_str()])
    }

    /// Sets a single key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        use Dimension::*;
        match key {
            "material" => self.material = v.to_string(),
            "materials_file" => self.materials_file = (!v.is_empty()).then(|| PathBuf::from(v)),
            "wavelength" => self.wavelength = parse_quantity(v, Length)?,
            "sigma" => self.sigma = parse_quantity(v, Length)?,
            "lever_arm" => self.lever_arm = parse_quantity(v, Length)?,
            "power" => self.power = parse_quantity(v, Power)?,
            "phi" => self.phase = PhaseSetting::Phase(parse_quantity(v, Angle)?),
            "pps" => self.phase = PhaseSetting::Postselection(parse_quantity(v, Ratio)?),
            "gamma" => self.prism = PrismSetting::Apex(parse_quantity(v, Angle)?),
            "unamplified_slope" => {
                self.prism = PrismSetting::UnamplifiedSlope(parse_quantity(v, LengthPerFrequency)?)
            }
            "mod_frequency" => self.mod_frequency = parse_quantity(v, Frequency)?,
            "sample_rate" => self.sample_rate = parse_quantity(v, Frequency)?,
            "filter_center" => self.filter.center = parse_quantity(v, Frequency)?,
            "filter_stages" => self.filter.stages = parse_count(v)?,
            "filter_q" => self.filter.q = parse_quantity(v, Ratio)?,
            "gain" => self.filter.gain = parse_quantity(v, Ratio)?,
            "sweep" => {
                self.sweep = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_quantity(s, Frequency))
                    .collect::<Result<_>>()?
            }
            "cycles" => self.cycles = parse_count(v)?,
            "cycle_period" => self.cycle_period = parse_quantity(v, Time)?,
            "settle" => self.settle = parse_quantity(v, Time)?,
            "spectrum_duration" => self.spectrum_duration = parse_quantity(v, Time)?,
            "duration" => self.duration = parse_quantity(v, Time)?,
            "drive" => self.drive = parse_quantity(v, Frequency)?,
            "nonlinear_drive" => self.nonlinear_drive = parse_quantity(v, Frequency)?,
            "window" => self.window = v.parse()?,
            "segment" => self.segment = parse_quantity(v, Time)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::validation(format!("seed '{v}' is not an unsigned integer")))?
            }
            "photons_per_sample" => {
                self.photons_per_sample = match v {
                    "" | "auto" => None,
                    _ => Some(parse_quantity(v, Ratio)?),
                }
            }
            "background" => self.background = parse_quantity(v, Ratio)?,
            "dark_counts" => self.dark_counts = parse_quantity(v, Ratio)?,
            "electronic_noise" => self.electronic_noise = parse_quantity(v, Length)?,
            "range_threshold" => self.range_threshold = parse_quantity(v, Ratio)?,
            "integration_time" => self.integration_time = parse_quantity(v, Time)?,
            "min_detuning" => self.min_detuning = parse_quantity(v, Frequency)?,
            "repetitions" => self.repetitions = parse_count(v)?,
            "grid_points" => self.grid_points = parse_count(v)?,
            other => return Err(Error::validation(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Range checks that do not need any physics.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("sigma", self.sigma),
            ("lever_arm", self.lever_arm),
            ("mod_frequency", self.mod_frequency),
            ("sample_rate", self.sample_rate),
            ("cycle_period", self.cycle_period),
            ("spectrum_duration", self.spectrum_duration),
            ("duration", self.duration),
            ("segment", self.segment),
            ("integration_time", self.integration_time),
            ("min_detuning", self.min_detuning),
            ("range_threshold", self.range_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("power", self.power),
            ("settle", self.settle),
            ("drive", self.drive),
            ("nonlinear_drive", self.nonlinear_drive),
            ("background", self.background),
            ("dark_counts", self.dark_counts),
            ("electronic_noise", self.electronic_noise),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.cycles == 0 || self.repetitions < 2 || self.grid_points < 3 {
            return Err(Error::validation(
                "cycles >= 1, repetitions >= 2 and grid_points >= 3 required",
            ));
        }
        if self.sweep.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation("sweep detunings must be finite and >= 0"));
        }
        if let Some(n) = self.photons_per_sample {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::validation("photons_per_sample must be >= 0"));
            }
        }
        Ok(())
    }

    /// Canonical resolved text: every key, fixed order, SI values printed
    /// with round-trip precision. Parsing it back gives the same config.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let num = |x: f64| format!("{x:e}");
        put("material", self.material.clone());
        put(
            "materials_file",
            self.materials_file
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        put("wavelength", format!("{}m", num(self.wavelength)));
        put("sigma", format!("{}m", num(self.sigma)));
        put("lever_arm", format!("{}m", num(self.lever_arm)));
        put("power", format!("{}W", num(self.power)));
        match self.phase {
            PhaseSetting::Phase(p) => put("phi", format!("{}rad", num(p))),
            PhaseSetting::Postselection(p) => put("pps", num(p)),
        }
        match self.prism {
            PrismSetting::Apex(g) => put("gamma", format!("{}rad", num(g))),
            PrismSetting::UnamplifiedSlope(s) => put("unamplified_slope", format!("{}m/Hz", num(s))),
        }
        put("mod_frequency", format!("{}Hz", num(self.mod_frequency)));
        put("sample_rate", format!("{}Hz", num(self.sample_rate)));
        put("filter_center", format!("{}Hz", num(self.filter.center)));
        put("filter_stages", self.filter.stages.to_string());
        put("filter_q", num(self.filter.q));
        put("gain", num(self.filter.gain));
        put(
            "sweep",
            self.sweep.iter().map(|v| format!("{}Hz", num(*v))).collect::<Vec<_>>().join(", "),
        );
        put("cycles", self.cycles.to_string());
        put("cycle_period", format!("{}s", num(self.cycle_period)));
        put("settle", format!("{}s", num(self.settle)));
        put("spectrum_duration", format!("{}s", num(self.spectrum_duration)));
        put("duration", format!("{}s", num(self.duration)));
        put("drive", format!("{}Hz", num(self.drive)));
        put("nonlinear_drive", format!("{}Hz", num(self.nonlinear_drive)));
        put("window", self.window.to_string());
        put("segment", format!("{}s", num(self.segment)));
        put("seed", self.seed.to_string());
        put(
            "photons_per_sample",
            self.photons_per_sample.map(num).unwrap_or_else(|| "auto".into()),
        );
        put("background", num(self.background));
        put("dark_counts", num(self.dark_counts));
        put("electronic_noise", format!("{}m", num(self.electronic_noise)));
        put("range_threshold", num(self.range_threshold));
        put("integration_time", format!("{}s", num(self.integration_time)));
        put("min_detuning", format!("{}Hz", num(self.min_detuning)));
        put("repetitions", self.repetitions.to_string());
        put("grid_points", self.grid_points.to_string());
        out
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn material_model(&self) -> Result<SellmeierModel> {
        let lib = match &self.materials_file {
            Some(p) => MaterialLibrary::load(p)?,
            None => MaterialLibrary::builtin(),
        };
        lib.get(&self.material).cloned()
    }

    pub fn carrier(&self) -> Result<OpticalCarrier> {
        OpticalCarrier::from_wavelength(self.wavelength)
    }

    pub fn interferometer(&self) -> Result<InterferometerState> {
        let beam = BeamProfile::new(self.sigma, self.carrier()?)?;
        match self.phase {
            PhaseSetting::Phase(p) => InterferometerState::new(p, self.lever_arm, beam),
            PhaseSetting::Postselection(p) => InterferometerState::from_postselection(p, self.lever_arm, beam),
        }
    }

    pub fn apex_angle(&self) -> Result<f64> {
        match self.prism {
            PrismSetting::Apex(g) => Ok(g),
            PrismSetting::UnamplifiedSlope(s) => calibrate_apex_angle(
                s,
                self.lever_arm,
                &self.carrier()?,
                &self.material_model()?,
                DEFAULT_CALIBRATION_TOLERANCE,
            ),
        }
    }

    pub fn dispersion_chain(&self) -> Result<DispersionChain> {
        let prism = Prism::new(self.apex_angle()?, self.material_model()?)?;
        DispersionChain::new(prism, self.carrier()?)
    }

    pub fn detector_noise(&self) -> DetectorNoise {
        DetectorNoise {
            dark_counts: self.dark_counts,
            electronic_noise: self.electronic_noise,
        }
    }

    pub fn run_physics(&self) -> Result<RunPhysics> {
        Ok(RunPhysics {
            state: self.interferometer()?,
            chain: self.dispersion_chain()?,
            power: self.power,
            background: self.background,
            noise: self.detector_noise(),
            grid_points: self.grid_points,
        })
    }

    pub fn spectrum_config(&self) -> SpectrumConfig {
        SpectrumConfig {
            window: self.window,
            segment_len: Some((self.segment * self.sample_rate).round() as usize),
            full_scale: 1.0,
        }
    }
}
