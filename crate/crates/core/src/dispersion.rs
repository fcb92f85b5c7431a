//! Prism material dispersion.
//!
//! Converts a laser frequency change into the small extra angular deflection
//! of a prism held at minimum deviation, and from there into the transverse
//! momentum kick seen by the beam.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::roots::bisect;
use crate::units::SPEED_OF_LIGHT;

/// Frequency step used to define the local dispersion slope.
pub const REFERENCE_STEP_HZ: f64 = 1e6;

/// Default relative tolerance for [`calibrate_apex_angle`].
pub const DEFAULT_CALIBRATION_TOLERANCE: f64 = 1e-6;

const BUILTIN_MATERIALS: &str = include_str!("../data/materials.txt");

/// Three-term Sellmeier model, `n^2 = 1 + sum b_i L^2 / (L^2 - c_i)`.
///
/// `c` is stored in m^2; the material table lists it in um^2.
#[derive(Debug, Clone, PartialEq)]
pub struct SellmeierModel {
    name: String,
    b: [f64; 3],
    c: [f64; 3],
    valid_range: (f64, f64),
}

impl SellmeierModel {
    pub fn new(
        name: impl Into<String>,
        b: [f64; 3],
        c_m2: [f64; 3],
        valid_range: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = valid_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::validation(format!(
                "invalid wavelength range [{lo:e}, {hi:e}] m"
            )));
        }
        if b.iter().chain(c_m2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite Sellmeier coefficient"));
        }
        Ok(Self {
            name: name.into(),
            b,
            c: c_m2,
            valid_range,
        })
    }

    /// Fused silica (Malitson) from the built-in material table.
    pub fn fused_silica() -> Self {
        MaterialLibrary::builtin()
            .get("fused_silica")
            .expect("built-in table carries fused_silica")
            .clone()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn b(&self) -> [f64; 3] {
        self.b
    }

    /// Denominator coefficients in m^2.
    pub fn c(&self) -> [f64; 3] {
        self.c
    }

    /// Valid wavelength interval, m.
    pub fn valid_range(&self) -> (f64, f64) {
        self.valid_range
    }

    /// Refractive index at vacuum wavelength `wavelength` (m).
    pub fn index(&self, wavelength: f64) -> Result<f64> {
        let (lo, hi) = self.valid_range;
        if !(wavelength >= lo && wavelength <= hi) {
            return Err(Error::Domain {
                quantity: "wavelength",
                value: wavelength,
                min: lo,
                max: hi,
            });
        }
        let l2 = wavelength * wavelength;
        let mut n2 = 1.0;
        for (b, c) in self.b.iter().zip(&self.c) {
            n2 += b * l2 / (l2 - c);
        }
        if n2 < 0.0 {
            return Err(Error::NegativeRadicand(n2));
        }
        Ok(n2.sqrt())
    }
}

/// Named Sellmeier models loaded from a plain-text table.
#[derive(Debug, Clone, Default)]
pub struct MaterialLibrary {
    materials: BTreeMap<String, SellmeierModel>,
}

impl MaterialLibrary {
    /// Parses the whitespace-separated table format:
    /// `name b1 b2 b3 c1 c2 c3 min_um max_um`, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut materials = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 9 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 9 fields, found {}", fields.len()),
                });
            }
            let nums = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            let model = SellmeierModel::new(
                fields[0],
                [nums[0], nums[1], nums[2]],
                [nums[3] / 1e12, nums[4] / 1e12, nums[5] / 1e12],
                (nums[6] / 1e6, nums[7] / 1e6),
            )
            .map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            materials.insert(fields[0].to_string(), model);
        }
        Ok(Self { materials })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_MATERIALS).expect("built-in material table parses")
    }

    pub fn get(&self, name: &str) -> Result<&SellmeierModel> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::validation(format!("unknown material '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }
}

/// Monochromatic carrier; wavelength, frequency and wavenumber kept consistent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalCarrier {
    wavelength: f64,
    frequency: f64,
    wavenumber: f64,
}

impl OpticalCarrier {
    pub fn from_wavelength(wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::validation(format!(
                "wavelength must be positive, got {wavelength:e}"
            )));
        }
        Ok(Self {
            wavelength,
            frequency: SPEED_OF_LIGHT / wavelength,
            wavenumber: 2.0 * PI / wavelength,
        })
    }

    pub fn from_frequency(frequency: f64) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::validation(format!(
                "frequency must be positive, got {frequency:e}"
            )));
        }
        Self::from_wavelength(SPEED_OF_LIGHT / frequency)
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// k0 = 2 pi / lambda, rad/m.
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// Carrier detuned by `delta_nu` Hz.
    pub fn shifted(&self, delta_nu: f64) -> Result<Self> {
        Self::from_frequency(self.frequency + delta_nu)
    }
}

/// Minimum-deviation angle for index `n` and apex angle `apex`.
pub fn deviation_from_index(n: f64, apex: f64) -> Result<f64> {
    let s = n * (apex / 2.0).sin();
    if s > 1.0 {
        return Err(Error::TotalInternalReflection(s));
    }
    Ok(2.0 * s.asin() - apex)
}

/// Extra deflection produced by an index change `delta_n` around index `n`.
pub fn deflection_from_index_change(delta_n: f64, n: f64, apex: f64) -> Result<f64> {
    let radicand = grazing_radicand(n, apex)?;
    Ok(2.0 * delta_n / radicand.sqrt())
}

/// `sin(apex/2)^-2 - n^2`, which must stay positive.
pub(crate) fn grazing_radicand(n: f64, apex: f64) -> Result<f64> {
    let s = (apex / 2.0).sin();
    let radicand = 1.0 / (s * s) - n * n;
    if radicand > 0.0 {
        Ok(radicand)
    } else {
        Err(Error::GrazingIncidence(radicand))
    }
}

/// Transverse momentum kick k = delta * k0.
pub fn momentum_kick(deflection: f64, carrier: &OpticalCarrier) -> f64 {
    deflection * carrier.wavenumber()
}

/// Prism at minimum deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Prism {
    apex_angle: f64,
    material: SellmeierModel,
}

impl Prism {
    pub fn new(apex_angle: f64, material: SellmeierModel) -> Result<Self> {
        if !(apex_angle > 0.0 && apex_angle < PI) {
            return Err(Error::Domain {
                quantity: "apex angle",
                value: apex_angle,
                min: 0.0,
                max: PI,
            });
        }
        Ok(Self {
            apex_angle,
            material,
        })
    }

    pub fn apex_angle(&self) -> f64 {
        self.apex_angle
    }

    pub fn material(&self) -> &SellmeierModel {
        &self.material
    }

    /// Total deviation at minimum deviation, rad.
    pub fn min_deviation_angle(&self, wavelength: f64) -> Result<f64> {
        deviation_from_index(self.material.index(wavelength)?, self.apex_angle)
    }

    /// Index change between the carrier and the carrier detuned by `delta_nu`.
    pub fn index_change(&self, carrier: &OpticalCarrier, delta_nu: f64) -> Result<f64> {
        let n0 = self.material.index(carrier.wavelength())?;
        let n1 = self.material.index(carrier.shifted(delta_nu)?.wavelength())?;
        Ok(n1 - n0)
    }

    /// Frequency-dependent extra deflection for a detuning `delta_nu`.
    ///
    /// Positive detuning raises n under normal dispersion and so gives a
    /// positive deflection.
    pub fn dispersive_deflection(&self, carrier: &OpticalCarrier, delta_nu: f64) -> Result<f64> {
        let n = self.material.index(carrier.wavelength())?;
        let delta_n = self.index_change(carrier, delta_nu)?;
        deflection_from_index_change(delta_n, n, self.apex_angle)
    }
}

/// Prism plus operating carrier: the full frequency-to-kick chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionChain {
    pub prism: Prism,
    pub carrier: OpticalCarrier,
}

impl DispersionChain {
    pub fn new(prism: Prism, carrier: OpticalCarrier) -> Result<Self> {
        // Fail early if the operating point sits beyond grazing incidence.
        let n = prism.material().index(carrier.wavelength())?;
        grazing_radicand(n, prism.apex_angle())?;
        Ok(Self { prism, carrier })
    }

    pub fn index(&self) -> Result<f64> {
        self.prism.material().index(self.carrier.wavelength())
    }

    pub fn deflection(&self, delta_nu: f64) -> Result<f64> {
        self.prism.dispersive_deflection(&self.carrier, delta_nu)
    }

    pub fn kick(&self, delta_nu: f64) -> Result<f64> {
        Ok(momentum_kick(self.deflection(delta_nu)?, &self.carrier))
    }

    /// Local deflection per unit detuning, rad/Hz, from a 1 MHz two-point step.
    pub fn deflection_slope(&self) -> Result<f64> {
        Ok(self.deflection(REFERENCE_STEP_HZ)? / REFERENCE_STEP_HZ)
    }

    /// Unamplified lever-arm deflection per unit detuning, m/Hz.
    pub fn unamplified_slope(&self, lever_arm: f64) -> Result<f64> {
        Ok(lever_arm * self.deflection_slope()?)
    }
}

/// Finds the apex angle whose unamplified lever-arm slope `lever_arm * delta/dnu`
/// equals `target_slope` (m/Hz) at the carrier.
pub fn calibrate_apex_angle(
    target_slope: f64,
    lever_arm: f64,
    carrier: &OpticalCarrier,
    material: &SellmeierModel,
    rel_tol: f64,
) -> Result<f64> {
    if !(lever_arm > 0.0) {
        return Err(Error::validation("lever arm must be positive"));
    }
    let n = material.index(carrier.wavelength())?;
    let delta_n = material.index(carrier.shifted(REFERENCE_STEP_HZ)?.wavelength())? - n;
    let slope_at = |apex: f64| -> Result<f64> {
        Ok(lever_arm * deflection_from_index_change(delta_n, n, apex)? / REFERENCE_STEP_HZ)
    };
    // The slope rises monotonically from 0 (flat prism) to infinity (grazing).
    let grazing = 2.0 * (1.0 / n).asin();
    let lo = 1e-9;
    let hi = grazing * (1.0 - 1e-12);
    let (min, max) = (slope_at(lo)?, slope_at(hi)?);
    if !(target_slope > min && target_slope < max) {
        return Err(Error::UnreachableSlope {
            target: target_slope,
            min,
            max,
        });
    }
    bisect(
        |apex| Ok(slope_at(apex)? - target_slope),
        lo,
        hi,
        |_, residual| residual.abs() <= rel_tol * target_slope,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn silica() -> SellmeierModel {
        SellmeierModel::fused_silica()
    }

    fn carrier_780() -> OpticalCarrier {
        OpticalCarrier::from_wavelength(780e-9).unwrap()
    }

    /// Hand evaluation of the three-term sum with the published resonance
    /// wavelengths (not the squared table values).
    fn malitson_by_hand(lambda_um: f64) -> f64 {
        let terms = [
            (0.6961663, 0.0684043),
            (0.4079426, 0.1162414),
            (0.8974794, 9.896161),
        ];
        let l2 = lambda_um * lambda_um;
        (1.0 + terms
            .iter()
            .map(|(b, l0)| b * l2 / (l2 - l0 * l0))
            .sum::<f64>())
        .sqrt()
    }

    #[test]
    fn vacuum_limit() {
        let m = SellmeierModel::new("vac", [0.0; 3], [1e-14; 3], (1e-7, 1e-5)).unwrap();
        assert_eq!(m.index(780e-9).unwrap(), 1.0);
    }

    #[test]
    fn fused_silica_reference_values() {
        let m = silica();
        let n780 = m.index(780e-9).unwrap();
        let n1550 = m.index(1.55e-6).unwrap();
        assert!((n780 - malitson_by_hand(0.78)).abs() < 1e-12);
        assert!((n1550 - malitson_by_hand(1.55)).abs() < 1e-12);
        assert!((n780 - 1.4537).abs() < 1e-4);
        assert!((n1550 - 1.444).abs() < 1e-3);
    }

    #[test]
    fn out_of_range_names_the_bound() {
        let err = silica().index(5e-6).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("wavelength"), "{msg}");
        assert!(msg.contains("3.71e-6"), "{msg}");
    }

    #[test]
    fn negative_radicand_is_reported() {
        let m = SellmeierModel::new("bad", [-5.0, 0.0, 0.0], [0.0; 3], (1e-7, 1e-5)).unwrap();
        assert!(matches!(m.index(1e-6), Err(Error::NegativeRadicand(_))));
    }

    #[test]
    fn normal_dispersion_700_to_900nm() {
        let m = silica();
        let ns: Vec<f64> = (0..100)
            .map(|i| m.index(700e-9 + 200e-9 * i as f64 / 99.0).unwrap())
            .collect();
        assert!(ns.windows(2).all(|w| w[1] < w[0]));
        assert!(ns.iter().all(|&n| n > 1.0));
    }

    #[test]
    fn deviation_angle_cases() {
        assert_eq!(deviation_from_index(1.0, 0.7).unwrap(), 0.0);
        let theta = deviation_from_index(1.4537, PI / 3.0).unwrap();
        assert!((theta - 0.580_250_919_585_212_5).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in (1..=50).rev() {
            let t = deviation_from_index(1.4537, 1.0 * i as f64 / 50.0).unwrap();
            assert!(t < prev && t > 0.0);
            prev = t;
        }
        assert!(prev < 0.01);
        assert!(matches!(
            deviation_from_index(1.5, 2.0),
            Err(Error::TotalInternalReflection(_))
        ));
    }

    #[test]
    fn deflection_cases() {
        let prism = Prism::new(PI / 3.0, silica()).unwrap();
        assert_eq!(prism.dispersive_deflection(&carrier_780(), 0.0).unwrap(), 0.0);
        let d = deflection_from_index_change(1e-6, 1.4537, PI / 3.0).unwrap();
        assert!((d - 1.456_035_923_616_56e-6).abs() < 1e-16);
        assert!(matches!(
            deflection_from_index_change(1e-6, 1.4537, 1.6),
            Err(Error::GrazingIncidence(_))
        ));
    }

    #[test]
    fn kick_is_linear() {
        let c = carrier_780();
        assert!((c.wavenumber() - 8.055_365_778_435_367e6).abs() < 1e-3);
        assert_eq!(momentum_kick(0.0, &c), 0.0);
        let k = momentum_kick(1.456e-6, &c);
        assert!((k - 11.728_612_573_401_9).abs() < 1e-9);
        assert_eq!(momentum_kick(2.0 * 1.456e-6, &c), 2.0 * k);
    }

    #[test]
    fn carrier_consistency() {
        let c = carrier_780();
        assert!((c.wavelength() * c.frequency() - SPEED_OF_LIGHT).abs() < 1e-6);
        let back = OpticalCarrier::from_frequency(c.frequency()).unwrap();
        assert!((back.wavelength() - 780e-9).abs() < 1e-21);
        assert!(OpticalCarrier::from_wavelength(-1.0).is_err());
    }

    /// Closed-form inverse of the forward slope map: solve
    /// l * 2 dn / sqrt(s^-2 - n^2) / step = target for s = sin(apex/2).
    fn apex_by_inversion(target: f64, l: f64) -> f64 {
        let m = silica();
        let c = carrier_780();
        let n = m.index(c.wavelength()).unwrap();
        let dn = m
            .index(c.shifted(REFERENCE_STEP_HZ).unwrap().wavelength())
            .unwrap()
            - n;
        let root = 2.0 * dn * l / (target * REFERENCE_STEP_HZ);
        2.0 * (1.0 / (n * n + root * root).sqrt()).asin()
    }

    #[test]
    fn calibrates_nominal_operating_point() {
        let target = 9.1e-18;
        let apex = calibrate_apex_angle(target, 0.27, &carrier_780(), &silica(), 1e-6).unwrap();
        assert!(apex > 0.0 && apex < PI);
        assert!((apex - 0.782_222_299_962_691).abs() < 1e-5);
        assert!((apex - apex_by_inversion(target, 0.27)).abs() < 1e-5);
        let chain = DispersionChain::new(Prism::new(apex, silica()).unwrap(), carrier_780()).unwrap();
        let slope = chain.unamplified_slope(0.27).unwrap();
        assert!((slope - target).abs() <= 1e-6 * target);
    }

    #[test]
    fn longer_lever_arm_needs_smaller_apex() {
        let c = carrier_780();
        let a1 = calibrate_apex_angle(9.1e-18, 0.27, &c, &silica(), 1e-9).unwrap();
        let a2 = calibrate_apex_angle(9.1e-18, 0.54, &c, &silica(), 1e-9).unwrap();
        assert!(a2 < a1);
        let d1 = Prism::new(a1, silica()).unwrap().dispersive_deflection(&c, 1e6).unwrap();
        let d2 = Prism::new(a2, silica()).unwrap().dispersive_deflection(&c, 1e6).unwrap();
        assert!((d2 / d1 - 0.5).abs() < 1e-8);
    }

    #[test]
    fn zero_target_is_unreachable() {
        let err = calibrate_apex_angle(0.0, 0.27, &carrier_780(), &silica(), 1e-6).unwrap_err();
        assert!(matches!(err, Error::UnreachableSlope { .. }));
    }

    #[test]
    fn material_table_parsing() {
        let lib = MaterialLibrary::builtin();
        assert!(lib.names().any(|n| n == "n_bk7"));
        let fs = lib.get("fused_silica").unwrap();
        assert!((fs.c()[2] - 97.934_002_537_9e-12).abs() < 1e-22);
        assert_eq!(fs.valid_range(), (0.21e-6, 3.71e-6));
        assert!(lib.get("unobtainium").is_err());
        assert!(matches!(
            MaterialLibrary::parse("x 1 2 3"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn pure_and_bit_identical() {
        let chain = DispersionChain::new(Prism::new(0.78, silica()).unwrap(), carrier_780()).unwrap();
        let a = chain.kick(3.3e9).unwrap();
        let b = chain.kick(3.3e9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    proptest! {
        #[test]
        fn deflection_matches_deviation_difference(
            lambda in 0.5e-6f64..2.0e-6,
            dnu in 1e6f64..1e9,
            apex in 0.3f64..1.2,
        ) {
            let prism = Prism::new(apex, silica()).unwrap();
            let c = OpticalCarrier::from_wavelength(lambda).unwrap();
            let delta = prism.dispersive_deflection(&c, dnu).unwrap();
            let t0 = prism.min_deviation_angle(lambda).unwrap();
            let t1 = prism.min_deviation_angle(c.shifted(dnu).unwrap().wavelength()).unwrap();
            prop_assert!(((t1 - t0) - delta).abs() <= 1e-3 * delta.abs());
        }

        #[test]
        fn calibration_round_trip(target in 1e-18f64..1e-16, l in 0.05f64..1.0) {
            let c = carrier_780();
            let apex = calibrate_apex_angle(target, l, &c, &silica(), 1e-6).unwrap();
            let chain = DispersionChain::new(Prism::new(apex, silica()).unwrap(), c).unwrap();
            let slope = chain.unamplified_slope(l).unwrap();
            prop_assert!((slope - target).abs() <= 1e-6 * target);
        }
    }
}
