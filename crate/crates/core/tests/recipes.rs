use wvfreq_core::calibration::{fit_scan_calibration, parse_positions, rb_d2_reference_lines};
use wvfreq_core::config::ExperimentConfig;
use wvfreq_core::csvio::read_table;
use wvfreq_core::recipes::*;
use wvfreq_core::Error;

#[test]
fn embedded_config_reproduces_output() {
    let cfg = ExperimentConfig::from_layers(["sweep = 1MHz, 4MHz\nseed = 42\ncycles = 10"]).unwrap();
    let first = slope_csv(&cfg, &run_slope(&cfg).unwrap()).unwrap();
    let table = read_table(&first).unwrap();
    let replay = config_from_metadata(&table.meta).unwrap();
    assert_eq!(replay.hash(), cfg.hash());
    assert_eq!(table.meta.get("config_hash"), Some(cfg.hash().as_str()));
    let second = slope_csv(&replay, &run_slope(&replay).unwrap()).unwrap();
    assert_eq!(first, second);
}

#[test]
fn single_point_sweep_is_degenerate() {
    let cfg = ExperimentConfig::from_layers(["sweep = 7.4MHz"]).unwrap();
    let err = run_slope(&cfg).unwrap_err();
    assert!(matches!(err, Error::DegenerateFit(_)));
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn sweep_errors_name_the_point() {
    let cfg = ExperimentConfig::from_layers(["sweep = 1MHz, 30THz"]).unwrap();
    let err = run_slope(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("sweep point 1"), "{err}");
}

#[test]
fn zero_photons_is_a_validation_error() {
    let cfg = ExperimentConfig::from_layers(["power = 0W"]).unwrap();
    assert_eq!(run_spectrum(&cfg).unwrap_err().exit_code(), 2);
    let err = run_sensitivity(&cfg, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("unbounded"), "{err}");
}

#[test]
fn sensitivity_ratio_near_one_without_extra_noise() {
    let study = run_sensitivity(&ExperimentConfig::default(), None).unwrap();
    assert!((study.ideal / 67e3 - 1.0).abs() < 0.05);
    assert!(study.ratio() >= 1.0 - 2.0 * study.statistical_error / study.ideal && study.ratio() <= 1.2, "{}", study.ratio());
    assert!((study.range.range / 5e12 - 1.0).abs() < 0.3);
    assert!((study.unit_snr_sensitivity / 129e3 - 1.0).abs() < 0.01);
}

#[test]
fn background_light_pushes_ratio_towards_two() {
    let cfg = ExperimentConfig::from_layers(["background = 3%"]).unwrap();
    let ratio = run_sensitivity(&cfg, None).unwrap().ratio();
    assert!((1.5..=2.5).contains(&ratio), "{ratio}");
    let noisy = ExperimentConfig::from_layers(["electronic_noise = 200pm"]).unwrap();
    let base = run_sensitivity(&ExperimentConfig::default(), None).unwrap().ratio();
    assert!(run_sensitivity(&noisy, None).unwrap().ratio() > base);
}

#[test]
fn calibration_error_reported_separately() {
    let positions = parse_positions(include_str!("../data/rb_scan_example.txt")).unwrap();
    let lines = rb_d2_reference_lines();
    let cal = fit_scan_calibration(&positions, &lines).unwrap();
    let study = run_sensitivity(&ExperimentConfig::default(), Some(&cal)).unwrap();
    let c = study.calibration_error.unwrap();
    assert!((c / study.simulated.sensitivity_per_rt_hz - cal.fractional_slope_error()).abs() < 1e-12);
    let csv = calibration_csv(&cal, &positions, &lines, 129e3);
    let t = read_table(&csv).unwrap();
    assert_eq!(t.rows.len(), 6);
    assert!(t.meta.get_num("propagated_error_hz").unwrap() > 0.0);
}

#[test]
fn range_in_wavelength() {
    let r = run_range(&ExperimentConfig::default()).unwrap();
    assert!((r.wavelength_span / 10e-9 - 1.0).abs() < 0.3, "{}", r.wavelength_span);
}

#[test]
fn simulate_record_length_and_filtering() {
    let cfg = ExperimentConfig::from_layers(["duration = 2s"]).unwrap();
    let raw = run_simulate(&cfg, false).unwrap();
    let filtered = run_simulate(&cfg, true).unwrap();
    assert_eq!(raw.len(), 2000);
    assert!(filtered.tone_amplitude(10.0) > 1e3 * raw.tone_amplitude(10.0));
}
