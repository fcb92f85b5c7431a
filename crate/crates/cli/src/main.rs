use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wvfreq_core::calibration::{
    fit_scan_calibration, load_reference_lines, parse_positions, rb_d2_reference_lines, ReferenceLine,
};
use wvfreq_core::config::ExperimentConfig;
use wvfreq_core::csvio::{read_table, write_time_series};
use wvfreq_core::recipes;
use wvfreq_core::units::{parse_quantity, Dimension};
use wvfreq_core::{Error, Result};

/// Weak-value amplified optical frequency measurement: experiment recipes.
///
/// Exit codes: 0 success, 2 invalid input, 3 physically invalid operating
/// point, 4 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "wvfreq", version)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Flat `key = value` configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Reuse the configuration embedded in an earlier output CSV.
    #[arg(long, global = true, conflicts_with = "config")]
    replay: Option<PathBuf>,

    /// Override one key, e.g. `--set sigma=400um`. Applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write CSV here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Peak deflection against modulation depth, with the fitted slope.
    Slope,
    /// Detector noise spectra with and without modulation.
    Spectrum {
        /// Emit the spectrum of a run driven into the nonlinear regime instead.
        #[arg(long)]
        harmonics: bool,
    },
    /// Shot-noise limit, simulated sensitivity and usable range.
    Sensitivity {
        /// Observed scan positions of the reference lines, for the calibration error.
        #[arg(long)]
        positions: Option<PathBuf>,
        /// Reference line table (defaults to the built-in Rb D2 set).
        #[arg(long, requires = "positions")]
        references: Option<PathBuf>,
    },
    /// Detuning range over which the weak-value condition holds.
    Range,
    /// Fit the scan-to-frequency calibration.
    Calibrate {
        #[arg(long)]
        positions: PathBuf,
        #[arg(long)]
        references: Option<PathBuf>,
        /// Value whose calibration error is reported.
        #[arg(long, default_value = "129kHz")]
        value: String,
    },
    /// Dump one raw detector record.
    Simulate {
        /// Apply the band-pass filter and gain.
        #[arg(long)]
        filtered: bool,
    },
}

fn resolve_config(g: &Global) -> Result<ExperimentConfig> {
    let mut layers = Vec::new();
    if let Some(p) = &g.config {
        layers.push(std::fs::read_to_string(p)?);
    }
    let mut cfg = match &g.replay {
        Some(p) => recipes::config_from_metadata(&read_table(&std::fs::read_to_string(p)?)?.meta)?,
        None => ExperimentConfig::default(),
    };
    for o in &g.overrides {
        if !o.contains('=') {
            return Err(Error::Validation(format!("--set expects KEY=VALUE, got '{o}'")));
        }
        layers.push(o.clone());
    }
    if let Some(s) = g.seed {
        layers.push(format!("seed = {s}"));
    }
    for text in &layers {
        cfg.apply(&wvfreq_core::config::parse_layer(text)?)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn references(path: Option<&Path>) -> Result<Vec<ReferenceLine>> {
    match path {
        Some(p) => load_reference_lines(p),
        None => Ok(rb_d2_reference_lines()),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.global.output.as_deref();
    if let Command::Calibrate {
        positions,
        references: refs,
        value,
    } = &cli.command
    {
        let pos = parse_positions(&std::fs::read_to_string(positions)?)?;
        let lines = references(refs.as_deref())?;
        let cal = fit_scan_calibration(&pos, &lines)?;
        let value = parse_quantity(value, Dimension::Frequency)?;
        eprintln!(
            "slope {:.6e} +- {:.3e} Hz/unit ({:.2}%), residual rms {:.3e} Hz; error on {:.4e} Hz: {:.4e} Hz",
            cal.slope,
            cal.slope_error,
            100.0 * cal.fractional_slope_error(),
            cal.residual_rms,
            value,
            wvfreq_core::calibration::propagate_calibration_error(&cal, value)
        );
        return emit(out, &recipes::calibration_csv(&cal, &pos, &lines, value));
    }

    let cfg = resolve_config(&cli.global)?;
    let csv = match &cli.command {
        Command::Slope => {
            let s = recipes::run_slope(&cfg)?;
            eprintln!(
                "slope {:.2} +- {:.2} pm/MHz (model {:.2}); amplification {:.2}",
                s.fit.slope * 1e18,
                s.fit.slope_error * 1e18,
                s.model_slope() * 1e18,
                s.amplification
            );
            recipes::slope_csv(&cfg, &s)?
        }
        Command::Spectrum { harmonics: false } => {
            let s = recipes::run_spectrum(&cfg)?;
            eprintln!(
                "fundamental {:.1} dB above floor; undriven floor {:.1} dB, max excess {:.2} dB",
                s.fundamental_to_floor_db(),
                s.undriven_floor_db,
                s.undriven_max_excess_db
            );
            recipes::spectrum_csv(&cfg, &s)?
        }
        Command::Spectrum { harmonics: true } => {
            let h = recipes::run_harmonics(&cfg)?;
            for (f, db) in &h.harmonics {
                eprintln!("{f} Hz: {db:.1} dB re fundamental, {:.1} dB above floor", db - h.floor_db);
            }
            let mut meta = recipes::config_metadata(&cfg)?;
            meta.push("kind", "harmonics").push("db_reference", "fundamental");
            meta.push_num("nonlinearity_k_sigma_cot", h.nonlinearity);
            wvfreq_core::csvio::write_spectrum(&h.spectrum, &meta)
        }
        Command::Sensitivity {
            positions,
            references: refs,
        } => {
            let cal = match positions {
                Some(p) => Some(fit_scan_calibration(
                    &parse_positions(&std::fs::read_to_string(p)?)?,
                    &references(refs.as_deref())?,
                )?),
                None => None,
            };
            let s = recipes::run_sensitivity(&cfg, cal.as_ref())?;
            eprintln!("ideal sensitivity      {:.2} kHz/rtHz", s.ideal / 1e3);
            eprintln!(
                "simulated sensitivity  {:.2} +- {:.2} (stat) kHz/rtHz{}",
                s.simulated.sensitivity_per_rt_hz / 1e3,
                s.statistical_error / 1e3,
                s.calibration_error
                    .map(|c| format!(" +- {:.2} (cal)", c / 1e3))
                    .unwrap_or_default()
            );
            eprintln!("simulated / ideal      {:.3}", s.ratio());
            eprintln!("usable range           {:.3} THz", s.range.range / 1e12);
            recipes::sensitivity_csv(&cfg, &s)?
        }
        Command::Range => {
            let r = recipes::run_range(&cfg)?;
            eprintln!(
                "usable range {:.3} THz ({:.2} nm){}",
                r.range.range / 1e12,
                r.wavelength_span * 1e9,
                if r.range.clamped { ", clamped at the material table edge" } else { "" }
            );
            recipes::range_csv(&cfg, &r)?
        }
        Command::Simulate { filtered } => {
            let series = recipes::run_simulate(&cfg, *filtered)?;
            let mut meta = recipes::config_metadata(&cfg)?;
            meta.push("filtered", filtered);
            write_time_series(&series, &meta)
        }
        Command::Calibrate { .. } => unreachable!(),
    };
    emit(out, &csv)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
