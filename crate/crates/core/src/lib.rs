pub mod calibration;
pub mod config;
pub mod csvio;
pub mod dispersion;
pub mod error;
pub mod interferometer;
pub mod noise;
pub mod recipes;
pub mod signal_chain;
mod roots;
pub mod units;

pub use error::{Error, Result};
