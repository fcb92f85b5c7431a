use super::TimeSeries;
use crate::error::{Error, Result};

/// Per-cycle maxima and their statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakStats {
    pub peaks: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the peaks divided by sqrt(n).
    pub std_of_mean: f64,
}

/// Records the maximum of `series` in each of the last `n_cycles` complete
/// cycles of length `cycle_period`, counted back from the end of the record.
pub fn extract_peaks(series: &TimeSeries, cycle_period: f64, n_cycles: usize) -> Result<PeakStats> {
    if !(cycle_period > 0.0) || n_cycles == 0 {
        return Err(Error::validation("need a positive cycle period and at least one cycle"));
    }
    let per_cycle = (cycle_period * series.sample_rate()).round() as usize;
    if per_cycle < 2 {
        return Err(Error::validation("cycle shorter than two samples"));
    }
    let available = series.len() / per_cycle;
    if available < n_cycles {
        return Err(Error::validation(format!(
            "series holds {available} complete cycles, {n_cycles} requested"
        )));
    }
    let start = series.len() - n_cycles * per_cycle;
    let peaks: Vec<f64> = series.samples()[start..]
        .chunks_exact(per_cycle)
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let (mean, std) = crate::noise::mean_and_std(&peaks);
    let std_of_mean = if n_cycles > 1 { std / (n_cycles as f64).sqrt() } else { 0.0 };
    Ok(PeakStats {
        peaks,
        mean,
        std_of_mean,
    })
}
