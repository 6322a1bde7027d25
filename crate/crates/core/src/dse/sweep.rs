use rayon::prelude::*;

use super::pipeline::{evaluate_point, Prepared};
use super::report::SweepRow;
use super::DseError;
use crate::partition::Platform;

pub const PRESET_LATENCIES: [f64; 2] = [25.0, 500.0];
pub const PRESET_BANDWIDTHS: [f64; 3] = [1e9, 4e9, f64::INFINITY];

/// `n` budgets log-spaced over [1e3, 1e6] LUTs, rounded to integers.
pub fn preset_budgets(n: usize) -> Vec<u64> {
    match n {
        0 => vec![],
        1 => vec![1000],
        _ => (0..n).map(|i| 10f64.powf(3.0 + 3.0 * i as f64 / (n - 1) as f64).round() as u64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub budgets: Vec<u64>,
    pub latencies: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub clock: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            budgets: preset_budgets(13),
            latencies: PRESET_LATENCIES.to_vec(),
            bandwidths: PRESET_BANDWIDTHS.to_vec(),
            clock: Platform::default().clock,
        }
    }
}

impl SweepGrid {
    pub fn platforms(&self) -> Vec<Platform> {
        let mut out = Vec::new();
        for &latency_cycles in &self.latencies {
            for &bandwidth in &self.bandwidths {
                for &budget_luts in &self.budgets {
                    out.push(Platform { budget_luts, latency_cycles, bandwidth, clock: self.clock });
                }
            }
        }
        out
    }
}

/// Solves every grid point for every prepared configuration. Rows come
/// out in configuration, latency, bandwidth, budget order regardless of
/// scheduling.
pub fn sweep(prepared: &[Prepared], grid: &SweepGrid, node_limit: u64) -> Result<Vec<SweepRow>, DseError> {
    let platforms = grid.platforms();
    let jobs: Vec<(&Prepared, Platform)> =
        prepared.iter().flat_map(|p| platforms.iter().map(move |pl| (p, *pl))).collect();
    jobs.par_iter()
        .map(|(prep, pl)| {
            let (point, _) = evaluate_point(prep, *pl, node_limit)?;
            Ok(SweepRow::new(prep.configuration, &point))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budgets_are_log_spaced() {
        let b = preset_budgets(4);
        assert_eq!(b, vec![1000, 10_000, 100_000, 1_000_000]);
        assert_eq!(SweepGrid::default().platforms().len(), 13 * 6);
    }
}
