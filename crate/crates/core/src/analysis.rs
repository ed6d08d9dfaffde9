//! Turns experiment records into κ̄, F̄ and per-bin tables.
//!
//! [`Accumulator`] consumes records one at a time and keeps only per-run Sorkin entries and
//! pooled counts, so long experiments can be analysed while they stream to disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monte_carlo::ExperimentRecord;
use crate::paths::PathConfiguration;
use crate::statistics::{
    self, estimate_from_counts, estimate_probabilities, peres_per_bin, sorkin_per_bin, weighted_mean_peres,
    weighted_mean_sorkin, BinStatus, PeresEstimate, SorkinEstimate,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub energy_ev: f64,
    /// κ̄(ε_f) over runs; `None` when no run gives a defined value.
    pub kappa: Option<f64>,
    pub sigma_kappa: Option<f64>,
    pub near_zero_runs: usize,
    pub undefined_runs: usize,
    pub peres: PeresEstimate<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_runs: usize,
    pub n_pulses_per_run: u64,
    pub efficiency: f64,
    pub kappa_mean: f64,
    pub kappa_std_error: f64,
    pub kappa_numerator_mean: f64,
    pub kappa_denominator_mean: f64,
    /// Median of the per-run, per-bin σ_κ.
    pub median_sigma_kappa: f64,
    pub near_zero_entries: usize,
    pub undefined_entries: usize,
    /// `None` when no bin has positive single-path signal after subtraction.
    pub peres_mean: Option<f64>,
    pub peres_std_error: Option<f64>,
    pub clamp_events: u64,
    /// Clicks per pulse summed over the window, in configuration order.
    pub yield_per_pulse: Vec<f64>,
    pub bins: Vec<BinSummary>,
}

#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    energies: Vec<f64>,
    n_pulses: u64,
    efficiency: f64,
    /// `sorkin[run][f]`.
    sorkin: Vec<Vec<SorkinEstimate<f64>>>,
    pooled: Option<[Vec<u64>; 8]>,
    clamp_events: u64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rec: &ExperimentRecord) -> Result<()> {
        rec.validate()?;
        if self.sorkin.is_empty() {
            self.energies = rec.bin_energies_ev.clone();
            self.n_pulses = rec.n_pulses();
            self.efficiency = rec.efficiency;
        } else if rec.n_bins() != self.energies.len() || rec.n_pulses() != self.n_pulses {
            return Err(Error::Domain("records differ in binning or pulse count".into()));
        }
        let bins = estimate_probabilities::<f64>(rec)?;
        self.sorkin.push(bins.iter().map(sorkin_per_bin).collect());
        let pooled = self.pooled.get_or_insert_with(|| std::array::from_fn(|_| vec![0; rec.n_bins()]));
        for (acc, s) in pooled.iter_mut().zip(PathConfiguration::ALL) {
            for (a, c) in acc.iter_mut().zip(&rec.histogram(s).counts) {
                *a += c;
            }
        }
        self.clamp_events += rec.clamp_events;
        Ok(())
    }

    pub fn n_runs(&self) -> usize {
        self.sorkin.len()
    }

    pub fn finish(&self) -> Result<Summary> {
        let pooled = self.pooled.as_ref().ok_or_else(|| Error::Domain("no records to analyse".into()))?;
        let all: Vec<SorkinEstimate<f64>> = self.sorkin.iter().flatten().copied().collect();
        let overall = weighted_mean_sorkin(&all)?;
        let mut sigmas: Vec<f64> = all.iter().filter(|e| e.status.is_defined()).map(|e| e.sigma_kappa).collect();
        sigmas.sort_by(f64::total_cmp);
        let median_sigma_kappa = median(&sigmas);

        let total_pulses = self.n_pulses * self.n_runs() as u64;
        let pooled_est = estimate_from_counts::<f64>(pooled, total_pulses)?;
        let peres: Vec<PeresEstimate<f64>> = pooled_est.iter().map(peres_per_bin).collect();
        let peres_mean = weighted_mean_peres(&peres).ok();

        let bins = (0..self.energies.len())
            .map(|f| {
                let column: Vec<SorkinEstimate<f64>> = self.sorkin.iter().map(|run| run[f]).collect();
                let m = weighted_mean_sorkin(&column).ok();
                BinSummary {
                    energy_ev: self.energies[f],
                    kappa: m.map(|m| m.kappa),
                    sigma_kappa: m.map(|m| m.std_error),
                    near_zero_runs: column.iter().filter(|e| e.status == BinStatus::NearZero).count(),
                    undefined_runs: column.iter().filter(|e| e.status == BinStatus::Undefined).count(),
                    peres: peres[f],
                }
            })
            .collect();

        let yield_per_pulse = pooled
            .iter()
            .map(|row| row.iter().sum::<u64>() as f64 / total_pulses as f64)
            .collect();

        Ok(Summary {
            n_runs: self.n_runs(),
            n_pulses_per_run: self.n_pulses,
            efficiency: self.efficiency,
            kappa_mean: overall.kappa,
            kappa_std_error: overall.std_error,
            kappa_numerator_mean: overall.numerator.value,
            kappa_denominator_mean: overall.denominator.value,
            median_sigma_kappa,
            near_zero_entries: all.iter().filter(|e| e.status == BinStatus::NearZero).count(),
            undefined_entries: all.iter().filter(|e| e.status == BinStatus::Undefined).count(),
            peres_mean: peres_mean.map(|m| m.value),
            peres_std_error: peres_mean.map(|m| m.std_error),
            clamp_events: self.clamp_events,
            yield_per_pulse,
            bins,
        })
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

pub fn summarize(records: &[ExperimentRecord]) -> Result<Summary> {
    let mut acc = Accumulator::new();
    for r in records {
        acc.push(r)?;
    }
    acc.finish()
}

/// Unweighted mean of per-entry κ over every run and bin, for comparison with κ̄.
pub fn naive_kappa(records: &[ExperimentRecord]) -> Result<statistics::MeanEstimate<f64>> {
    let mut all = Vec::new();
    for r in records {
        all.extend(estimate_probabilities::<f64>(r)?.iter().map(sorkin_per_bin));
    }
    statistics::mean_of_ratios(&all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monte_carlo::{run_experiment, ExperimentPlan};

    #[test]
    fn streaming_equals_batch() {
        let plan = ExperimentPlan::reference(2_000, 3, 8);
        let recs = run_experiment(&plan).unwrap();
        let batch = summarize(&recs).unwrap();
        let mut acc = Accumulator::new();
        for r in &recs {
            acc.push(r).unwrap();
        }
        let json = |s: &Summary| serde_json::to_string(s).unwrap();
        assert_eq!(json(&acc.finish().unwrap()), json(&batch));
        assert_eq!(batch.n_runs, 3);
        assert_eq!(batch.bins.len(), 40);
        assert_eq!(batch.yield_per_pulse.len(), 8);
        assert!(batch.kappa_std_error > 0.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 4.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 4.0, 8.0]), 3.0);
    }

    #[test]
    fn mismatched_records_are_rejected() {
        let a = run_experiment(&ExperimentPlan::reference(500, 1, 1)).unwrap();
        let b = run_experiment(&ExperimentPlan::reference(600, 1, 1)).unwrap();
        let mut acc = Accumulator::new();
        acc.push(&a[0]).unwrap();
        assert!(acc.push(&b[0]).is_err());
    }
}
