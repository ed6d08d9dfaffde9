//! Subcommand implementations: simulate, sweep, validate, ideal.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::amplitude::{AmplitudeMethod, AmplitudeSet, ProbabilityTable};
use crate::analysis::{Accumulator, Summary};
use crate::checks::{self, Check};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::monte_carlo::run_experiment_streaming;
use crate::output::{self, HistogramStream, SweepRow};
use crate::statistics::{power_law_fit, PowerLawFit, ScalingPoint};

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub summary: Summary,
    pub output_dir: PathBuf,
}

/// Runs the experiment, streaming histograms to disk, and writes per-bin and summary files.
pub fn cmd_simulate(config: &RunConfig, write_records: bool) -> Result<SimulateOutcome> {
    config.validate()?;
    let dir = config.resolve_output_dir();
    prepare_dir(&dir)?;
    let start = Instant::now();
    let summary = simulate_into(config, &dir, write_records)?;
    output::write_bins(&dir, config, &summary)?;
    output::write_summary(&dir, config, &summary)?;
    output::write_meta(&dir, config, start.elapsed().as_secs_f64())?;
    Ok(SimulateOutcome { summary, output_dir: dir })
}

fn simulate_into(config: &RunConfig, dir: &Path, write_records: bool) -> Result<Summary> {
    let plan = config.plan()?;
    let mut stream = HistogramStream::create(dir, config, write_records)?;
    let mut acc = Accumulator::new();
    run_experiment_streaming(&plan, |rec| {
        stream.push(&rec)?;
        acc.push(&rec)
    })?;
    stream.finish()?;
    acc.finish()
}

/// Runs the experiment without writing files.
pub fn simulate_summary(config: &RunConfig) -> Result<Summary> {
    config.validate()?;
    let mut acc = Accumulator::new();
    run_experiment_streaming(&config.plan()?, |rec| acc.push(&rec))?;
    acc.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Pulses per run; abscissa is the total pulse count per configuration.
    Time,
    /// Multiples of the calibrated η.
    Efficiency,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Time => "time",
            SweepAxis::Efficiency => "efficiency",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub fit: PowerLawFit<f64>,
}

/// Independent master seed for sweep point `i`.
pub fn sweep_point_seed(seed: u64, i: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One statistics pass per axis value, then a power-law fit of s_κ̄.
pub fn sweep(config: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepOutcome> {
    if values.len() < 3 {
        return Err(Error::Config(format!("a sweep needs at least 3 axis values, got {}", values.len())));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config("sweep values must be positive".into()));
    }
    config.validate()?;
    let calibrated = config.plan()?.resolve_efficiency()?;
    let mut rows = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let mut cfg = config.clone();
        cfg.seed = sweep_point_seed(config.seed, i);
        match axis {
            SweepAxis::Time => {
                if v.fract() != 0.0 {
                    return Err(Error::Config(format!("time-axis values are pulse counts, got {v}")));
                }
                cfg.n_pulses = v as u64;
            }
            SweepAxis::Efficiency => {
                cfg.detection.efficiency = Some(v * calibrated);
                if config.detection.scale_background_with_efficiency {
                    cfg.detection.background_per_pulse *= v;
                }
            }
        }
        let plan = cfg.plan()?;
        let eta = plan.resolve_efficiency()?;
        let s = simulate_summary(&cfg)?;
        let abscissa = match axis {
            SweepAxis::Time => cfg.n_runs as f64 * cfg.n_pulses as f64,
            SweepAxis::Efficiency => eta,
        };
        rows.push(SweepRow {
            value: v,
            n_pulses: cfg.n_pulses,
            efficiency: eta,
            background_per_pulse: cfg.detection.background_per_pulse,
            kappa: s.kappa_mean,
            point: ScalingPoint { abscissa, std_error: s.kappa_std_error },
        });
    }
    let points: Vec<ScalingPoint<f64>> = rows.iter().map(|r| r.point).collect();
    let fit = power_law_fit(&points)?;
    Ok(SweepOutcome { rows, fit })
}

/// [`sweep`] plus `sweep.csv` and `summary.json` in the output directory.
pub fn cmd_sweep(config: &RunConfig, axis: SweepAxis, values: Option<&[f64]>) -> Result<SweepOutcome> {
    let default_values: Vec<f64> = match axis {
        SweepAxis::Time => config.sweep.time_pulses.iter().map(|&t| t as f64).collect(),
        SweepAxis::Efficiency => config.sweep.efficiency_factors.clone(),
    };
    let values = values.unwrap_or(&default_values);
    let dir = config.resolve_output_dir();
    let outcome = sweep(config, axis, values)?;
    prepare_dir(&dir)?;
    output::write_sweep(&dir, config, axis.name(), &outcome.rows, &outcome.fit)?;
    Ok(outcome)
}

/// Oracle checks for the configured laser and grid.
pub fn cmd_validate(config: &RunConfig) -> Result<Vec<Check>> {
    let laser = config.laser()?;
    let grid = config.grid(&laser)?;
    checks::validation_suite(&laser, &grid, &config.detection_spec()?, config.seed)
}

/// Noise-free table for the configuration, written to `ideal.csv`.
pub fn cmd_ideal(config: &RunConfig) -> Result<(ProbabilityTable<f64>, PathBuf)> {
    let laser = config.laser()?;
    let grid = config.grid(&laser)?;
    let channels = config.channel_weights()?;
    let amps = AmplitudeSet::compute(&laser, &grid, AmplitudeMethod::Quadrature)?;
    let table = ProbabilityTable::from_amplitudes(&amps, grid.energies(), channels.as_ref());
    let dir = config.resolve_output_dir();
    prepare_dir(&dir)?;
    let path = dir.join(output::IDEAL_CSV);
    output::write_ideal(&path, config, &table, &amps)?;
    Ok((table, path))
}
