//! Pulse-by-pulse detector simulation.
//!
//! Every pulse draws a noisy laser, rebuilds P_S(ε_f) for the configuration being
//! measured, and takes one categorical sample from
//! `{P̃(ε_1), …, P̃(ε_n), 1 − Σ_f P̃(ε_f)}` with `P̃ = P₀ + η·P_S`.
//!
//! Work is split into (run, configuration, batch) items. Each item owns the random stream
//! addressed by its [`StreamKey`], so results do not depend on how items are scheduled.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{self, AmplitudeKernel, AmplitudeMethod, ChannelWeights, EnergyGrid, ProbabilityTable};
use crate::error::{Error, Result};
use crate::noise::{sample_noisy_laser, CommonDelayMode, NoiseSpec, RandomStream, StreamKey};
use crate::paths::{PathConfiguration, PathLabel};
use crate::pulse::LaserConfig;

pub const DEFAULT_TARGET_YIELD: f64 = 0.02;
pub const DEFAULT_BACKGROUND_PER_PULSE: f64 = 2e-4;
pub const DEFAULT_PULSES_PER_BATCH: u64 = 10_000;
/// Q_abc below this fraction of its fully resonant value counts as "no spectral overlap".
pub const MIN_OVERLAP_RATIO: f64 = 1e-9;
/// Headroom applied to the noise-free detection probabilities before a run starts.
pub const PRECHECK_HEADROOM: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSpec {
    /// Expected signal electrons per pulse in the window for S = abc.
    pub target_yield: f64,
    /// Expected background clicks per pulse in the whole window.
    pub background_per_pulse: f64,
}

impl DetectionSpec {
    pub fn new(target_yield: f64, background_per_pulse: f64) -> Result<Self> {
        let s = Self { target_yield, background_per_pulse };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |x: f64| (0.0..1.0).contains(&x);
        if in_range(self.target_yield) && in_range(self.background_per_pulse) {
            Ok(())
        } else {
            Err(Error::Config(format!("detection rates must lie in [0, 1): {self:?}")))
        }
    }

    pub fn reference() -> Self {
        Self { target_yield: DEFAULT_TARGET_YIELD, background_per_pulse: DEFAULT_BACKGROUND_PER_PULSE }
    }

    /// P₀ per bin.
    pub fn background_per_bin(&self, n_bins: usize) -> f64 {
        self.background_per_pulse / n_bins as f64
    }
}

/// η = target_yield / Q_abc with Q_abc = Σ_f P_abc(ε_f) of the noise-free table.
pub fn calibrate_efficiency(ideal: &ProbabilityTable<f64>, spec: &DetectionSpec) -> Result<f64> {
    let q_abc = ideal.total(PathConfiguration::ABC);
    if !(q_abc > 0.0 && q_abc.is_finite()) {
        return Err(Error::Calibration(format!("Q_abc = {q_abc}: no spectral overlap in the window")));
    }
    if let Some(scale) = ideal.resonant_scale {
        let ratio = q_abc / scale;
        if ratio < MIN_OVERLAP_RATIO {
            return Err(Error::Calibration(format!(
                "Q_abc is {ratio:.3e} of its resonant value: no spectral overlap in the window"
            )));
        }
    }
    Ok(spec.target_yield / q_abc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Click(usize),
    NoClick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickHistogram {
    pub configuration: PathConfiguration,
    pub counts: Vec<u64>,
    pub n_pulses: u64,
    pub no_click_count: u64,
}

impl ClickHistogram {
    pub fn empty(configuration: PathConfiguration, n_bins: usize) -> Self {
        Self { configuration, counts: vec![0; n_bins], n_pulses: 0, no_click_count: 0 }
    }

    #[inline]
    pub fn record(&mut self, outcome: Outcome) {
        self.n_pulses += 1;
        match outcome {
            Outcome::Click(f) => self.counts[f] += 1,
            Outcome::NoClick => self.no_click_count += 1,
        }
    }

    pub fn merge(&mut self, other: &ClickHistogram) {
        debug_assert_eq!(self.configuration, other.configuration);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_pulses += other.n_pulses;
        self.no_click_count += other.no_click_count;
    }

    pub fn total_clicks(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_consistent(&self) -> bool {
        self.total_clicks() + self.no_click_count == self.n_pulses
    }
}

/// Evaluates detection probabilities for one configuration and draws pulse outcomes.
#[derive(Debug, Clone)]
pub struct PulseSampler<'k> {
    kernel: &'k AmplitudeKernel<f64>,
    configuration: PathConfiguration,
    efficiency: f64,
    background_per_bin: f64,
    channels: Option<ChannelWeights<f64>>,
    labels: Vec<PathLabel>,
    amps: [Vec<Complex<f64>>; 3],
    probs: Vec<f64>,
}

impl<'k> PulseSampler<'k> {
    pub fn new(
        kernel: &'k AmplitudeKernel<f64>,
        configuration: PathConfiguration,
        efficiency: f64,
        detection: &DetectionSpec,
        channels: Option<ChannelWeights<f64>>,
    ) -> Self {
        let n = kernel.n_bins();
        Self {
            kernel,
            configuration,
            efficiency,
            background_per_bin: detection.background_per_bin(n),
            channels,
            labels: configuration.labels().collect(),
            amps: [vec![Complex::new(0.0, 0.0); n], vec![Complex::new(0.0, 0.0); n], vec![Complex::new(0.0, 0.0); n]],
            probs: vec![0.0; n],
        }
    }

    pub fn configuration(&self) -> PathConfiguration {
        self.configuration
    }

    /// P̃_S(ε_f) = P₀ + η·P_S(ε_f) for `laser`.
    pub fn detection_probabilities(&mut self, laser: &LaserConfig<f64>) -> &[f64] {
        for &l in &self.labels {
            self.kernel.fill(laser, l, &mut self.amps[l.index()]);
        }
        let labels = &self.labels;
        for f in 0..self.probs.len() {
            let p = match &self.channels {
                None => {
                    let mut sum = Complex::new(0.0, 0.0);
                    for l in labels {
                        sum += self.amps[l.index()][f];
                    }
                    sum.norm_sqr()
                }
                Some(w) => {
                    let mut s = Complex::new(0.0, 0.0);
                    let mut d = Complex::new(0.0, 0.0);
                    for l in labels {
                        let a = self.amps[l.index()][f];
                        s += w.weights[l.index()][0] * a;
                        d += w.weights[l.index()][1] * a;
                    }
                    s.norm_sqr() + d.norm_sqr()
                }
            };
            self.probs[f] = self.background_per_bin + self.efficiency * p;
        }
        &self.probs
    }

    /// One categorical draw for a pulse with the given laser parameters.
    #[inline]
    pub fn draw(&mut self, laser: &LaserConfig<f64>, rng: &mut RandomStream) -> Result<Outcome> {
        let u = rng.uniform();
        let probs = self.detection_probabilities(laser);
        let total: f64 = probs.iter().sum();
        if total > 1.0 {
            return Err(Error::Calibration(format!(
                "detection probabilities sum to {total} > 1 (overshoot {:.3e})",
                total - 1.0
            )));
        }
        let mut cum = 0.0;
        for (f, p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return Ok(Outcome::Click(f));
            }
        }
        Ok(Outcome::NoClick)
    }
}

/// Single pulse for configuration `config` with laser parameters `laser` (already noisy).
pub fn simulate_pulse(
    config: PathConfiguration,
    laser: &LaserConfig<f64>,
    grid: &EnergyGrid<f64>,
    efficiency: f64,
    detection: &DetectionSpec,
    rng: &mut RandomStream,
) -> Result<Outcome> {
    let kernel = AmplitudeKernel::new(laser, grid);
    PulseSampler::new(&kernel, config, efficiency, detection, None).draw(laser, rng)
}

/// Knobs shared by every pulse of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub channels: Option<ChannelWeights<f64>>,
    pub common_delay_mode: CommonDelayMode,
    /// Pulses per work item; part of the stream layout, so changing it changes the samples.
    pub pulses_per_batch: u64,
    /// Worker threads; 0 lets the pool decide. Never affects results.
    pub workers: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            channels: None,
            common_delay_mode: CommonDelayMode::PerPulse,
            pulses_per_batch: DEFAULT_PULSES_PER_BATCH,
            workers: 0,
        }
    }
}

/// Checks Σ_f (P₀ + 1.2·η·P_S) ≤ 1 on the noise-free table for every configuration.
pub fn precheck(ideal: &ProbabilityTable<f64>, efficiency: f64, detection: &DetectionSpec) -> Result<()> {
    let bg = detection.background_per_pulse;
    for s in PathConfiguration::ALL {
        let total = bg + PRECHECK_HEADROOM * efficiency * ideal.total(s);
        if total > 1.0 {
            return Err(Error::Calibration(format!(
                "configuration {s}: noise-free detection probability {total:.4} (with {PRECHECK_HEADROOM}x headroom) exceeds 1"
            )));
        }
    }
    Ok(())
}

fn run_pulses(
    sampler: &mut PulseSampler<'_>,
    base: &LaserConfig<f64>,
    noise: &NoiseSpec<f64>,
    n_pulses: u64,
    common_delay: Option<f64>,
    rng: &mut RandomStream,
    hist: &mut ClickHistogram,
) -> Result<u64> {
    let mut clamped = 0u64;
    for _ in 0..n_pulses {
        let mut noisy = sample_noisy_laser(base, noise, rng);
        if let Some(tau) = common_delay {
            noisy.laser.common_delay = tau;
        }
        clamped += u64::from(noisy.clamped);
        let outcome = sampler.draw(&noisy.laser, rng)?;
        hist.record(outcome);
    }
    Ok(clamped)
}

/// `n_pulses` noisy pulses of configuration `config` on a single stream.
#[allow(clippy::too_many_arguments)]
pub fn run_configuration(
    config: PathConfiguration,
    base: &LaserConfig<f64>,
    grid: &EnergyGrid<f64>,
    efficiency: f64,
    detection: &DetectionSpec,
    noise: &NoiseSpec<f64>,
    n_pulses: u64,
    rng: &mut RandomStream,
) -> Result<ClickHistogram> {
    let ideal = amplitude::probability_table(base, grid, None, AmplitudeMethod::ClosedForm)?;
    precheck(&ideal, efficiency, detection)?;
    let kernel = AmplitudeKernel::new(base, grid);
    let mut sampler = PulseSampler::new(&kernel, config, efficiency, detection, None);
    let mut hist = ClickHistogram::empty(config, grid.n_bins);
    run_pulses(&mut sampler, base, noise, n_pulses, None, rng, &mut hist)?;
    Ok(hist)
}

/// Seeds and indices that reproduce a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub run: u32,
    pub pulses_per_batch: u64,
}

/// Eight histograms of one run plus everything needed to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub seed: SeedInfo,
    pub bin_energies_ev: Vec<f64>,
    pub bin_edges_ev: Vec<f64>,
    pub detection: DetectionSpec,
    pub noise: NoiseSpec<f64>,
    pub efficiency: f64,
    /// In [`PathConfiguration::ALL`] order.
    pub histograms: Vec<ClickHistogram>,
    pub clamp_events: u64,
}

impl ExperimentRecord {
    pub fn histogram(&self, config: PathConfiguration) -> &ClickHistogram {
        &self.histograms[config.index()]
    }

    pub fn n_pulses(&self) -> u64 {
        self.histograms.first().map_or(0, |h| h.n_pulses)
    }

    pub fn n_bins(&self) -> usize {
        self.bin_energies_ev.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.histograms.len() != 8 {
            return Err(Error::Numeric(format!("record has {} histograms, expected 8", self.histograms.len())));
        }
        let n = self.n_pulses();
        for (h, s) in self.histograms.iter().zip(PathConfiguration::ALL) {
            if h.configuration != s || h.n_pulses != n || !h.is_consistent() || h.counts.len() != self.n_bins() {
                return Err(Error::Numeric(format!("inconsistent histogram for configuration {s}")));
            }
        }
        Ok(())
    }
}

/// Everything that defines an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub base: LaserConfig<f64>,
    pub grid: EnergyGrid<f64>,
    pub detection: DetectionSpec,
    pub noise: NoiseSpec<f64>,
    pub n_pulses: u64,
    pub n_runs: u32,
    pub master_seed: u64,
    /// η override; calibrated from the noise-free table when `None`.
    pub efficiency: Option<f64>,
    pub options: SimulationOptions,
}

impl ExperimentPlan {
    pub fn new(
        base: LaserConfig<f64>,
        grid: EnergyGrid<f64>,
        detection: DetectionSpec,
        noise: NoiseSpec<f64>,
        n_pulses: u64,
        n_runs: u32,
        master_seed: u64,
    ) -> Self {
        Self {
            base,
            grid,
            detection,
            noise,
            n_pulses,
            n_runs,
            master_seed,
            efficiency: None,
            options: SimulationOptions::default(),
        }
    }

    pub fn reference(n_pulses: u64, n_runs: u32, master_seed: u64) -> Self {
        let base = LaserConfig::reference();
        let grid = EnergyGrid::reference(&base);
        Self::new(base, grid, DetectionSpec::reference(), NoiseSpec::reference(), n_pulses, n_runs, master_seed)
    }

    pub fn ideal_table(&self) -> Result<ProbabilityTable<f64>> {
        amplitude::probability_table(&self.base, &self.grid, self.options.channels.as_ref(), AmplitudeMethod::ClosedForm)
    }

    /// Calibrated (or overridden) η.
    pub fn resolve_efficiency(&self) -> Result<f64> {
        let ideal = self.ideal_table()?;
        let eta = match self.efficiency {
            Some(eta) if eta >= 0.0 && eta.is_finite() => eta,
            Some(eta) => return Err(Error::Config(format!("efficiency must be finite and non-negative, got {eta}"))),
            None => calibrate_efficiency(&ideal, &self.detection)?,
        };
        precheck(&ideal, eta, &self.detection)?;
        Ok(eta)
    }
}

/// Runs the experiment and passes each finished record to `sink`, in run order.
pub fn run_experiment_streaming<F>(plan: &ExperimentPlan, mut sink: F) -> Result<f64>
where
    F: FnMut(ExperimentRecord) -> Result<()>,
{
    plan.base.validate()?;
    plan.noise.validate()?;
    plan.detection.validate()?;
    if plan.options.pulses_per_batch == 0 {
        return Err(Error::Config("pulses_per_batch must be positive".into()));
    }
    if plan.n_runs >= (1 << 28) {
        return Err(Error::Config("too many runs".into()));
    }
    let eta = plan.resolve_efficiency()?;
    let kernel = AmplitudeKernel::new(&plan.base, &plan.grid);
    let n_bins = plan.grid.n_bins;
    let batch = plan.options.pulses_per_batch;
    let n_batches = plan.n_pulses.div_ceil(batch);
    if n_batches > u64::from(u32::MAX) {
        return Err(Error::Config("too many pulse batches; raise pulses_per_batch".into()));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.options.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let items: Vec<(usize, u64)> =
        (0..8).flat_map(|c| (0..n_batches).map(move |b| (c, b))).collect();

    for run in 0..plan.n_runs {
        let common_delay = match plan.options.common_delay_mode {
            CommonDelayMode::PerPulse => None,
            CommonDelayMode::PerRun => {
                let mut rng = StreamKey { run, configuration: StreamKey::RUN_LEVEL, batch: 0 }.stream(plan.master_seed);
                Some(plan.base.common_delay + plan.noise.common_delay_sigma * rng.normal())
            }
        };
        let partials: Vec<Result<(ClickHistogram, u64)>> = pool.install(|| {
            items
                .par_iter()
                .map(|&(c, b)| {
                    let config = PathConfiguration::ALL[c];
                    let mut rng = StreamKey { run, configuration: c as u8, batch: b as u32 }.stream(plan.master_seed);
                    let pulses = batch.min(plan.n_pulses - b * batch);
                    let mut sampler =
                        PulseSampler::new(&kernel, config, eta, &plan.detection, plan.options.channels);
                    let mut hist = ClickHistogram::empty(config, n_bins);
                    let clamped =
                        run_pulses(&mut sampler, &plan.base, &plan.noise, pulses, common_delay, &mut rng, &mut hist)?;
                    Ok((hist, clamped))
                })
                .collect()
        });
        let mut histograms: Vec<ClickHistogram> =
            PathConfiguration::ALL.iter().map(|s| ClickHistogram::empty(*s, n_bins)).collect();
        let mut clamp_events = 0;
        for (item, partial) in items.iter().zip(partials) {
            let (h, clamped) = partial?;
            histograms[item.0].merge(&h);
            clamp_events += clamped;
        }
        let record = ExperimentRecord {
            seed: SeedInfo { master_seed: plan.master_seed, run, pulses_per_batch: batch },
            bin_energies_ev: plan.grid.energies(),
            bin_edges_ev: plan.grid.bin_edges(),
            detection: plan.detection,
            noise: plan.noise,
            efficiency: eta,
            histograms,
            clamp_events,
        };
        debug_assert!(record.validate().is_ok());
        sink(record)?;
    }
    Ok(eta)
}

/// Runs the experiment and collects all records.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::with_capacity(plan.n_runs as usize);
    run_experiment_streaming(plan, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}
