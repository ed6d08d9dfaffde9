//! Run configuration: a TOML file whose every field has a default.

use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::amplitude::{ChannelWeights, EnergyGrid, DEFAULT_BIN_COUNT, DEFAULT_WINDOW_WIDTH_EV, HELIUM_GROUND_ENERGY_EV};
use crate::error::{Error, Result};
use crate::monte_carlo::{
    DetectionSpec, ExperimentPlan, SimulationOptions, DEFAULT_BACKGROUND_PER_PULSE, DEFAULT_PULSES_PER_BATCH,
    DEFAULT_TARGET_YIELD,
};
use crate::noise::{
    CommonDelayMode, NoiseSpec, DEFAULT_COMMON_DELAY_SIGMA_AS, DEFAULT_COMPONENT_DELAY_SIGMA_AS,
    DEFAULT_RELATIVE_FIELD_SIGMA,
};
use crate::pulse::{
    LaserConfig, REFERENCE_IR_FWHM_NM, REFERENCE_IR_WAVELENGTHS_NM, REFERENCE_XUV_ENERGY_EV, REFERENCE_XUV_FWHM_EV,
};
use crate::units::FwhmConvention;

pub const OUTPUT_DIR_ENV: &str = "SORKIN_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "sorkin-output";
pub const DEFAULT_REP_RATE_HZ: f64 = 3000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserSection {
    pub xuv_energy_ev: f64,
    pub xuv_fwhm_ev: f64,
    pub xuv_amplitude: f64,
    pub ir_wavelengths_nm: [f64; 3],
    pub ir_fwhm_nm: [f64; 3],
    pub ir_amplitudes: [f64; 3],
    /// τ′_j offsets, as.
    pub ir_delays_as: [f64; 3],
    pub common_delay_as: f64,
    pub fwhm_convention: FwhmConvention,
}

impl Default for LaserSection {
    fn default() -> Self {
        Self {
            xuv_energy_ev: REFERENCE_XUV_ENERGY_EV,
            xuv_fwhm_ev: REFERENCE_XUV_FWHM_EV,
            xuv_amplitude: 1.0,
            ir_wavelengths_nm: REFERENCE_IR_WAVELENGTHS_NM,
            ir_fwhm_nm: [REFERENCE_IR_FWHM_NM; 3],
            ir_amplitudes: [1.0; 3],
            ir_delays_as: [0.0; 3],
            common_delay_as: 0.0,
            fwhm_convention: FwhmConvention::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub ground_energy_ev: f64,
    /// Window center ε_c; computed from ε_g, the XUV and the b component when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_ev: Option<f64>,
    pub width_ev: f64,
    pub n_bins: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            ground_energy_ev: HELIUM_GROUND_ENERGY_EV,
            center_ev: None,
            width_ev: DEFAULT_WINDOW_WIDTH_EV,
            n_bins: DEFAULT_BIN_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub relative_field_sigma: f64,
    pub common_delay_sigma_as: f64,
    pub component_delay_sigma_as: f64,
    pub common_delay_mode: CommonDelayMode,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            relative_field_sigma: DEFAULT_RELATIVE_FIELD_SIGMA,
            common_delay_sigma_as: DEFAULT_COMMON_DELAY_SIGMA_AS,
            component_delay_sigma_as: DEFAULT_COMPONENT_DELAY_SIGMA_AS,
            common_delay_mode: CommonDelayMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub target_yield: f64,
    pub background_per_pulse: f64,
    /// Fixes η instead of calibrating it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    /// In efficiency sweeps, scale the background together with η.
    pub scale_background_with_efficiency: bool,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            target_yield: DEFAULT_TARGET_YIELD,
            background_per_pulse: DEFAULT_BACKGROUND_PER_PULSE,
            efficiency: None,
            scale_background_with_efficiency: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub two_channel: bool,
    /// `[re, im]` of (w_s, w_d) per path; the built-in pair is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<[[[f64; 2]; 2]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Pulses per run along the time axis.
    pub time_pulses: Vec<u64>,
    /// Multiples of the calibrated η along the efficiency axis.
    pub efficiency_factors: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { time_pulses: vec![100_000, 300_000, 1_000_000], efficiency_factors: vec![1.0, 3.0, 10.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_pulses: u64,
    pub n_runs: u32,
    /// Worker threads; 0 uses all cores. Does not affect results.
    pub workers: usize,
    pub pulses_per_batch: u64,
    pub rep_rate_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub laser: LaserSection,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub detection: DetectionSection,
    pub channels: ChannelSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_pulses: 100_000,
            n_runs: 100,
            workers: 0,
            pulses_per_batch: DEFAULT_PULSES_PER_BATCH,
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            output_dir: None,
            laser: LaserSection::default(),
            grid: GridSection::default(),
            noise: NoiseSection::default(),
            detection: DetectionSection::default(),
            channels: ChannelSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    /// The configuration with fields that cannot change results cleared.
    pub fn echo(&self) -> RunConfig {
        RunConfig { workers: 0, output_dir: None, ..self.clone() }
    }

    /// Output directory: config field, then environment variable, then the built-in default.
    pub fn resolve_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn laser(&self) -> Result<LaserConfig<f64>> {
        let l = &self.laser;
        LaserConfig::from_lab_units(
            l.xuv_energy_ev,
            l.xuv_fwhm_ev,
            l.xuv_amplitude,
            l.ir_wavelengths_nm,
            l.ir_fwhm_nm,
            l.ir_amplitudes,
            l.ir_delays_as,
            l.common_delay_as,
            l.fwhm_convention,
        )
    }

    pub fn grid(&self, laser: &LaserConfig<f64>) -> Result<EnergyGrid<f64>> {
        let g = &self.grid;
        match g.center_ev {
            Some(c) => EnergyGrid::new(c, g.width_ev, g.n_bins, g.ground_energy_ev),
            None => EnergyGrid::centered_on_b(laser, g.ground_energy_ev, g.width_ev, g.n_bins),
        }
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec<f64>> {
        let n = &self.noise;
        NoiseSpec::new(n.relative_field_sigma, n.common_delay_sigma_as, n.component_delay_sigma_as)
    }

    pub fn detection_spec(&self) -> Result<DetectionSpec> {
        DetectionSpec::new(self.detection.target_yield, self.detection.background_per_pulse)
    }

    pub fn channel_weights(&self) -> Result<Option<ChannelWeights<f64>>> {
        if !self.channels.two_channel {
            return Ok(None);
        }
        match self.channels.weights {
            None => Ok(Some(ChannelWeights::reference())),
            Some(w) => ChannelWeights::new(w.map(|pair| pair.map(|[re, im]| Complex::new(re, im)))).map(Some),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 || self.n_runs == 0 {
            return Err(Error::Config("n_pulses and n_runs must be positive".into()));
        }
        if !(self.rep_rate_hz > 0.0) {
            return Err(Error::Config("rep_rate_hz must be positive".into()));
        }
        self.plan().map(|_| ())
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        let laser = self.laser()?;
        let grid = self.grid(&laser)?;
        let mut plan = ExperimentPlan::new(
            laser,
            grid,
            self.detection_spec()?,
            self.noise_spec()?,
            self.n_pulses,
            self.n_runs,
            self.seed,
        );
        plan.efficiency = self.detection.efficiency;
        plan.options = SimulationOptions {
            channels: self.channel_weights()?,
            common_delay_mode: self.noise.common_delay_mode,
            pulses_per_batch: self.pulses_per_batch,
            workers: self.workers,
        };
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::EnergyGrid;

    #[test]
    fn defaults_are_the_reference_experiment() {
        let c = RunConfig::default();
        assert_eq!(c.laser.xuv_energy_ev, 40.0);
        assert_eq!(c.laser.xuv_fwhm_ev, 0.15);
        assert_eq!(c.laser.ir_wavelengths_nm, [820.0, 800.0, 780.0]);
        assert_eq!(c.laser.ir_fwhm_nm, [5.0; 3]);
        assert_eq!((c.grid.width_ev, c.grid.n_bins), (0.2, 40));
        assert_eq!(
            (c.noise.relative_field_sigma, c.noise.common_delay_sigma_as, c.noise.component_delay_sigma_as),
            (0.1, 50.0, 200.0)
        );
        assert_eq!((c.detection.target_yield, c.detection.background_per_pulse), (0.02, 2e-4));
        assert_eq!((c.n_pulses, c.n_runs), (100_000, 100));
        let plan = c.plan().unwrap();
        let reference = ExperimentPlan::reference(100_000, 100, 1);
        assert_eq!(plan.base, reference.base);
        assert_eq!(plan.grid, EnergyGrid::reference(&reference.base));
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.grid.center_ev = Some(17.08);
        c.laser.ir_delays_as = [12.5, -0.1, 1.0 / 3.0];
        c.detection.efficiency = Some(0.123_456_789_012_345_67);
        c.channels.two_channel = true;
        c.channels.weights = Some([[[1.0, 0.0], [0.2, 0.3]]; 3]);
        c.noise.common_delay_mode = CommonDelayMode::PerRun;
        let s = c.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml_string().unwrap(), s);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        c.save(&p).unwrap();
        assert_eq!(RunConfig::load(&p).unwrap(), c);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("sead = 3"), Err(Error::TomlDe(_))));
        assert!(RunConfig::from_toml_str("[laser]\nxuv_energy = 3.0").is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = RunConfig::from_toml_str("n_runs = 5\n[noise]\ncomponent_delay_sigma_as = 20.0\n").unwrap();
        assert_eq!(c.n_runs, 5);
        assert_eq!(c.noise.component_delay_sigma_as, 20.0);
        assert_eq!(c.noise.common_delay_sigma_as, 50.0);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut c = RunConfig::default();
        c.n_pulses = 0;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = RunConfig::default();
        c.detection.target_yield = 1.5;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = RunConfig::default();
        c.laser.ir_wavelengths_nm = [780.0, 800.0, 820.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn echo_drops_scheduling_fields() {
        let mut c = RunConfig::default();
        c.workers = 8;
        c.output_dir = Some("x".into());
        let e = c.echo();
        assert_eq!(e.workers, 0);
        assert!(e.output_dir.is_none());
        assert_eq!(e.seed, c.seed);
    }

    #[test]
    fn center_override() {
        let mut c = RunConfig::default();
        c.grid.center_ev = Some(17.08);
        let p = c.plan().unwrap();
        assert_eq!(p.grid.center, 17.08);
    }
}
