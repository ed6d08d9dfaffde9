//! Shot-to-shot laser noise drawn from counter-based random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::LaserConfig;
use crate::real::Real;

pub const DEFAULT_RELATIVE_FIELD_SIGMA: f64 = 0.1;
pub const DEFAULT_COMMON_DELAY_SIGMA_AS: f64 = 50.0;
pub const DEFAULT_COMPONENT_DELAY_SIGMA_AS: f64 = 200.0;

/// When the common XUV–IR delay fluctuation is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommonDelayMode {
    #[default]
    PerPulse,
    /// One draw per run, shared by all configurations and pulses of that run.
    PerRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec<T> {
    /// σ of the multiplicative field noise, relative to the field amplitude.
    pub relative_field_sigma: T,
    /// σ of the common delay τ, as.
    pub common_delay_sigma: T,
    /// σ of each component offset τ′_j, as.
    pub component_delay_sigma: T,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(relative_field_sigma: T, common_delay_sigma: T, component_delay_sigma: T) -> Result<Self> {
        let s = Self { relative_field_sigma, common_delay_sigma, component_delay_sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.relative_field_sigma, self.common_delay_sigma, self.component_delay_sigma]
            .iter()
            .all(|x| *x >= T::zero() && x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("noise widths must be finite and non-negative: {self:?}")))
        }
    }

    pub fn reference() -> Self {
        Self {
            relative_field_sigma: T::lit(DEFAULT_RELATIVE_FIELD_SIGMA),
            common_delay_sigma: T::lit(DEFAULT_COMMON_DELAY_SIGMA_AS),
            component_delay_sigma: T::lit(DEFAULT_COMPONENT_DELAY_SIGMA_AS),
        }
    }

    pub fn none() -> Self {
        Self { relative_field_sigma: T::zero(), common_delay_sigma: T::zero(), component_delay_sigma: T::zero() }
    }
}

/// Position in a counter-based random sequence: ChaCha8 keyed by `seed`, on stream
/// `stream_id`, at 32-bit word `counter`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn at(seed: u64, stream_id: u64, counter: u128) -> Self {
        let mut s = Self::new(seed, stream_id);
        s.rng.set_word_pos(counter);
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Addresses the stream owned by one work item of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub run: u32,
    pub configuration: u8,
    pub batch: u32,
}

impl StreamKey {
    /// Configuration slot reserved for run-level draws.
    pub const RUN_LEVEL: u8 = 0x0f;

    /// Injective packing: run in bits 36.., configuration in 32..36, batch in 0..32.
    pub fn stream_id(self) -> u64 {
        debug_assert!(self.configuration < 16 && self.run < (1 << 28));
        (u64::from(self.run) << 36) | (u64::from(self.configuration & 0x0f) << 32) | u64::from(self.batch)
    }

    pub fn stream(self, master_seed: u64) -> RandomStream {
        RandomStream::new(master_seed, self.stream_id())
    }
}

/// Standard normal variate from the current stream position.
#[inline]
pub fn normal_draw(rng: &mut RandomStream) -> f64 {
    rng.normal()
}

/// A perturbed laser configuration and the number of field amplitudes clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyLaser<T> {
    pub laser: LaserConfig<T>,
    pub clamped: u32,
}

/// Draws one shot's laser parameters. Draw order: XUV field, a, b, c fields, common delay,
/// τ′_a, τ′_b, τ′_c.
#[inline]
pub fn sample_noisy_laser<T: Real>(base: &LaserConfig<T>, spec: &NoiseSpec<T>, rng: &mut RandomStream) -> NoisyLaser<T> {
    let mut laser = *base;
    let mut clamped = 0;
    let mut scale = |amp: &mut T, z: f64| {
        let factor = T::one() + spec.relative_field_sigma * T::lit(z);
        if factor < T::zero() {
            clamped += 1;
            *amp = T::zero();
        } else {
            *amp *= factor;
        }
    };
    scale(&mut laser.xuv.amplitude, rng.normal());
    for p in laser.ir.iter_mut() {
        scale(&mut p.amplitude, rng.normal());
    }
    laser.common_delay += spec.common_delay_sigma * T::lit(rng.normal());
    for p in laser.ir.iter_mut() {
        p.delay += spec.component_delay_sigma * T::lit(rng.normal());
    }
    NoisyLaser { laser, clamped }
}
