//! Self-checks of the numerical pipeline, shared by `sorkin validate` and the test suites.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::amplitude::{self, AmplitudeMethod, AmplitudeSet, ChannelWeights, EnergyGrid, ProbabilityTable};
use crate::error::{Error, Result};
use crate::monte_carlo::{calibrate_efficiency, run_configuration, DetectionSpec};
use crate::noise::{NoiseSpec, RandomStream, StreamKey};
use crate::paths::{PathConfiguration, PathLabel};
use crate::pulse::LaserConfig;
use crate::statistics::{exact_bin, peres_per_bin, sorkin_per_bin};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Reference laser with random amplitudes and delays.
pub fn random_laser(rng: &mut impl Rng) -> LaserConfig<f64> {
    let mut l = LaserConfig::reference();
    l.xuv.amplitude = rng.random_range(0.2..2.0);
    l.common_delay = rng.random_range(-300.0..300.0);
    for p in l.ir.iter_mut() {
        p.amplitude = rng.random_range(0.2..2.0);
        p.delay = rng.random_range(-500.0..500.0);
    }
    l
}

pub fn random_channels(rng: &mut impl Rng) -> ChannelWeights<f64> {
    let w = std::array::from_fn(|_| {
        std::array::from_fn(|_| Complex::from_polar(rng.random_range(0.1..1.5), rng.random_range(-3.2..3.2)))
    });
    ChannelWeights::new(w).expect("nonzero weights")
}

/// max_f |P_abc − ΣP_jk + ΣP_j| / P_abc over the bins of a noise-free table.
pub fn born_residual(table: &ProbabilityTable<f64>) -> f64 {
    (0..table.n_bins())
        .map(|f| table.third_order_interference(f).abs() / table.row(PathConfiguration::ABC)[f])
        .fold(0.0, f64::max)
}

/// Largest Born-identity residual over `n` random lasers, single- or two-channel.
pub fn born_identity(n: usize, two_channel: bool, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let l = random_laser(&mut rng);
        let g = EnergyGrid::reference(&l);
        let w = two_channel.then(|| random_channels(&mut rng));
        let t = amplitude::probability_table(&l, &g, w.as_ref(), AmplitudeMethod::ClosedForm)?;
        worst = worst.max(born_residual(&t));
    }
    Ok(worst)
}

/// max |A_quad − A_closed| / |A_quad| over all bins and paths.
pub fn quadrature_agreement(laser: &LaserConfig<f64>, grid: &EnergyGrid<f64>) -> Result<f64> {
    let q = AmplitudeSet::compute(laser, grid, AmplitudeMethod::Quadrature)?;
    let c = AmplitudeSet::compute(laser, grid, AmplitudeMethod::ClosedForm)?;
    let mut worst: f64 = 0.0;
    for l in PathLabel::ALL {
        for f in 0..grid.n_bins {
            let (a, b) = (q.get(l, f), c.get(l, f));
            worst = worst.max((a - b).norm() / a.norm());
        }
    }
    Ok(worst)
}

/// (max |κ|, max |F − 1|) of a noise-free table.
pub fn exact_estimators(table: &ProbabilityTable<f64>) -> (f64, f64) {
    (0..table.n_bins()).fold((0.0f64, 0.0f64), |(k, f), bin| {
        let p = exact_bin(table, bin);
        (k.max(sorkin_per_bin(&p).kappa.abs()), f.max((peres_per_bin(&p).f - 1.0).abs()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Uniformity {
    pub total: u64,
    pub expected_total: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of a histogram against a flat expectation.
pub fn chi_square_uniform(counts: &[u64]) -> Uniformity {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let chi_square = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dof = counts.len() - 1;
    let p_value = ChiSquared::new(dof as f64).map_or(f64::NAN, |d| d.sf(chi_square));
    Uniformity { total, expected_total: total as f64, chi_square, dof, p_value }
}

/// Background-only clicks of configuration ∅ over `n_pulses` pulses.
pub fn background_uniformity(
    laser: &LaserConfig<f64>,
    grid: &EnergyGrid<f64>,
    background_per_pulse: f64,
    n_pulses: u64,
    seed: u64,
) -> Result<Uniformity> {
    let spec = DetectionSpec::new(0.0, background_per_pulse)?;
    let mut rng = StreamKey { run: 0, configuration: PathConfiguration::EMPTY.index() as u8, batch: 0 }.stream(seed);
    let h = run_configuration(PathConfiguration::EMPTY, laser, grid, 0.0, &spec, &NoiseSpec::reference(), n_pulses, &mut rng)?;
    let mut u = chi_square_uniform(&h.counts);
    u.expected_total = background_per_pulse * n_pulses as f64;
    Ok(u)
}

/// Total S = abc clicks over `n_pulses` pulses for a calibrated detector and noise `noise`.
pub fn abc_yield(
    laser: &LaserConfig<f64>,
    grid: &EnergyGrid<f64>,
    detection: &DetectionSpec,
    noise: &NoiseSpec<f64>,
    n_pulses: u64,
    seed: u64,
) -> Result<(u64, f64)> {
    let t = amplitude::probability_table(laser, grid, None, AmplitudeMethod::ClosedForm)?;
    let eta = calibrate_efficiency(&t, detection)?;
    let mut rng = RandomStream::new(seed, 7);
    let h = run_configuration(PathConfiguration::ABC, laser, grid, eta, detection, noise, n_pulses, &mut rng)?;
    Ok((h.total_clicks(), eta))
}

/// The oracle suite run by `sorkin validate`.
pub fn validation_suite(
    laser: &LaserConfig<f64>,
    grid: &EnergyGrid<f64>,
    detection: &DetectionSpec,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let table = amplitude::probability_table(laser, grid, None, AmplitudeMethod::ClosedForm)?;
    match calibrate_efficiency(&table, detection) {
        Ok(eta) => {
            let q = eta * table.total(PathConfiguration::ABC);
            out.push(Check::new(
                "calibration",
                (q / detection.target_yield - 1.0).abs() < 1e-12,
                format!("eta = {eta:.6e}, eta*Q_abc = {q:.6e}"),
            ));
        }
        Err(e @ Error::Calibration(_)) => {
            out.push(Check::new("calibration", false, e.to_string()));
            return Ok(out);
        }
        Err(e) => return Err(e),
    }

    let quad = quadrature_agreement(laser, grid)?;
    out.push(Check::new("quadrature-vs-closed-form", quad <= 1e-8, format!("max relative deviation {quad:.3e} (limit 1e-8)")));

    let (k, f) = exact_estimators(&table);
    out.push(Check::new("noise-free-kappa", k <= 1e-10, format!("max |kappa| {k:.3e} (limit 1e-10)")));
    out.push(Check::new("noise-free-peres", f <= 1e-10, format!("max |F - 1| {f:.3e} (limit 1e-10)")));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_channels(&mut rng);
    let t2 = amplitude::probability_table(laser, grid, Some(&w), AmplitudeMethod::ClosedForm)?;
    let (k2, _) = exact_estimators(&t2);
    let r2 = born_residual(&t2);
    out.push(Check::new(
        "two-channel-additivity",
        k2 <= 1e-10 && r2 <= 1e-10,
        format!("max |kappa| {k2:.3e}, max relative residual {r2:.3e} (limit 1e-10)"),
    ));

    let n_bg = 2_000_000;
    let u = background_uniformity(laser, grid, detection.background_per_pulse, n_bg, seed)?;
    let rate_ok = (u.total as f64 - u.expected_total).abs() <= 3.0 * u.expected_total.sqrt();
    out.push(Check::new(
        "background-chi-square",
        u.p_value > 1e-3 && rate_ok,
        format!(
            "chi2 = {:.2} / {} dof, p = {:.4}; {} clicks vs {:.0} expected",
            u.chi_square, u.dof, u.p_value, u.total, u.expected_total
        ),
    ));
    Ok(out)
}
