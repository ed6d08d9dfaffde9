//! Estimators: corrected interference terms, the Sorkin parameter κ, the Peres parameter F,
//! weighted means and power-law fits.
//!
//! Probability estimates are indexed in [`PathConfiguration::ALL`] order
//! `[∅, a, b, c, ab, ac, bc, abc]`. Errors are first-order propagated from independent
//! Poisson counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monte_carlo::ExperimentRecord;
use crate::paths::PathConfiguration;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate<T> {
    pub value: T,
    pub variance: T,
    pub n_pulses: u64,
}

impl<T: Real> ProbabilityEstimate<T> {
    /// `counts / n` with variance `max(counts, 1) / n²`.
    pub fn from_counts(counts: u64, n_pulses: u64) -> Result<Self> {
        if n_pulses == 0 {
            return Err(Error::Domain("probability estimate needs at least one pulse".into()));
        }
        let n = T::from_u64(n_pulses).unwrap();
        let c = T::from_u64(counts).unwrap();
        let floor = T::from_u64(counts.max(1)).unwrap();
        Ok(Self { value: c / n, variance: floor / (n * n), n_pulses })
    }

    /// A known probability without sampling error.
    pub fn exact(value: T) -> Self {
        Self { value, variance: T::zero(), n_pulses: 0 }
    }

    pub fn sigma(&self) -> T {
        self.variance.sqrt()
    }
}

/// The eight estimates of one energy bin.
pub type BinEstimates<T> = [ProbabilityEstimate<T>; 8];

/// Exact estimates for bin `f` of a noise-free table.
pub fn exact_bin<T: Real>(table: &crate::amplitude::ProbabilityTable<T>, f: usize) -> BinEstimates<T> {
    PathConfiguration::ALL.map(|s| ProbabilityEstimate::exact(table.row(s)[f]))
}

/// Per-bin estimates from the histograms of a record.
pub fn estimate_probabilities<T: Real>(rec: &ExperimentRecord) -> Result<Vec<BinEstimates<T>>> {
    estimate_from_counts(&counts_of(rec), rec.n_pulses())
}

fn counts_of(rec: &ExperimentRecord) -> [Vec<u64>; 8] {
    PathConfiguration::ALL.map(|s| rec.histogram(s).counts.clone())
}

/// Per-bin estimates from counts summed over several records with equal pulse numbers.
pub fn estimate_pooled<T: Real>(records: &[ExperimentRecord]) -> Result<Vec<BinEstimates<T>>> {
    let first = records.first().ok_or_else(|| Error::Domain("no records".into()))?;
    let mut sums = counts_of(first);
    let mut n = first.n_pulses();
    for r in &records[1..] {
        if r.n_bins() != first.n_bins() {
            return Err(Error::Domain("records have different binning".into()));
        }
        for (acc, s) in sums.iter_mut().zip(PathConfiguration::ALL) {
            for (a, c) in acc.iter_mut().zip(&r.histogram(s).counts) {
                *a += c;
            }
        }
        n += r.n_pulses();
    }
    estimate_from_counts(&sums, n)
}

/// `counts[S.index()][f]` over `n_pulses` pulses per configuration.
pub fn estimate_from_counts<T: Real>(counts: &[Vec<u64>; 8], n_pulses: u64) -> Result<Vec<BinEstimates<T>>> {
    let n_bins = counts[0].len();
    (0..n_bins)
        .map(|f| {
            let mut out = [ProbabilityEstimate::exact(T::zero()); 8];
            for (i, row) in counts.iter().enumerate() {
                out[i] = ProbabilityEstimate::from_counts(row[f], n_pulses)?;
            }
            Ok(out)
        })
        .collect()
}

/// A linear combination of the eight estimates, with its coefficient vector kept for
/// error propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term<T> {
    pub value: T,
    pub variance: T,
    pub gradient: [T; 8],
}

impl<T: Real> Term<T> {
    fn linear(p: &BinEstimates<T>, coeffs: [i8; 8]) -> Self {
        let gradient = coeffs.map(|c| T::from_i8(c).unwrap());
        Self { value: dot(&gradient, &p.map(|e| e.value)), variance: propagate(&gradient, p), gradient }
    }

    pub fn sigma(&self) -> T {
        self.variance.sqrt()
    }
}

fn dot<T: Real>(a: &[T; 8], b: &[T; 8]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

fn propagate<T: Real>(gradient: &[T; 8], p: &BinEstimates<T>) -> T {
    gradient.iter().zip(p).fold(T::zero(), |acc, (g, e)| acc + *g * *g * e.variance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedInterference<T> {
    pub ab: Term<T>,
    pub ac: Term<T>,
    pub bc: Term<T>,
    pub abc: Term<T>,
}

/// I′_jk = P_jk − P_j − P_k + P₀ and I′_abc = P_abc − ΣP_jk + ΣP_j − P₀.
pub fn corrected_interference<T: Real>(p: &BinEstimates<T>) -> CorrectedInterference<T> {
    //                       0   a   b   c  ab  ac  bc abc
    CorrectedInterference {
        ab: Term::linear(p, [1, -1, -1, 0, 1, 0, 0, 0]),
        ac: Term::linear(p, [1, -1, 0, -1, 0, 1, 0, 0]),
        bc: Term::linear(p, [1, 0, -1, -1, 0, 0, 1, 0]),
        abc: Term::linear(p, [-1, 1, 1, 1, -1, -1, -1, 1]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinStatus {
    Defined,
    /// Defined, but some |I′_jk| is within 1σ of zero; the linearized error is unreliable.
    NearZero,
    Undefined,
}

impl BinStatus {
    pub fn is_defined(self) -> bool {
        self != BinStatus::Undefined
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SorkinEstimate<T> {
    pub numerator: T,
    pub sigma_numerator: T,
    pub denominator: T,
    pub sigma_denominator: T,
    pub kappa: T,
    pub sigma_kappa: T,
    pub status: BinStatus,
}

/// κ = I′_abc / (|I′_ab| + |I′_ac| + |I′_bc|) for one bin.
pub fn sorkin_per_bin<T: Real>(p: &BinEstimates<T>) -> SorkinEstimate<T> {
    let i = corrected_interference(p);
    let pairs = [i.ab, i.ac, i.bc];
    let denominator = pairs.iter().fold(T::zero(), |acc, t| acc + t.value.abs());
    let mut d_grad = [T::zero(); 8];
    for t in &pairs {
        let s = if t.value < T::zero() { -T::one() } else { T::one() };
        for (g, x) in d_grad.iter_mut().zip(&t.gradient) {
            *g += s * *x;
        }
    }
    let numerator = i.abc.value;
    let sigma_numerator = i.abc.sigma();
    let sigma_denominator = propagate(&d_grad, p).sqrt();
    // cancellation residue of equal inputs counts as zero
    let scale = p.iter().fold(T::zero(), |acc, e| acc + e.value.abs());
    if denominator <= scale * T::lit(1e-12) || !denominator.is_finite() {
        return SorkinEstimate {
            numerator,
            sigma_numerator,
            denominator,
            sigma_denominator,
            kappa: T::nan(),
            sigma_kappa: T::nan(),
            status: BinStatus::Undefined,
        };
    }
    let kappa = numerator / denominator;
    let mut k_grad = [T::zero(); 8];
    for (k, (gn, gd)) in k_grad.iter_mut().zip(i.abc.gradient.iter().zip(&d_grad)) {
        *k = (*gn - kappa * *gd) / denominator;
    }
    let near_zero = pairs.iter().any(|t| t.value.abs() < t.sigma());
    SorkinEstimate {
        numerator,
        sigma_numerator,
        denominator,
        sigma_denominator,
        kappa,
        sigma_kappa: propagate(&k_grad, p).sqrt(),
        status: if near_zero { BinStatus::NearZero } else { BinStatus::Defined },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate<T> {
    pub value: T,
    pub std_error: T,
    /// Entries that entered the mean.
    pub n_used: usize,
}

/// Inverse-variance weighted mean and its standard error. Entries with zero variance are
/// exact and, if present, are averaged on their own.
pub fn inverse_variance_mean<T: Real>(values: &[(T, T)]) -> Result<MeanEstimate<T>> {
    if values.is_empty() {
        return Err(Error::Domain("weighted mean of no entries".into()));
    }
    let exact: Vec<T> = values.iter().filter(|(_, v)| *v == T::zero()).map(|(x, _)| *x).collect();
    if !exact.is_empty() {
        let n = T::from_usize(exact.len()).unwrap();
        let value = exact.iter().copied().fold(T::zero(), |a, b| a + b) / n;
        return Ok(MeanEstimate { value, std_error: T::zero(), n_used: exact.len() });
    }
    let (mut sw, mut swx) = (T::zero(), T::zero());
    for (x, v) in values {
        let w = T::one() / *v;
        sw += w;
        swx += w * *x;
    }
    Ok(MeanEstimate { value: swx / sw, std_error: (T::one() / sw).sqrt(), n_used: values.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SorkinMean<T> {
    pub kappa: T,
    pub std_error: T,
    pub numerator: MeanEstimate<T>,
    pub denominator: MeanEstimate<T>,
}

/// κ̄ as the ratio of the separately weighted means of numerators and denominators.
/// Undefined entries are skipped.
pub fn weighted_mean_sorkin<T: Real>(entries: &[SorkinEstimate<T>]) -> Result<SorkinMean<T>> {
    let defined: Vec<&SorkinEstimate<T>> = entries.iter().filter(|e| e.status.is_defined()).collect();
    if defined.is_empty() {
        return Err(Error::Numeric("no defined Sorkin entries to average".into()));
    }
    let n = inverse_variance_mean(&defined.iter().map(|e| (e.numerator, e.sigma_numerator.powi(2))).collect::<Vec<_>>())?;
    let d = inverse_variance_mean(&defined.iter().map(|e| (e.denominator, e.sigma_denominator.powi(2))).collect::<Vec<_>>())?;
    let kappa = n.value / d.value;
    let std_error = ((n.std_error / d.value).powi(2) + (n.value * d.std_error / (d.value * d.value)).powi(2)).sqrt();
    Ok(SorkinMean { kappa, std_error, numerator: n, denominator: d })
}

/// Unweighted mean of per-entry κ with the standard error of the mean. Biased when
/// denominators fluctuate; kept for comparison.
pub fn mean_of_ratios<T: Real>(entries: &[SorkinEstimate<T>]) -> Result<MeanEstimate<T>> {
    let k: Vec<T> = entries.iter().filter(|e| e.status.is_defined()).map(|e| e.kappa).collect();
    if k.len() < 2 {
        return Err(Error::Numeric("mean of ratios needs at least two defined entries".into()));
    }
    let n = T::from_usize(k.len()).unwrap();
    let mean = k.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let var = k.iter().fold(T::zero(), |a, x| a + (*x - mean).powi(2)) / (n - T::one());
    Ok(MeanEstimate { value: mean, std_error: (var / n).sqrt(), n_used: k.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeresEstimate<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub f: T,
    pub sigma_f: T,
    pub status: BinStatus,
}

// (pair, first, second) configuration indices for α (bc), β (ac), γ (ab).
const PERES_TRIPLES: [(usize, usize, usize); 3] = [(6, 2, 3), (5, 1, 3), (4, 1, 2)];

/// Cosine of the relative phase of two paths from background-subtracted estimates, with
/// its gradient over the eight raw estimates.
fn peres_cosine<T: Real>(p: &BinEstimates<T>, (jk, j, k): (usize, usize, usize)) -> (T, [T; 8]) {
    let p0 = p[0].value;
    let (x, y, z) = (p[j].value - p0, p[k].value - p0, p[jk].value - p0);
    let two = T::lit(2.0);
    let root = (x * y).sqrt();
    let c = (z - x - y) / (two * root);
    let mut g = [T::zero(); 8];
    g[jk] = T::one() / (two * root);
    g[j] = -T::one() / (two * root) - c / (two * x);
    g[k] = -T::one() / (two * root) - c / (two * y);
    g[0] = -(g[jk] + g[j] + g[k]);
    (c, g)
}

/// α, β, γ and F = α² + β² + γ² − 2αβγ with P′_S = P_S − P̂₀, P̂₀ taken from entry ∅.
pub fn peres_per_bin<T: Real>(p: &BinEstimates<T>) -> PeresEstimate<T> {
    let p0 = p[0].value;
    if (1..4).any(|i| p[i].value - p0 <= T::zero()) {
        let nan = T::nan();
        return PeresEstimate { alpha: nan, beta: nan, gamma: nan, f: nan, sigma_f: nan, status: BinStatus::Undefined };
    }
    let [(alpha, ga), (beta, gb), (gamma, gg)] = PERES_TRIPLES.map(|t| peres_cosine(p, t));
    let two = T::lit(2.0);
    let f = alpha * alpha + beta * beta + gamma * gamma - two * alpha * beta * gamma;
    let (fa, fb, fg) = (two * (alpha - beta * gamma), two * (beta - alpha * gamma), two * (gamma - alpha * beta));
    let mut grad = [T::zero(); 8];
    for i in 0..8 {
        grad[i] = fa * ga[i] + fb * gb[i] + fg * gg[i];
    }
    PeresEstimate { alpha, beta, gamma, f, sigma_f: propagate(&grad, p).sqrt(), status: BinStatus::Defined }
}

/// Inverse-variance weighted F̄ over defined entries.
pub fn weighted_mean_peres<T: Real>(entries: &[PeresEstimate<T>]) -> Result<MeanEstimate<T>> {
    let v: Vec<(T, T)> = entries.iter().filter(|e| e.status.is_defined()).map(|e| (e.f, e.sigma_f.powi(2))).collect();
    if v.is_empty() {
        return Err(Error::Numeric("no defined Peres entries to average".into()));
    }
    inverse_variance_mean(&v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint<T> {
    /// Pulses or efficiency.
    pub abscissa: T,
    pub std_error: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit<T> {
    pub exponent: T,
    pub exponent_error: T,
    pub prefactor: T,
}

/// Least-squares line through (log x, log s).
pub fn power_law_fit<T: Real>(points: &[ScalingPoint<T>]) -> Result<PowerLawFit<T>> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("power-law fit needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.abscissa > T::zero() && p.std_error > T::zero())) {
        return Err(Error::Domain("power-law fit needs positive abscissas and errors".into()));
    }
    let n = T::from_usize(points.len()).unwrap();
    let xs: Vec<T> = points.iter().map(|p| p.abscissa.ln()).collect();
    let ys: Vec<T> = points.iter().map(|p| p.std_error.ln()).collect();
    let mx = xs.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let my = ys.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let sxx = xs.iter().fold(T::zero(), |a, x| a + (*x - mx).powi(2));
    if sxx <= T::epsilon() * (T::one() + mx * mx) * n {
        return Err(Error::Domain("power-law fit: abscissas are degenerate".into()));
    }
    let sxy = xs.iter().zip(&ys).fold(T::zero(), |a, (x, y)| a + (*x - mx) * (*y - my));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = xs.iter().zip(&ys).fold(T::zero(), |a, (x, y)| a + (*y - intercept - slope * *x).powi(2));
    let dof = n - T::lit(2.0);
    let exponent_error = if dof > T::zero() { (ssr / dof / sxx).sqrt() } else { T::zero() };
    Ok(PowerLawFit { exponent: slope, exponent_error, prefactor: intercept.exp() })
}

/// Wall-clock acquisition time in seconds.
pub fn acquisition_time<T: Real>(n_pulses: u64, rep_rate_hz: T) -> Result<T> {
    if !(rep_rate_hz > T::zero() && rep_rate_hz.is_finite()) {
        return Err(Error::Domain(format!("repetition rate must be positive, got {rep_rate_hz}")));
    }
    Ok(T::from_u64(n_pulses).unwrap() / rep_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{probability_table, AmplitudeMethod, EnergyGrid};
    use crate::pulse::LaserConfig;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Poisson};

    fn exact(v: [f64; 8]) -> BinEstimates<f64> {
        v.map(ProbabilityEstimate::exact)
    }

    // [∅, a, b, c, ab, ac, bc, abc]
    const TRIPLE: [f64; 8] = [0.0, 1.0, 1.0, 1.0, 4.0, 4.0, 4.0, 9.0];

    #[test]
    fn poisson_estimates() {
        let e = ProbabilityEstimate::<f64>::from_counts(2000, 100_000).unwrap();
        assert_relative_eq!(e.value, 0.02);
        assert!((e.sigma() - 4.47e-4).abs() < 1e-6);
        let z = ProbabilityEstimate::<f64>::from_counts(0, 1000).unwrap();
        assert_eq!(z.value, 0.0);
        assert_relative_eq!(z.variance, 1e-6);
        let x4 = ProbabilityEstimate::<f64>::from_counts(8000, 100_000).unwrap();
        assert_relative_eq!(x4.sigma() / e.sigma(), 2.0, max_relative = 1e-12);
        assert!(ProbabilityEstimate::<f64>::from_counts(1, 0).is_err());
    }

    #[test]
    fn interference_of_three_equal_paths() {
        let i = corrected_interference(&exact(TRIPLE));
        assert_eq!([i.ab.value, i.ac.value, i.bc.value, i.abc.value], [2.0, 2.0, 2.0, 0.0]);
        let z = corrected_interference(&exact([0.0; 8]));
        assert_eq!([z.ab.value, z.abc.value], [0.0, 0.0]);
        let shifted = corrected_interference(&exact(TRIPLE.map(|p| p + 0.1)));
        for (a, b) in [(shifted.ab, i.ab), (shifted.bc, i.bc), (shifted.abc, i.abc)] {
            assert!((a.value - b.value).abs() < 1e-14);
        }
    }

    #[test]
    fn sorkin_examples() {
        let s = sorkin_per_bin(&exact(TRIPLE));
        assert_eq!(s.kappa, 0.0);
        assert_eq!(s.denominator, 6.0);
        let mut p = TRIPLE;
        p[7] = 10.0;
        assert_relative_eq!(sorkin_per_bin(&exact(p)).kappa, 1.0 / 6.0);
        assert_eq!(sorkin_per_bin(&exact([0.0; 8])).status, BinStatus::Undefined);
    }

    #[test]
    fn rounding_residue_denominator_is_undefined() {
        // every pair cancels in integers, not necessarily in floating point
        for n in [3u64, 7, 30_000, 99_991] {
            let counts = [1u64, 2, 5, 7, 6, 8, 11, 13];
            let p: BinEstimates<f64> = counts.map(|c| ProbabilityEstimate::from_counts(c, n).unwrap());
            assert_eq!(sorkin_per_bin(&p).status, BinStatus::Undefined, "n = {n}");
        }
    }

    #[test]
    fn sorkin_error_matches_finite_difference_propagation() {
        let counts = [3u64, 40, 55, 38, 170, 90, 160, 330];
        let n = 10_000;
        let p: BinEstimates<f64> = counts.map(|c| ProbabilityEstimate::from_counts(c, n).unwrap());
        let s = sorkin_per_bin(&p);
        let kappa = |v: [f64; 8]| {
            let d = (v[4] - v[1] - v[2] + v[0]).abs() + (v[5] - v[1] - v[3] + v[0]).abs() + (v[6] - v[2] - v[3] + v[0]).abs();
            (v[7] - v[4] - v[5] - v[6] + v[1] + v[2] + v[3] - v[0]) / d
        };
        let base = p.map(|e| e.value);
        let mut var = 0.0;
        for i in 0..8 {
            let h = 1e-7;
            let mut hi = base;
            hi[i] += h;
            let mut lo = base;
            lo[i] -= h;
            let g = (kappa(hi) - kappa(lo)) / (2.0 * h);
            var += g * g * p[i].variance;
        }
        assert_relative_eq!(s.kappa, kappa(base), max_relative = 1e-12);
        assert_relative_eq!(s.sigma_kappa, var.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn near_zero_pairs_are_flagged() {
        let counts = [0u64, 10, 10, 10, 21, 40, 40, 90];
        let p: BinEstimates<f64> = counts.map(|c| ProbabilityEstimate::from_counts(c, 1000).unwrap());
        let s = sorkin_per_bin(&p);
        assert_eq!(s.status, BinStatus::NearZero);
        assert!(weighted_mean_sorkin(&[s]).is_ok());
    }

    #[test]
    fn weighted_means() {
        let e = sorkin_per_bin(&[0u64, 40, 55, 38, 170, 90, 160, 330].map(|c| ProbabilityEstimate::from_counts(c, 10_000).unwrap()));
        let m = weighted_mean_sorkin(&[e; 5]).unwrap();
        assert_relative_eq!(m.kappa, e.kappa, max_relative = 1e-12);
        assert_relative_eq!(m.numerator.std_error, e.sigma_numerator / 5f64.sqrt(), max_relative = 1e-12);
        let undefined = sorkin_per_bin(&exact([0.0; 8]));
        assert!(weighted_mean_sorkin(&[undefined]).is_err());
        let m2 = weighted_mean_sorkin(&[e, undefined]).unwrap();
        assert_eq!(m2.numerator.n_used, 1);

        let iv = inverse_variance_mean(&[(1.0, 1.0), (3.0, 1.0 / 3.0)]).unwrap();
        assert_relative_eq!(iv.value, 2.5);
        assert_relative_eq!(iv.std_error, 0.5);
    }

    #[test]
    fn peres_examples() {
        let f = peres_per_bin(&exact(TRIPLE));
        assert_eq!((f.alpha, f.beta, f.gamma, f.f), (1.0, 1.0, 1.0, 1.0));

        // unit magnitudes with phases (0, π/2, π): P_jk = 2 + 2 cos(φ_j − φ_k)
        let p = exact([0.0, 1.0, 1.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        let f = peres_per_bin(&p);
        assert!(f.alpha.abs() < 1e-15 && f.gamma.abs() < 1e-15);
        assert_relative_eq!(f.beta, -1.0);
        assert_relative_eq!(f.f, 1.0);

        let mut dark = TRIPLE;
        dark[2] = 0.0;
        assert_eq!(peres_per_bin(&exact(dark)).status, BinStatus::Undefined);
        assert!(weighted_mean_peres(&[peres_per_bin(&exact(dark))]).is_err());
    }

    #[test]
    fn peres_error_matches_finite_differences() {
        let counts = [3u64, 40, 55, 38, 170, 90, 160, 330];
        let n = 10_000;
        let p: BinEstimates<f64> = counts.map(|c| ProbabilityEstimate::from_counts(c, n).unwrap());
        let est = peres_per_bin(&p);
        assert_relative_eq!(
            est.f,
            est.alpha.powi(2) + est.beta.powi(2) + est.gamma.powi(2) - 2.0 * est.alpha * est.beta * est.gamma
        );
        let f_of = |v: [f64; 8]| peres_per_bin(&exact(v)).f;
        let base = p.map(|e| e.value);
        let mut var = 0.0;
        for i in 0..8 {
            let h = 1e-8;
            let mut hi = base;
            hi[i] += h;
            let mut lo = base;
            lo[i] -= h;
            var += ((f_of(hi) - f_of(lo)) / (2.0 * h)).powi(2) * p[i].variance;
        }
        assert_relative_eq!(est.sigma_f, var.sqrt(), max_relative = 1e-5);
    }

    #[test]
    fn peres_single_and_identical_entries() {
        let e = peres_per_bin(&[3u64, 40, 55, 38, 170, 90, 160, 330].map(|c| ProbabilityEstimate::<f64>::from_counts(c, 10_000).unwrap()));
        assert_relative_eq!(weighted_mean_peres(&[e]).unwrap().value, e.f);
        assert_relative_eq!(weighted_mean_peres(&[e; 4]).unwrap().value, e.f, max_relative = 1e-14);
    }

    #[test]
    fn power_law_examples() {
        let pts: Vec<ScalingPoint<f64>> =
            [1e5, 1e6, 1e7, 3e7].iter().map(|&t| ScalingPoint { abscissa: t, std_error: 2.0 * f64::powf(t, -0.5) }).collect();
        let fit = power_law_fit(&pts).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);
        assert!(fit.exponent_error < 1e-12);
        assert_relative_eq!(fit.prefactor, 2.0, max_relative = 1e-10);
        assert!(power_law_fit(&pts[..2]).is_err());
        let flat = vec![ScalingPoint { abscissa: 5.0, std_error: 1.0 }; 3];
        assert!(power_law_fit(&flat).is_err());
        let mut bad = pts.clone();
        bad[0].std_error = 0.0;
        assert!(power_law_fit(&bad).is_err());
    }

    #[test]
    fn acquisition_times() {
        assert!((acquisition_time::<f64>(100_000, 3000.0).unwrap() - 33.33).abs() < 0.01);
        let hours: f64 = acquisition_time(100 * 8 * 100_000, 3000.0).unwrap() / 3600.0;
        assert!((hours - 7.4).abs() < 0.05);
        assert_eq!(acquisition_time(0, 3000.0).unwrap(), 0.0);
        assert!(acquisition_time(10, 0.0).is_err());
    }

    fn poisson_bins(lambda: [f64; 8], entries: usize, n: u64, seed: u64) -> Vec<SorkinEstimate<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = lambda.map(|l| Poisson::new(l).unwrap());
        (0..entries)
            .map(|_| {
                let c = d.map(|p| p.sample(&mut rng) as u64);
                sorkin_per_bin(&c.map(|c| ProbabilityEstimate::from_counts(c, n).unwrap()))
            })
            .collect()
    }

    #[test]
    fn error_shrinks_with_more_data() {
        let lambda = [2.0, 20.0, 20.0, 20.0, 80.0, 80.0, 80.0, 180.0];
        let one = weighted_mean_sorkin(&poisson_bins(lambda, 400, 10_000, 1)).unwrap();
        let four = weighted_mean_sorkin(&poisson_bins(lambda, 1600, 10_000, 2)).unwrap();
        let ratio = one.std_error / four.std_error;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    fn arb_laser() -> impl Strategy<Value = LaserConfig<f64>> {
        (
            proptest::array::uniform3(0.2f64..2.0),
            proptest::array::uniform3(-300.0f64..300.0),
            -200.0f64..200.0,
            0.3f64..2.0,
        )
            .prop_map(|(amps, delays, common, xuv)| {
                let mut l = LaserConfig::reference();
                l.xuv.amplitude = xuv;
                l.common_delay = common;
                for j in 0..3 {
                    l.ir[j].amplitude = amps[j];
                    l.ir[j].delay = delays[j];
                }
                l
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_tables_have_no_third_order_term(l in arb_laser()) {
            let g = EnergyGrid::reference(&l);
            let t = probability_table(&l, &g, None, AmplitudeMethod::ClosedForm).unwrap();
            for f in 0..g.n_bins {
                let p = exact_bin(&t, f);
                let s = sorkin_per_bin(&p);
                prop_assert!(s.status.is_defined());
                prop_assert!(s.kappa.abs() < 1e-10, "κ = {}", s.kappa);
                let pe = peres_per_bin(&p);
                prop_assert!((pe.f - 1.0).abs() < 1e-10, "F = {}", pe.f);
            }
        }

        #[test]
        fn uniform_background_cancels(v in proptest::array::uniform8(0.01f64..1.0), b in 0.0f64..0.5) {
            // build a physical bin from three random complex amplitudes
            let amps = [(v[0], v[1]), (v[2], v[3]), (v[4], v[5])]
                .map(|(r, ph)| num_complex::Complex::from_polar(r, ph * 6.0));
            let mut p = [0.0; 8];
            for (i, s) in PathConfiguration::ALL.iter().enumerate() {
                p[i] = s.labels().map(|l| amps[l.index()]).sum::<num_complex::Complex<f64>>().norm_sqr();
            }
            let base = sorkin_per_bin(&exact(p));
            let shifted = sorkin_per_bin(&exact(p.map(|x| x + b)));
            prop_assert!((base.kappa - shifted.kappa).abs() < 1e-12);
            prop_assert!((base.denominator - shifted.denominator).abs() < 1e-12);
            let f0 = peres_per_bin(&exact(p)).f;
            let f1 = peres_per_bin(&exact(p.map(|x| x + b))).f;
            prop_assert!((f0 - f1).abs() < 1e-9);
        }
    }

    #[test]
    fn single_precision_estimators() {
        let p: BinEstimates<f32> = TRIPLE.map(|v| ProbabilityEstimate::exact(v as f32));
        assert_eq!(sorkin_per_bin(&p).kappa, 0.0);
        assert_eq!(peres_per_bin(&p).f, 1.0);
    }
}
