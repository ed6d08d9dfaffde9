//! Simulation of a three-path Sorkin test in laser-assisted photoionization of helium.
//!
//! An XUV pump and three narrowband IR components a, b, c feed one photoelectron final
//! energy through three two-photon paths. The crate computes the transition amplitudes,
//! samples noisy detector click histograms for all eight path configurations, and estimates
//! the Sorkin parameter κ and the Peres parameter F with Poisson error propagation.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`, which is what the Monte Carlo engine and the CLI use.

pub mod amplitude;
pub mod analysis;
pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod monte_carlo;
pub mod noise;
pub mod output;
pub mod paths;
pub mod pulse;
pub mod quadrature;
pub mod statistics;
pub mod real;
pub mod units;

pub use error::{Error, Result};
pub use paths::{PathConfiguration, PathLabel};
pub use real::Real;

pub type PulseSpec = pulse::PulseSpec<f64>;
pub type LaserConfig = pulse::LaserConfig<f64>;
pub type EnergyGrid = amplitude::EnergyGrid<f64>;
pub type AmplitudeSet = amplitude::AmplitudeSet<f64>;
pub type ProbabilityTable = amplitude::ProbabilityTable<f64>;
pub type ChannelWeights = amplitude::ChannelWeights<f64>;
pub type NoiseSpec = noise::NoiseSpec<f64>;
pub type ProbabilityEstimate = statistics::ProbabilityEstimate<f64>;
pub type SorkinEstimate = statistics::SorkinEstimate<f64>;
pub type PeresEstimate = statistics::PeresEstimate<f64>;
pub type ScalingPoint = statistics::ScalingPoint<f64>;
