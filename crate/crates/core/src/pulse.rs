//! Gaussian spectral fields of the XUV pump and the three IR probe components.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::PathLabel;
use crate::real::Real;
use crate::units::{self, FwhmConvention};

pub const REFERENCE_XUV_ENERGY_EV: f64 = 40.0;
pub const REFERENCE_XUV_FWHM_EV: f64 = 0.150;
pub const REFERENCE_IR_WAVELENGTHS_NM: [f64; 3] = [820.0, 800.0, 780.0];
pub const REFERENCE_IR_FWHM_NM: f64 = 5.0;

/// One spectral component: `amplitude · exp(−(ω−center)²/2σ²) · exp(iωτ/ħ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec<T> {
    /// Peak field strength, arbitrary units.
    pub amplitude: T,
    /// Central photon energy, eV.
    pub center: T,
    /// Field-amplitude standard deviation, eV.
    pub sigma: T,
    /// Delay, as.
    pub delay: T,
}

impl<T: Real> PulseSpec<T> {
    pub fn new(amplitude: T, center: T, sigma: T, delay: T) -> Result<Self> {
        let p = Self { amplitude, center, sigma, delay };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.amplitude >= T::zero()
            && self.amplitude.is_finite()
            && self.sigma > T::zero()
            && self.sigma.is_finite()
            && self.center > T::zero()
            && self.center.is_finite()
            && self.delay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid pulse {self:?}")))
        }
    }

    /// Gaussian envelope without the delay phase.
    #[inline]
    pub fn envelope(&self, omega: T) -> T {
        let x = (omega - self.center) / self.sigma;
        self.amplitude * (-(x * x) / T::lit(2.0)).exp()
    }

    /// Complex spectral field at photon energy `omega` (eV).
    #[inline]
    pub fn spectral_field(&self, omega: T) -> Complex<T> {
        let phase = omega * self.delay / units::hbar::<T>();
        Complex::from_polar(self.envelope(omega), phase)
    }
}

/// τ_j = τ + τ′_j.
#[inline]
pub fn effective_ir_delay<T: Real>(common_delay: T, component_offset: T) -> T {
    common_delay + component_offset
}

/// XUV pump plus IR components a, b, c. Each IR `delay` holds the component offset τ′_j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserConfig<T> {
    pub xuv: PulseSpec<T>,
    pub ir: [PulseSpec<T>; 3],
    /// Common XUV–IR delay τ, as.
    pub common_delay: T,
}

impl<T: Real> LaserConfig<T> {
    pub fn new(xuv: PulseSpec<T>, ir: [PulseSpec<T>; 3], common_delay: T) -> Result<Self> {
        let cfg = Self { xuv, ir, common_delay };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.xuv.validate()?;
        for p in &self.ir {
            p.validate()?;
        }
        if !self.common_delay.is_finite() {
            return Err(Error::Domain("common delay must be finite".into()));
        }
        if !(self.ir[0].center < self.ir[1].center && self.ir[1].center < self.ir[2].center) {
            return Err(Error::Domain(
                "IR components must be ordered a, b, c by decreasing wavelength".into(),
            ));
        }
        Ok(())
    }

    /// Builds a configuration from lab-style parameters (photon energy, FWHMs, wavelengths).
    #[allow(clippy::too_many_arguments)]
    pub fn from_lab_units(
        xuv_energy_ev: T,
        xuv_fwhm_ev: T,
        xuv_amplitude: T,
        ir_wavelengths_nm: [T; 3],
        ir_fwhm_nm: [T; 3],
        ir_amplitudes: [T; 3],
        ir_delays_as: [T; 3],
        common_delay_as: T,
        convention: FwhmConvention,
    ) -> Result<Self> {
        let xuv = PulseSpec::new(
            xuv_amplitude,
            xuv_energy_ev,
            units::field_sigma_from_fwhm(xuv_fwhm_ev, convention)?,
            T::zero(),
        )?;
        let mut ir = [xuv; 3];
        for j in 0..3 {
            let center = units::photon_energy_from_wavelength(ir_wavelengths_nm[j])?;
            let width = units::spectral_width_wavelength_to_energy(ir_fwhm_nm[j], ir_wavelengths_nm[j])?;
            ir[j] = PulseSpec::new(
                ir_amplitudes[j],
                center,
                units::field_sigma_from_fwhm(width, convention)?,
                ir_delays_as[j],
            )?;
        }
        Self::new(xuv, ir, common_delay_as)
    }

    /// 40 eV / 150 meV XUV, 820/800/780 nm IR with 5 nm FWHM, unit amplitudes, zero delays.
    pub fn reference() -> Self {
        Self::reference_with(FwhmConvention::Intensity)
    }

    pub fn reference_with(convention: FwhmConvention) -> Self {
        let l = REFERENCE_IR_WAVELENGTHS_NM.map(T::lit);
        Self::from_lab_units(
            T::lit(REFERENCE_XUV_ENERGY_EV),
            T::lit(REFERENCE_XUV_FWHM_EV),
            T::one(),
            l,
            [T::lit(REFERENCE_IR_FWHM_NM); 3],
            [T::one(); 3],
            [T::zero(); 3],
            T::zero(),
            convention,
        )
        .expect("reference parameters are valid")
    }

    pub fn ir_pulse(&self, label: PathLabel) -> &PulseSpec<T> {
        &self.ir[label.index()]
    }

    /// τ_j for component `label`.
    pub fn effective_delay(&self, label: PathLabel) -> T {
        effective_ir_delay(self.common_delay, self.ir[label.index()].delay)
    }

    /// Pairs of IR components whose separation exceeds the XUV intensity FWHM.
    pub fn overlap_warnings(&self, convention: FwhmConvention) -> Vec<String> {
        let sigma_to_fwhm = T::one() / units::fwhm_to_sigma::<T>();
        let xuv_fwhm = match convention {
            FwhmConvention::Intensity => self.xuv.sigma / T::SQRT_2() * sigma_to_fwhm,
            FwhmConvention::Field => self.xuv.sigma * sigma_to_fwhm,
        };
        let mut out = Vec::new();
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            let sep = (self.ir[j].center - self.ir[k].center).abs();
            if sep > xuv_fwhm {
                out.push(format!(
                    "IR components {} and {} are {sep} eV apart, wider than the XUV FWHM {xuv_fwhm} eV",
                    PathLabel::ALL[j].name(),
                    PathLabel::ALL[k].name()
                ));
            }
        }
        out
    }
}
