//! Physical constants and conversions.
//!
//! Internal units: energies (and angular frequencies, stored as ħω) in eV,
//! times in attoseconds, wavelengths in nm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Photon energy–wavelength product, eV·nm.
pub const HC_EV_NM: f64 = 1239.841_984;
/// Reduced Planck constant, eV·as (6.582119569e-16 eV·s).
pub const HBAR_EV_AS: f64 = 658.211_956_9;
/// Reduced Planck constant, eV·fs.
pub const HBAR_EV_FS: f64 = 0.658_211_956_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants<T> {
    pub hc_ev_nm: T,
    pub hbar_ev_as: T,
    pub fwhm_to_sigma: T,
}

impl<T: Real> Constants<T> {
    pub fn get() -> Self {
        Self {
            hc_ev_nm: T::lit(HC_EV_NM),
            hbar_ev_as: T::lit(HBAR_EV_AS),
            fwhm_to_sigma: fwhm_to_sigma(),
        }
    }
}

/// 1 / (2 √(2 ln 2)).
pub fn fwhm_to_sigma<T: Real>() -> T {
    let two = T::lit(2.0);
    T::one() / (two * (two * T::LN_2()).sqrt())
}

#[inline]
pub fn hbar<T: Real>() -> T {
    T::lit(HBAR_EV_AS)
}

/// Which spectral profile a quoted FWHM refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FwhmConvention {
    /// FWHM of |E(ω)|²; the field Gaussian is √2 wider in σ.
    #[default]
    Intensity,
    /// FWHM of |E(ω)| itself.
    Field,
}

pub const DEFAULT_FWHM_CONVENTION: FwhmConvention = FwhmConvention::Intensity;

fn require_positive<T: Real>(x: T, what: &str) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be positive and finite, got {x}")))
    }
}

pub fn photon_energy_from_wavelength<T: Real>(lambda_nm: T) -> Result<T> {
    require_positive(lambda_nm, "wavelength")?;
    Ok(T::lit(HC_EV_NM) / lambda_nm)
}

pub fn sigma_from_fwhm<T: Real>(fwhm: T) -> Result<T> {
    require_positive(fwhm, "FWHM")?;
    Ok(fwhm * fwhm_to_sigma::<T>())
}

/// First-order conversion of a wavelength width around `lambda0` to an energy width.
pub fn spectral_width_wavelength_to_energy<T: Real>(delta_lambda_nm: T, lambda0_nm: T) -> Result<T> {
    require_positive(lambda0_nm, "central wavelength")?;
    require_positive(delta_lambda_nm, "wavelength width")?;
    if delta_lambda_nm >= lambda0_nm {
        return Err(Error::Domain(format!(
            "wavelength width {delta_lambda_nm} nm is not small against {lambda0_nm} nm"
        )));
    }
    Ok(T::lit(HC_EV_NM) * delta_lambda_nm / (lambda0_nm * lambda0_nm))
}

/// Standard deviation of the field-amplitude Gaussian for a quoted FWHM.
pub fn field_sigma_from_fwhm<T: Real>(fwhm: T, convention: FwhmConvention) -> Result<T> {
    let sigma = sigma_from_fwhm(fwhm)?;
    Ok(match convention {
        FwhmConvention::Intensity => sigma * T::SQRT_2(),
        FwhmConvention::Field => sigma,
    })
}
