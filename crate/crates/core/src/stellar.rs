//! Expected photon count rates from reference stars.
//!
//! A zero-magnitude star delivers about 10³ photons cm⁻² s⁻¹ Å⁻¹ in the V
//! band; the rate at the detector is that flux scaled by `10^(−0.4·m)` and by
//! every element of the receiver chain.

use serde::{Deserialize, Serialize};

use crate::constants::fwhm_to_sigma;
use crate::error::{require_positive, require_unit_interval, Error, Result};
use crate::report::{Factor, FactorLog};

/// V-band photon flux of a zero-magnitude star (cm⁻² s⁻¹ Å⁻¹).
pub fn zero_mag_flux() -> f64 {
    1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarSpec {
    pub v_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverChain {
    /// Effective collecting area (cm²).
    pub aperture_area_cm2: f64,
    pub mirror_reflectivities: Vec<f64>,
    /// Filter bandwidth (Å).
    pub bandwidth_angstrom: f64,
    /// Detector quantum efficiency times fibre coupling.
    pub qe_fiber: f64,
    pub extra_optics: f64,
    pub atmospheric_transmission: f64,
    pub pinhole_coupling: f64,
    /// Unresolved sky background (s⁻¹), added after the chain.
    pub sky_background_rate: f64,
}

impl ReceiverChain {
    pub fn validate(&self) -> Result<()> {
        require_positive("aperture_area_cm2", self.aperture_area_cm2)?;
        require_positive("bandwidth_angstrom", self.bandwidth_angstrom)?;
        mirror_chain_reflectivity(&self.mirror_reflectivities)?;
        require_unit_interval("qe_fiber", self.qe_fiber)?;
        require_unit_interval("extra_optics", self.extra_optics)?;
        require_unit_interval("atmospheric_transmission", self.atmospheric_transmission)?;
        require_unit_interval("pinhole_coupling", self.pinhole_coupling)?;
        if !(self.sky_background_rate >= 0.0 && self.sky_background_rate.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sky_background_rate",
                reason: format!("must be finite and ≥ 0, got {}", self.sky_background_rate),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarRate {
    /// Star photons detected per second; equals the product of `factor_log`.
    pub star_rate: f64,
    pub sky_background_rate: f64,
    pub total_rate: f64,
    pub factor_log: FactorLog,
}

/// Product of the mirror reflectivities.
pub fn mirror_chain_reflectivity(reflectivities: &[f64]) -> Result<f64> {
    if reflectivities.is_empty() {
        return Err(Error::EmptyChain);
    }
    for &r in reflectivities {
        require_unit_interval("mirror_reflectivity", r)?;
    }
    Ok(reflectivities.iter().product())
}

/// Detected count rate from `star` through `chain`.
pub fn expected_count_rate(star: &StarSpec, chain: &ReceiverChain) -> Result<StarRate> {
    if !star.v_magnitude.is_finite() {
        return Err(Error::InvalidParameter {
            name: "v_magnitude",
            reason: "must be finite".into(),
        });
    }
    chain.validate()?;
    let mut log = FactorLog::default();
    log.push(Factor::new("zero_mag_flux", zero_mag_flux()));
    log.push(Factor::new("magnitude_scale", 10f64.powf(-0.4 * star.v_magnitude)));
    log.push(Factor::new("aperture_area_cm2", chain.aperture_area_cm2));
    log.push(Factor::new("bandwidth_angstrom", chain.bandwidth_angstrom));
    log.push(
        Factor::new("mirror_chain", mirror_chain_reflectivity(&chain.mirror_reflectivities)?)
            .with_note(format!("{} surfaces", chain.mirror_reflectivities.len())),
    );
    log.push(Factor::new("qe_fiber", chain.qe_fiber));
    log.push(Factor::new("extra_optics", chain.extra_optics));
    log.push(Factor::new("atmospheric_transmission", chain.atmospheric_transmission));
    log.push(Factor::new("pinhole_coupling", chain.pinhole_coupling));
    let star_rate = log.product();
    Ok(StarRate {
        star_rate,
        sky_background_rate: chain.sky_background_rate,
        total_rate: star_rate + chain.sky_background_rate,
        factor_log: log,
    })
}

/// Energy of a circular Gaussian seeing disc of width `seeing_fwhm` falling
/// inside a pinhole of angular diameter `pinhole_diameter`.
pub fn pinhole_coupling_fraction(seeing_fwhm: f64, pinhole_diameter: f64) -> Result<f64> {
    require_positive("seeing_fwhm", seeing_fwhm)?;
    if !(pinhole_diameter >= 0.0 && pinhole_diameter.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "pinhole_diameter",
            reason: format!("must be finite and ≥ 0, got {pinhole_diameter}"),
        });
    }
    let sigma = fwhm_to_sigma(seeing_fwhm);
    let radius = 0.5 * pinhole_diameter;
    Ok(-(-(radius * radius) / (2.0 * sigma * sigma)).exp_m1())
}
