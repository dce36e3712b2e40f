//! Laser-ranging link budget.
//!
//! Two formulations are provided. [`radar_equation`] evaluates the
//! retroreflector radar equation
//!
//! ```text
//! N_pe = η_q · (E_T·λ/hc) · η_T · G_T · σ_sat · (1/4πR²)² · A_T · η_R · T_A² · T_c²
//! ```
//!
//! term by term. [`step_chain_efficiency`] multiplies the geometric intercept
//! fractions of the uplink spot and of the retroreflected spot, which is how
//! link losses are usually reasoned about at the telescope.
//!
//! With the default geometric cross-section the two agree up to a constant
//! factor 1/2 (on-axis Gaussian gain `8/θ²` against a uniform disc of the
//! same full width), so both scale as `θ⁻²·R⁻⁴`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{PLANCK, SPEED_OF_LIGHT};
use crate::error::{require_positive, require_unit_interval, Error, Result};
use crate::report::{Factor, FactorLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmitterSpec {
    /// Pulse energy E_T (J).
    pub pulse_energy: f64,
    /// Wavelength λ (m).
    pub wavelength: f64,
    /// Full beam divergence θ (rad).
    pub divergence: f64,
    /// Repetition rate (Hz).
    pub rep_rate: f64,
}

/// Divergence range the station optics can be tuned over (arcsec).
pub const STATION_DIVERGENCE_RANGE_ARCSEC: (f64, f64) = (1.0, 20.0);

impl TransmitterSpec {
    pub fn validate(&self) -> Result<()> {
        require_positive("pulse_energy", self.pulse_energy)?;
        require_positive("wavelength", self.wavelength)?;
        require_positive("divergence", self.divergence)?;
        require_positive("rep_rate", self.rep_rate)
    }

    pub fn divergence_in_station_range(&self) -> bool {
        let arcsec = self.divergence / crate::constants::ARCSEC;
        let (lo, hi) = STATION_DIVERGENCE_RANGE_ARCSEC;
        (lo..=hi).contains(&arcsec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Diameter of the reflecting body seen by the uplink (m).
    pub effective_diameter: f64,
    pub retro_count: u32,
    /// Diameter of a single cube corner (m).
    pub retro_diameter: f64,
    /// Fraction of the intercepted light actually returned, in (0, 1].
    pub active_retro_fraction: f64,
    /// Full divergence of the returned beam (rad).
    pub return_divergence: f64,
    /// Measured optical cross-section (m²); overrides the geometric model.
    pub cross_section: Option<f64>,
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        require_positive("effective_diameter", self.effective_diameter)?;
        require_positive("retro_diameter", self.retro_diameter)?;
        require_unit_interval("active_retro_fraction", self.active_retro_fraction)?;
        require_positive("return_divergence", self.return_divergence)?;
        if let Some(cs) = self.cross_section {
            require_positive("cross_section", cs)?;
        }
        Ok(())
    }

    /// Total clear aperture of all cube corners (m²).
    pub fn total_retro_area(&self) -> f64 {
        self.retro_count as f64 * PI * (0.5 * self.retro_diameter).powi(2)
    }

    /// Geometric cross-section: reflecting area × active fraction × 4π/Ω,
    /// with Ω the solid angle of the return cone.
    pub fn geometric_cross_section(&self) -> f64 {
        let area = PI * (0.5 * self.effective_diameter).powi(2);
        let solid_angle = PI * (0.5 * self.return_divergence).powi(2);
        area * self.active_retro_fraction * 4.0 * PI / solid_angle
    }

    pub fn cross_section(&self) -> f64 {
        self.cross_section
            .unwrap_or_else(|| self.geometric_cross_section())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalChain {
    /// Detector quantum efficiency.
    pub eta_q: f64,
    /// Transmit path efficiency.
    pub eta_t: f64,
    /// Receive path efficiency.
    pub eta_r: f64,
    /// One-way atmospheric transmission.
    pub t_a: f64,
    /// One-way cloud transmission.
    pub t_c: f64,
}

impl OpticalChain {
    pub const UNITY: Self = Self {
        eta_q: 1.0,
        eta_t: 1.0,
        eta_r: 1.0,
        t_a: 1.0,
        t_c: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        require_unit_interval("eta_q", self.eta_q)?;
        require_unit_interval("eta_t", self.eta_t)?;
        require_unit_interval("eta_r", self.eta_r)?;
        require_unit_interval("t_a", self.t_a)?;
        require_unit_interval("t_c", self.t_c)
    }
}

/// Everything the link equation needs apart from the range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkScenario {
    pub tx: TransmitterSpec,
    pub target: TargetSpec,
    pub chain: OpticalChain,
    /// Receiving telescope diameter (m).
    pub rx_aperture_diameter: f64,
    /// Extra loss on the returned spot, in (0, 1]; 1 means none.
    pub spreading_factor: f64,
}

impl LinkScenario {
    pub fn validate(&self) -> Result<()> {
        self.tx.validate()?;
        self.target.validate()?;
        self.chain.validate()?;
        require_positive("rx_aperture_diameter", self.rx_aperture_diameter)?;
        require_unit_interval("spreading_factor", self.spreading_factor)
    }

    pub fn aperture_area(&self) -> f64 {
        PI * (0.5 * self.rx_aperture_diameter).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetResult {
    pub range: f64,
    pub photons_per_pulse: f64,
    /// Uplink spot diameter at the target (m).
    pub spot_diameter: f64,
    /// Returned spot diameter at the station (m).
    pub return_spot_diameter: f64,
    pub uplink_fraction: f64,
    pub retro_fraction: f64,
    pub downlink_fraction: f64,
    /// Step-chain end-to-end efficiency, including the spreading factor.
    pub step_chain_efficiency: f64,
    /// Product of `factor_log`.
    pub end_to_end: f64,
    /// η_q · η_R.
    pub receiver_efficiency: f64,
    pub photoelectrons: f64,
    pub factor_log: FactorLog,
    pub step_chain_log: FactorLog,
}

/// Photons in one pulse, `E_T·λ/(h·c)`.
pub fn photons_per_pulse(tx: &TransmitterSpec) -> f64 {
    tx.pulse_energy * tx.wavelength / (PLANCK * SPEED_OF_LIGHT)
}

/// Small-angle spot diameter `θ·R`.
pub fn footprint_diameter(divergence: f64, range: f64) -> f64 {
    divergence * range
}

/// Fraction of a uniform spot intercepted by a disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intercept {
    pub fraction: f64,
    /// The target was larger than the spot and the fraction was clamped to 1.
    pub clamped: bool,
}

/// `(target / spot)²`, clamped to 1 when the spot is smaller than the target.
pub fn geometric_intercept(target_diameter: f64, spot_diameter: f64) -> Intercept {
    if spot_diameter <= target_diameter {
        Intercept {
            fraction: 1.0,
            clamped: spot_diameter < target_diameter,
        }
    } else {
        Intercept {
            fraction: (target_diameter / spot_diameter).powi(2),
            clamped: false,
        }
    }
}

/// On-axis far-field gain of a Gaussian beam, `8/θ²`.
pub fn transmitter_gain(divergence: f64) -> f64 {
    8.0 / (divergence * divergence)
}

/// The multiplicative step chain: uplink intercept × active retro fraction ×
/// downlink intercept × spreading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepChain {
    pub uplink: Intercept,
    pub retro_fraction: f64,
    pub downlink: Intercept,
    pub spreading_factor: f64,
}

impl StepChain {
    /// Chain from already known intercept fractions.
    pub fn from_fractions(uplink: f64, retro_fraction: f64, downlink: f64, spreading_factor: f64) -> Self {
        Self {
            uplink: Intercept {
                fraction: uplink,
                clamped: false,
            },
            retro_fraction,
            downlink: Intercept {
                fraction: downlink,
                clamped: false,
            },
            spreading_factor,
        }
    }

    pub fn efficiency(&self) -> f64 {
        self.uplink.fraction * self.retro_fraction * self.downlink.fraction * self.spreading_factor
    }

    pub fn factor_log(&self) -> FactorLog {
        let intercept = |name: &str, i: &Intercept| {
            let f = Factor::new(name, i.fraction);
            if i.clamped {
                f.with_note("clamped: spot smaller than aperture")
            } else {
                f
            }
        };
        FactorLog(vec![
            intercept("uplink_intercept", &self.uplink),
            Factor::new("active_retro_fraction", self.retro_fraction),
            intercept("downlink_intercept", &self.downlink),
            Factor::new("spreading_factor", self.spreading_factor),
        ])
    }
}

/// Builds the step chain from geometry at the given range.
pub fn step_chain(
    tx: &TransmitterSpec,
    target: &TargetSpec,
    range: f64,
    rx_aperture_diameter: f64,
    spreading_factor: f64,
) -> Result<StepChain> {
    require_positive("range", range)?;
    require_positive("rx_aperture_diameter", rx_aperture_diameter)?;
    require_unit_interval("spreading_factor", spreading_factor)?;
    tx.validate()?;
    target.validate()?;
    let uplink = geometric_intercept(
        target.effective_diameter,
        footprint_diameter(tx.divergence, range),
    );
    let downlink = geometric_intercept(
        rx_aperture_diameter,
        footprint_diameter(target.return_divergence, range),
    );
    Ok(StepChain {
        uplink,
        retro_fraction: target.active_retro_fraction,
        downlink,
        spreading_factor,
    })
}

/// End-to-end geometric efficiency of the step chain.
pub fn step_chain_efficiency(
    tx: &TransmitterSpec,
    target: &TargetSpec,
    range: f64,
    rx_aperture_diameter: f64,
    spreading_factor: f64,
) -> Result<f64> {
    step_chain(tx, target, range, rx_aperture_diameter, spreading_factor).map(|c| c.efficiency())
}

/// Evaluates the radar link equation at `range`.
pub fn radar_equation(scenario: &LinkScenario, range: f64) -> Result<LinkBudgetResult> {
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::InvalidParameter {
            name: "range",
            reason: format!("must be finite and > 0, got {range}"),
        });
    }
    scenario.validate()?;
    let LinkScenario { tx, target, chain, .. } = scenario;

    let inverse_square = 1.0 / (4.0 * PI * range * range);
    let mut log = FactorLog::default();
    log.push(Factor::new("eta_t", chain.eta_t));
    log.push(Factor::new("transmitter_gain", transmitter_gain(tx.divergence)));
    let cs = Factor::new("cross_section_m2", target.cross_section());
    log.push(if target.cross_section.is_some() {
        cs.with_note("measured")
    } else {
        cs.with_note("geometric")
    });
    log.push(Factor::new("inverse_square_squared", inverse_square * inverse_square));
    log.push(Factor::new("aperture_area_m2", scenario.aperture_area()));
    log.push(Factor::new("t_a_squared", chain.t_a * chain.t_a));
    log.push(Factor::new("t_c_squared", chain.t_c * chain.t_c));
    log.push(Factor::new("spreading_factor", scenario.spreading_factor));

    let chain_steps = step_chain(
        tx,
        target,
        range,
        scenario.rx_aperture_diameter,
        scenario.spreading_factor,
    )?;

    let photons = photons_per_pulse(tx);
    let end_to_end = log.product();
    let receiver_efficiency = chain.eta_q * chain.eta_r;
    Ok(LinkBudgetResult {
        range,
        photons_per_pulse: photons,
        spot_diameter: footprint_diameter(tx.divergence, range),
        return_spot_diameter: footprint_diameter(target.return_divergence, range),
        uplink_fraction: chain_steps.uplink.fraction,
        retro_fraction: chain_steps.retro_fraction,
        downlink_fraction: chain_steps.downlink.fraction,
        step_chain_efficiency: chain_steps.efficiency(),
        end_to_end,
        receiver_efficiency,
        photoelectrons: photons * end_to_end * receiver_efficiency,
        factor_log: log,
        step_chain_log: chain_steps.factor_log(),
    })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub photoelectrons: f64,
    pub step_chain_efficiency: f64,
}

/// Photoelectrons versus range.
pub fn sweep_range(scenario: &LinkScenario, ranges: &[f64]) -> Result<Vec<SweepPoint>> {
    ranges
        .iter()
        .map(|&r| {
            radar_equation(scenario, r).map(|res| SweepPoint {
                parameter: r,
                photoelectrons: res.photoelectrons,
                step_chain_efficiency: res.step_chain_efficiency,
            })
        })
        .collect()
}

/// Photoelectrons versus transmit divergence (rad) at a fixed range.
pub fn sweep_divergence(scenario: &LinkScenario, range: f64, divergences: &[f64]) -> Result<Vec<SweepPoint>> {
    divergences
        .iter()
        .map(|&d| {
            let mut s = *scenario;
            s.tx.divergence = d;
            radar_equation(&s, range).map(|res| SweepPoint {
                parameter: d,
                photoelectrons: res.photoelectrons,
                step_chain_efficiency: res.step_chain_efficiency,
            })
        })
        .collect()
}

/// CSV rendering of a sweep; `parameter_column` names the first column.
pub fn sweep_csv(parameter_column: &str, points: &[SweepPoint]) -> String {
    let mut out = format!("{parameter_column},photoelectrons,step_chain_efficiency\n");
    for p in points {
        out.push_str(&format!(
            "{:e},{:e},{:e}\n",
            p.parameter, p.photoelectrons, p.step_chain_efficiency
        ));
    }
    out
}
