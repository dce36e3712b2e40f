//! Scenario files: named bundles of orbit, link, detector and analysis
//! parameters.
//!
//! Scenarios are TOML documents whose keys carry their unit as a suffix
//! (`altitude_m`, `pulse_energy_j`, `rep_rate_hz`, …). Unknown keys are
//! rejected. [`to_canonical_toml`] writes tables and keys in sorted order so
//! that loading and saving a canonical file reproduces it byte for byte.
//!
//! ```
//! use qlink::scenario::{preset, to_canonical_toml, parse_scenario};
//!
//! let s = preset("lageos-mlro").unwrap();
//! let text = to_canonical_toml(&s).unwrap();
//! assert_eq!(to_canonical_toml(&parse_scenario(&text).unwrap()).unwrap(), text);
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{DEFAULT_CALIBRATION_BIN_NS, DEFAULT_WINDOW_FWHM_MULTIPLE};
use crate::constants::{ARCSEC, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::geometry::{CircularOrbit, MountLimits, PassGeometry, DEFAULT_RATE_STEP};
use crate::link_budget::{
    LinkScenario, OpticalChain, TargetSpec, TransmitterSpec, STATION_DIVERGENCE_RANGE_ARCSEC,
};
use crate::stellar::{ReceiverChain, StarSpec};
use crate::timetag::{
    DetectorModel, GroundTargetRun, PassRun, ScintillationModel, StarRun, Tone, DEFAULT_EPOCH,
};

/// Environment variable naming a directory searched for `<name>.toml`.
pub const SCENARIO_DIR_ENV: &str = "QLINK_SCENARIO_DIR";

/// Names of the compiled-in presets.
pub const PRESETS: [&str; 4] = ["lageos-mlro", "ground-target-c", "ground-target-b", "vega"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Pass,
    GroundTarget,
    Star,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Pass => "pass",
            ScenarioKind::GroundTarget => "ground-target",
            ScenarioKind::Star => "star",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    #[serde(default = "default_epoch")]
    pub epoch: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmitter: Option<TransmitterSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optics: Option<OpticsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_target: Option<GroundTargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<ReceiverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star: Option<StarSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mount: Option<MountSection>,
}

fn default_epoch() -> String {
    DEFAULT_EPOCH.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    pub altitude_m: f64,
    pub max_elevation_deg: f64,
    pub min_elevation_deg: f64,
    /// Length of the tracked arc, centred on culmination.
    pub track_duration_s: f64,
    /// Range at which `budget` is evaluated when no override is given.
    pub budget_range_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterSection {
    pub pulse_energy_j: f64,
    pub wavelength_nm: f64,
    pub divergence_arcsec: f64,
    pub rep_rate_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub effective_diameter_m: f64,
    pub retro_count: u32,
    pub retro_diameter_m: f64,
    pub active_retro_fraction: f64,
    pub return_divergence_arcsec: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_section_m2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    pub eta_q: f64,
    pub eta_t: f64,
    pub eta_r: f64,
    pub t_a: f64,
    pub t_c: f64,
    pub rx_aperture_diameter_m: f64,
    pub spreading_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub jitter_fwhm_ns: f64,
    pub dead_time_ns: f64,
    pub dark_rate_hz: f64,
    /// Timing bias added to every return.
    #[serde(default)]
    pub instrument_offset_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTargetSection {
    pub distance_m: f64,
    pub rep_rate_hz: f64,
    pub n_pulses: u64,
    pub return_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    pub aperture_area_cm2: f64,
    pub mirror_reflectivities: Vec<f64>,
    pub bandwidth_angstrom: f64,
    pub qe_fiber: f64,
    pub extra_optics: f64,
    pub atmospheric_transmission: f64,
    pub pinhole_coupling: f64,
    pub sky_background_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarSection {
    pub v_magnitude: f64,
    pub duration_s: f64,
    /// Detected rate used by the simulator, after any neutral density.
    pub simulated_rate_hz: f64,
    pub log_sigma: f64,
    pub correlation_time_s: f64,
    #[serde(default)]
    pub tones: Vec<ToneSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneSection {
    pub frequency_hz: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub fit_degree: usize,
    pub window_ns: f64,
    pub bin_s: f64,
    pub calibration_bin_ns: f64,
    pub snr_threshold: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            fit_degree: 20,
            window_ns: 10.0,
            bin_s: 0.01,
            calibration_bin_ns: DEFAULT_CALIBRATION_BIN_NS,
            snr_threshold: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountSection {
    pub azimuth_rate_deg_s: f64,
    pub elevation_rate_deg_s: f64,
}

fn missing(section: &'static str) -> Error {
    Error::Validation(format!("scenario has no [{section}] section"))
}

impl Scenario {
    pub fn orbit(&self) -> Result<CircularOrbit> {
        let o = self.orbit.as_ref().ok_or_else(|| missing("orbit"))?;
        CircularOrbit::earth(o.altitude_m)
    }

    /// Pass culminating at `t = 0` at the configured maximum elevation.
    pub fn pass_geometry(&self) -> Result<PassGeometry> {
        let o = self.orbit.as_ref().ok_or_else(|| missing("orbit"))?;
        PassGeometry::new(self.orbit()?, o.max_elevation_deg.to_radians(), 0.0)
    }

    pub fn transmitter_spec(&self) -> Result<TransmitterSpec> {
        let t = self.transmitter.as_ref().ok_or_else(|| missing("transmitter"))?;
        Ok(TransmitterSpec {
            pulse_energy: t.pulse_energy_j,
            wavelength: t.wavelength_nm * 1e-9,
            divergence: t.divergence_arcsec * ARCSEC,
            rep_rate: t.rep_rate_hz,
        })
    }

    pub fn target_spec(&self) -> Result<TargetSpec> {
        let t = self.target.as_ref().ok_or_else(|| missing("target"))?;
        Ok(TargetSpec {
            effective_diameter: t.effective_diameter_m,
            retro_count: t.retro_count,
            retro_diameter: t.retro_diameter_m,
            active_retro_fraction: t.active_retro_fraction,
            return_divergence: t.return_divergence_arcsec * ARCSEC,
            cross_section: t.cross_section_m2,
        })
    }

    pub fn optical_chain(&self) -> Result<OpticalChain> {
        let o = self.optics.as_ref().ok_or_else(|| missing("optics"))?;
        Ok(OpticalChain {
            eta_q: o.eta_q,
            eta_t: o.eta_t,
            eta_r: o.eta_r,
            t_a: o.t_a,
            t_c: o.t_c,
        })
    }

    pub fn link_scenario(&self) -> Result<LinkScenario> {
        let o = self.optics.as_ref().ok_or_else(|| missing("optics"))?;
        Ok(LinkScenario {
            tx: self.transmitter_spec()?,
            target: self.target_spec()?,
            chain: self.optical_chain()?,
            rx_aperture_diameter: o.rx_aperture_diameter_m,
            spreading_factor: o.spreading_factor,
        })
    }

    pub fn detector_model(&self) -> DetectorModel {
        self.detector.map_or(DetectorModel::IDEAL, |d| {
            DetectorModel::from_fwhm_ns(d.jitter_fwhm_ns, d.dead_time_ns, d.dark_rate_hz)
        })
    }

    /// The tracked arc, centred on culmination.
    pub fn pass_run(&self) -> Result<PassRun> {
        let o = self.orbit.as_ref().ok_or_else(|| missing("orbit"))?;
        Ok(PassRun {
            pass: self.pass_geometry()?,
            t_start: -0.5 * o.track_duration_s,
            duration: o.track_duration_s,
            rep_rate: self.transmitter_spec()?.rep_rate,
            instrument_offset: self.instrument_offset_ns() * 1e-9,
        })
    }

    pub fn ground_target_run(&self) -> Result<GroundTargetRun> {
        let g = self.ground_target.as_ref().ok_or_else(|| missing("ground_target"))?;
        Ok(GroundTargetRun {
            distance: g.distance_m,
            instrument_offset: self.instrument_offset_ns() * 1e-9,
            rep_rate: g.rep_rate_hz,
            n_pulses: g.n_pulses as usize,
            return_probability: g.return_probability,
        })
    }

    pub fn receiver_chain(&self) -> Result<ReceiverChain> {
        let r = self.receiver.as_ref().ok_or_else(|| missing("receiver"))?;
        Ok(ReceiverChain {
            aperture_area_cm2: r.aperture_area_cm2,
            mirror_reflectivities: r.mirror_reflectivities.clone(),
            bandwidth_angstrom: r.bandwidth_angstrom,
            qe_fiber: r.qe_fiber,
            extra_optics: r.extra_optics,
            atmospheric_transmission: r.atmospheric_transmission,
            pinhole_coupling: r.pinhole_coupling,
            sky_background_rate: r.sky_background_rate_hz,
        })
    }

    pub fn star_spec(&self) -> Result<StarSpec> {
        let s = self.star.as_ref().ok_or_else(|| missing("star"))?;
        Ok(StarSpec {
            v_magnitude: s.v_magnitude,
        })
    }

    pub fn star_run(&self) -> Result<StarRun> {
        let s = self.star.as_ref().ok_or_else(|| missing("star"))?;
        Ok(StarRun {
            rate: s.simulated_rate_hz,
            duration: s.duration_s,
            scintillation: ScintillationModel {
                log_sigma: s.log_sigma,
                correlation_time: s.correlation_time_s,
            },
            tones: s
                .tones
                .iter()
                .map(|t| Tone {
                    frequency: t.frequency_hz,
                    depth: t.depth,
                })
                .collect(),
        })
    }

    pub fn instrument_offset_ns(&self) -> f64 {
        self.detector.map_or(0.0, |d| d.instrument_offset_ns)
    }

    pub fn mount_limits(&self) -> MountLimits {
        self.mount.map_or_else(MountLimits::default, |m| MountLimits {
            azimuth_rate: m.azimuth_rate_deg_s.to_radians(),
            elevation_rate: m.elevation_rate_deg_s.to_radians(),
        })
    }

    /// Coincidence window: the configured value, or a multiple of the
    /// detector jitter FWHM when the configured value is zero.
    pub fn window_ns(&self) -> f64 {
        match (self.analysis.window_ns, self.detector) {
            (w, _) if w > 0.0 => w,
            (_, Some(d)) => DEFAULT_WINDOW_FWHM_MULTIPLE * d.jitter_fwhm_ns,
            _ => self.analysis.window_ns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub severity: Severity,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}: {}", self.field, self.rule)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn push(&mut self, field: impl Into<String>, rule: impl Into<String>, severity: Severity) {
        self.0.push(Violation {
            field: field.into(),
            rule: rule.into(),
            severity,
        });
    }

    fn error(&mut self, field: impl Into<String>, rule: impl Into<String>) {
        self.push(field, rule, Severity::Error);
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.error(field, format!("must be finite and > 0, got {v}"));
        }
    }

    fn non_negative(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.error(field, format!("must be finite and >= 0, got {v}"));
        }
    }

    fn finite(&mut self, field: &str, v: f64) {
        if !v.is_finite() {
            self.error(field, format!("must be finite, got {v}"));
        }
    }

    /// Efficiencies and transmissions live in (0, 1].
    fn efficiency(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0 && v <= 1.0) {
            self.error(field, format!("must lie in (0, 1], got {v}"));
        }
    }

    fn probability(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            self.error(field, format!("must lie in [0, 1], got {v}"));
        }
    }
}

/// Every violated invariant. Physical-range problems are errors;
/// station-capability limits are warnings.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut c = Checker(Vec::new());
    if s.name.trim().is_empty() {
        c.error("name", "must not be empty");
    }
    if s.epoch.trim().is_empty() || s.epoch.contains(char::is_whitespace) {
        c.error("epoch", "must be a non-empty label without whitespace");
    }

    let required: &[&str] = match s.kind {
        ScenarioKind::Pass => &["orbit", "transmitter", "target", "optics"],
        ScenarioKind::GroundTarget => &["ground_target"],
        ScenarioKind::Star => &["receiver", "star"],
    };
    for &section in required {
        let present = match section {
            "orbit" => s.orbit.is_some(),
            "transmitter" => s.transmitter.is_some(),
            "target" => s.target.is_some(),
            "optics" => s.optics.is_some(),
            "ground_target" => s.ground_target.is_some(),
            "receiver" => s.receiver.is_some(),
            "star" => s.star.is_some(),
            _ => unreachable!(),
        };
        if !present {
            c.error(section, format!("section required for kind `{}`", s.kind));
        }
    }

    if let Some(o) = &s.orbit {
        c.positive("orbit.altitude_m", o.altitude_m);
        if !(o.max_elevation_deg > 0.0 && o.max_elevation_deg <= 90.0) {
            c.error("orbit.max_elevation_deg", format!("must lie in (0, 90], got {}", o.max_elevation_deg));
        }
        if !(o.min_elevation_deg >= 0.0 && o.min_elevation_deg < 90.0) {
            c.error("orbit.min_elevation_deg", format!("must lie in [0, 90), got {}", o.min_elevation_deg));
        }
        c.positive("orbit.track_duration_s", o.track_duration_s);
        c.positive("orbit.budget_range_m", o.budget_range_m);
        check_track(s, &mut c);
    }
    if let Some(t) = &s.transmitter {
        c.positive("transmitter.pulse_energy_j", t.pulse_energy_j);
        c.positive("transmitter.wavelength_nm", t.wavelength_nm);
        c.positive("transmitter.divergence_arcsec", t.divergence_arcsec);
        c.positive("transmitter.rep_rate_hz", t.rep_rate_hz);
        let (lo, hi) = STATION_DIVERGENCE_RANGE_ARCSEC;
        if t.divergence_arcsec.is_finite() && !(lo..=hi).contains(&t.divergence_arcsec) {
            c.push(
                "transmitter.divergence_arcsec",
                format!("{} arcsec is outside the {lo}–{hi} arcsec station range", t.divergence_arcsec),
                Severity::Warning,
            );
        }
    }
    if let Some(t) = &s.target {
        c.positive("target.effective_diameter_m", t.effective_diameter_m);
        c.positive("target.retro_diameter_m", t.retro_diameter_m);
        c.efficiency("target.active_retro_fraction", t.active_retro_fraction);
        c.positive("target.return_divergence_arcsec", t.return_divergence_arcsec);
        if let Some(cs) = t.cross_section_m2 {
            c.positive("target.cross_section_m2", cs);
        }
    }
    if let Some(o) = &s.optics {
        for (f, v) in [
            ("optics.eta_q", o.eta_q),
            ("optics.eta_t", o.eta_t),
            ("optics.eta_r", o.eta_r),
            ("optics.t_a", o.t_a),
            ("optics.t_c", o.t_c),
            ("optics.spreading_factor", o.spreading_factor),
        ] {
            c.efficiency(f, v);
        }
        c.positive("optics.rx_aperture_diameter_m", o.rx_aperture_diameter_m);
    }
    if let Some(d) = &s.detector {
        c.non_negative("detector.jitter_fwhm_ns", d.jitter_fwhm_ns);
        c.non_negative("detector.dead_time_ns", d.dead_time_ns);
        c.non_negative("detector.dark_rate_hz", d.dark_rate_hz);
        c.finite("detector.instrument_offset_ns", d.instrument_offset_ns);
    }
    if let Some(g) = &s.ground_target {
        c.positive("ground_target.distance_m", g.distance_m);
        c.positive("ground_target.rep_rate_hz", g.rep_rate_hz);
        if g.n_pulses == 0 {
            c.error("ground_target.n_pulses", "must be > 0");
        }
        c.probability("ground_target.return_probability", g.return_probability);
        if g.rep_rate_hz > 0.0 {
            let period_ns = 1e9 / g.rep_rate_hz;
            let delay_ns = 2.0 * g.distance_m / SPEED_OF_LIGHT * 1e9 + s.instrument_offset_ns();
            if delay_ns < 0.0 || delay_ns >= period_ns {
                c.error(
                    "detector.instrument_offset_ns",
                    "return delay must fall within one fire period",
                );
            }
        }
    }
    if let Some(r) = &s.receiver {
        c.positive("receiver.aperture_area_cm2", r.aperture_area_cm2);
        if r.mirror_reflectivities.is_empty() {
            c.error("receiver.mirror_reflectivities", "must list at least one mirror");
        }
        for (i, &m) in r.mirror_reflectivities.iter().enumerate() {
            c.efficiency(&format!("receiver.mirror_reflectivities[{i}]"), m);
        }
        c.positive("receiver.bandwidth_angstrom", r.bandwidth_angstrom);
        c.efficiency("receiver.qe_fiber", r.qe_fiber);
        c.efficiency("receiver.extra_optics", r.extra_optics);
        c.efficiency("receiver.atmospheric_transmission", r.atmospheric_transmission);
        c.efficiency("receiver.pinhole_coupling", r.pinhole_coupling);
        c.non_negative("receiver.sky_background_rate_hz", r.sky_background_rate_hz);
    }
    if let Some(st) = &s.star {
        c.finite("star.v_magnitude", st.v_magnitude);
        c.non_negative("star.duration_s", st.duration_s);
        c.positive("star.simulated_rate_hz", st.simulated_rate_hz);
        c.non_negative("star.log_sigma", st.log_sigma);
        c.positive("star.correlation_time_s", st.correlation_time_s);
        for (i, t) in st.tones.iter().enumerate() {
            c.positive(&format!("star.tones[{i}].frequency_hz"), t.frequency_hz);
            c.probability(&format!("star.tones[{i}].depth"), t.depth);
        }
    }
    let a = &s.analysis;
    if a.fit_degree > crate::analysis::MAX_FIT_DEGREE {
        c.error(
            "analysis.fit_degree",
            format!("must not exceed {}", crate::analysis::MAX_FIT_DEGREE),
        );
    }
    c.non_negative("analysis.window_ns", a.window_ns);
    c.positive("analysis.bin_s", a.bin_s);
    c.positive("analysis.calibration_bin_ns", a.calibration_bin_ns);
    if !(a.snr_threshold > 1.0) {
        c.error("analysis.snr_threshold", format!("must exceed 1, got {}", a.snr_threshold));
    }
    if let Some(m) = &s.mount {
        c.positive("mount.azimuth_rate_deg_s", m.azimuth_rate_deg_s);
        c.positive("mount.elevation_rate_deg_s", m.elevation_rate_deg_s);
    }
    c.0
}

/// Station-capability checks on the tracked arc.
fn check_track(s: &Scenario, c: &mut Checker) {
    let (Some(o), Ok(pass)) = (&s.orbit, s.pass_geometry()) else {
        return;
    };
    if !(o.track_duration_s > 0.0 && o.min_elevation_deg >= 0.0) {
        return;
    }
    let half = 0.5 * o.track_duration_s;
    match pass.visibility_window(o.min_elevation_deg.to_radians()) {
        Ok((rise, set)) if rise <= -half && set >= half => {}
        Ok(_) => c.push(
            "orbit.track_duration_s",
            format!("track leaves the sky above {} deg", o.min_elevation_deg),
            Severity::Warning,
        ),
        Err(_) => {
            c.push(
                "orbit.min_elevation_deg",
                "pass never reaches the minimum elevation",
                Severity::Warning,
            );
            return;
        }
    }
    if pass.elevation(-half) < 0.0 || pass.elevation(half) < 0.0 {
        c.error("orbit.track_duration_s", "track extends below the horizon");
        return;
    }
    let limits = s.mount_limits();
    let n = 200;
    let feasible = (0..=n).all(|i| {
        let t = -half + o.track_duration_s * i as f64 / n as f64;
        pass.tracking_rates(t, DEFAULT_RATE_STEP, &limits)
            .is_ok_and(|r| r.trackable)
    });
    if !feasible {
        c.push("mount", "mount rates cannot follow the whole track", Severity::Warning);
    }
}

pub fn has_errors(violations: &[Violation]) -> bool {
    violations.iter().any(|v| v.severity == Severity::Error)
}

/// Parses and validates scenario text. Warnings are not fatal.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
    let violations = validate_scenario(&s);
    if has_errors(&violations) {
        let msg = violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
            .map(|v| format!("{}: {}", v.field, v.rule))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Validation(msg));
    }
    Ok(s)
}

/// Loads a scenario file. A missing or unreadable file is a parse error.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Sorted-key TOML serialization.
pub fn to_canonical_toml(s: &Scenario) -> Result<String> {
    let value = toml::Value::try_from(s).map_err(|e| Error::Parse(e.to_string()))?;
    toml::to_string(&value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_canonical_toml(s)?)?;
    Ok(())
}

/// Resolves a preset name, a path, or `<name>.toml` inside the directory
/// named by [`SCENARIO_DIR_ENV`] (then `./scenarios`).
pub fn resolve_scenario(name: &str) -> Result<Scenario> {
    if let Some(p) = preset(name) {
        return Ok(p);
    }
    let direct = Path::new(name);
    if direct.exists() {
        return load_scenario(direct);
    }
    let file = if name.ends_with(".toml") {
        name.to_string()
    } else {
        format!("{name}.toml")
    };
    let mut dirs: Vec<PathBuf> = Vec::new();
    if let Some(d) = std::env::var_os(SCENARIO_DIR_ENV) {
        dirs.push(PathBuf::from(d));
    }
    dirs.push(PathBuf::from("scenarios"));
    for d in dirs {
        let candidate = d.join(&file);
        if candidate.exists() {
            return load_scenario(candidate);
        }
    }
    load_scenario(direct)
}

/// A compiled-in preset, or `None` for an unknown name.
pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "lageos-mlro" => Some(lageos_mlro()),
        "ground-target-c" => Some(ground_target("ground-target-c", 45.25, 11)),
        "ground-target-b" => Some(ground_target("ground-target-b", 192.47, 12)),
        "vega" => Some(vega()),
        _ => None,
    }
}

fn lageos_mlro() -> Scenario {
    Scenario {
        name: "lageos-mlro".into(),
        kind: ScenarioKind::Pass,
        seed: 1,
        epoch: default_epoch(),
        description: Some("LAGEOS pass tracked from a 1.5 m ranging station".into()),
        orbit: Some(OrbitSection {
            altitude_m: 5.9e6,
            max_elevation_deg: 75.0,
            min_elevation_deg: 20.0,
            track_duration_s: 2400.0,
            budget_range_m: 6.0e6,
        }),
        transmitter: Some(TransmitterSection {
            pulse_energy_j: 0.1,
            wavelength_nm: 532.0,
            divergence_arcsec: 1.0,
            rep_rate_hz: 10.0,
        }),
        target: Some(TargetSection {
            effective_diameter_m: 0.6,
            retro_count: 426,
            retro_diameter_m: 0.038,
            active_retro_fraction: 0.1,
            // 100 m spot at 6000 km.
            return_divergence_arcsec: 100.0 / 6.0e6 / ARCSEC,
            cross_section_m2: None,
        }),
        optics: Some(OpticsSection {
            eta_q: 0.1,
            eta_t: 0.75,
            eta_r: 0.22,
            t_a: 0.7,
            t_c: 1.0,
            rx_aperture_diameter_m: 1.5,
            spreading_factor: 1.0,
        }),
        detector: Some(DetectorSection {
            jitter_fwhm_ns: 1.3,
            dead_time_ns: 50.0,
            dark_rate_hz: 100.0,
            instrument_offset_ns: 0.0,
        }),
        ground_target: None,
        receiver: None,
        star: None,
        analysis: AnalysisSection {
            fit_degree: 20,
            window_ns: 10.0,
            ..AnalysisSection::default()
        },
        mount: Some(MountSection {
            azimuth_rate_deg_s: 20.0,
            elevation_rate_deg_s: 5.0,
        }),
    }
}

fn ground_target(name: &str, distance_m: f64, seed: u64) -> Scenario {
    Scenario {
        name: name.into(),
        kind: ScenarioKind::GroundTarget,
        seed,
        epoch: default_epoch(),
        description: Some(format!("calibration against a ground target at {distance_m} m")),
        orbit: None,
        transmitter: None,
        target: None,
        optics: None,
        detector: Some(DetectorSection {
            jitter_fwhm_ns: 1.3,
            dead_time_ns: 50.0,
            dark_rate_hz: 100.0,
            instrument_offset_ns: 116.1,
        }),
        ground_target: Some(GroundTargetSection {
            distance_m,
            rep_rate_hz: 17e3,
            n_pulses: 125_000,
            return_probability: 1.0,
        }),
        receiver: None,
        star: None,
        analysis: AnalysisSection::default(),
        mount: None,
    }
}

fn vega() -> Scenario {
    Scenario {
        name: "vega".into(),
        kind: ScenarioKind::Star,
        seed: 7,
        epoch: default_epoch(),
        description: Some("Vega through the Coudé train onto a fibre-coupled APD".into()),
        orbit: None,
        transmitter: None,
        target: None,
        optics: None,
        detector: None,
        ground_target: None,
        receiver: Some(ReceiverSection {
            aperture_area_cm2: 1700.0,
            mirror_reflectivities: vec![0.70],
            bandwidth_angstrom: 800.0,
            qe_fiber: 0.1,
            extra_optics: 0.29,
            atmospheric_transmission: 0.7,
            pinhole_coupling: 1.0,
            sky_background_rate_hz: 0.0,
        }),
        star: Some(StarSection {
            v_magnitude: 0.0,
            duration_s: 91.0,
            simulated_rate_hz: 2.0e4,
            log_sigma: 0.1,
            correlation_time_s: 0.01,
            tones: vec![
                ToneSection {
                    frequency_hz: 18.0,
                    depth: 0.2,
                },
                ToneSection {
                    frequency_hz: 36.0,
                    depth: 0.1,
                },
            ],
        }),
        analysis: AnalysisSection::default(),
        mount: None,
    }
}
