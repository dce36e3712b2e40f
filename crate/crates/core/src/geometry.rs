//! Circular-orbit pass geometry over a ground station.
//!
//! A pass is described by the orbit and the maximum elevation reached at
//! culmination. The satellite moves along a great circle at the orbit's mean
//! motion; the station sits at a fixed central angle `γ0` from the ground
//! track, so at time `Δt` from culmination the station–satellite central
//! angle obeys `cos γ = cos γ0 · cos(n·Δt)`. Earth rotation is not modelled.
//!
//! Elevation follows from `sin E = (r·cos γ − Re) / ρ` with the slant range
//! `ρ² = r² + Re² − 2·r·Re·cos γ`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::constants::{EARTH_RADIUS, GM_EARTH, SPEED_OF_LIGHT};
use crate::error::{require_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularOrbit {
    /// Height above the body surface (m).
    pub altitude: f64,
    /// Radius of the central body (m).
    pub body_radius: f64,
    /// Gravitational parameter GM (m³/s²).
    pub grav_parameter: f64,
}

impl CircularOrbit {
    /// Earth orbit at the given altitude.
    pub fn earth(altitude: f64) -> Result<Self> {
        Self::new(altitude, EARTH_RADIUS, GM_EARTH)
    }

    pub fn new(altitude: f64, body_radius: f64, grav_parameter: f64) -> Result<Self> {
        require_positive("altitude", altitude)?;
        require_positive("body_radius", body_radius)?;
        require_positive("grav_parameter", grav_parameter)?;
        Ok(Self {
            altitude,
            body_radius,
            grav_parameter,
        })
    }

    pub fn radius(&self) -> f64 {
        self.body_radius + self.altitude
    }

    /// Mean motion (rad/s).
    pub fn mean_motion(&self) -> f64 {
        (self.grav_parameter / self.radius().powi(3)).sqrt()
    }

    /// Orbital period (s).
    pub fn period(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }

    /// Inertial orbital speed (m/s).
    pub fn speed(&self) -> f64 {
        (self.grav_parameter / self.radius()).sqrt()
    }

    /// Station–satellite central angle at which the satellite is seen at
    /// `elevation`: `γ = arccos(Re·cos E / r) − E`.
    pub fn central_angle_at_elevation(&self, elevation: f64) -> f64 {
        let ratio = self.body_radius * elevation.cos() / self.radius();
        ratio.clamp(-1.0, 1.0).acos() - elevation
    }

    /// Slant range and elevation for a given central angle.
    pub fn range_and_elevation(&self, central_angle: f64) -> (f64, f64) {
        let r = self.radius();
        let re = self.body_radius;
        let cos_g = central_angle.cos();
        let rho = (r * r + re * re - 2.0 * r * re * cos_g).max(0.0).sqrt();
        let sin_e = ((r * cos_g - re) / rho).clamp(-1.0, 1.0);
        (rho, sin_e.asin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassGeometry {
    pub orbit: CircularOrbit,
    /// Elevation at culmination (rad), in (0, π/2].
    pub max_elevation: f64,
    /// Absolute time of culmination (s).
    pub epoch_at_culmination: f64,
}

/// Geometry of one instant of a pass. `t` is relative to culmination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    pub t: f64,
    pub slant_range: f64,
    pub elevation: f64,
    pub azimuth_rate: f64,
    pub elevation_rate: f64,
}

/// Maximum slew rates of an alt-azimuth mount (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountLimits {
    pub azimuth_rate: f64,
    pub elevation_rate: f64,
}

impl Default for MountLimits {
    /// 20 deg/s in azimuth, 5 deg/s in elevation.
    fn default() -> Self {
        Self {
            azimuth_rate: 20f64.to_radians(),
            elevation_rate: 5f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingRates {
    /// Signed azimuth rate (rad/s).
    pub azimuth_rate: f64,
    /// Signed elevation rate (rad/s).
    pub elevation_rate: f64,
    /// Angular rate of the line of sight itself (rad/s).
    pub total_rate: f64,
    pub trackable: bool,
}

/// Default finite-difference step for [`PassGeometry::tracking_rates`] (s).
pub const DEFAULT_RATE_STEP: f64 = 0.1;

impl PassGeometry {
    pub fn new(orbit: CircularOrbit, max_elevation: f64, epoch_at_culmination: f64) -> Result<Self> {
        if !(max_elevation > 0.0 && max_elevation <= FRAC_PI_2) {
            return Err(Error::InvalidParameter {
                name: "max_elevation",
                reason: format!("must lie in (0, π/2], got {max_elevation}"),
            });
        }
        if !epoch_at_culmination.is_finite() {
            return Err(Error::InvalidParameter {
                name: "epoch_at_culmination",
                reason: "must be finite".into(),
            });
        }
        Ok(Self {
            orbit,
            max_elevation,
            epoch_at_culmination,
        })
    }

    /// Overhead (zenith) pass culminating at `t = 0`.
    pub fn overhead(orbit: CircularOrbit) -> Self {
        Self {
            orbit,
            max_elevation: FRAC_PI_2,
            epoch_at_culmination: 0.0,
        }
    }

    /// Cross-track central angle between station and ground track.
    pub fn min_central_angle(&self) -> f64 {
        self.orbit
            .central_angle_at_elevation(self.max_elevation)
            .max(0.0)
    }

    fn along_track_angle(&self, t: f64) -> f64 {
        self.orbit.mean_motion() * (t - self.epoch_at_culmination)
    }

    /// Station–satellite central angle at absolute time `t`.
    pub fn central_angle(&self, t: f64) -> f64 {
        let cos_g = self.min_central_angle().cos() * self.along_track_angle(t).cos();
        cos_g.clamp(-1.0, 1.0).acos()
    }

    /// Elevation at `t` (rad); negative below the horizon.
    pub fn elevation(&self, t: f64) -> f64 {
        self.orbit.range_and_elevation(self.central_angle(t)).1
    }

    /// Station-to-satellite vector in the local east/north/up frame (m).
    ///
    /// The orbit plane is the inertial x–y plane with the satellite on the
    /// +x axis at culmination; the station lies in the x–z plane.
    pub fn line_of_sight(&self, t: f64) -> [f64; 3] {
        let u = self.along_track_angle(t);
        let g0 = self.min_central_angle();
        let r = self.orbit.radius();
        let re = self.orbit.body_radius;
        let sat = [r * u.cos(), r * u.sin(), 0.0];
        let station = [re * g0.cos(), 0.0, re * g0.sin()];
        let d = [sat[0] - station[0], sat[1] - station[1], sat[2] - station[2]];
        let up = [g0.cos(), 0.0, g0.sin()];
        let north = [-g0.sin(), 0.0, g0.cos()];
        let east = [0.0, 1.0, 0.0];
        [dot(&d, &east), dot(&d, &north), dot(&d, &up)]
    }

    /// Azimuth (rad, from north through east) and elevation (rad) at `t`.
    pub fn az_el(&self, t: f64) -> (f64, f64) {
        let [e, n, u] = self.line_of_sight(t);
        let horiz = e.hypot(n);
        (e.atan2(n), u.atan2(horiz))
    }

    /// Slant range at `t`.
    pub fn slant_range(&self, t: f64) -> Result<f64> {
        let (rho, elevation) = self.orbit.range_and_elevation(self.central_angle(t));
        if elevation < 0.0 {
            return Err(Error::BelowHorizon {
                t,
                elevation_deg: elevation.to_degrees(),
            });
        }
        Ok(rho)
    }

    /// Symmetric interval around culmination with elevation ≥ `min_elevation`,
    /// found by bisection on the elevation function.
    pub fn visibility_window(&self, min_elevation: f64) -> Result<(f64, f64)> {
        if !min_elevation.is_finite() || min_elevation >= self.max_elevation {
            return Err(Error::NeverVisible {
                min_elevation_deg: min_elevation.to_degrees(),
                max_elevation_deg: self.max_elevation.to_degrees(),
            });
        }
        let half_period = 0.5 * self.orbit.period();
        let t0 = self.epoch_at_culmination;
        let excess = |dt: f64| self.elevation(t0 + dt) - min_elevation;
        if excess(half_period) >= 0.0 {
            return Ok((t0 - half_period, t0 + half_period));
        }
        // Elevation decreases monotonically from culmination to the antipode.
        let half_width = bisect(excess, 0.0, half_period, 1e-9);
        Ok((t0 - half_width, t0 + half_width))
    }

    /// Finite-difference tracking rates at `t` with step `step` (s).
    pub fn tracking_rates(&self, t: f64, step: f64, limits: &MountLimits) -> Result<TrackingRates> {
        require_positive("step", step)?;
        let elevation = self.elevation(t);
        if elevation < 0.0 {
            return Err(Error::BelowHorizon {
                t,
                elevation_deg: elevation.to_degrees(),
            });
        }
        let (t_a, t_b) = (t - 0.5 * step, t + 0.5 * step);
        let (az_a, el_a) = self.az_el(t_a);
        let (az_b, el_b) = self.az_el(t_b);
        let azimuth_rate = wrap_angle(az_b - az_a) / step;
        let elevation_rate = (el_b - el_a) / step;
        let total_rate = angle_between(&self.line_of_sight(t_a), &self.line_of_sight(t_b)) / step;
        let trackable = azimuth_rate.abs() <= limits.azimuth_rate
            && elevation_rate.abs() <= limits.elevation_rate;
        Ok(TrackingRates {
            azimuth_rate,
            elevation_rate,
            total_rate,
            trackable,
        })
    }

    /// Full geometry at absolute time `t`.
    pub fn sample(&self, t: f64) -> Result<RangeSample> {
        let slant_range = self.slant_range(t)?;
        let rates = self.tracking_rates(t, DEFAULT_RATE_STEP, &MountLimits::default())?;
        Ok(RangeSample {
            t: t - self.epoch_at_culmination,
            slant_range,
            elevation: self.elevation(t),
            azimuth_rate: rates.azimuth_rate,
            elevation_rate: rates.elevation_rate,
        })
    }

    /// Samples `[t_start, t_end]` every `step` seconds.
    pub fn range_table(&self, t_start: f64, t_end: f64, step: f64) -> Result<Vec<RangeSample>> {
        require_positive("step", step)?;
        let n = ((t_end - t_start) / step + 1e-9).floor();
        if !(n >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: "must not precede t_start".into(),
            });
        }
        (0..=n as usize)
            .map(|i| self.sample(t_start + i as f64 * step))
            .collect()
    }
}

/// Two-way light travel time (s) for a one-way range (m).
pub fn time_of_flight(range: f64) -> f64 {
    2.0 * range / SPEED_OF_LIGHT
}

/// Renders samples as CSV with columns `t_s,range_m,tof_ns,elevation_deg`.
pub fn range_table_csv(samples: &[RangeSample]) -> String {
    let mut out = String::from("t_s,range_m,tof_ns,elevation_deg\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{:.3},{:.3},{:.2},{:.6}",
            s.t,
            s.slant_range,
            time_of_flight(s.slant_range) * 1e9,
            s.elevation.to_degrees()
        );
    }
    out
}

/// Bisection for the sign change of `f` on `[lo, hi]`, where `f(lo) ≥ 0 > f(hi)`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn angle_between(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    dot(&cross, &cross).sqrt().atan2(dot(a, b))
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}
