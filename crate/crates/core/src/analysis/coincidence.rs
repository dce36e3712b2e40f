//! Temporal gating of detections around predicted arrival times.

use serde::{Deserialize, Serialize};

use super::fit::RangeFit;
use crate::error::{require_positive, Result};
use crate::timetag::{Channel, PhotonEvent, TimeTagStream};

/// Default gate width as a multiple of the calibration FWHM.
pub const DEFAULT_WINDOW_FWHM_MULTIPLE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateResidual {
    /// Epoch of the fire that opened the gate (s).
    pub fire_epoch_s: f64,
    /// Arrival minus gate centre (ns).
    pub residual_ns: f64,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceReport {
    /// Detections that fell inside a gate.
    pub accepted: TimeTagStream,
    pub n_signal_candidates: usize,
    pub n_rejected: usize,
    pub n_accepted_returns: usize,
    pub n_accepted_background: usize,
    pub n_fires: usize,
    /// Fires outside the fit domain; they open no gate.
    pub n_fires_skipped: usize,
    pub window_ns: f64,
    pub offset_ns: f64,
    pub residuals: Vec<GateResidual>,
}

/// Serializable summary of a [`CoincidenceReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceSummary {
    pub window_ns: f64,
    pub offset_ns: f64,
    pub n_fires: usize,
    pub n_fires_skipped: usize,
    pub n_signal_candidates: usize,
    pub n_accepted_returns: usize,
    pub n_accepted_background: usize,
    pub n_rejected: usize,
    pub return_rate: f64,
    pub residual_rms_ns: f64,
}

impl CoincidenceReport {
    pub fn summary(&self) -> CoincidenceSummary {
        let rms = if self.residuals.is_empty() {
            0.0
        } else {
            (self.residuals.iter().map(|r| r.residual_ns.powi(2)).sum::<f64>() / self.residuals.len() as f64).sqrt()
        };
        CoincidenceSummary {
            window_ns: self.window_ns,
            offset_ns: self.offset_ns,
            n_fires: self.n_fires,
            n_fires_skipped: self.n_fires_skipped,
            n_signal_candidates: self.n_signal_candidates,
            n_accepted_returns: self.n_accepted_returns,
            n_accepted_background: self.n_accepted_background,
            n_rejected: self.n_rejected,
            return_rate: return_rate(self, self.n_fires),
            residual_rms_ns: rms,
        }
    }

    /// Residual CSV with columns `fire_epoch_s,residual_ns,channel`.
    pub fn residual_csv(&self) -> String {
        let mut out = String::from("fire_epoch_s,residual_ns,channel\n");
        for r in &self.residuals {
            out.push_str(&format!("{:.6},{:.3},{}\n", r.fire_epoch_s, r.residual_ns, r.channel));
        }
        out
    }
}

struct Gate {
    lo: f64,
    hi: f64,
    center: f64,
    fire_epoch: f64,
}

/// Accepts detections within `window_ns / 2` of
/// `fire + predict_tof(fire) + offset_ns` for some fire in the fit domain.
pub fn coincidence_filter(
    stream: &TimeTagStream,
    fit: &RangeFit,
    window_ns: f64,
    offset_ns: f64,
) -> Result<CoincidenceReport> {
    require_positive("window_ns", window_ns)?;
    let half_ps = 0.5 * window_ns * 1e3;

    let mut n_fires = 0;
    let mut n_fires_skipped = 0;
    let mut gates = Vec::new();
    for fire in stream.channel(Channel::Fire) {
        n_fires += 1;
        let epoch = fire.seconds();
        match fit.predict(epoch) {
            Ok(tof_ns) => {
                let center = fire.timestamp as f64 + (tof_ns + offset_ns) * 1e3;
                gates.push(Gate {
                    lo: center - half_ps,
                    hi: center + half_ps,
                    center,
                    fire_epoch: epoch,
                });
            }
            Err(_) => n_fires_skipped += 1,
        }
    }
    gates.sort_by(|a, b| a.lo.total_cmp(&b.lo));

    // Running maximum of the upper edges: an event at t lies in some gate
    // iff the widest-reaching gate opened at or before t still covers it.
    let mut reach = Vec::with_capacity(gates.len());
    let mut best: Option<usize> = None;
    for (i, g) in gates.iter().enumerate() {
        best = match best {
            Some(j) if gates[j].hi >= g.hi => Some(j),
            _ => Some(i),
        };
        reach.push(best.expect("set above"));
    }

    let mut accepted = Vec::new();
    let mut residuals = Vec::new();
    let mut n_rejected = 0;
    let (mut n_ret, mut n_bg) = (0, 0);
    for e in stream.events().iter().filter(|e| e.channel.is_detection()) {
        let t = e.timestamp as f64;
        let opened = gates.partition_point(|g| g.lo <= t);
        let gate = (opened > 0)
            .then(|| {
                let latest = &gates[opened - 1];
                if latest.hi >= t {
                    latest
                } else {
                    &gates[reach[opened - 1]]
                }
            })
            .filter(|g| g.hi >= t);
        match gate {
            Some(g) => {
                accepted.push(PhotonEvent::new(e.timestamp, e.channel));
                residuals.push(GateResidual {
                    fire_epoch_s: g.fire_epoch,
                    residual_ns: (t - g.center) * 1e-3,
                    channel: e.channel,
                });
                if e.channel == Channel::Return {
                    n_ret += 1;
                } else {
                    n_bg += 1;
                }
            }
            None => n_rejected += 1,
        }
    }

    Ok(CoincidenceReport {
        accepted: TimeTagStream::from_sorted(stream.epoch(), accepted)?,
        n_signal_candidates: n_ret + n_bg,
        n_rejected,
        n_accepted_returns: n_ret,
        n_accepted_background: n_bg,
        n_fires,
        n_fires_skipped,
        window_ns,
        offset_ns,
        residuals,
    })
}

/// Accepted signal candidates per fire.
pub fn return_rate(report: &CoincidenceReport, n_fires: usize) -> f64 {
    if n_fires == 0 {
        0.0
    } else {
        report.n_signal_candidates as f64 / n_fires as f64
    }
}

/// Mean number of uniformly arriving background events per gate, `b·w`.
pub fn expected_background_per_pulse(background_rate: f64, window_ns: f64) -> f64 {
    background_rate * window_ns * 1e-9
}
