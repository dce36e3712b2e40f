//! Instrument-offset calibration against a target of known distance.
//!
//! Each return is paired with the preceding fire and the known two-way time
//! of flight is subtracted. The residual delays are histogrammed; the width
//! is the linearly interpolated full width at half maximum and the offset is
//! the centroid of the delays lying between the two half-maximum crossings.
//!
//! Bins are laid out relative to the smallest delay, in integer picoseconds,
//! so shifting every return by Δ shifts the estimate by exactly Δ.

use serde::{Deserialize, Serialize};

use super::fire_return_pairs;
use crate::error::{require_positive, Error, Result};
use crate::timetag::TimeTagStream;

/// Default histogram bin width (ns).
pub const DEFAULT_CALIBRATION_BIN_NS: f64 = 0.1;

const MAX_BINS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ns: f64,
    /// Left edge of bin 0 (ns).
    pub first_edge_ns: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn center(&self, i: usize) -> f64 {
        self.first_edge_ns + (i as f64 + 0.5) * self.bin_width_ns
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| self.first_edge_ns + i as f64 * self.bin_width_ns)
            .collect()
    }

    /// CSV with columns `center_ns,count`.
    pub fn csv(&self) -> String {
        let mut out = String::from("center_ns,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{:.4},{}\n", self.center(i), c));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetEstimate {
    pub offset_ns: f64,
    pub fwhm_ns: f64,
    pub n_returns: usize,
    pub histogram: Histogram,
}

/// Estimates the constant delay between predicted (`true_tof_ns`) and
/// observed fire-to-return intervals.
pub fn estimate_instrument_offset(
    stream: &TimeTagStream,
    true_tof_ns: f64,
    bin_width_ns: f64,
) -> Result<OffsetEstimate> {
    require_positive("bin_width_ns", bin_width_ns)?;
    if !true_tof_ns.is_finite() {
        return Err(Error::InvalidParameter {
            name: "true_tof_ns",
            reason: "must be finite".into(),
        });
    }
    let delays: Vec<i64> = fire_return_pairs(stream)
        .into_iter()
        .map(|(f, r)| (r - f) as i64)
        .collect();
    if delays.is_empty() {
        return Err(Error::NoReturns);
    }
    let min = *delays.iter().min().expect("non-empty");
    let max = *delays.iter().max().expect("non-empty");
    let width_ps = bin_width_ns * 1e3;
    // One empty bin on each side so the half-maximum crossings exist.
    let lead_ps = 1.5 * width_ps;
    let n_bins = ((max - min) as f64 / width_ps + 1.5).floor() as usize + 2;
    if n_bins > MAX_BINS {
        return Err(Error::InvalidParameter {
            name: "bin_width_ns",
            reason: format!("{n_bins} bins needed; widen the bins"),
        });
    }
    let mut counts = vec![0u64; n_bins];
    for &d in &delays {
        let i = (((d - min) as f64 + lead_ps) / width_ps).floor() as usize;
        counts[i] += 1;
    }

    // Everything below is relative to `min`, in picoseconds.
    let center_ps = |i: usize| (i as f64 + 0.5) * width_ps - lead_ps;
    let (peak_bin, &peak) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty");
    let half = peak as f64 / 2.0;
    let crossing = |inside: usize, outside: usize| {
        let (ci, co) = (counts[inside] as f64, counts[outside] as f64);
        let frac = (ci - half) / (ci - co);
        center_ps(inside) + frac * (center_ps(outside) - center_ps(inside))
    };
    let mut left = peak_bin;
    while left > 0 && counts[left - 1] as f64 >= half {
        left -= 1;
    }
    let mut right = peak_bin;
    while right + 1 < n_bins && counts[right + 1] as f64 >= half {
        right += 1;
    }
    let lo_ps = crossing(left, left - 1);
    let hi_ps = crossing(right, right + 1);

    let (sum, n) = delays
        .iter()
        .map(|&d| (d - min) as f64)
        .filter(|&x| x >= lo_ps && x <= hi_ps)
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    let centroid_ps = if n > 0 {
        sum / n as f64
    } else {
        0.5 * (lo_ps + hi_ps)
    };

    let min_ns = min as f64 * 1e-3 - true_tof_ns;
    Ok(OffsetEstimate {
        offset_ns: min_ns + centroid_ps * 1e-3,
        fwhm_ns: (hi_ps - lo_ps) * 1e-3,
        n_returns: delays.len(),
        histogram: Histogram {
            bin_width_ns,
            first_edge_ns: min_ns - lead_ps * 1e-3,
            counts,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::time_of_flight;
    use crate::timetag::{simulate_ground_target, Channel, DetectorModel, GroundTargetRun, PhotonEvent};
    use approx::assert_relative_eq;

    const EPOCH: &str = "2000-01-01T00:00:00Z";

    fn run(offset_ns: f64, n: usize) -> GroundTargetRun {
        GroundTargetRun {
            distance: 45.25,
            instrument_offset: offset_ns * 1e-9,
            rep_rate: 17e3,
            n_pulses: n,
            return_probability: 1.0,
        }
    }

    #[test]
    fn zero_jitter_zero_offset() {
        let s = simulate_ground_target(EPOCH, &run(0.0, 500), &DetectorModel::IDEAL, 1).unwrap();
        // Emission rounds to whole picoseconds, so compare against the
        // rounded delay.
        let tof_ns = time_of_flight(45.25) * 1e9;
        let est = estimate_instrument_offset(&s, tof_ns, 0.1).unwrap();
        assert!(est.offset_ns.abs() <= 0.5e-3, "{}", est.offset_ns);
        assert!(est.fwhm_ns <= 0.1 + 1e-12, "{}", est.fwhm_ns);
        let rounded = (tof_ns * 1e3).round_ties_even() * 1e-3;
        let exact = estimate_instrument_offset(&s, rounded, 0.1).unwrap();
        assert!(exact.offset_ns.abs() < 1e-9);
    }

    #[test]
    fn fifty_nanosecond_offset_within_half_bin() {
        let s = simulate_ground_target(EPOCH, &run(50.0, 500), &DetectorModel::IDEAL, 1).unwrap();
        let est = estimate_instrument_offset(&s, time_of_flight(45.25) * 1e9, 0.1).unwrap();
        assert!((est.offset_ns - 50.0).abs() <= 0.05, "{}", est.offset_ns);
    }

    #[test]
    fn calibration_run_recovers_offset_and_width() {
        let det = DetectorModel::from_fwhm_ns(1.3, 0.0, 0.0);
        let s = simulate_ground_target(EPOCH, &run(116.1, 125_000), &det, 7).unwrap();
        let est = estimate_instrument_offset(&s, time_of_flight(45.25) * 1e9, 0.1).unwrap();
        assert!((est.offset_ns - 116.1).abs() <= 0.1, "{}", est.offset_ns);
        assert!((est.fwhm_ns - 1.3).abs() <= 0.2, "{}", est.fwhm_ns);
        assert_eq!(est.n_returns, 125_000);
        assert_eq!(est.histogram.counts.iter().sum::<u64>(), 125_000);
        assert_eq!(est.histogram.edges().len(), est.histogram.counts.len() + 1);
    }

    #[test]
    fn no_returns() {
        let s = TimeTagStream::from_sorted(EPOCH, vec![PhotonEvent::new(0, Channel::Fire)]).unwrap();
        assert_eq!(estimate_instrument_offset(&s, 0.0, 0.1), Err(Error::NoReturns));
    }

    #[test]
    fn shift_equivariance() {
        let det = DetectorModel::from_fwhm_ns(1.3, 0.0, 0.0);
        let s = simulate_ground_target(EPOCH, &run(10.0, 5000), &det, 3).unwrap();
        let base = estimate_instrument_offset(&s, 300.0, 0.1).unwrap();
        for shift_ps in [1u64, 37, 1234, 50_000] {
            let shifted: Vec<_> = s
                .events()
                .iter()
                .map(|e| match e.channel {
                    Channel::Return => PhotonEvent::new(e.timestamp + shift_ps, e.channel),
                    _ => *e,
                })
                .collect();
            let shifted = TimeTagStream::from_unsorted(EPOCH, shifted);
            let est = estimate_instrument_offset(&shifted, 300.0, 0.1).unwrap();
            assert_relative_eq!(est.offset_ns - base.offset_ns, shift_ps as f64 * 1e-3, epsilon = 1e-9);
            assert_relative_eq!(est.fwhm_ns, base.fwhm_ns, epsilon = 1e-9);
        }
    }
}
