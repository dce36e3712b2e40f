//! Signal recovery from time-tag streams.
//!
//! The usual flow is: pair fires with returns, fit a Chebyshev series to the
//! measured time of flight ([`fit`]), gate the stream around the predicted
//! arrival times ([`coincidence`]), and calibrate the constant instrument
//! delay against a ground target of known distance ([`calibration`]).

pub mod calibration;
pub mod coincidence;
pub mod fit;

pub use calibration::{estimate_instrument_offset, Histogram, OffsetEstimate, DEFAULT_CALIBRATION_BIN_NS};
pub use coincidence::{
    coincidence_filter, expected_background_per_pulse, return_rate, CoincidenceReport, GateResidual,
    DEFAULT_WINDOW_FWHM_MULTIPLE,
};
pub use fit::{fit_tof_polynomial, predict_tof, RangeFit, RangeObservation, MAX_FIT_DEGREE};

use crate::timetag::{Channel, TimeTagStream};

/// Pairs every return with the most recent preceding fire, as
/// `(fire_ps, return_ps)`. Returns before the first fire are dropped.
pub fn fire_return_pairs(stream: &TimeTagStream) -> Vec<(u64, u64)> {
    let mut last_fire = None;
    let mut pairs = Vec::new();
    for e in stream.events() {
        match e.channel {
            Channel::Fire => last_fire = Some(e.timestamp),
            Channel::Return => {
                if let Some(f) = last_fire {
                    pairs.push((f, e.timestamp));
                }
            }
            Channel::Background => {}
        }
    }
    pairs
}

/// Range observations (fire epoch in seconds, time of flight in ns) from the
/// first return after each fire.
pub fn range_observations(stream: &TimeTagStream) -> Vec<RangeObservation> {
    let mut out: Vec<RangeObservation> = Vec::new();
    let mut last_fire_seen = None;
    for (fire, ret) in fire_return_pairs(stream) {
        if last_fire_seen == Some(fire) {
            continue;
        }
        last_fire_seen = Some(fire);
        out.push(RangeObservation {
            fire_epoch: fire as f64 * 1e-12,
            measured_tof: (ret - fire) as f64 * 1e-3,
        });
    }
    out
}
