//! Seeded generators for synthetic time-tag streams.
//!
//! Every generator owns a `ChaCha8Rng` seeded from the caller's seed, so
//! identical inputs give bit-identical streams on every platform.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Channel, PhotonEvent, TimeTagStream};
use crate::constants::{fwhm_to_sigma, PS_PER_NS, PS_PER_S};
use crate::error::{require_positive, Error, Result};
use crate::geometry::{time_of_flight, PassGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Gaussian timing jitter σ (ps).
    pub jitter_sigma_ps: f64,
    /// Non-paralysable dead time of the detector (ps).
    pub dead_time_ps: f64,
    /// Dark count rate (s⁻¹), emitted on the background channel.
    pub dark_rate: f64,
}

impl DetectorModel {
    pub const IDEAL: Self = Self {
        jitter_sigma_ps: 0.0,
        dead_time_ps: 0.0,
        dark_rate: 0.0,
    };

    /// Detector whose jitter is given as a FWHM in nanoseconds.
    pub fn from_fwhm_ns(jitter_fwhm_ns: f64, dead_time_ns: f64, dark_rate: f64) -> Self {
        Self {
            jitter_sigma_ps: fwhm_to_sigma(jitter_fwhm_ns) * PS_PER_NS,
            dead_time_ps: dead_time_ns * PS_PER_NS,
            dark_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("jitter_sigma_ps", self.jitter_sigma_ps),
            ("dead_time_ps", self.dead_time_ps),
            ("dark_rate", self.dark_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and ≥ 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Log-normal intensity scintillation driven by an Ornstein–Uhlenbeck
/// log-amplitude, normalised to unit mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScintillationModel {
    /// Standard deviation of the log-intensity.
    pub log_sigma: f64,
    /// Correlation time of the log-intensity (s).
    pub correlation_time: f64,
}

impl ScintillationModel {
    pub const NONE: Self = Self {
        log_sigma: 0.0,
        correlation_time: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.log_sigma.is_finite() && self.log_sigma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "log_sigma",
                reason: format!("must be finite and ≥ 0, got {}", self.log_sigma),
            });
        }
        require_positive("correlation_time", self.correlation_time)
    }

    fn factors_with(&self, n: usize, dt: f64, rng: &mut impl Rng) -> Vec<f64> {
        let sigma = self.log_sigma;
        if sigma == 0.0 {
            return vec![1.0; n];
        }
        let a = (-dt / self.correlation_time).exp();
        let innovation = sigma * (1.0 - a * a).sqrt();
        let mut x = sigma * rng.sample::<f64, _>(StandardNormal);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push((x - 0.5 * sigma * sigma).exp());
            x = a * x + innovation * rng.sample::<f64, _>(StandardNormal);
        }
        out
    }

    /// `n` successive intensity factors spaced `dt` seconds apart.
    pub fn sample_factors(&self, n: usize, dt: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.factors_with(n, dt, &mut rng)
    }
}

/// A sinusoidal intensity modulation `1 + depth·sin(2πft)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub frequency: f64,
    pub depth: f64,
}

/// A laser-ranging run over part of a pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassRun {
    pub pass: PassGeometry,
    /// Absolute pass time of the first fire (s).
    pub t_start: f64,
    /// Run length (s).
    pub duration: f64,
    pub rep_rate: f64,
    /// Constant timing bias added to every return (s).
    pub instrument_offset: f64,
}

impl PassRun {
    pub fn n_fires(&self) -> usize {
        (self.duration * self.rep_rate + 1e-9).floor().max(0.0) as usize
    }

    /// Pass time (s) of a stream timestamp.
    pub fn pass_time(&self, timestamp_ps: u64) -> f64 {
        self.t_start + timestamp_ps as f64 / PS_PER_S
    }
}

/// A calibration run against a fixed ground target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTargetRun {
    /// One-way distance (m).
    pub distance: f64,
    /// Constant timing bias added to every return (s).
    pub instrument_offset: f64,
    pub rep_rate: f64,
    pub n_pulses: usize,
    /// Probability that a fire produces a detected return.
    pub return_probability: f64,
}

/// A stellar photon-counting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarRun {
    /// Mean detected rate (s⁻¹).
    pub rate: f64,
    pub duration: f64,
    pub scintillation: ScintillationModel,
    pub tones: Vec<Tone>,
}

fn to_ps(seconds: f64) -> u64 {
    round_ps(seconds * PS_PER_S)
}

/// Rounds a picosecond value half-to-even, clamping at zero.
fn round_ps(ps: f64) -> u64 {
    let ps = ps.round_ties_even();
    if ps <= 0.0 {
        0
    } else {
        ps as u64
    }
}

fn fire_timestamp(k: usize, rep_rate: f64) -> u64 {
    to_ps(k as f64 / rep_rate)
}

/// Uniform Poisson arrivals on `[0, duration)` seconds.
fn poisson_arrivals(rate: f64, duration: f64, rng: &mut impl Rng) -> Vec<u64> {
    if rate <= 0.0 || duration <= 0.0 {
        return Vec::new();
    }
    let n = sample_poisson(rate * duration, rng);
    let mut ts: Vec<u64> = (0..n).map(|_| to_ps(rng.random::<f64>() * duration)).collect();
    ts.sort_unstable();
    ts
}

fn sample_poisson(mean: f64, rng: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}

/// Applies detector dead time to sorted detection timestamps.
fn apply_dead_time(events: &mut Vec<PhotonEvent>, dead_time_ps: f64) {
    if dead_time_ps <= 0.0 {
        return;
    }
    let mut last: Option<u64> = None;
    events.retain(|e| match last {
        Some(t) if ((e.timestamp - t) as f64) < dead_time_ps => false,
        _ => {
            last = Some(e.timestamp);
            true
        }
    });
}

fn assemble(
    epoch: &str,
    fires: Vec<PhotonEvent>,
    mut detections: Vec<PhotonEvent>,
    det: &DetectorModel,
    duration_ps: u64,
) -> TimeTagStream {
    detections.sort_by_key(|e| (e.timestamp, e.channel));
    apply_dead_time(&mut detections, det.dead_time_ps);
    let mut events = fires;
    events.extend(detections);
    TimeTagStream::from_unsorted(epoch, events).with_duration_ps(duration_ps)
}

fn jitter(det: &DetectorModel) -> Option<Normal<f64>> {
    (det.jitter_sigma_ps > 0.0).then(|| Normal::new(0.0, det.jitter_sigma_ps).expect("σ > 0"))
}

/// Fires at `1/rep_rate` spacing along a pass with returns at the two-way
/// time of flight, detected with probability `min(1, N_pe(range))`.
pub fn simulate_pass_returns(
    epoch: &str,
    run: &PassRun,
    expected_photoelectrons: impl Fn(f64) -> f64,
    det: &DetectorModel,
    seed: u64,
) -> Result<TimeTagStream> {
    require_positive("rep_rate", run.rep_rate)?;
    det.validate()?;
    let n = run.n_fires();
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = jitter(det);
    let mut fires = Vec::with_capacity(n);
    let mut detections = Vec::with_capacity(n);
    for k in 0..n {
        let fire_ps = fire_timestamp(k, run.rep_rate);
        let range = run.pass.slant_range(run.pass_time(fire_ps))?;
        fires.push(PhotonEvent::new(fire_ps, Channel::Fire));
        let p = expected_photoelectrons(range).clamp(0.0, 1.0);
        if rng.random::<f64>() < p {
            let mut delay_ps = (time_of_flight(range) + run.instrument_offset) * PS_PER_S;
            if let Some(j) = &jitter {
                delay_ps += j.sample(&mut rng);
            }
            detections.push(PhotonEvent::new(round_ps(fire_ps as f64 + delay_ps), Channel::Return));
        }
    }
    let duration = n as f64 / run.rep_rate;
    detections.extend(
        poisson_arrivals(det.dark_rate, duration, &mut rng)
            .into_iter()
            .map(|t| PhotonEvent::new(t, Channel::Background)),
    );
    Ok(assemble(epoch, fires, detections, det, to_ps(duration)))
}

/// Fires at a fixed ground target; returns land at `2d/c + offset` plus jitter.
pub fn simulate_ground_target(
    epoch: &str,
    run: &GroundTargetRun,
    det: &DetectorModel,
    seed: u64,
) -> Result<TimeTagStream> {
    require_positive("distance", run.distance)?;
    require_positive("rep_rate", run.rep_rate)?;
    if !(run.instrument_offset.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "instrument_offset",
            reason: "must be finite".into(),
        });
    }
    if !(0.0..=1.0).contains(&run.return_probability) {
        return Err(Error::InvalidParameter {
            name: "return_probability",
            reason: format!("must lie in [0, 1], got {}", run.return_probability),
        });
    }
    det.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = jitter(det);
    let delay_ps = (time_of_flight(run.distance) + run.instrument_offset) * PS_PER_S;
    let mut fires = Vec::with_capacity(run.n_pulses);
    let mut detections = Vec::with_capacity(run.n_pulses);
    for k in 0..run.n_pulses {
        let fire_ps = fire_timestamp(k, run.rep_rate);
        fires.push(PhotonEvent::new(fire_ps, Channel::Fire));
        if run.return_probability < 1.0 && rng.random::<f64>() >= run.return_probability {
            continue;
        }
        let mut t = fire_ps as f64 + delay_ps;
        if let Some(j) = &jitter {
            t += j.sample(&mut rng);
        }
        detections.push(PhotonEvent::new(round_ps(t), Channel::Return));
    }
    let duration = run.n_pulses as f64 / run.rep_rate;
    detections.extend(
        poisson_arrivals(det.dark_rate, duration, &mut rng)
            .into_iter()
            .map(|t| PhotonEvent::new(t, Channel::Background)),
    );
    Ok(assemble(epoch, fires, detections, det, to_ps(duration)))
}

/// Uniform background photons at `rate` over `duration` seconds.
pub fn simulate_background(epoch: &str, rate: f64, duration: f64, seed: u64) -> Result<TimeTagStream> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "rate",
            reason: format!("must be finite and ≥ 0, got {rate}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = poisson_arrivals(rate, duration, &mut rng)
        .into_iter()
        .map(|t| PhotonEvent::new(t, Channel::Background))
        .collect();
    Ok(TimeTagStream::from_unsorted(epoch, events).with_duration_ps(to_ps(duration.max(0.0))))
}

/// Inhomogeneous Poisson photon stream from a scintillating, optionally
/// modulated star. Photons are emitted on the return channel.
pub fn simulate_star_counts(epoch: &str, run: &StarRun, seed: u64) -> Result<TimeTagStream> {
    require_positive("rate", run.rate)?;
    run.scintillation.validate()?;
    if !(run.duration.is_finite() && run.duration >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "duration",
            reason: format!("must be finite and ≥ 0, got {}", run.duration),
        });
    }
    for tone in &run.tones {
        require_positive("tone frequency", tone.frequency)?;
        if !(tone.depth.is_finite() && tone.depth >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tone depth",
                reason: format!("must be finite and ≥ 0, got {}", tone.depth),
            });
        }
    }
    if run.duration == 0.0 {
        return Ok(TimeTagStream::empty(epoch).with_duration_ps(0));
    }

    // Intensity is held constant over steps short against every time scale.
    let mut dt: f64 = 1e-3;
    if run.scintillation.log_sigma > 0.0 {
        dt = dt.min(run.scintillation.correlation_time / 10.0);
    }
    for tone in &run.tones {
        dt = dt.min(1.0 / (20.0 * tone.frequency));
    }
    let n_steps = (run.duration / dt).ceil() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scint = run.scintillation.factors_with(n_steps, dt, &mut rng);
    let mut events = Vec::with_capacity((run.rate * run.duration * 1.1) as usize + 16);
    for (i, factor) in scint.iter().enumerate() {
        let t0 = i as f64 * dt;
        let width = dt.min(run.duration - t0);
        if width <= 0.0 {
            break;
        }
        let mid = t0 + 0.5 * width;
        let modulation: f64 = 1.0
            + run
                .tones
                .iter()
                .map(|tone| tone.depth * (2.0 * PI * tone.frequency * mid).sin())
                .sum::<f64>();
        let mean = run.rate * factor * modulation.max(0.0) * width;
        let n = sample_poisson(mean, &mut rng);
        let start = events.len();
        for _ in 0..n {
            let t = t0 + rng.random::<f64>() * width;
            events.push(PhotonEvent::new(to_ps(t), Channel::Return));
        }
        events[start..].sort_unstable_by_key(|e| e.timestamp);
    }
    Ok(TimeTagStream::from_sorted(epoch, events)?.with_duration_ps(to_ps(run.duration)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CircularOrbit;

    const EPOCH: &str = "2000-01-01T00:00:00Z";

    fn lageos_run(duration: f64) -> PassRun {
        let pass = PassGeometry::new(CircularOrbit::earth(5.9e6).unwrap(), 75f64.to_radians(), 0.0).unwrap();
        PassRun {
            pass,
            t_start: -0.5 * duration,
            duration,
            rep_rate: 10.0,
            instrument_offset: 0.0,
        }
    }

    #[test]
    fn certain_detection_without_jitter_is_exact() {
        let run = lageos_run(60.0);
        let s = simulate_pass_returns(EPOCH, &run, |_| 5.0, &DetectorModel::IDEAL, 1).unwrap();
        assert_eq!(s.count(Channel::Fire), 600);
        assert_eq!(s.count(Channel::Return), 600);
        let fires: Vec<_> = s.channel(Channel::Fire).copied().collect();
        let returns: Vec<_> = s.channel(Channel::Return).copied().collect();
        for (f, r) in fires.iter().zip(&returns) {
            let range = run.pass.slant_range(run.pass_time(f.timestamp)).unwrap();
            let expected = round_ps(f.timestamp as f64 + time_of_flight(range) * PS_PER_S);
            assert_eq!(r.timestamp, expected);
        }
    }

    #[test]
    fn forty_minutes_at_ten_hertz() {
        let s = simulate_pass_returns(EPOCH, &lageos_run(2400.0), |_| 0.0, &DetectorModel::IDEAL, 1).unwrap();
        assert_eq!(s.count(Channel::Fire), 24000);
        assert_eq!(s.count(Channel::Return), 0);
    }

    #[test]
    fn thinned_return_count_within_binomial_band() {
        // p = 0.1, N = 10⁴: mean 1000, σ = sqrt(900) = 30, 3σ band [910, 1090]
        // sits inside the quoted [850, 1150].
        let run = lageos_run(1000.0);
        for seed in 0..20 {
            let s = simulate_pass_returns(EPOCH, &run, |_| 0.1, &DetectorModel::IDEAL, seed).unwrap();
            let n = s.count(Channel::Return);
            assert!((850..=1150).contains(&n), "seed {seed}: {n}");
        }
    }

    #[test]
    fn empty_window_is_an_error() {
        let run = lageos_run(0.05);
        assert_eq!(
            simulate_pass_returns(EPOCH, &run, |_| 1.0, &DetectorModel::IDEAL, 0),
            Err(Error::EmptyWindow)
        );
    }

    #[test]
    fn ground_target_times_of_flight() {
        for (distance, ns) in [(45.25, 301.876), (192.47, 1284.03)] {
            let run = GroundTargetRun {
                distance,
                instrument_offset: 0.0,
                rep_rate: 17e3,
                n_pulses: 50,
                return_probability: 1.0,
            };
            let s = simulate_ground_target(EPOCH, &run, &DetectorModel::IDEAL, 3).unwrap();
            let fires: Vec<_> = s.channel(Channel::Fire).collect();
            let returns: Vec<_> = s.channel(Channel::Return).collect();
            assert_eq!(returns.len(), 50);
            for (f, r) in fires.iter().zip(&returns) {
                let dt_ns = (r.timestamp - f.timestamp) as f64 / 1e3;
                assert!((dt_ns - ns).abs() < 0.01, "{dt_ns}");
            }
        }
        let bad = GroundTargetRun {
            distance: -1.0,
            instrument_offset: 0.0,
            rep_rate: 17e3,
            n_pulses: 1,
            return_probability: 1.0,
        };
        assert!(simulate_ground_target(EPOCH, &bad, &DetectorModel::IDEAL, 0).is_err());
    }

    #[test]
    fn determinism() {
        let run = GroundTargetRun {
            distance: 45.25,
            instrument_offset: 116.1e-9,
            rep_rate: 17e3,
            n_pulses: 2000,
            return_probability: 0.7,
        };
        let det = DetectorModel::from_fwhm_ns(1.3, 50.0, 1e4);
        let a = simulate_ground_target(EPOCH, &run, &det, 42).unwrap();
        let b = simulate_ground_target(EPOCH, &run, &det, 42).unwrap();
        let c = simulate_ground_target(EPOCH, &run, &det, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let star = StarRun {
            rate: 1e4,
            duration: 2.0,
            scintillation: ScintillationModel { log_sigma: 0.3, correlation_time: 0.01 },
            tones: vec![Tone { frequency: 18.0, depth: 0.5 }],
        };
        assert_eq!(
            simulate_star_counts(EPOCH, &star, 9).unwrap(),
            simulate_star_counts(EPOCH, &star, 9).unwrap()
        );
    }

    #[test]
    fn dead_time_separates_detections() {
        let run = GroundTargetRun {
            distance: 45.25,
            instrument_offset: 0.0,
            rep_rate: 17e3,
            n_pulses: 5000,
            return_probability: 1.0,
        };
        let det = DetectorModel { jitter_sigma_ps: 500.0, dead_time_ps: 100_000.0, dark_rate: 2e5 };
        let s = simulate_ground_target(EPOCH, &run, &det, 5).unwrap();
        for ch in [Channel::Return, Channel::Background] {
            let ts: Vec<u64> = s.channel(ch).map(|e| e.timestamp).collect();
            assert!(ts.windows(2).all(|w| (w[1] - w[0]) as f64 >= det.dead_time_ps));
        }
        assert!(s.events().windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn homogeneous_star_count_within_three_sigma() {
        let star = StarRun {
            rate: 5e4,
            duration: 3.0,
            scintillation: ScintillationModel::NONE,
            tones: vec![],
        };
        let s = simulate_star_counts(EPOCH, &star, 11).unwrap();
        let mean = 1.5e5_f64;
        assert!((s.len() as f64 - mean).abs() <= 3.0 * mean.sqrt(), "{}", s.len());
        assert!(s.events().iter().all(|e| e.timestamp < 3_000_000_000_000));
    }

    #[test]
    fn zero_duration_star_run_is_empty() {
        let star = StarRun {
            rate: 5e4,
            duration: 0.0,
            scintillation: ScintillationModel::NONE,
            tones: vec![],
        };
        assert!(simulate_star_counts(EPOCH, &star, 1).unwrap().is_empty());
    }

    #[test]
    fn scintillation_factor_has_unit_mean() {
        let model = ScintillationModel { log_sigma: 0.5, correlation_time: 0.01 };
        let f = model.sample_factors(1_000_000, 0.01, 7);
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!(f.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn rounding_is_half_to_even() {
        assert_eq!(round_ps(2.5), 2);
        assert_eq!(round_ps(3.5), 4);
        assert_eq!(round_ps(-0.4), 0);
        assert_eq!(to_ps(-1.0), 0);
    }
}
