//! Binned photon counts: periodograms, line detection and dispersion tests.
//!
//! The periodogram of a series `c_0 … c_{n−1}` with bin width `w` is
//!
//! ```text
//! P(f_k) = |Σ_j (c_j − c̄)·exp(−2πi·k·j/n)|² / n,   f_k = k/(n·w),   0 ≤ k ≤ n/2
//! ```
//!
//! so the two-sided sum of `P` equals `n` times the population variance.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{require_positive, Error, Result};
use crate::timetag::TimeTagStream;

/// Significance level of [`dispersion_test`].
pub const DISPERSION_SIGNIFICANCE: f64 = 0.01;

/// Minimum series length accepted by [`dispersion_test`].
pub const DISPERSION_MIN_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    /// Bin width (s).
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Start of bin 0 (s since the run epoch).
    pub start: f64,
}

impl CountSeries {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() as f64 / self.counts.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.counts.iter().map(|&c| (c as f64 - m).powi(2)).sum::<f64>() / self.counts.len() as f64
    }

    /// Sums adjacent pairs of bins; a trailing odd bin is kept alone.
    pub fn rebin_pairs(&self) -> CountSeries {
        CountSeries {
            bin_width: 2.0 * self.bin_width,
            counts: self.counts.chunks(2).map(|c| c.iter().sum()).collect(),
            start: self.start,
        }
    }

    /// CSV with columns `t_s,count` (bin start times).
    pub fn csv(&self) -> String {
        let mut out = String::from("t_s,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{:.6},{}\n", self.start + i as f64 * self.bin_width, c));
        }
        out
    }
}

/// Bins every detection (fires excluded) on `[0, duration)` where the
/// duration is the stream's nominal length, or just past the last event.
pub fn bin_events(stream: &TimeTagStream, bin_width: f64) -> Result<CountSeries> {
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    let end_ps = stream
        .duration_ps()
        .unwrap_or_else(|| stream.events().last().map_or(0, |e| e.timestamp) + 1);
    bin_events_range(stream, bin_width, 0, end_ps)
}

/// Bins detections with timestamps in `[start_ps, end_ps)`.
pub fn bin_events_range(stream: &TimeTagStream, bin_width: f64, start_ps: u64, end_ps: u64) -> Result<CountSeries> {
    require_positive("bin_width", bin_width)?;
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    let width_ps = (bin_width * 1e12).round();
    if width_ps < 1.0 {
        return Err(Error::InvalidParameter {
            name: "bin_width",
            reason: "must be at least one picosecond".into(),
        });
    }
    let width_ps = width_ps as u64;
    if end_ps <= start_ps {
        return Err(Error::InvalidParameter {
            name: "end_ps",
            reason: "binning range is empty".into(),
        });
    }
    let n = (end_ps - start_ps).div_ceil(width_ps) as usize;
    let mut counts = vec![0u64; n];
    for e in stream.events() {
        if !e.channel.is_detection() || e.timestamp < start_ps || e.timestamp >= end_ps {
            continue;
        }
        counts[((e.timestamp - start_ps) / width_ps) as usize] += 1;
    }
    Ok(CountSeries {
        bin_width: width_ps as f64 * 1e-12,
        counts,
        start: start_ps as f64 * 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    /// `f_k = k / (n·w)` for `k = 0 … n/2` (Hz).
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    /// Frequency spacing `1/(n·w)` (Hz).
    pub resolution: f64,
    /// Length of the underlying series.
    pub n: usize,
}

impl Periodogram {
    /// Sum of power over the full two-sided grid `k = 0 … n−1`.
    pub fn two_sided_total(&self) -> f64 {
        let n = self.n;
        self.power
            .iter()
            .enumerate()
            .map(|(k, &p)| if k == 0 || (n.is_multiple_of(2) && k == n / 2) { p } else { 2.0 * p })
            .sum()
    }

    /// CSV with columns `frequency_hz,power`.
    pub fn csv(&self) -> String {
        let mut out = String::from("frequency_hz,power\n");
        for (f, p) in self.frequencies.iter().zip(&self.power) {
            out.push_str(&format!("{f:.6},{p:e}\n"));
        }
        out
    }
}

/// Mean-subtracted periodogram of a count series.
pub fn periodogram(series: &CountSeries) -> Result<Periodogram> {
    let n = series.counts.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let mean = series.mean();
    let mut buf: Vec<Complex<f64>> = series
        .counts
        .iter()
        .map(|&c| Complex::new(c as f64 - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let resolution = 1.0 / (n as f64 * series.bin_width);
    let half = n / 2;
    Ok(Periodogram {
        frequencies: (0..=half).map(|k| k as f64 * resolution).collect(),
        power: buf[..=half].iter().map(|z| z.norm_sqr() / n as f64).collect(),
        resolution,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub frequency: f64,
    pub power: f64,
    /// Power relative to the median power.
    pub snr: f64,
    /// Fundamental this line is a harmonic of, if any.
    pub is_harmonic_of: Option<f64>,
}

/// Local maxima above `snr_threshold × median(power)`, strongest first.
///
/// A line within one resolution element of an integer multiple (≥ 2) of a
/// stronger detected line is flagged as its harmonic.
pub fn detect_lines(pg: &Periodogram, snr_threshold: f64) -> Result<Vec<SpectralLine>> {
    if !(snr_threshold > 1.0) {
        return Err(Error::InvalidParameter {
            name: "snr_threshold",
            reason: format!("must exceed 1, got {snr_threshold}"),
        });
    }
    let p = &pg.power;
    if p.len() < 3 {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<f64> = p[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    if !(median > 0.0) {
        return Ok(Vec::new());
    }
    let threshold = snr_threshold * median;

    let last = p.len() - 1;
    let mut lines: Vec<SpectralLine> = (1..=last)
        .filter(|&k| {
            let left = p[k - 1];
            let right = if k < last { p[k + 1] } else { f64::NEG_INFINITY };
            p[k] > threshold && p[k] > left && p[k] > right
        })
        .map(|k| SpectralLine {
            frequency: pg.frequencies[k],
            power: p[k],
            snr: p[k] / median,
            is_harmonic_of: None,
        })
        .collect();
    lines.sort_by(|a, b| b.power.total_cmp(&a.power).then(a.frequency.total_cmp(&b.frequency)));

    let tolerance = pg.resolution * (1.0 + 1e-9);
    for i in 1..lines.len() {
        let f = lines[i].frequency;
        lines[i].is_harmonic_of = lines[..i].iter().map(|l| l.frequency).find(|&f0| {
            let m = (f / f0).round();
            m >= 2.0 && (f - m * f0).abs() <= tolerance
        });
    }
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    pub fano_factor: f64,
    pub poisson_plausible: bool,
    /// `(n − 1)·s²/mean`, χ² with n − 1 degrees of freedom under Poisson.
    pub statistic: f64,
    /// Two-sided acceptance band for `statistic`.
    pub band: (f64, f64),
}

/// Variance-to-mean ratio and a two-sided χ² dispersion test at 1 %.
pub fn dispersion_test(series: &CountSeries) -> Result<DispersionResult> {
    let n = series.counts.len();
    if n < DISPERSION_MIN_BINS {
        return Err(Error::TooShort {
            needed: DISPERSION_MIN_BINS,
            got: n,
        });
    }
    let dof = (n - 1) as f64;
    let chi2 = ChiSquared::new(dof).expect("dof > 0");
    let band = (
        chi2.inverse_cdf(0.5 * DISPERSION_SIGNIFICANCE),
        chi2.inverse_cdf(1.0 - 0.5 * DISPERSION_SIGNIFICANCE),
    );
    let mean = series.mean();
    if mean == 0.0 {
        return Ok(DispersionResult {
            fano_factor: 0.0,
            poisson_plausible: false,
            statistic: 0.0,
            band,
        });
    }
    let sample_var = series.variance() * n as f64 / dof;
    let statistic = dof * sample_var / mean;
    Ok(DispersionResult {
        fano_factor: sample_var / mean,
        poisson_plausible: statistic >= band.0 && statistic <= band.1,
        statistic,
        band,
    })
}
