//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlink::analysis::{
    coincidence_filter, estimate_instrument_offset, fit_tof_polynomial, range_observations, RangeObservation,
};
use qlink::constants::ARCSEC;
use qlink::counts::{bin_events, detect_lines, dispersion_test, periodogram};
use qlink::geometry::time_of_flight;
use qlink::link_budget::{
    footprint_diameter, geometric_intercept, photons_per_pulse, radar_equation, step_chain_efficiency,
    LinkScenario, OpticalChain, StepChain, TargetSpec, TransmitterSpec,
};
use qlink::scenario::preset;
use qlink::stellar::expected_count_rate;
use qlink::timetag::{
    merge_streams, simulate_background, simulate_ground_target, simulate_pass_returns, simulate_star_counts,
    DetectorModel, PhotonEvent, ScintillationModel, StarRun, TimeTagStream, Tone,
};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const PLANCK: f64 = 6.626_070_15e-34;
const EPOCH: &str = "2000-01-01T00:00:00Z";

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn spot_size() -> Outcome {
    let d = footprint_diameter(ARCSEC, 6e6);
    let oracle = 6e6 * std::f64::consts::PI / (180.0 * 3600.0);
    outcome(
        rel(d, 29.1) <= 0.01 && rel(d, oracle) <= 1e-12,
        format!("1 arcsec at 6000 km = {d:.4} m (target 29.1 m, tol 1%)"),
    )
}

fn intercepts() -> Outcome {
    let up = geometric_intercept(0.6, 29.0).fraction;
    let down = geometric_intercept(1.5, 100.0).fraction;
    let (up_oracle, down_oracle) = (0.36 / 841.0, 2.25 / 10_000.0);
    outcome(
        rel(up, up_oracle) <= 1e-3 && rel(down, down_oracle) <= 1e-3 && rel(up, 4.28e-4) <= 1e-3,
        format!("uplink {up:.4e} (analytic {up_oracle:.4e}), downlink {down:.4e} (analytic {down_oracle:.4e}), tol 0.1%"),
    )
}

fn random_link(rng: &mut ChaCha8Rng) -> LinkScenario {
    LinkScenario {
        tx: TransmitterSpec {
            pulse_energy: rng.random_range(1e-3..1.0),
            wavelength: rng.random_range(4e-7..1.6e-6),
            divergence: rng.random_range(1.0..20.0) * ARCSEC,
            rep_rate: rng.random_range(1.0..1e4),
        },
        target: TargetSpec {
            effective_diameter: rng.random_range(0.1..2.0),
            retro_count: rng.random_range(1..500),
            retro_diameter: rng.random_range(0.01..0.05),
            active_retro_fraction: rng.random_range(0.01..1.0),
            return_divergence: rng.random_range(1.0..10.0) * ARCSEC,
            cross_section: None,
        },
        chain: OpticalChain {
            eta_q: rng.random_range(0.01..1.0),
            eta_t: rng.random_range(0.01..1.0),
            eta_r: rng.random_range(0.01..1.0),
            t_a: rng.random_range(0.01..1.0),
            t_c: rng.random_range(0.01..1.0),
        },
        rx_aperture_diameter: rng.random_range(0.1..2.0),
        spreading_factor: rng.random_range(0.001..1.0),
    }
}

fn inverse_fourth_power() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let link = random_link(&mut rng);
        let r = rng.random_range(4e5..4e7);
        let near = radar_equation(&link, r).unwrap().photoelectrons;
        let far = radar_equation(&link, 2.0 * r).unwrap().photoelectrons;
        worst = worst.max(rel(far, near / 16.0));
    }
    outcome(
        worst <= 1e-10,
        format!("100 random scenarios: worst |N(2R)·16/N(R) − 1| = {worst:.2e} (tol 1e-10)"),
    )
}

fn narrative_chain() -> Outcome {
    let oracle = 4.3e-4 * 0.1 * 2.3e-4;
    let plain = StepChain::from_fractions(4.3e-4, 0.1, 2.3e-4, 1.0).efficiency();
    let spread = StepChain::from_fractions(4.3e-4, 0.1, 2.3e-4, 1e-2).efficiency();
    let s = preset("lageos-mlro").unwrap();
    let geometric = step_chain_efficiency(
        &s.transmitter_spec().unwrap(),
        &s.target_spec().unwrap(),
        6e6,
        1.5,
        1.0,
    )
    .unwrap();
    outcome(
        rel(plain, 9.9e-9) <= 0.02 && rel(plain, oracle) <= 1e-12 && rel(spread, 1e-10) <= 0.05,
        format!(
            "chain {plain:.4e} (target 9.9e-9, tol 2%), with spreading 1e-2 {spread:.4e} (target 1e-10, tol 5%); unrounded geometry gives {geometric:.4e}"
        ),
    )
}

fn photons() -> Outcome {
    let tx = TransmitterSpec {
        pulse_energy: 0.1,
        wavelength: 532e-9,
        divergence: ARCSEC,
        rep_rate: 10.0,
    };
    let n = photons_per_pulse(&tx);
    let oracle = 0.1 * 532e-9 / (PLANCK * SPEED_OF_LIGHT);
    outcome(
        rel(n, oracle) <= 5e-3 && rel(n, 2.68e17) <= 5e-3,
        format!("100 mJ at 532 nm = {n:.4e} photons (hand value {oracle:.4e}, tol 0.5%)"),
    )
}

fn ground_target_tof() -> Outcome {
    let c = time_of_flight(45.25) * 1e9;
    let b = time_of_flight(192.47) * 1e9;
    outcome(
        rel(c, 301.9) <= 5e-4 && rel(b, 1284.0) <= 5e-4,
        format!("target C {c:.3} ns (301.9), target B {b:.3} ns (1284.0), tol 0.05%"),
    )
}

fn calibration_closure() -> Outcome {
    let s = preset("ground-target-c").unwrap();
    let run = s.ground_target_run().unwrap();
    let det = s.detector_model();
    let tof_ns = time_of_flight(run.distance) * 1e9;
    let mut worst_offset: f64 = 0.0;
    let mut worst_fwhm: f64 = 0.0;
    for seed in 0..20 {
        let stream = simulate_ground_target(EPOCH, &run, &det, seed).unwrap();
        let est = estimate_instrument_offset(&stream, tof_ns, 0.1).unwrap();
        worst_offset = worst_offset.max((est.offset_ns - 116.1).abs());
        worst_fwhm = worst_fwhm.max((est.fwhm_ns - 1.3).abs());
    }
    outcome(
        worst_offset <= 0.1 && worst_fwhm <= 0.2,
        format!("20 seeds: worst offset error {worst_offset:.4} ns (tol 0.1), worst FWHM error {worst_fwhm:.4} ns (tol 0.2)"),
    )
}

fn orbit_fit_closure() -> Outcome {
    let s = preset("lageos-mlro").unwrap();
    let run = s.pass_run().unwrap();
    let det = DetectorModel {
        jitter_sigma_ps: 1000.0,
        dead_time_ps: 0.0,
        dark_rate: 0.0,
    };
    let stream = simulate_pass_returns(EPOCH, &run, |_| 1.0, &det, 8).unwrap();
    let obs = range_observations(&stream);
    match fit_tof_polynomial(&obs, 60) {
        Ok(fit) => outcome(
            obs.len() == 24_000 && fit.rms_residual_ns <= 3.0,
            format!("{} samples, degree 60: rms residual {:.4} ns (limit 3 ns)", obs.len(), fit.rms_residual_ns),
        ),
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

/// Fires at 10 kHz with a constant-ToF prediction.
fn fire_stream(n: usize, rep_rate: f64) -> (TimeTagStream, qlink::analysis::RangeFit) {
    let events: Vec<PhotonEvent> = (0..n)
        .map(|k| PhotonEvent::new((k as f64 * 1e12 / rep_rate).round() as u64, qlink::timetag::Channel::Fire))
        .collect();
    let obs: Vec<RangeObservation> = events
        .iter()
        .map(|e| RangeObservation {
            fire_epoch: e.seconds(),
            measured_tof: 20_000.0,
        })
        .collect();
    let stream = TimeTagStream::from_sorted(EPOCH, events)
        .unwrap()
        .with_duration_ps((n as f64 * 1e12 / rep_rate) as u64);
    (stream, fit_tof_polynomial(&obs, 0).unwrap())
}

fn coincidence_properties() -> Outcome {
    let (n_fires, rep_rate, bg_rate, window_ns) = (10_000usize, 1e4, 1e5, 100.0);
    let (fires, fit) = fire_stream(n_fires, rep_rate);
    let p = bg_rate * window_ns * 1e-9;
    let mean = n_fires as f64 * p;
    let sigma = (n_fires as f64 * p * (1.0 - p)).sqrt();
    let mut worst_z: f64 = 0.0;
    let mut monotone = true;
    for seed in 0..20 {
        let bg = simulate_background(EPOCH, bg_rate, n_fires as f64 / rep_rate, seed).unwrap();
        let stream = merge_streams(&fires, &bg).unwrap();
        let rep = coincidence_filter(&stream, &fit, window_ns, 0.0).unwrap();
        worst_z = worst_z.max((rep.n_accepted_background as f64 - mean).abs() / sigma);

        let mut last = 0;
        for w in [1.0, 5.0, 20.0, 50.0, 100.0, 500.0, 2000.0] {
            let r = coincidence_filter(&stream, &fit, w, 0.0).unwrap();
            monotone &= r.n_signal_candidates >= last && r.accepted.len() == r.n_signal_candidates;
            last = r.n_signal_candidates;
        }
    }
    outcome(
        worst_z <= 3.0 && monotone,
        format!("20 seeds: background acceptance worst |z| = {worst_z:.2} around b·w·N = {mean:.1} (limit 3σ); acceptance monotone in window: {monotone}"),
    )
}

fn spectral_lines() -> Outcome {
    let base = StarRun {
        rate: 2e4,
        duration: 91.0,
        scintillation: ScintillationModel {
            log_sigma: 0.1,
            correlation_time: 0.01,
        },
        tones: vec![Tone {
            frequency: 18.0,
            depth: 0.2,
        }],
    };
    let single = simulate_star_counts(EPOCH, &base, 10).unwrap();
    let pg = periodogram(&bin_events(&single, 0.01).unwrap()).unwrap();
    let lines = detect_lines(&pg, 10.0).unwrap();
    let top = lines.first().map_or(f64::NAN, |l| l.frequency);
    let top_ok = (top - 18.0).abs() <= pg.resolution;

    let mut with_harmonic = base.clone();
    with_harmonic.tones.push(Tone {
        frequency: 36.0,
        depth: 0.1,
    });
    let both = simulate_star_counts(EPOCH, &with_harmonic, 11).unwrap();
    let pg2 = periodogram(&bin_events(&both, 0.01).unwrap()).unwrap();
    let lines2 = detect_lines(&pg2, 10.0).unwrap();
    let flagged = lines2.iter().any(|l| {
        (l.frequency - 36.0).abs() <= pg2.resolution
            && l.is_harmonic_of.is_some_and(|f0| (f0 - 18.0).abs() <= pg2.resolution)
    });
    outcome(
        top_ok && flagged && pg.n == 9100,
        format!(
            "top line {top:.4} Hz (18 ± {:.4} Hz); 36 Hz flagged as harmonic: {flagged}",
            pg.resolution
        ),
    )
}

fn vega_chain() -> Outcome {
    let s = preset("vega").unwrap();
    let rate = expected_count_rate(&s.star_spec().unwrap(), &s.receiver_chain().unwrap()).unwrap();
    let oracle = 1e3 * 1700.0 * 0.70 * 800.0 * 0.1 * 0.29 * 0.7;
    outcome(
        rel(rate.star_rate, oracle) <= 5e-3 && rel(rate.star_rate, 1.93e7) <= 5e-3,
        format!("Vega {:.4e} /s (hand product {oracle:.4e}, tol 0.5%)", rate.star_rate),
    )
}

fn statistical_nulls() -> Outcome {
    let run = |log_sigma: f64| StarRun {
        rate: 1e4,
        duration: 10.0,
        scintillation: ScintillationModel {
            log_sigma,
            correlation_time: 0.01,
        },
        tones: vec![],
    };
    let plausible = |r: &StarRun, seed: u64| {
        let s = simulate_star_counts(EPOCH, r, seed).unwrap();
        dispersion_test(&bin_events(&s, 0.01).unwrap()).unwrap().poisson_plausible
    };
    let poisson = run(0.0);
    let scint = run(0.5);
    let null_pass = (0..100).filter(|&seed| plausible(&poisson, seed)).count();
    let scint_fail = (0..100).filter(|&seed| !plausible(&scint, 1000 + seed)).count();
    outcome(
        null_pass >= 95 && scint_fail >= 95,
        format!("Poisson runs passing: {null_pass}/100 (need 95); log_sigma 0.5 runs failing: {scint_fail}/100 (need 95)"),
    )
}

fn qlink(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qlink"))
        .args(args)
        .output()
        .expect("qlink runs")
}

fn run_all(dir: &Path) -> Result<(), String> {
    let d = dir.to_str().unwrap();
    let steps: Vec<Vec<String>> = vec![
        vec!["simulate", "-s", "lageos-mlro", "--seed", "5", "-o", d],
        vec!["simulate", "-s", "ground-target-c", "--seed", "5", "-o", d],
        vec!["simulate", "-s", "vega", "--seed", "5", "-o", d],
        vec!["analyze", "fit", "-i", &format!("{d}/lageos-mlro.timetag"), "-s", "lageos-mlro", "-o", d],
        vec!["analyze", "coincidence", "-i", &format!("{d}/lageos-mlro.timetag"), "-s", "lageos-mlro", "-o", d],
        vec!["analyze", "calibrate", "-i", &format!("{d}/ground-target-c.timetag"), "-s", "ground-target-c", "-o", d],
        vec!["analyze", "spectrum", "-i", &format!("{d}/vega.timetag"), "-s", "vega", "-o", d],
        vec!["star", "-s", "vega", "--observe", "-o", d],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in steps {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = qlink(&refs);
        if !out.status.success() {
            return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if let Err(e) = run_all(a.path()).and_then(|_| run_all(b.path())) {
        return outcome(false, e);
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for n in &names {
        let x = std::fs::read(a.path().join(n)).unwrap();
        let y = std::fs::read(b.path().join(n)).unwrap_or_default();
        // Reports name their own directory in the manifest.
        let (x, y) = if n.starts_with("report-") {
            let strip = |v: Vec<u8>, p: &Path| String::from_utf8(v).unwrap().replace(p.to_str().unwrap(), "<out>");
            (strip(x, a.path()).into_bytes(), strip(y, b.path()).into_bytes())
        } else {
            (x, y)
        };
        if x != y {
            differing.push(n.clone());
        }
    }
    outcome(
        differing.is_empty() && names.len() >= 15,
        format!("{} output files compared across two runs; differing: {differing:?}", names.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        ("spot size", spot_size),
        ("intercept fractions", intercepts),
        ("R^-4 law", inverse_fourth_power),
        ("narrative chain", narrative_chain),
        ("photons per pulse", photons),
        ("ground-target times of flight", ground_target_tof),
        ("calibration closure", calibration_closure),
        ("orbit-fit closure", orbit_fit_closure),
        ("coincidence properties", coincidence_properties),
        ("periodogram lines", spectral_lines),
        ("Vega chain", vega_chain),
        ("statistical nulls", statistical_nulls),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{tag}] {:>2} {name}: {} ({:.2} s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
