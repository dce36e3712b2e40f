use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use qlink::analysis::{
    coincidence_filter, estimate_instrument_offset, expected_background_per_pulse, fit::residual_csv,
    fit_tof_polynomial, range_observations, RangeObservation,
};
use qlink::constants::ARCSEC;
use qlink::counts::{bin_events, detect_lines, dispersion_test, periodogram};
use qlink::geometry::time_of_flight;
use qlink::link_budget::{radar_equation, sweep_csv, sweep_divergence, sweep_range};
use qlink::scenario::{resolve_scenario, to_canonical_toml, validate_scenario, Scenario, ScenarioKind, PRESETS};
use qlink::stellar::expected_count_rate;
use qlink::timetag::{
    simulate_ground_target, simulate_pass_returns, simulate_star_counts, Channel, TimeTagStream,
};
use qlink::Error;

use crate::run::{io_error, InputDigest, Outputs, RunReport};
use crate::{CommandResult, Mode, Sweep};

fn load(scenario_arg: &str) -> Result<(Scenario, String), Error> {
    let s = resolve_scenario(scenario_arg)?;
    let text = to_canonical_toml(&s)?;
    Ok((s, text))
}

fn report(s: &Scenario, command: &str, digest: InputDigest, results: serde_json::Value) -> RunReport {
    RunReport {
        scenario: s.name.clone(),
        command: command.to_string(),
        inputs_digest: digest.finish(),
        results,
        manifest: Vec::new(),
        wall_time_s: None,
    }
}

fn warnings(s: &Scenario, text: &mut String) {
    for v in validate_scenario(s) {
        let _ = writeln!(text, "{v}");
    }
}

pub fn budget(
    scenario_arg: &str,
    range: Option<f64>,
    spreading: Option<f64>,
    sweep: Option<Sweep>,
    out: &mut Outputs,
) -> CommandResult {
    let (s, toml) = load(scenario_arg)?;
    let mut link = s.link_scenario()?;
    if let Some(x) = spreading {
        link.spreading_factor = x;
    }
    link.validate()?;
    let range = match (range, &s.orbit) {
        (Some(r), _) => r,
        (None, Some(o)) => o.budget_range_m,
        (None, None) => return Err(Error::Validation("scenario has no [orbit] section".into())),
    };
    let res = radar_equation(&link, range)?;

    let mut digest = InputDigest::default();
    digest.add("scenario", toml.as_bytes());
    digest.add("range", &range.to_le_bytes());
    digest.add("spreading", &link.spreading_factor.to_le_bytes());
    digest.add("sweep", format!("{}", sweep.map_or(0, |s| s as u8 + 1)).as_bytes());

    let mut text = String::new();
    warnings(&s, &mut text);
    let _ = writeln!(text, "link budget for {} at R = {:.6e} m", s.name, range);
    let _ = writeln!(text, "photons per pulse     {:.6e}", res.photons_per_pulse);
    let _ = writeln!(text, "\nradar equation factors");
    text.push_str(&res.factor_log.table());
    let _ = writeln!(text, "end_to_end            {:.6e}", res.end_to_end);
    let _ = writeln!(text, "receiver efficiency   {:.6e}", res.receiver_efficiency);
    let _ = writeln!(text, "photoelectrons        {:.6e}", res.photoelectrons);
    let _ = writeln!(text, "\nstep chain (spot {:.3} m, return spot {:.3} m)", res.spot_diameter, res.return_spot_diameter);
    text.push_str(&res.step_chain_log.table());
    let _ = writeln!(text, "step chain efficiency {:.6e}", res.step_chain_efficiency);

    out.write_json("budget.json", &res)?;
    let mut results = serde_json::to_value(&res).expect("serializable");
    if let Some(kind) = sweep {
        let (name, column, points) = match kind {
            Sweep::Range => {
                let ranges: Vec<f64> = (0..=8).map(|k| range * 2f64.powf(k as f64 / 2.0 - 2.0)).collect();
                ("sweep-range.csv", "range_m", sweep_range(&link, &ranges)?)
            }
            Sweep::Divergence => {
                let divs: Vec<f64> = (1..=20).map(|a| a as f64 * ARCSEC).collect();
                ("sweep-divergence.csv", "divergence_rad", sweep_divergence(&link, range, &divs)?)
            }
        };
        let csv = sweep_csv(column, &points);
        out.write(name, csv.as_bytes())?;
        let _ = writeln!(text, "\n{csv}");
        results["sweep"] = serde_json::to_value(&points).expect("serializable");
    }
    Ok((report(&s, "budget", digest, results), text))
}

fn simulate_stream(s: &Scenario, seed: u64) -> Result<TimeTagStream, Error> {
    let det = s.detector_model();
    match s.kind {
        ScenarioKind::Pass => {
            let link = s.link_scenario()?;
            let run = s.pass_run()?;
            link.validate()?;
            let n_pe = |r: f64| radar_equation(&link, r).map_or(0.0, |b| b.photoelectrons);
            simulate_pass_returns(&s.epoch, &run, n_pe, &det, seed)
        }
        ScenarioKind::GroundTarget => simulate_ground_target(&s.epoch, &s.ground_target_run()?, &det, seed),
        ScenarioKind::Star => simulate_star_counts(&s.epoch, &s.star_run()?, seed),
    }
}

pub fn simulate(scenario_arg: &str, seed: Option<u64>, out: &mut Outputs) -> CommandResult {
    let (s, toml) = load(scenario_arg)?;
    let seed = seed.unwrap_or(s.seed);
    let stream = simulate_stream(&s, seed)?;
    let mut digest = InputDigest::default();
    digest.add("scenario", toml.as_bytes());
    digest.add("seed", &seed.to_le_bytes());

    let file = format!("{}.timetag", s.name);
    let path = out.write(&file, stream.to_text().as_bytes())?;
    let results = json!({
        "kind": s.kind.to_string(),
        "seed": seed,
        "n_events": stream.len(),
        "n_fires": stream.count(Channel::Fire),
        "n_returns": stream.count(Channel::Return),
        "n_background": stream.count(Channel::Background),
        "duration_s": stream.duration_ps().map(|d| d as f64 * 1e-12),
        "timetag_file": path.as_ref().map(|p| p.display().to_string()),
    });
    let mut text = String::new();
    warnings(&s, &mut text);
    let _ = writeln!(
        text,
        "{} ({}) seed {}: {} events, {} fires, {} returns, {} background",
        s.name,
        s.kind,
        seed,
        stream.len(),
        stream.count(Channel::Fire),
        stream.count(Channel::Return),
        stream.count(Channel::Background),
    );
    Ok((report(&s, "simulate", digest, results), text))
}

pub struct AnalyzeOptions {
    pub window_ns: Option<f64>,
    pub degree: Option<usize>,
    pub bin_s: Option<f64>,
}

pub fn analyze(mode: Mode, input: &Path, scenario_arg: &str, opts: AnalyzeOptions, out: &mut Outputs) -> CommandResult {
    let (s, toml) = load(scenario_arg)?;
    let bytes = std::fs::read(input).map_err(|e| io_error(input, e))?;
    let stream = TimeTagStream::read_from(&bytes[..])?;
    let degree = opts.degree.unwrap_or(s.analysis.fit_degree);
    let window_ns = opts.window_ns.unwrap_or_else(|| s.window_ns());
    let bin_s = opts.bin_s.unwrap_or(s.analysis.bin_s);

    let mut digest = InputDigest::default();
    digest.add("scenario", toml.as_bytes());
    digest.add("mode", mode.as_str().as_bytes());
    digest.add("degree", &(degree as u64).to_le_bytes());
    digest.add("window_ns", &window_ns.to_le_bytes());
    digest.add("bin_s", &bin_s.to_le_bytes());
    digest.add("input", &bytes);

    let mut text = String::new();
    let results = match mode {
        Mode::Fit => {
            let obs = range_observations(&stream);
            if obs.is_empty() {
                return Err(Error::NoReturns);
            }
            let fit = fit_tof_polynomial(&obs, degree)?;
            out.write_json("fit.json", &fit)?;
            out.write("fit-residuals.csv", residual_csv(&fit, &obs).as_bytes())?;
            let _ = writeln!(
                text,
                "degree {} fit to {} returns over [{:.3}, {:.3}] s: rms residual {:.4} ns",
                fit.degree,
                obs.len(),
                fit.domain.0,
                fit.domain.1,
                fit.rms_residual_ns
            );
            json!({
                "degree": fit.degree,
                "n_observations": obs.len(),
                "domain_s": [fit.domain.0, fit.domain.1],
                "rms_residual_ns": fit.rms_residual_ns,
                "coefficients": fit.coefficients,
            })
        }
        Mode::Coincidence => {
            let run = s.pass_run()?;
            let predicted: Vec<RangeObservation> = stream
                .channel(Channel::Fire)
                .map(|f| {
                    let range = run.pass.slant_range(run.pass_time(f.timestamp))?;
                    Ok(RangeObservation {
                        fire_epoch: f.seconds(),
                        measured_tof: time_of_flight(range) * 1e9,
                    })
                })
                .collect::<Result<_, Error>>()?;
            if predicted.is_empty() {
                return Err(Error::NoReturns);
            }
            let degree = degree.min(predicted.len() - 1);
            let prediction = fit_tof_polynomial(&predicted, degree)?;
            let offset_ns = s.instrument_offset_ns();
            let rep = coincidence_filter(&stream, &prediction, window_ns, offset_ns)?;
            let summary = rep.summary();
            let dark = s.detector.map_or(0.0, |d| d.dark_rate_hz);
            let expected_bg = expected_background_per_pulse(dark, window_ns);
            let results = json!({
                "summary": summary,
                "prediction_degree": prediction.degree,
                "prediction_rms_ns": prediction.rms_residual_ns,
                "expected_background_per_pulse": expected_bg,
            });
            out.write_json("coincidence.json", &results)?;
            out.write("coincidence-residuals.csv", rep.residual_csv().as_bytes())?;
            out.write("accepted.timetag", rep.accepted.to_text().as_bytes())?;
            let _ = writeln!(
                text,
                "window {:.3} ns, offset {:.3} ns: {} fires, {} candidates ({} returns, {} background), {} rejected",
                window_ns,
                offset_ns,
                summary.n_fires,
                summary.n_signal_candidates,
                summary.n_accepted_returns,
                summary.n_accepted_background,
                summary.n_rejected
            );
            let _ = writeln!(
                text,
                "return rate {:.6}, residual rms {:.4} ns, expected background per gate {:.3e}",
                summary.return_rate, summary.residual_rms_ns, expected_bg
            );
            results
        }
        Mode::Calibrate => {
            let run = s.ground_target_run()?;
            let true_tof_ns = time_of_flight(run.distance) * 1e9;
            let est = estimate_instrument_offset(&stream, true_tof_ns, s.analysis.calibration_bin_ns)?;
            out.write("calibration-histogram.csv", est.histogram.csv().as_bytes())?;
            let results = json!({
                "offset_ns": est.offset_ns,
                "fwhm_ns": est.fwhm_ns,
                "n_returns": est.n_returns,
                "true_tof_ns": true_tof_ns,
                "bin_width_ns": s.analysis.calibration_bin_ns,
            });
            out.write_json("calibration.json", &results)?;
            let _ = writeln!(
                text,
                "ground target {:.2} m (ToF {:.3} ns): offset {:.3} ns, FWHM {:.3} ns from {} returns",
                run.distance, true_tof_ns, est.offset_ns, est.fwhm_ns, est.n_returns
            );
            results
        }
        Mode::Spectrum => {
            let series = bin_events(&stream, bin_s)?;
            let pg = periodogram(&series)?;
            let lines = detect_lines(&pg, s.analysis.snr_threshold)?;
            let dispersion = dispersion_test(&series).ok();
            out.write("counts.csv", series.csv().as_bytes())?;
            out.write("periodogram.csv", pg.csv().as_bytes())?;
            let results = json!({
                "bin_s": series.bin_width,
                "n_bins": series.counts.len(),
                "mean_count": series.mean(),
                "resolution_hz": pg.resolution,
                "snr_threshold": s.analysis.snr_threshold,
                "lines": lines,
                "dispersion": dispersion,
            });
            out.write_json("spectrum.json", &results)?;
            let _ = writeln!(
                text,
                "{} bins of {} s, resolution {:.5} Hz, {} lines above {}x median",
                series.counts.len(),
                series.bin_width,
                pg.resolution,
                lines.len(),
                s.analysis.snr_threshold
            );
            for l in lines.iter().take(10) {
                let _ = write!(text, "  {:>10.4} Hz  snr {:>10.1}", l.frequency, l.snr);
                if let Some(f0) = l.is_harmonic_of {
                    let _ = write!(text, "  harmonic of {f0:.4} Hz");
                }
                text.push('\n');
            }
            if let Some(d) = dispersion {
                let _ = writeln!(
                    text,
                    "fano factor {:.4}, poisson plausible: {}",
                    d.fano_factor, d.poisson_plausible
                );
            }
            results
        }
    };
    Ok((report(&s, &format!("analyze {}", mode.as_str()), digest, results), text))
}

pub fn star(
    scenario_arg: &str,
    magnitude: Option<f64>,
    observe: bool,
    seed: Option<u64>,
    bin_s: Option<f64>,
    out: &mut Outputs,
) -> CommandResult {
    let (s, toml) = load(scenario_arg)?;
    let chain = s.receiver_chain()?;
    let mut star = s.star_spec()?;
    if let Some(m) = magnitude {
        star.v_magnitude = m;
    }
    let rate = expected_count_rate(&star, &chain)?;
    let seed = seed.unwrap_or(s.seed);
    let bin_s = bin_s.unwrap_or(s.analysis.bin_s);

    let mut digest = InputDigest::default();
    digest.add("scenario", toml.as_bytes());
    digest.add("magnitude", &star.v_magnitude.to_le_bytes());
    digest.add("observe", &[observe as u8]);
    if observe {
        digest.add("seed", &seed.to_le_bytes());
        digest.add("bin_s", &bin_s.to_le_bytes());
    }

    let mut text = String::new();
    warnings(&s, &mut text);
    let _ = writeln!(text, "{} at V = {}", s.name, star.v_magnitude);
    text.push_str(&rate.factor_log.table());
    let _ = writeln!(text, "star rate      {:.6e} /s", rate.star_rate);
    let _ = writeln!(text, "sky background {:.6e} /s", rate.sky_background_rate);
    let _ = writeln!(text, "total          {:.6e} /s", rate.total_rate);

    let mut results = json!({ "v_magnitude": star.v_magnitude, "rate": rate });
    if observe {
        let run = s.star_run()?;
        let stream = simulate_star_counts(&s.epoch, &run, seed)?;
        let series = bin_events(&stream, bin_s)?;
        let d = dispersion_test(&series)?;
        out.write("star-counts.csv", series.csv().as_bytes())?;
        let _ = writeln!(
            text,
            "observed {} photons in {} bins: fano {:.4}, statistic {:.2} in [{:.2}, {:.2}]: poisson plausible {}",
            series.total(),
            series.counts.len(),
            d.fano_factor,
            d.statistic,
            d.band.0,
            d.band.1,
            d.poisson_plausible
        );
        results["observation"] = json!({
            "seed": seed,
            "simulated_rate_hz": run.rate,
            "n_photons": series.total(),
            "n_bins": series.counts.len(),
            "bin_s": series.bin_width,
            "dispersion": d,
        });
    }
    out.write_json("star.json", &results)?;
    Ok((report(&s, "star", digest, results), text))
}

pub fn presets(out: &mut Outputs) -> CommandResult {
    let mut digest = InputDigest::default();
    let mut list = Vec::new();
    let mut text = String::new();
    for name in PRESETS {
        let s = qlink::scenario::preset(name).expect("known preset");
        let toml = to_canonical_toml(&s)?;
        digest.add(name, toml.as_bytes());
        out.write(&format!("{name}.toml"), toml.as_bytes())?;
        let _ = writeln!(text, "{:<18} {:<14} {}", name, s.kind.to_string(), s.description.clone().unwrap_or_default());
        list.push(json!({ "name": name, "kind": s.kind.to_string(), "description": s.description }));
    }
    let report = RunReport {
        scenario: String::new(),
        command: "presets".into(),
        inputs_digest: digest.finish(),
        results: json!({ "presets": list }),
        manifest: Vec::new(),
        wall_time_s: None,
    };
    Ok((report, text))
}
