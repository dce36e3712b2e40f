//! Least-squares Chebyshev fits of time of flight against fire epoch.
//!
//! The epoch domain is mapped affinely onto [−1, 1] and the series is fitted
//! by Householder QR of the Chebyshev design matrix. Monomial bases are not
//! offered: at degree 60 their normal equations carry no usable digits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported fit degree.
pub const MAX_FIT_DEGREE: usize = 60;

/// Condition number of the triangular factor above which a fit is refused.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeObservation {
    /// Fire epoch (s).
    pub fire_epoch: f64,
    /// Two-way time of flight (ns).
    pub measured_tof: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeFit {
    pub degree: usize,
    /// Epoch domain `(t_min, t_max)` in seconds.
    pub domain: (f64, f64),
    /// Chebyshev coefficients `c_0 … c_degree` on the normalised domain.
    pub coefficients: Vec<f64>,
    pub rms_residual_ns: f64,
}

impl RangeFit {
    fn normalize(&self, t: f64) -> f64 {
        let (a, b) = self.domain;
        (2.0 * t - (a + b)) / (b - a)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.domain.0 && t <= self.domain.1
    }

    /// Predicted time of flight (ns) at epoch `t`.
    pub fn predict(&self, t: f64) -> Result<f64> {
        if !self.contains(t) {
            return Err(Error::OutOfDomain {
                t,
                t_min: self.domain.0,
                t_max: self.domain.1,
            });
        }
        Ok(clenshaw(&self.coefficients, self.normalize(t)))
    }

    /// Residuals `measured − predicted` (ns) for observations in the domain.
    pub fn residuals(&self, obs: &[RangeObservation]) -> Vec<f64> {
        obs.iter()
            .filter_map(|o| self.predict(o.fire_epoch).ok().map(|p| o.measured_tof - p))
            .collect()
    }
}

/// Evaluates `Σ c_k T_k(x)` by the Clenshaw recurrence.
pub fn clenshaw(coefficients: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coefficients.iter().skip(1).rev() {
        let b0 = c + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coefficients.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// Fits a degree-`degree` Chebyshev series to the observations.
pub fn fit_tof_polynomial(obs: &[RangeObservation], degree: usize) -> Result<RangeFit> {
    if degree > MAX_FIT_DEGREE {
        return Err(Error::InvalidParameter {
            name: "degree",
            reason: format!("at most {MAX_FIT_DEGREE} supported, got {degree}"),
        });
    }
    if obs.len() <= degree {
        return Err(Error::Underdetermined {
            degree,
            count: obs.len(),
        });
    }
    if obs
        .iter()
        .any(|o| !o.fire_epoch.is_finite() || !o.measured_tof.is_finite())
    {
        return Err(Error::InvalidParameter {
            name: "observations",
            reason: "non-finite epoch or time of flight".into(),
        });
    }
    let t_min = obs.iter().map(|o| o.fire_epoch).fold(f64::INFINITY, f64::min);
    let t_max = obs.iter().map(|o| o.fire_epoch).fold(f64::NEG_INFINITY, f64::max);
    if !(t_max > t_min) {
        return Err(Error::InvalidParameter {
            name: "observations",
            reason: "fire epochs span a degenerate domain".into(),
        });
    }

    let n_coef = degree + 1;
    let mut fit = RangeFit {
        degree,
        domain: (t_min, t_max),
        coefficients: vec![0.0; n_coef],
        rms_residual_ns: 0.0,
    };
    let design = DMatrix::from_fn(obs.len(), n_coef, |i, k| {
        chebyshev_t(k, fit.normalize(obs[i].fire_epoch))
    });
    let mut rhs = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.measured_tof));

    let qr = design.qr();
    let r = qr.r();
    let singular = r.singular_values();
    let s_max = singular.max();
    let s_min = singular.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    qr.q_tr_mul(&mut rhs);
    let head = rhs.rows(0, n_coef).into_owned();
    let coef = r
        .solve_upper_triangular(&head)
        .ok_or(Error::IllConditioned { condition })?;
    fit.coefficients = coef.iter().copied().collect();

    let sum_sq: f64 = fit.residuals(obs).iter().map(|r| r * r).sum();
    fit.rms_residual_ns = (sum_sq / obs.len() as f64).sqrt();
    Ok(fit)
}

/// Predicted time of flight (ns) at epoch `t`.
pub fn predict_tof(fit: &RangeFit, t: f64) -> Result<f64> {
    fit.predict(t)
}

fn chebyshev_t(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut a, mut b) = (1.0, x);
            for _ in 2..=k {
                let c = 2.0 * x * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}

/// Residual CSV with columns `fire_epoch_s,measured_ns,predicted_ns,residual_ns`.
pub fn residual_csv(fit: &RangeFit, obs: &[RangeObservation]) -> String {
    let mut out = String::from("fire_epoch_s,measured_ns,predicted_ns,residual_ns\n");
    for o in obs {
        if let Ok(p) = fit.predict(o.fire_epoch) {
            out.push_str(&format!(
                "{:.6},{:.3},{:.3},{:.3}\n",
                o.fire_epoch,
                o.measured_tof,
                p,
                o.measured_tof - p
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(f: impl Fn(f64) -> f64, n: usize, t0: f64, t1: f64) -> Vec<RangeObservation> {
        (0..n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
                RangeObservation {
                    fire_epoch: t,
                    measured_tof: f(t),
                }
            })
            .collect()
    }

    #[test]
    fn cubic_is_recovered_exactly() {
        let cubic = |t: f64| 4.0e7 - 300.0 * t + 0.7 * t * t - 1e-4 * t * t * t;
        let obs = sample(cubic, 200, 0.0, 100.0);
        let fit = fit_tof_polynomial(&obs, 3).unwrap();
        assert!(fit.rms_residual_ns < 1e-6, "{}", fit.rms_residual_ns);
        for o in &obs {
            assert_relative_eq!(fit.predict(o.fire_epoch).unwrap(), o.measured_tof, max_relative = 1e-6);
        }
    }

    #[test]
    fn constant_fit_is_mean() {
        let obs: Vec<_> = [3.0, 5.0, 4.0, 8.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| RangeObservation { fire_epoch: i as f64, measured_tof: v })
            .collect();
        let fit = fit_tof_polynomial(&obs, 0).unwrap();
        assert_relative_eq!(fit.coefficients[0], 5.0, max_relative = 1e-14);
    }

    #[test]
    fn even_series_midpoint() {
        // T_0 + T_2 + T_4 evaluated at the domain midpoint (x = 0): 1 − 1 + 1.
        let obs = sample(|t| {
            let x = t / 10.0;
            1.0 + (2.0 * x * x - 1.0) + (8.0 * x.powi(4) - 8.0 * x * x + 1.0)
        }, 101, -10.0, 10.0);
        let fit = fit_tof_polynomial(&obs, 4).unwrap();
        assert_relative_eq!(fit.predict(0.0).unwrap(), 1.0, epsilon = 1e-10);
        assert!(fit.coefficients[1].abs() < 1e-10 && fit.coefficients[3].abs() < 1e-10);
    }

    #[test]
    fn errors() {
        let obs = sample(|t| t, 3, 0.0, 1.0);
        assert_eq!(fit_tof_polynomial(&obs, 3), Err(Error::Underdetermined { degree: 3, count: 3 }));
        assert!(matches!(fit_tof_polynomial(&obs, 61), Err(Error::InvalidParameter { .. })));
        let fit = fit_tof_polynomial(&obs, 1).unwrap();
        assert!(matches!(fit.predict(1.5), Err(Error::OutOfDomain { .. })));
        // Four distinct epochs cannot support a cubic plus repeated points.
        let clustered: Vec<_> = (0..10)
            .map(|i| RangeObservation { fire_epoch: (i % 2) as f64, measured_tof: 1.0 })
            .collect();
        assert!(matches!(fit_tof_polynomial(&clustered, 3), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn clenshaw_matches_direct_sum() {
        let c = [0.3, -1.2, 0.5, 2.0, -0.7];
        for x in [-1.0, -0.3, 0.0, 0.42, 1.0] {
            let direct: f64 = c.iter().enumerate().map(|(k, ck)| ck * (k as f64 * f64::acos(x)).cos()).sum();
            assert_relative_eq!(clenshaw(&c, x), direct, epsilon = 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn refit_of_predictions_is_idempotent(seed in 0u64..1000, degree in 1usize..20) {
                let f = |t: f64| 4e7 * (1.0 + 0.1 * (t * 1e-3 + seed as f64).sin()) + (t * 0.37).cos();
                let obs = sample(f, 400, 0.0, 2400.0);
                let fit = fit_tof_polynomial(&obs, degree).unwrap();
                let again: Vec<_> = obs
                    .iter()
                    .map(|o| RangeObservation { fire_epoch: o.fire_epoch, measured_tof: fit.predict(o.fire_epoch).unwrap() })
                    .collect();
                let refit = fit_tof_polynomial(&again, degree).unwrap();
                let scale = fit.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                for (a, b) in fit.coefficients.iter().zip(&refit.coefficients) {
                    prop_assert!((a - b).abs() <= 1e-8 * scale);
                }
            }

            #[test]
            fn rms_non_increasing_in_degree(seed in 0u64..1000) {
                let f = |t: f64| ((t + seed as f64) * 0.01).sin() * 1e3 + (t * 0.2).cos();
                let obs = sample(f, 300, 0.0, 600.0);
                let mut prev = f64::INFINITY;
                for d in 0..=30 {
                    let rms = fit_tof_polynomial(&obs, d).unwrap().rms_residual_ns;
                    prop_assert!(rms <= prev * (1.0 + 1e-9) + 1e-9);
                    prev = rms;
                }
            }
        }
    }
}
