//! Simulation and analysis toolkit for satellite-to-ground single-photon links.
//!
//! The crate covers the full desk-scale chain used when qualifying a laser
//! ranging station as a single-photon receiver:
//!
//! - [`geometry`]: circular-orbit passes, slant range, two-way time of flight,
//!   visibility windows and mount tracking rates.
//! - [`link_budget`]: the retroreflector radar link equation with a named
//!   factor breakdown, plus the step-by-step intercept chain.
//! - [`stellar`]: expected count rates from reference stars through a
//!   receiver chain.
//! - [`timetag`]: seeded generators for photon time-tag streams and the
//!   `qlink-timetag v1` text format.
//! - [`analysis`]: Chebyshev least-squares range fits, coincidence gating and
//!   instrument-offset calibration.
//! - [`counts`]: binned count series, periodograms, spectral line detection
//!   and Poisson dispersion tests.
//! - [`scenario`]: validated scenario files and built-in presets.
//!
//! ```
//! use qlink::geometry::time_of_flight;
//!
//! let tof = time_of_flight(45.25);
//! assert!((tof * 1e9 - 301.876).abs() < 1e-3);
//! ```
//!
//! A narrative guide with runnable snippets lives in the `book/` directory of
//! the repository; its code blocks are compiled as doc-tests of this crate.

// NaN must fail parameter checks, hence the negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod constants;
pub mod counts;
pub mod error;
pub mod geometry;
pub mod link_budget;
pub mod report;
pub mod scenario;
pub mod stellar;
pub mod timetag;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/link-budget.md")]
    mod link_budget {}
    #[doc = include_str!("../../../book/src/stellar.md")]
    mod stellar {}
    #[doc = include_str!("../../../book/src/timetags.md")]
    mod timetags {}
    #[doc = include_str!("../../../book/src/range-fit.md")]
    mod range_fit {}
    #[doc = include_str!("../../../book/src/coincidence.md")]
    mod coincidence {}
    #[doc = include_str!("../../../book/src/count-statistics.md")]
    mod count_statistics {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
