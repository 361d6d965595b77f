//! Spatio-temporal spectrum demand forecasting.
//!
//! The crate turns crowdsourced, user-side network measurements and
//! regulatory deployment records into a per-tile, per-quarter forecasting
//! problem whose target is aggregated deployed bandwidth:
//!
//! 1. [`synthgen`] produces deterministic synthetic measurements and site
//!    filings with a known lagged coupling between KPIs and bandwidth.
//! 2. [`spatial`] projects everything onto a degree tile grid and quarterly
//!    windows.
//! 3. [`quality`] fills gaps and winsorizes outliers per tile series.
//! 4. [`features`] engineers the seven KPIs, builds lagged panels and runs the
//!    correlation / ACF / PACF analyses.
//! 5. [`models`] fits OLS, lasso, regression trees, forests and gradient
//!    boosting, and scores them.
//! 6. [`transfer`] ports a model from a data-rich region to a sparse one.
//! 7. [`benchreport`] compares yearly demand against reference benchmarks and
//!    writes the report bundle.
//!
//! [`pipeline`] wires the stages together over CSV/JSON stage files.

// Checks such as `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchreport;
pub mod config;
pub mod error;
pub mod features;
pub mod io;
pub mod kpi;
pub mod models;
pub mod pipeline;
pub mod quality;
pub mod rng;
pub mod spatial;
pub mod synthgen;
pub mod transfer;

pub use error::{Error, Result};
pub use kpi::{Kpi, KpiVector, KpiWeights};
