//! Reproducible machine-learning baselines.
//!
//! The crate is organised around the experiment workflow:
//!
//! * [`dataset`] ingests CSV data into immutable, content-hashed snapshots and
//!   records every transform in the snapshot lineage.
//! * [`learners`] holds the native baseline models behind one fit/predict contract.
//! * [`validation`] builds cross-validation splits and runs a single experiment.
//! * [`metrics`] computes base metrics, fold aggregates and the LOR/COS
//!   overfitting diagnostics.
//! * [`selection`] colours rows by test R², flags degenerate models and picks
//!   the best rows.
//! * [`reporting`] persists results and renders plan/result tables and plots.
//! * [`plan`], [`runner`] and [`cli`] tie everything into a pipeline.

pub mod cli;
pub mod dataset;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod plan;
pub mod reporting;
pub mod rng;
pub mod runner;
pub mod selection;
pub mod validation;

mod serde_nan;
mod task;

pub use matrix::Matrix;
pub use task::TaskKind;

/// Version string recorded in run metadata.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
