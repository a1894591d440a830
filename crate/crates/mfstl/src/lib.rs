//! Anomaly detection for network traffic from flow interaction.
//!
//! The pipeline turns a flow trace into verdicts in four stages:
//!
//! - [`flow`] parses traces, cuts them into fixed-width time samples and
//!   labels each sample from its records.
//! - [`graph`] builds one directed interaction graph (MFS-TL) per sample:
//!   flows become nodes, and an edge connects two flows that are close in
//!   time and sufficiently similar ([`similarity`]).
//! - [`metrics`] measures 14 structural characteristics of each graph.
//! - [`ifs`] and [`ensemble`] turn the per-characteristic value series into
//!   intuitionistic fuzzy models and fuse them into a single verdict per
//!   sample (IFSE-AD), with a Gaussian band detector as baseline.
//!
//! [`pipeline`] wires the stages together behind a serializable
//! [`pipeline::RunConfig`], and [`eval`] scores detectors and runs
//! parameter sweeps. [`synth`] generates labeled synthetic traces for
//! experiments and tests.

pub mod ensemble;
pub mod error;
pub mod eval;
pub mod fcm;
pub mod flow;
pub mod graph;
pub mod ifs;
pub mod metrics;
pub mod pipeline;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
