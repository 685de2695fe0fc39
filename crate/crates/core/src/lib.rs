//! Multi-rate available-bandwidth estimation laboratory.
//!
//! A single-bottleneck FIFO path is loaded with fractional-Brownian-motion
//! cross-traffic and probed with multi-rate packet trains. Each train is
//! reduced to per-portion mean strains which drive a two-state Kalman filter
//! over the strain line `ε = αu + β`; the available bandwidth readout is
//! `−β̂/α̂`. The single-rate estimator is the one-portion configuration.
//!
//! Module map:
//!
//! * [`fbm_traffic`]: Davies–Harte fBm synthesis and cumulative cross-traffic.
//! * [`path_sim`]: hop-workload simulation of the bottleneck queue.
//! * [`probing`]: probe schedules and strain reduction.
//! * [`estimator`]: the sequential-scalar Kalman filter.
//! * [`analysis`]: MSE, the analytic error recursion and the empirical model.
//! * [`experiment`]: run / sweep / comparison drivers and their CSV outputs.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod fbm_traffic;
pub mod path_sim;
pub mod probing;

pub use error::{Error, Result};
