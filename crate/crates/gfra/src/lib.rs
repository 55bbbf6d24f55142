//! Grant-free random access (RA) with massive MIMO: how long should the
//! preamble be?
//!
//! In a grant-free RA slot, `N` user equipments transmit a randomly chosen
//! preamble of length `P` followed by data, inside a packet of `L` symbols.
//! The preamble length controls three competing effects on per-UE spectral
//! efficiency:
//!
//! * a larger pool (pool size equals `P`) lowers the preamble collision rate,
//! * a longer pilot improves the least-squares channel estimate,
//! * but every preamble symbol is overhead stolen from the data payload.
//!
//! This crate provides:
//!
//! * [`analytic`] — closed-form collision probability, large-antenna-limit
//!   SINR, spectral efficiency (SE), average SE (ASE), and exact first and
//!   second derivatives of ASE with respect to the preamble length;
//! * [`montecarlo`] — a link-level simulator (preamble choice, collision
//!   marking, LS channel estimation, conjugate-beamforming detection) with
//!   reproducible parallel campaigns;
//! * [`optimizer`] — the SE-maximizing preamble length via bracketed Newton
//!   iteration on the ASE derivative, a granted-access baseline, and a dense
//!   grid oracle for verification;
//! * [`experiments`] — CSV sweep harnesses reproducing ASE-vs-P curves,
//!   optimal-length-vs-SNR tables, and policy comparisons versus the antenna
//!   count.
//!
//! With the default `parallel` feature, campaigns and sweeps fan out over a
//! rayon thread pool; results are bit-identical for any parallelism degree
//! because every trial owns a counter-derived RNG substream and reductions
//! run over fixed-size chunks in index order. Building with
//! `--no-default-features` yields a dependency-light sequential fallback
//! with identical outputs.

pub mod analytic;
pub mod config;
pub mod experiments;
pub mod montecarlo;
pub mod optimizer;

mod parallel;
mod seed;

pub use config::{ConfigError, PreambleLength, SystemConfig};

// the sampling API takes ChaCha12 streams; callers shouldn't need to chase
// the exact rand_chacha version
pub use rand_chacha;

