//! Joint carrier-frequency and direction-of-arrival estimation for multiband
//! signals acquired by a two-element array with multi-coset sub-Nyquist
//! sampling.
//!
//! The pipeline: [`synth`] produces 2M x N channel snapshots for a
//! [`scenario::Scenario`]; [`covariance`] forms the stacked covariance (or its
//! analytic counterpart); [`subspace`] runs the twice-MUSIC joint estimator on
//! it; [`etm`] first expands the covariance onto a Q-dimensional virtual
//! time-delay manifold so that up to Q-1 sources can be identified from M
//! branches; [`harness`] wraps all of it into repeatable trials and
//! Monte Carlo SNR sweeps.

pub mod covariance;
pub mod error;
pub mod etm;
pub mod fft;
pub mod harness;
pub mod scenario;
pub mod subspace;
pub mod synth;

#[cfg(test)]
pub mod testutil;

pub use error::{Error, Result};
