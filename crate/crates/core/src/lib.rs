//! Shaped-constellation design and analysis for hardware-distorted links.
//!
//! Residual transceiver impairments behave as additive *improper* Gaussian
//! noise: the in-phase and quadrature components end up correlated and/or
//! unequal in power. This crate models that noise, derives the matched MAP
//! detector, evaluates closed-form union bounds on bit error rate, and
//! designs constellations that exploit the asymmetry:
//!
//! * probabilistic shaping (non-uniform symbol priors via successive convex
//!   programming with a KKT inner solve),
//! * geometric shaping (a power-preserving translate/rotate transform),
//! * hybrid shaping (alternate optimization of both).
//!
//! Every analytical bound can be cross-checked against the Monte-Carlo link
//! simulator in [`simulate`]; the `iqshape` binary drives designs, bound
//! evaluations, and sweeps from the command line.

pub mod analysis;
pub mod constellation;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod noise;
pub mod optimize;
pub mod simulate;

pub use error::{Error, Result};
