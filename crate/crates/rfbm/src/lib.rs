//! Simulation and numerics for the stationary storage process fed by
//! fractional Brownian motion: exact fBm/fGn sampling by circulant
//! embedding, queue-path simulation, closed-form tail asymptotics and their
//! derived constants, Pickands-constant estimation, the finite/infinite
//! dichotomy criterion, and desk-scale iterated-logarithm experiments.
//!
//! Everything numerical is generic over the scalar type (see [`Scalar`]);
//! the `*64` aliases below cover the common double-precision case. All
//! randomness flows from a single seed through named substreams
//! ([`rng::StreamFamily`]), so results reproduce bit-identically across
//! parallelism levels.

// `!(x > 0)`-style guards are deliberate: they reject NaN along with the
// out-of-domain sign, which `x <= 0` would not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// frozen high-precision reference values round to f64 on purpose
#![allow(clippy::excessive_precision)]

pub mod asymptotics;
pub mod error;
pub mod fbm;
pub mod field;
pub mod grid;
pub mod numeric;
pub mod pickands;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod storage;

pub use error::{Error, Result};
pub use scalar::{Scalar, SimScalar};

/// Default scalar type.
pub type Real = f64;

pub type Hurst64 = fbm::Hurst<Real>;
pub type FbmPath64 = fbm::FbmPath<Real>;
pub type ModelConstants64 = asymptotics::ModelConstants<Real>;
pub type ThresholdFamily64 = asymptotics::ThresholdFamily<Real>;
pub type QueuePath64 = storage::QueuePath<Real>;
pub type McEstimate64 = numeric::McEstimate<Real>;
pub type PickandsEstimate64 = pickands::PickandsEstimate<Real>;
