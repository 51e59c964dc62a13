//! Simulation and numerical verification toolkit for the multi-dimensional
//! elephant random walk (MERW).
//!
//! The walk lives on `Z^d`. Its first step is uniform over the `2d` signed
//! unit directions (or biased towards `+e_1`); every later step recalls a
//! uniformly chosen past step and repeats its direction with probability `p`,
//! otherwise moves in one of the `2d - 1` other directions uniformly.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] - parameters, signed directions, regimes and the one-step law.
//! * [`engine`] - the literal full-history sampler and the `O(d)` count-based
//!   sampler, both driven by reproducible per-trajectory RNG streams.
//! * [`closedform`] - Gamma-ratio normalisers, `v_n`, the unit-argument
//!   `3F2` value, exact moment recurrences and the rational enumeration oracle.
//! * [`martingale`] - per-trajectory martingale objects and the quadratic
//!   strong law / iterated logarithm statistics.
//! * [`mcstats`] - deterministic parallel ensembles, streaming moments and the
//!   Monte Carlo reports.
//! * [`verify`] - the acceptance suite used by `merw verify`.

pub mod closedform;
pub mod engine;
mod error;
pub mod martingale;
pub mod mcstats;
pub mod model;
pub mod numfmt;
pub mod rational;
pub mod special;
pub mod verify;

pub use error::{MerwError, Result};
pub use model::{DirectionCounts, FirstStep, Regime, RegimeKind, SignedDirection, WalkConfig};
