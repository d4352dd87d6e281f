//! Simulation and verification toolkit for the rescaled fractional
//! Allen-Cahn (Peierls-Nabarro) equation
//!
//! ```text
//! ε ∂_t u = (ε I_n[u] - W'(u)) / (ε |ln ε|)
//! ```
//!
//! with initial data made of nested dislocation loops, whose fronts move by
//! mean curvature with velocity constant `μ` as `ε → 0`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aeps;
pub mod barriers;
pub mod config;
pub mod corrector;
pub mod error;
pub mod field;
pub mod evolve;
pub mod experiment;
pub mod fracops;
pub mod geometry;
pub mod layer;
pub mod line;
pub mod potential;
pub mod quad;

pub use error::{Error, Result};
pub use field::{GridShape, PeriodicField};
pub use layer::LayerProfile;
pub use potential::Potential;
