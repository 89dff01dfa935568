//! Time-periodic isentropic gas flow in a closed tube, computed with a
//! staggered Lax–Friedrichs scheme that keeps the Riemann invariants inside a
//! moving band, plus a fixed-point driver for the period map.
//!
//! Everything numeric is generic over `f32`/`f64` through [`Scalar`]; the
//! `*64` aliases below fix the common case.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod gas;
pub mod grid;
pub mod output;
pub mod period_map;
pub mod riemann;
pub mod scalar;
pub mod scheme;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ConservedState64 = gas::ConservedState<f64>;
pub type RiemannPair64 = gas::RiemannPair<f64>;
pub type GasParams64 = gas::GasParams<f64>;
pub type Grid64 = grid::Grid<f64>;
pub type Layer64 = scheme::Layer<f64>;
pub type MapPoint64 = period_map::MapPoint<f64>;
pub type FixedPointReport64 = period_map::FixedPointReport<f64>;
