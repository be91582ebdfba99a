//! Transport exponents for one-frequency and multi-frequency quasi-periodic
//! Schrödinger operators on `l^2(Z)`.

pub mod cocycle;
pub mod contfrac;
pub mod csvfmt;
pub mod equidistribution;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod poly;
pub mod potential;
pub mod quantum;
pub mod spectral;
pub mod torus;
pub mod transport;

pub use error::{Error, Result};
