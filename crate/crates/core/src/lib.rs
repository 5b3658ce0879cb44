//! Numerical laboratory for `i u_t = -k u_xx + V(x, t) u` on a large torus
//! with rough, oscillating, decaying potentials.

pub mod cli;
pub mod config;
pub mod evolution;
pub mod field;
pub mod output;
pub mod packets;
pub mod potential;
pub mod resonance;
pub mod smooth;

pub use field::{FrequencySet, Grid, Spectrum, WaveFunction, C64};
