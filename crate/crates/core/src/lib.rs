//! Sensing-performance simulator for OFDM-based integrated sensing and
//! communication (ISAC) networks.
//!
//! Two deployment families are modelled side by side:
//!
//! * cell-free (CF): many small access points (APs) spread over the service
//!   area, split into transmitting (tAP) and receiving (rAP) roles, which
//!   jointly illuminate and observe a target (multistatic sensing);
//! * multi-cell (MC): one base station (BS) per cell with co-located transmit
//!   and receive arrays, each sensing only inside its own cell (monostatic).
//!
//! Each Monte-Carlo trial drops users and a target, builds the channels and
//! precoders, synthesizes the dual-purpose OFDM grid, and evaluates the GLRT
//! sensing SNR of both architectures on the same realization.

pub mod channels;
pub mod detector;
mod error;
pub mod experiments;
pub mod geometry;
pub mod transmit;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}
