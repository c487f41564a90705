//! Probe-field response of a cavity holding a Bose-Einstein condensate and a
//! moving end mirror, driven by a transverse field.
//!
//! All frequencies are angular (rad/s) with hbar absorbed.

pub mod analysis;
pub mod config;
pub mod drift;
pub mod error;
pub mod model;
pub mod oracle;
pub mod response;
pub mod steady;
pub mod units;

pub use error::{Error, Result};
