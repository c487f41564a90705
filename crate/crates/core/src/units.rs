//! Frequency unit tags and physical constants.

use serde::Serialize;
use std::f64::consts::TAU;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    RadS,
    TwoPiHz,
    TwoPiKHz,
    TwoPiMHz,
}

impl FrequencyUnit {
    pub const ALL: [FrequencyUnit; 4] =
        [FrequencyUnit::RadS, FrequencyUnit::TwoPiHz, FrequencyUnit::TwoPiKHz, FrequencyUnit::TwoPiMHz];

    pub fn tag(self) -> &'static str {
        match self {
            FrequencyUnit::RadS => "rad_s",
            FrequencyUnit::TwoPiHz => "two_pi_Hz",
            FrequencyUnit::TwoPiKHz => "two_pi_kHz",
            FrequencyUnit::TwoPiMHz => "two_pi_MHz",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|u| u.tag() == tag)
    }

    /// Cycles-per-second multiplier, `None` for rad/s.
    fn hertz_scale(self) -> Option<f64> {
        match self {
            FrequencyUnit::RadS => None,
            FrequencyUnit::TwoPiHz => Some(1.0),
            FrequencyUnit::TwoPiKHz => Some(1e3),
            FrequencyUnit::TwoPiMHz => Some(1e6),
        }
    }
}

/// A frequency value with its unit tag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Frequency {
    pub value: f64,
    pub unit: FrequencyUnit,
}

impl Frequency {
    pub fn new(value: f64, unit: FrequencyUnit) -> Self {
        Frequency { value, unit }
    }

    pub fn rad_s(value: f64) -> Self {
        Frequency::new(value, FrequencyUnit::RadS)
    }

    /// Angular frequency in rad/s.
    pub fn to_rad_s(self) -> f64 {
        match self.unit.hertz_scale() {
            None => self.value,
            Some(1.0) => TAU * self.value,
            Some(s) => TAU * (self.value * s),
        }
    }

    /// Re-expresses the value in rad/s. Idempotent.
    pub fn normalized(self) -> Frequency {
        Frequency::rad_s(self.to_rad_s())
    }
}
