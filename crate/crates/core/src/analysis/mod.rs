//! Window detection, Fano fits and parameter sweeps.

pub mod fano;
pub mod sweep;
pub mod windows;

pub use fano::{fano_fit, window_segment, FanoFit, FanoParams, InitialGuess};
pub use sweep::{sweep, Axis, AxisSpec, SweepPoint, SweepResult};
pub use windows::{
    amplification_check, find_windows, find_windows_in, mode_bands, windows_in_bands, MonotonicityReport, Quadrature,
    TransparencyWindow, WindowTrend,
};
