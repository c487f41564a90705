//! Ground truth from the linearized equations themselves.

pub mod compare;
pub mod frequency;
pub mod time;

pub use compare::{compare, CompareOptions, ComparisonReport, Envelope, Regime};
pub use frequency::{solve_frequency_domain, HarmonicSolution};
pub use time::{integrate_periodic_orbit, integrate_time_domain, TimeDomainOptions, TimeDomainRun, TimeRoute};
