//! Cartesian sweeps over the linearized problem's parameters.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::response::{check_grid, spectrum, SpectrumOptions, SpectrumResult};
use crate::steady::OperatingPoint;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Probe detuning; becomes the spectrum grid.
    ProbeDetuning,
    Detuning,
    TransverseCoupling,
    AtomicCoupling,
    MirrorCoupling,
}

impl Axis {
    pub const ALL: [Axis; 5] =
        [Axis::ProbeDetuning, Axis::Detuning, Axis::TransverseCoupling, Axis::AtomicCoupling, Axis::MirrorCoupling];

    pub fn name(self) -> &'static str {
        match self {
            Axis::ProbeDetuning => "delta_p",
            Axis::Detuning => "delta",
            Axis::TransverseCoupling => "eta_eff",
            Axis::AtomicCoupling => "g_a",
            Axis::MirrorCoupling => "g_m",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| Error::UnknownAxis(s.to_string()))
    }

    /// Copies of `(model, op)` with this axis set to `value` (rad/s).
    pub fn apply(self, model: &mut ModelParams, op: &mut OperatingPoint, value: f64) {
        match self {
            Axis::ProbeDetuning => {}
            Axis::Detuning => op.detuning = value,
            Axis::TransverseCoupling => {
                op.transverse_coupling = value;
                model.transverse_coupling = value;
            }
            Axis::AtomicCoupling => op.atomic_coupling = value,
            Axis::MirrorCoupling => op.mirror_coupling = value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub units: &'static str,
}

impl AxisSpec {
    pub fn new(axis: Axis, values: Vec<f64>) -> Self {
        AxisSpec { axis, values, units: "rad/s" }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Index along each outer axis.
    pub index: Vec<usize>,
    /// Outer-axis values at this point.
    pub values: Vec<f64>,
    pub result: std::result::Result<SpectrumResult, Error>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    /// Outer axes in order (no probe-detuning axis here).
    pub outer: Vec<AxisSpec>,
    /// Probe-detuning grid shared by every point.
    pub grid: Vec<f64>,
    /// Outer lengths followed by the grid length.
    pub shape: Vec<usize>,
    /// Row-major over the outer axes.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.result.is_err()).count()
    }
}

/// Evaluates spectra over the Cartesian product of `axes`. A probe-detuning
/// axis, if present, replaces `grid`. Failures stay in place.
pub fn sweep(
    model: &ModelParams,
    op: &OperatingPoint,
    axes: &[AxisSpec],
    grid: &[f64],
    opts: SpectrumOptions,
) -> Result<SweepResult> {
    if axes.len() > 2 {
        return Err(Error::InvalidGrid(format!("at most 2 sweep axes, got {}", axes.len())));
    }
    for (i, a) in axes.iter().enumerate() {
        if a.values.is_empty() {
            return Err(Error::InvalidGrid(format!("axis `{}` has no values", a.axis.name())));
        }
        if a.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("axis `{}` has a non-finite value", a.axis.name())));
        }
        if axes[..i].iter().any(|b| b.axis == a.axis) {
            return Err(Error::InvalidGrid(format!("axis `{}` repeated", a.axis.name())));
        }
    }
    let grid: Vec<f64> = match axes.iter().find(|a| a.axis == Axis::ProbeDetuning) {
        Some(a) => a.values.clone(),
        None => grid.to_vec(),
    };
    check_grid(&grid)?;
    let outer: Vec<AxisSpec> = axes.iter().filter(|a| a.axis != Axis::ProbeDetuning).cloned().collect();
    let mut shape: Vec<usize> = outer.iter().map(|a| a.values.len()).collect();
    let total: usize = shape.iter().product();
    shape.push(grid.len());

    let points: Vec<SweepPoint> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut index = vec![0; outer.len()];
            let mut rest = flat;
            for k in (0..outer.len()).rev() {
                index[k] = rest % outer[k].values.len();
                rest /= outer[k].values.len();
            }
            let mut m = model.clone();
            let mut o = *op;
            let values: Vec<f64> = outer.iter().zip(&index).map(|(a, &i)| a.values[i]).collect();
            for (a, &v) in outer.iter().zip(&values) {
                a.axis.apply(&mut m, &mut o, v);
            }
            SweepPoint { index, values, result: spectrum(&m, &o, &grid, opts) }
        })
        .collect();
    Ok(SweepResult { outer, grid, shape, points })
}
