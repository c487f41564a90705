//! Closed-form linear response and output spectra.

use crate::drift::Variant;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::oracle::frequency::harmonic_response;
use crate::steady::{OperatingPoint, OperatingSource};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const POLE_FLOOR: f64 = 1e-300;
/// Relative size of |X| below which the coupled response counts as absent.
pub const WEAK_COUPLING: f64 = 1e-12;

/// Mechanical term of Y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// `2 (kappa + i Delta_p) omega_m G_m^2 / D_m`, matching the atomic term.
    Corrected,
    /// `2 kappa omega_m G_m^2 / D_m` as printed.
    AsPrinted,
}

impl ClosedForm {
    pub fn name(self) -> &'static str {
        match self {
            ClosedForm::Corrected => "corrected",
            ClosedForm::AsPrinted => "as_printed",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [ClosedForm::Corrected, ClosedForm::AsPrinted].into_iter().find(|c| c.name() == s)
    }
}

/// How the c+ amplitude was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseLimit {
    Regular,
    /// Both effective couplings vanish; c+ is exactly zero.
    ZeroCoupling,
    /// |X| under threshold; c+ taken from its leading-order value.
    WeakCoupling,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResponse {
    pub probe_detuning: f64,
    pub detuning: f64,
    pub x: Complex64,
    pub y: Complex64,
    pub c_tilde_plus: Complex64,
    pub c_tilde_minus: Complex64,
    pub c_plus: Complex64,
    pub c_minus: Complex64,
    pub normalized_plus: Complex64,
    pub normalized_minus: Complex64,
    pub limit: ResponseLimit,
}

struct Denominators {
    atomic: Complex64,
    mirror: Complex64,
}

fn denominators(model: &ModelParams, dp: f64) -> Result<Denominators> {
    let om = model.atomic_mode_frequency;
    let wm = model.mirror_frequency;
    let atomic = Complex64::new(om * om - dp * dp, model.atomic_damping * dp);
    let mirror = Complex64::new(wm * wm - dp * dp, model.mirror_damping * dp);
    if atomic.norm() < POLE_FLOOR || mirror.norm() < POLE_FLOOR {
        return Err(Error::PoleAtResonance { probe_detuning: dp });
    }
    Ok(Denominators { atomic, mirror })
}

pub fn susceptibility_x(model: &ModelParams, op: &OperatingPoint, dp: f64) -> Result<Complex64> {
    let d = denominators(model, dp)?;
    Ok(x_with(model, op, &d))
}

fn x_with(model: &ModelParams, op: &OperatingPoint, d: &Denominators) -> Complex64 {
    let om = model.atomic_mode_frequency;
    let (ga, gm, e) = (op.atomic_coupling, op.mirror_coupling, op.transverse_coupling);
    let mut x = Complex64::new(0.0, 0.0);
    if ga != 0.0 {
        x -= Complex64::new(ga * ga * om, ga * e * om) / d.atomic;
    }
    if gm != 0.0 {
        x -= gm * gm * model.mirror_frequency / d.mirror;
    }
    x
}

/// Coupling-dependent part of Y.
fn y_coupled(model: &ModelParams, op: &OperatingPoint, dp: f64, d: &Denominators, form: ClosedForm) -> Complex64 {
    let k = model.cavity_decay;
    let om = model.atomic_mode_frequency;
    let (ga, gm, e, delta) = (op.atomic_coupling, op.mirror_coupling, op.transverse_coupling, op.detuning);
    let kd = Complex64::new(k, dp);
    let mut y = Complex64::new(0.0, 0.0);
    if ga != 0.0 {
        y += (2.0 * om * ga * ga * kd - 2.0 * om * delta * e * ga) / d.atomic;
    }
    if gm != 0.0 {
        let factor = match form {
            ClosedForm::Corrected => 2.0 * kd,
            ClosedForm::AsPrinted => Complex64::new(2.0 * k, 0.0),
        };
        y += factor * model.mirror_frequency * gm * gm / d.mirror;
    }
    y
}

/// `-Delta^2 - kappa^2 - 2 i kappa Delta_p + Delta_p^2` in factored form,
/// which keeps the cancellation near `Delta_p = Delta` exact.
fn y_bare(k: f64, delta: f64, dp: f64) -> Complex64 {
    -Complex64::new(k, dp + delta) * Complex64::new(k, dp - delta)
}

pub fn susceptibility_y(model: &ModelParams, op: &OperatingPoint, dp: f64, form: ClosedForm) -> Result<Complex64> {
    let d = denominators(model, dp)?;
    Ok(y_bare(model.cavity_decay, op.detuning, dp) + y_coupled(model, op, dp, &d, form))
}

/// `Y_c + 2 (kappa + i Delta_p) X`, evaluated term by term.
fn y_remainder(model: &ModelParams, op: &OperatingPoint, dp: f64, d: &Denominators, form: ClosedForm) -> Complex64 {
    let k = model.cavity_decay;
    let om = model.atomic_mode_frequency;
    let (ga, gm, e, delta) = (op.atomic_coupling, op.mirror_coupling, op.transverse_coupling, op.detuning);
    let mut r = Complex64::new(0.0, 0.0);
    if ga != 0.0 && e != 0.0 {
        r += -2.0 * I * e * ga * om * Complex64::new(k, -(delta - dp)) / d.atomic;
    }
    if gm != 0.0 && form == ClosedForm::AsPrinted {
        r += -2.0 * I * dp * model.mirror_frequency * gm * gm / d.mirror;
    }
    r
}

/// `(c+~, c-~, limit)` per unit probe amplitude.
fn unit_probe(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    form: ClosedForm,
) -> Result<(Complex64, Complex64, ResponseLimit, Complex64, Complex64)> {
    let d = denominators(model, dp)?;
    let k = model.cavity_decay;
    let delta = op.detuning;
    let x = x_with(model, op, &d);
    let yc = y_coupled(model, op, dp, &d, form);
    let y = y_bare(k, delta, dp) + yc;
    let minus = (Complex64::new(k, -(delta + dp)) + x.conj()) / y.conj();
    if op.atomic_coupling == 0.0 && op.mirror_coupling == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), minus, ResponseLimit::ZeroCoupling, x, y));
    }
    let r = y_remainder(model, op, dp, &d, form);
    if x.norm() < WEAK_COUPLING * Complex64::new(k, dp).norm() {
        if r != Complex64::new(0.0, 0.0) {
            return Err(Error::IndeterminateForm { probe_detuning: dp });
        }
        return Ok((x / y, minus, ResponseLimit::WeakCoupling, x, y));
    }
    Ok(((r / x + x) / y, minus, ResponseLimit::Regular, x, y))
}

/// Intracavity probe amplitudes `(c+~, c-~)`.
pub fn intracavity_probe(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    form: ClosedForm,
) -> Result<(Complex64, Complex64, ResponseLimit)> {
    let (p, m, limit, _, _) = unit_probe(model, op, dp, form)?;
    let ep = model.probe_amplitude;
    Ok((ep * p, ep * m, limit))
}

/// The printed `c+~ = E_p [Y + (b + X)(a + X)] / (X Y)` without
/// rearrangement. Loses accuracy at weak coupling.
pub fn intracavity_plus_raw(model: &ModelParams, op: &OperatingPoint, dp: f64, form: ClosedForm) -> Result<Complex64> {
    let x = susceptibility_x(model, op, dp)?;
    let y = susceptibility_y(model, op, dp, form)?;
    let k = model.cavity_decay;
    let a = Complex64::new(k, -(op.detuning - dp));
    let b = Complex64::new(k, op.detuning + dp);
    Ok(model.probe_amplitude * (y + (b + x) * (a + x)) / (x * y))
}

/// Fills the output components of a response carrying `c+~, c-~`.
pub fn output_components(model: &ModelParams, pr: ProbeResponse) -> ProbeResponse {
    let s = (2.0 * model.cavity_decay).sqrt();
    let ep = model.probe_amplitude;
    ProbeResponse {
        c_plus: s * pr.c_tilde_plus + 1.0,
        c_minus: s * pr.c_tilde_minus,
        normalized_plus: s * pr.c_tilde_plus / ep,
        normalized_minus: s * pr.c_tilde_minus / ep,
        ..pr
    }
}

pub fn probe_response(model: &ModelParams, op: &OperatingPoint, dp: f64, form: ClosedForm) -> Result<ProbeResponse> {
    let (p, m, limit, x, y) = unit_probe(model, op, dp, form)?;
    let s = (2.0 * model.cavity_decay).sqrt();
    let ep = model.probe_amplitude;
    let c_tilde_plus = ep * p;
    let c_tilde_minus = ep * m;
    Ok(ProbeResponse {
        probe_detuning: dp,
        detuning: op.detuning,
        x,
        y,
        c_tilde_plus,
        c_tilde_minus,
        c_plus: s * c_tilde_plus + 1.0,
        c_minus: s * c_tilde_minus,
        normalized_plus: s * p,
        normalized_minus: s * m,
        limit,
    })
}

/// Output components without optical coupling: `(c+, c-)`.
pub fn empty_cavity(delta: f64, kappa: f64, dp: f64) -> (Complex64, Complex64) {
    (Complex64::new(0.0, 0.0), 2.0 * kappa / Complex64::new(kappa, delta - dp))
}

/// Overall sign applied to the c- spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// c- as printed; the empty-cavity line is a dip to -2.
    Printed,
    /// c- multiplied by -1; the empty-cavity line peaks at +2.
    EmptyCavity,
}

impl SignConvention {
    fn factor(self) -> f64 {
        match self {
            SignConvention::Printed => 1.0,
            SignConvention::EmptyCavity => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignConvention::Printed => "printed",
            SignConvention::EmptyCavity => "empty_cavity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [SignConvention::Printed, SignConvention::EmptyCavity].into_iter().find(|c| c.name() == s)
    }
}

/// What evaluates each spectrum point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Printed(ClosedForm),
    Oracle(Variant),
}

impl SpectrumSource {
    pub fn label(self) -> String {
        match self {
            SpectrumSource::Printed(f) => format!("printed_{}", f.name()),
            SpectrumSource::Oracle(v) => format!("oracle_{}", v.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumOptions {
    pub source: SpectrumSource,
    pub sign: SignConvention,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { source: SpectrumSource::Printed(ClosedForm::Corrected), sign: SignConvention::EmptyCavity }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumMetadata {
    pub mode: &'static str,
    pub detuning: f64,
    pub mirror_coupling: f64,
    pub atomic_coupling: f64,
    pub transverse_coupling: f64,
    pub phase: f64,
    pub atomic_mode_frequency: f64,
    pub mirror_frequency: f64,
    pub cavity_decay: f64,
    pub probe_amplitude: f64,
    pub source: String,
    pub sign_convention: SignConvention,
}

/// Output spectrum per unit probe input: `c- = sign * 2 kappa c-~ / E_p`,
/// `c+ = 2 kappa c+~ / E_p + 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub grid: Vec<f64>,
    pub c_minus: Vec<Complex64>,
    pub c_plus: Vec<Complex64>,
    pub metadata: SpectrumMetadata,
}

impl SpectrumResult {
    pub fn absorption(&self) -> Vec<f64> {
        self.c_minus.iter().map(|c| c.re).collect()
    }

    pub fn dispersion(&self) -> Vec<f64> {
        self.c_minus.iter().map(|c| c.im).collect()
    }

    pub fn power(&self) -> Vec<f64> {
        self.c_minus.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// `count` uniform points from `start` to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidGrid(format!("{start}:{stop}:{count}")));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    if !(stop > start) {
        return Err(Error::InvalidGrid(format!("stop {stop} must exceed start {start}")));
    }
    let span = stop - start;
    let last = (count - 1) as f64;
    let grid: Vec<f64> =
        (0..count).map(|i| if i + 1 == count { stop } else { start + span * (i as f64 / last) }).collect();
    check_grid(&grid)?;
    Ok(grid)
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid value".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Unit-drive `(c+~, c-~)` in the printed labeling from either source.
pub fn unit_amplitudes(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    source: SpectrumSource,
) -> Result<(Complex64, Complex64)> {
    match source {
        SpectrumSource::Printed(form) => {
            let (p, m, _, _, _) = unit_probe(model, op, dp, form)?;
            Ok((p, m))
        }
        SpectrumSource::Oracle(variant) => {
            let h = harmonic_response(model, op, dp, variant, 1.0)?;
            Ok((h.cavity_minus, -h.cavity_plus))
        }
    }
}

pub fn spectrum(
    model: &ModelParams,
    op: &OperatingPoint,
    grid: &[f64],
    opts: SpectrumOptions,
) -> Result<SpectrumResult> {
    check_grid(grid)?;
    let two_k = 2.0 * model.cavity_decay;
    let sign = opts.sign.factor();
    let points: Vec<Result<(Complex64, Complex64)>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &dp)| {
            unit_amplitudes(model, op, dp, opts.source)
                .map(|(p, m)| (two_k * p + 1.0, sign * two_k * m))
                .map_err(|e| Error::AtPoint { index: i, source: Box::new(e) })
        })
        .collect();
    let mut c_plus = Vec::with_capacity(grid.len());
    let mut c_minus = Vec::with_capacity(grid.len());
    for p in points {
        let (cp, cm) = p?;
        c_plus.push(cp);
        c_minus.push(cm);
    }
    Ok(SpectrumResult { grid: grid.to_vec(), c_minus, c_plus, metadata: metadata(model, op, opts) })
}

pub fn metadata(model: &ModelParams, op: &OperatingPoint, opts: SpectrumOptions) -> SpectrumMetadata {
    SpectrumMetadata {
        mode: match op.source {
            OperatingSource::Physical { .. } => "physical",
            OperatingSource::Inverse => "inverse",
            OperatingSource::Direct => "direct",
        },
        detuning: op.detuning,
        mirror_coupling: op.mirror_coupling,
        atomic_coupling: op.atomic_coupling,
        transverse_coupling: op.transverse_coupling,
        phase: op.phase,
        atomic_mode_frequency: model.atomic_mode_frequency,
        mirror_frequency: model.mirror_frequency,
        cavity_decay: model.cavity_decay,
        probe_amplitude: model.probe_amplitude,
        source: opts.source.label(),
        sign_convention: opts.sign,
    }
}
