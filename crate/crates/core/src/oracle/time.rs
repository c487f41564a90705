//! Fixed-step RK4 integration of the linearized equations.

use crate::drift::{drift_matrix, is_stable, Variant};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::oracle::frequency::solve_frequency_domain;
use crate::steady::OperatingPoint;
use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::TAU;

type State = [f64; 6];

/// Right-hand side of the linearized mean-value equations, written out
/// term by term.
#[derive(Clone, Copy, Debug)]
pub struct LinearizedFlow {
    kappa: f64,
    detuning: f64,
    omega_m: f64,
    gamma_m: f64,
    omega_at: f64,
    gamma_r: f64,
    mirror: f64,
    atomic: f64,
    transverse: f64,
    gauge: Complex64,
    variant: Variant,
    drive: f64,
    probe_detuning: f64,
}

impl LinearizedFlow {
    pub fn new(model: &ModelParams, op: &OperatingPoint, variant: Variant, drive: f64, dp: f64) -> Self {
        LinearizedFlow {
            kappa: model.cavity_decay,
            detuning: op.detuning,
            omega_m: model.mirror_frequency,
            gamma_m: model.mirror_damping,
            omega_at: model.atomic_mode_frequency,
            gamma_r: model.atomic_damping,
            mirror: op.mirror_coupling,
            atomic: op.atomic_coupling,
            transverse: op.transverse_coupling,
            gauge: Complex64::from_polar(1.0, op.phase),
            variant,
            drive,
            probe_detuning: dp,
        }
    }

    fn homogeneous(mut self) -> Self {
        self.drive = 0.0;
        self
    }

    pub fn derivative(&self, t: f64, x: &State) -> State {
        let i = Complex64::new(0.0, 1.0);
        let c = Complex64::new(x[0], x[1]);
        let (q, p, qa, pa) = (x[2], x[3], x[4], x[5]);
        let (s, co) = (self.probe_detuning * t).sin_cos();
        let probe = Complex64::new(self.drive * co, -self.drive * s);
        let dc = -Complex64::new(self.kappa, self.detuning) * c
            + self.gauge * (self.mirror * q - self.atomic * qa)
            + i * self.transverse * qa
            + probe;
        let force = 2.0 * (self.gauge.conj() * c).re;
        let (back, restoring) = match self.variant {
            Variant::PaperLiteral => (self.atomic, self.omega_m),
            _ => (-self.atomic, self.omega_at),
        };
        let mut dpa = -restoring * qa + back * force - self.gamma_r * pa;
        if self.variant == Variant::HamiltonianConsistent {
            dpa -= 2.0 * self.transverse * c.re;
        }
        [
            dc.re,
            dc.im,
            self.omega_m * p,
            -self.omega_m * q + self.mirror * force - self.gamma_m * p,
            self.omega_at * pa,
            dpa,
        ]
    }

    fn step(&self, t: f64, h: f64, x: &State) -> State {
        let add = |a: &State, b: &State, s: f64| -> State {
            let mut o = *a;
            for j in 0..6 {
                o[j] += s * b[j];
            }
            o
        };
        let k1 = self.derivative(t, x);
        let k2 = self.derivative(t + h / 2.0, &add(x, &k1, h / 2.0));
        let k3 = self.derivative(t + h / 2.0, &add(x, &k2, h / 2.0));
        let k4 = self.derivative(t + h, &add(x, &k3, h));
        let mut o = *x;
        for j in 0..6 {
            o[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        o
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRoute {
    /// Integrate from rest past the transient, then project.
    Transient,
    /// Shoot for the periodic orbit over one probe period.
    PeriodicOrbit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeDomainOptions {
    /// Steps per period of the fastest frequency in the problem (>= 50).
    pub points_per_period: usize,
    pub check_halving: bool,
    pub halving_tolerance: f64,
    pub max_steps: u64,
}

impl Default for TimeDomainOptions {
    fn default() -> Self {
        TimeDomainOptions {
            points_per_period: 200,
            check_halving: true,
            halving_tolerance: 1e-6,
            max_steps: 400_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeDomainRun {
    pub route: TimeRoute,
    pub step: f64,
    pub horizon: f64,
    pub transient_cutoff: f64,
    pub probe_periods: u64,
    pub steps: u64,
    pub cavity_plus: Complex64,
    pub cavity_minus: Complex64,
    /// `O+` for (Re dc, Im dc, dq, dp, dQ, dP).
    pub quadratures: [Complex64; 6],
    /// `O-` projected independently; equals `conj(O+)` for a real signal.
    pub quadratures_minus: [Complex64; 6],
    /// Fraction of signal power outside the `+-dp` lines.
    pub projection_residual: f64,
    /// Relative change of the amplitudes when the step is halved.
    pub halving_change: Option<f64>,
}

/// Largest frequency the step has to resolve.
pub fn fastest_frequency(model: &ModelParams, op: &OperatingPoint, dp: f64) -> f64 {
    [model.mirror_frequency, model.atomic_mode_frequency, op.detuning.abs(), dp.abs(), model.cavity_decay]
        .into_iter()
        .fold(0.0, f64::max)
}

fn steps_per_probe_period(model: &ModelParams, op: &OperatingPoint, dp: f64, ppp: usize) -> Result<u64> {
    if !(dp > 0.0) {
        return Err(Error::InvalidParameter { name: "probe_detuning", reason: "time-domain runs need dp > 0".into() });
    }
    if ppp < 50 {
        return Err(Error::InvalidParameter { name: "points_per_period", reason: "must be >= 50".into() });
    }
    Ok((ppp as f64 * fastest_frequency(model, op, dp) / dp).ceil() as u64)
}

struct Projection {
    dp: f64,
    sums: [Complex64; 6],
    sums_minus: [Complex64; 6],
    power: f64,
    count: u64,
}

impl Projection {
    fn new(dp: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Projection { dp, sums: [z; 6], sums_minus: [z; 6], power: 0.0, count: 0 }
    }

    fn add(&mut self, t: f64, x: &State) {
        let w = Complex64::from_polar(1.0, self.dp * t);
        for j in 0..6 {
            self.sums[j] += x[j] * w;
            self.sums_minus[j] += x[j] * w.conj();
            self.power += x[j] * x[j];
        }
        self.count += 1;
    }

    fn finish(self) -> ([Complex64; 6], [Complex64; 6], f64) {
        let n = self.count as f64;
        let plus = self.sums.map(|s| s / n);
        let minus = self.sums_minus.map(|s| s / n);
        let total = self.power / n;
        let lines: f64 = plus.iter().map(|v| 2.0 * v.norm_sqr()).sum();
        let residual = if total > 0.0 { (total - lines).abs() / total } else { 0.0 };
        (plus, minus, residual)
    }
}

fn cavity_from(q: &[Complex64; 6]) -> (Complex64, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    (q[0] + i * q[1], q[0].conj() + i * q[1].conj())
}

fn relative_change(a: &[Complex64; 6], b: &[Complex64; 6]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn transient_once(
    flow: &LinearizedFlow,
    dp: f64,
    n_per: u64,
    cutoff_steps_per_period: f64,
    periods: u64,
) -> TimeDomainRun {
    let period = TAU / dp;
    let h = period / n_per as f64;
    let n0 = (cutoff_steps_per_period * n_per as f64).ceil() as u64;
    let mut x = [0.0; 6];
    for k in 0..n0 {
        x = flow.step(k as f64 * h, h, &x);
    }
    let mut proj = Projection::new(dp);
    let total = n0 + periods * n_per;
    for k in n0..total {
        let t = k as f64 * h;
        proj.add(t, &x);
        x = flow.step(t, h, &x);
    }
    let (plus, minus, residual) = proj.finish();
    let (cp, cm) = cavity_from(&plus);
    TimeDomainRun {
        route: TimeRoute::Transient,
        step: h,
        horizon: total as f64 * h,
        transient_cutoff: n0 as f64 * h,
        probe_periods: periods,
        steps: total,
        cavity_plus: cp,
        cavity_minus: cm,
        quadratures: plus,
        quadratures_minus: minus,
        projection_residual: residual,
        halving_change: None,
    }
}

/// Integrates from rest, discards `8 / |Re lambda_slowest|`, and projects
/// onto the probe lines over an integer number of probe periods.
pub fn integrate_time_domain(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    variant: Variant,
    opts: TimeDomainOptions,
) -> Result<TimeDomainRun> {
    let dm = drift_matrix(model, op, variant);
    if !is_stable(&dm)? {
        return Err(Error::UnstableSystem { abscissa: dm.spectral_abscissa() });
    }
    let n_per = steps_per_probe_period(model, op, dp, opts.points_per_period)?;
    let decay = dm.spectral_abscissa().abs();
    let period = TAU / dp;
    let cutoff_periods = 8.0 / decay / period;
    let periods = ((1.0 / decay) / period).ceil().max(1.0) as u64;
    let base = (cutoff_periods.ceil() as u64 + periods) * n_per;
    let needed = if opts.check_halving { 3 * base } else { base };
    if needed > opts.max_steps {
        return Err(Error::StepBudgetExceeded { needed, budget: opts.max_steps });
    }
    let flow = LinearizedFlow::new(model, op, variant, model.probe_amplitude, dp);
    let mut run = transient_once(&flow, dp, n_per, cutoff_periods, periods);
    if opts.check_halving {
        let fine = transient_once(&flow, dp, 2 * n_per, cutoff_periods, periods);
        let change = relative_change(&run.quadratures, &fine.quadratures);
        run.halving_change = Some(change);
        if change > opts.halving_tolerance {
            return Err(Error::StepTooCoarse { change });
        }
    }
    Ok(run)
}

fn propagate(flow: &LinearizedFlow, x0: &State, h: f64, n: u64) -> State {
    let mut x = *x0;
    for k in 0..n {
        x = flow.step(k as f64 * h, h, &x);
    }
    x
}

/// Periodic steady response by shooting: the RK4 monodromy over one probe
/// period fixes the initial state of the periodic orbit. Works whether or
/// not the linearized system is stable.
pub fn integrate_periodic_orbit(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    variant: Variant,
    points_per_period: usize,
) -> Result<TimeDomainRun> {
    let n = steps_per_probe_period(model, op, dp, points_per_period)?;
    let period = TAU / dp;
    let h = period / n as f64;
    let flow = LinearizedFlow::new(model, op, variant, model.probe_amplitude, dp);
    let free = flow.homogeneous();
    let mut phi = Matrix6::<f64>::zeros();
    for j in 0..6 {
        let mut e = [0.0; 6];
        e[j] = 1.0;
        let col = propagate(&free, &e, h, n);
        for i in 0..6 {
            phi[(i, j)] = col[i];
        }
    }
    let particular = propagate(&flow, &[0.0; 6], h, n);
    let a = Matrix6::<f64>::identity() - phi;
    let x0 = a.lu().solve(&Vector6::from(particular)).ok_or(Error::SingularSystem { condition: f64::INFINITY })?;
    let mut x: State = [x0[0], x0[1], x0[2], x0[3], x0[4], x0[5]];
    let start = x;
    let mut proj = Projection::new(dp);
    for k in 0..n {
        let t = k as f64 * h;
        proj.add(t, &x);
        x = flow.step(t, h, &x);
    }
    let scale = start.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let closure = start.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if scale > 0.0 && !(closure <= 1e-6 * scale) {
        return Err(Error::InternalInconsistency(format!("periodic orbit fails to close: {closure:e} vs {scale:e}")));
    }
    let (plus, minus, residual) = proj.finish();
    let (cp, cm) = cavity_from(&plus);
    Ok(TimeDomainRun {
        route: TimeRoute::PeriodicOrbit,
        step: h,
        horizon: period,
        transient_cutoff: 0.0,
        probe_periods: 1,
        steps: 8 * n,
        cavity_plus: cp,
        cavity_minus: cm,
        quadratures: plus,
        quadratures_minus: minus,
        projection_residual: residual,
        halving_change: None,
    })
}

/// Stable systems take the transient route, unstable ones the periodic orbit.
pub fn integrate_any(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    variant: Variant,
    opts: TimeDomainOptions,
) -> Result<TimeDomainRun> {
    match integrate_time_domain(model, op, dp, variant, opts) {
        Err(Error::UnstableSystem { .. }) => integrate_periodic_orbit(model, op, dp, variant, opts.points_per_period),
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceEstimate {
    pub coarse_points_per_period: usize,
    pub coarse_error: f64,
    pub fine_error: f64,
    pub order: f64,
}

/// Error of the periodic-orbit amplitudes against the frequency-domain
/// solve at `ppp` and `2 ppp`; `order = log2(e(h) / e(h/2))`.
pub fn convergence_order(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    variant: Variant,
    ppp: usize,
) -> Result<ConvergenceEstimate> {
    let exact = solve_frequency_domain(model, op, dp, variant)?.quadratures();
    let coarse = integrate_periodic_orbit(model, op, dp, variant, ppp)?;
    let fine = integrate_periodic_orbit(model, op, dp, variant, 2 * ppp)?;
    let coarse_error = relative_change(&coarse.quadratures, &exact);
    let fine_error = relative_change(&fine.quadratures, &exact);
    Ok(ConvergenceEstimate {
        coarse_points_per_period: ppp,
        coarse_error,
        fine_error,
        order: (coarse_error / fine_error).log2(),
    })
}
