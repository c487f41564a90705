//! Three-way comparison: printed closed forms, frequency-domain solve,
//! time-domain integration.

use super::frequency::harmonic_response;
use super::time::{integrate_any, TimeDomainOptions, TimeRoute};
use crate::drift::{drift_matrix, Variant};
use crate::model::ModelParams;
use crate::response::{unit_amplitudes, ClosedForm, SpectrumSource};
use crate::steady::OperatingPoint;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ZeroCoupling,
    MechanicalOnly,
    AtomicOnly,
    General,
}

impl Regime {
    pub fn of(op: &OperatingPoint) -> Self {
        let mech = op.mirror_coupling != 0.0;
        let atom = op.atomic_coupling != 0.0;
        match (mech, atom) {
            (false, false) => Regime::ZeroCoupling,
            (true, false) => Regime::MechanicalOnly,
            (false, true) => Regime::AtomicOnly,
            (true, true) => Regime::General,
        }
    }

    /// The printed formulas reduce exactly without transverse drive.
    pub fn printed_exact(op: &OperatingPoint) -> bool {
        op.transverse_coupling == 0.0
    }
}

/// Relative deviation of a pair of amplitudes from a reference pair. Each
/// component is compared relative to itself unless it is negligible against
/// the larger reference component, in which case that sets the scale.
pub fn pair_deviation(a: (Complex64, Complex64), b: (Complex64, Complex64)) -> f64 {
    let scale = b.0.norm().max(b.1.norm());
    if scale == 0.0 {
        return (a.0 - b.0).norm().max((a.1 - b.1).norm());
    }
    let one = |x: Complex64, y: Complex64| {
        let d = (x - y).norm();
        if y.norm() > 1e-8 * scale {
            d / y.norm()
        } else {
            d / scale
        }
    };
    one(a.0, b.0).max(one(a.1, b.1))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationSummary {
    pub max: f64,
    pub median: f64,
    pub count: usize,
}

impl DeviationSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(DeviationSummary { max: v[n - 1], median, count: n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointComparison {
    pub probe_detuning: f64,
    /// Printed `(-c-~, c+~)` against the oracle's `(c+, c-)`.
    pub printed_vs_frequency: Option<f64>,
    pub frequency_vs_time: Option<f64>,
    pub error: Option<String>,
}

/// Which oracle component the printed `c-~` reproduces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelingReport {
    /// Max deviation of `-c-~` from the oracle's `e^{-i dp t}` amplitude.
    pub minus_vs_probe_frequency: f64,
    /// Max deviation of `c-~` from the oracle's `e^{+i dp t}` amplitude.
    pub minus_vs_stokes_frequency: f64,
    pub printed_minus_is_probe_frequency: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantAudit {
    pub variant: Variant,
    pub printed_vs_frequency_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompareOptions {
    pub closed_form: ClosedForm,
    /// Grid points (evenly spread, dp > 0) checked in the time domain.
    pub time_points: usize,
    pub time: TimeDomainOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { closed_form: ClosedForm::Corrected, time_points: 9, time: TimeDomainOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub regime: Regime,
    pub variant: Variant,
    pub closed_form: ClosedForm,
    pub spectral_abscissa: f64,
    pub stable: bool,
    pub time_route: Option<TimeRoute>,
    pub points: Vec<PointComparison>,
    pub printed_vs_frequency: Option<DeviationSummary>,
    pub frequency_vs_time: Option<DeviationSummary>,
    pub labeling: Option<LabelingReport>,
    pub variant_audit: Vec<VariantAudit>,
    pub errors: usize,
}

fn printed_pair(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    form: ClosedForm,
) -> crate::error::Result<(Complex64, Complex64)> {
    // (probe-frequency, Stokes) = (-c-~, c+~)
    let (p, m) = unit_amplitudes(model, op, dp, SpectrumSource::Printed(form))?;
    Ok((-m, p))
}

fn oracle_pair(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    variant: Variant,
) -> crate::error::Result<(Complex64, Complex64)> {
    let h = harmonic_response(model, op, dp, variant, 1.0)?;
    Ok((h.cavity_plus, h.cavity_minus))
}

fn time_indices(grid: &[f64], count: usize) -> Vec<usize> {
    let eligible: Vec<usize> = (0..grid.len()).filter(|&i| grid[i] > 0.0).collect();
    if count == 0 || eligible.is_empty() {
        return Vec::new();
    }
    if count >= eligible.len() {
        return eligible;
    }
    if count == 1 {
        return vec![eligible[eligible.len() / 2]];
    }
    let last = eligible.len() - 1;
    let mut idx: Vec<usize> = (0..count).map(|k| eligible[(k * last + (count - 1) / 2) / (count - 1)]).collect();
    idx.dedup();
    idx
}

pub fn compare(
    model: &ModelParams,
    op: &OperatingPoint,
    grid: &[f64],
    variant: Variant,
    opts: CompareOptions,
) -> ComparisonReport {
    let dm = drift_matrix(model, op, variant);
    let stable = crate::drift::is_stable(&dm).unwrap_or(false);
    let timed = time_indices(grid, opts.time_points);
    let unit = ModelParams { probe_amplitude: 1.0, ..model.clone() };
    let points: Vec<PointComparison> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &dp)| {
            let mut pc = PointComparison {
                probe_detuning: dp,
                printed_vs_frequency: None,
                frequency_vs_time: None,
                error: None,
            };
            let oracle = match oracle_pair(&unit, op, dp, variant) {
                Ok(o) => o,
                Err(e) => {
                    pc.error = Some(e.to_string());
                    return pc;
                }
            };
            match printed_pair(&unit, op, dp, opts.closed_form) {
                Ok(p) if dp != 0.0 => pc.printed_vs_frequency = Some(pair_deviation(p, oracle)),
                Ok(_) => {}
                Err(e) => pc.error = Some(e.to_string()),
            }
            if timed.binary_search(&i).is_ok() {
                match integrate_any(&unit, op, dp, variant, opts.time) {
                    Ok(run) => pc.frequency_vs_time = Some(pair_deviation((run.cavity_plus, run.cavity_minus), oracle)),
                    Err(e) => pc.error = Some(e.to_string()),
                }
            }
            pc
        })
        .collect();

    let pf: Vec<f64> = points.iter().filter_map(|p| p.printed_vs_frequency).collect();
    let ft: Vec<f64> = points.iter().filter_map(|p| p.frequency_vs_time).collect();

    let labeling = {
        let pairs: Vec<(f64, f64)> = grid
            .iter()
            .filter(|&&dp| dp != 0.0)
            .filter_map(|&dp| {
                let (_, m) = unit_amplitudes(&unit, op, dp, SpectrumSource::Printed(opts.closed_form)).ok()?;
                let h = harmonic_response(&unit, op, dp, variant, 1.0).ok()?;
                let probe = (-m - h.cavity_plus).norm() / h.cavity_plus.norm();
                let stokes = (m - h.cavity_minus).norm() / h.cavity_minus.norm().max(f64::MIN_POSITIVE);
                Some((probe, stokes))
            })
            .collect();
        if pairs.is_empty() {
            None
        } else {
            let a = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
            let b = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
            Some(LabelingReport {
                minus_vs_probe_frequency: a,
                minus_vs_stokes_frequency: b,
                printed_minus_is_probe_frequency: a < b,
            })
        }
    };

    let variant_audit = Variant::ALL
        .iter()
        .map(|&v| {
            let max = grid
                .iter()
                .filter(|&&dp| dp != 0.0)
                .filter_map(|&dp| {
                    let o = oracle_pair(&unit, op, dp, v).ok()?;
                    let p = printed_pair(&unit, op, dp, opts.closed_form).ok()?;
                    Some(pair_deviation(p, o))
                })
                .fold(0.0, f64::max);
            VariantAudit { variant: v, printed_vs_frequency_max: max }
        })
        .collect();

    let time_route = if ft.is_empty() {
        None
    } else if stable {
        Some(TimeRoute::Transient)
    } else {
        Some(TimeRoute::PeriodicOrbit)
    };
    ComparisonReport {
        regime: Regime::of(op),
        variant,
        closed_form: opts.closed_form,
        spectral_abscissa: dm.spectral_abscissa(),
        stable,
        time_route,
        errors: points.iter().filter(|p| p.error.is_some()).count(),
        printed_vs_frequency: DeviationSummary::of(&pf),
        frequency_vs_time: DeviationSummary::of(&ft),
        points,
        labeling,
        variant_audit,
    }
}

/// Tolerances a comparison must meet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Envelope {
    /// `None` leaves the printed-formula deviation ungated.
    pub printed_vs_frequency: Option<f64>,
    pub frequency_vs_time: f64,
}

impl Envelope {
    /// Default envelope per regime; `pinned` gates the printed formulas where
    /// they are not exact.
    pub fn for_regime(regime: Regime, op: &OperatingPoint, pinned: Option<f64>) -> Self {
        let printed = if Regime::printed_exact(op) { Some(1e-9) } else { pinned };
        let time = if regime == Regime::ZeroCoupling { 1e-6 } else { 1e-3 };
        Envelope { printed_vs_frequency: printed, frequency_vs_time: time }
    }
}

impl ComparisonReport {
    pub fn within(&self, env: &Envelope) -> bool {
        if self.errors > 0 {
            return false;
        }
        let printed_ok = match (env.printed_vs_frequency, &self.printed_vs_frequency) {
            (Some(tol), Some(s)) => s.max <= tol,
            _ => true,
        };
        let time_ok = self.frequency_vs_time.as_ref().is_none_or(|s| s.max <= env.frequency_vs_time);
        printed_ok && time_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes() {
        let m = ModelParams::figure(0.0, 0.08, 0.0, 0.51);
        assert_eq!(Regime::of(&OperatingPoint::direct(&m).unwrap()), Regime::MechanicalOnly);
        let m = ModelParams::figure(0.1, 0.08, 0.03, 0.51);
        assert_eq!(Regime::of(&OperatingPoint::direct(&m).unwrap()), Regime::General);
    }

    #[test]
    fn deviation_metric() {
        let one = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(pair_deviation((one, z), (one, z)), 0.0);
        assert!((pair_deviation((one * 1.001, z), (one, z)) - 1e-3).abs() < 1e-12);
        assert!((pair_deviation((one, one * 1e-12), (one, z)) - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn time_subsample() {
        let g: Vec<f64> = (0..11).map(|i| i as f64).collect();
        assert_eq!(time_indices(&g, 3), vec![1, 6, 10]);
        assert_eq!(time_indices(&g, 100).len(), 10);
        assert!(time_indices(&g, 0).is_empty());
    }

    #[test]
    fn summary_median() {
        let s = DeviationSummary::of(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!((s.max, s.median, s.count), (4.0, 2.5, 4));
        assert!(DeviationSummary::of(&[]).is_none());
    }
}
