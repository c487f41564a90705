//! Fano lineshape fitting by damped Gauss-Newton.
//!
//! Model: `F(x) = A (1 + rho e)^2 / (1 + e^2) + B` with `e = 2 (x - x0) / G`.
//! With `rho = 1/q` this is `A rho^2 (q + e)^2 / (1 + e^2) + B`; the
//! Lorentzian (`q -> inf`) sits at `rho = 0`.
//!
//! `(rho, A, B)` and `(-1/rho, -A rho^2, B + A (1 + rho^2))` trace the same
//! curve, so fits are reported in the branch `|rho| <= 1`.

use super::windows::{Quadrature, TransparencyWindow};
use crate::error::{Error, Result};
use crate::response::SpectrumResult;
use nalgebra::{Matrix5, Vector5};
use serde::Serialize;

pub const MAX_ITERATIONS: usize = 500;
pub const STEP_TOLERANCE: f64 = 1e-12;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
const INITIAL_DAMPING: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FanoParams {
    pub rho: f64,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl FanoParams {
    pub fn eval(&self, x: f64) -> f64 {
        let e = 2.0 * (x - self.center) / self.width;
        let s = 1.0 + self.rho * e;
        self.amplitude * s * s / (1.0 + e * e) + self.offset
    }

    /// Same curve with `width > 0`.
    pub fn positive_width(self) -> Self {
        if self.width < 0.0 {
            FanoParams { rho: -self.rho, width: -self.width, ..self }
        } else {
            self
        }
    }

    /// Same curve with `width > 0` and `|rho| <= 1` (`rho = 1` at the tie).
    pub fn canonical(self) -> Self {
        let p = self.positive_width();
        if p.rho.abs() > 1.0 || p.rho == -1.0 {
            let r2 = p.rho * p.rho;
            FanoParams {
                rho: -1.0 / p.rho,
                amplitude: -p.amplitude * r2,
                offset: p.offset + p.amplitude * (1.0 + r2),
                ..p
            }
        } else {
            p
        }
    }

    fn to_vec(self) -> Vector5<f64> {
        Vector5::new(self.rho, self.center, self.width, self.amplitude, self.offset)
    }

    fn from_vec(v: &Vector5<f64>) -> Self {
        FanoParams { rho: v[0], center: v[1], width: v[2], amplitude: v[3], offset: v[4] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FanoFit {
    pub params: FanoParams,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_ratio: f64,
    /// SSE after each accepted step (normalized units).
    pub history: Vec<f64>,
}

impl FanoFit {
    pub fn q(&self) -> f64 {
        1.0 / self.params.rho
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum InitialGuess {
    /// Candidates built from the segment's extrema; the best is kept.
    FromExtrema,
    Given(FanoParams),
}

/// Affine maps putting x and y on O(1) scales.
struct Scaling {
    xc: f64,
    xs: f64,
    yc: f64,
    ys: f64,
}

impl Scaling {
    fn to_internal(&self, p: FanoParams) -> FanoParams {
        FanoParams {
            rho: p.rho,
            center: (p.center - self.xc) / self.xs,
            width: p.width / self.xs,
            amplitude: p.amplitude / self.ys,
            offset: (p.offset - self.yc) / self.ys,
        }
    }

    fn to_external(&self, p: FanoParams) -> FanoParams {
        FanoParams {
            rho: p.rho,
            center: p.center * self.xs + self.xc,
            width: p.width * self.xs,
            amplitude: p.amplitude * self.ys,
            offset: p.offset * self.ys + self.yc,
        }
    }
}

fn sse(p: &FanoParams, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (p.eval(xi) - yi).powi(2)).sum()
}

/// `J^T J`, `J^T r` with `r = F - y`.
fn normal_equations(p: &FanoParams, x: &[f64], y: &[f64]) -> (Matrix5<f64>, Vector5<f64>) {
    let mut jtj = Matrix5::zeros();
    let mut jtr = Vector5::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let e = 2.0 * (xi - p.center) / p.width;
        let d = 1.0 + e * e;
        let s = 1.0 + p.rho * e;
        let f = p.amplitude * s * s / d + p.offset;
        let df_de = 2.0 * p.amplitude * s * (p.rho - e) / (d * d);
        let j = Vector5::new(
            2.0 * p.amplitude * s * e / d,
            df_de * (-2.0 / p.width),
            df_de * (-e / p.width),
            s * s / d,
            1.0,
        );
        jtj += j * j.transpose();
        jtr += j * (f - yi);
    }
    (jtj, jtr)
}

fn candidates(x: &[f64], y: &[f64]) -> Vec<FanoParams> {
    let n = x.len();
    let (imin, imax) =
        (0..n).fold((0, 0), |(a, b), i| (if y[i] < y[a] { i } else { a }, if y[i] > y[b] { i } else { b }));
    let (ymin, ymax) = (y[imin], y[imax]);
    let far = 0.5 * (y[0] + y[n - 1]);
    let span = x[n - 1] - x[0];
    let mut out = Vec::new();
    // Asymmetric profile, both orientations: zero of (1 + rho e) at one
    // extremum, peak at the other.
    for (ilo, ihi, sign) in [(imin, imax, 1.0), (imax, imin, -1.0)] {
        let (lo, hi) = if sign > 0.0 { (ymin, ymax) } else { (ymax, ymin) };
        let rho2 = ((far - lo) / (hi - far)).abs().max(1e-4);
        let r = rho2.sqrt();
        let sep = (x[ihi] - x[ilo]).abs().max(span / n as f64);
        let width = 2.0 * sep / (r + 1.0 / r);
        let rho = if x[ihi] > x[ilo] { r } else { -r };
        out.push(FanoParams { rho, center: x[ihi] - rho * width / 2.0, width, amplitude: hi - far, offset: lo });
    }
    // Symmetric peak and dip.
    for (i, ext) in [(imax, ymax), (imin, ymin)] {
        let half = 0.5 * (ext + far);
        let above = |v: f64| if ext > far { v >= half } else { v <= half };
        let mut l = i;
        while l > 0 && above(y[l - 1]) {
            l -= 1;
        }
        let mut r = i;
        while r + 1 < n && above(y[r + 1]) {
            r += 1;
        }
        let width = (x[r] - x[l]).max(2.0 * span / n as f64);
        out.push(FanoParams { rho: 0.0, center: x[i], width, amplitude: ext - far, offset: far });
    }
    out
}

pub fn fano_fit(x: &[f64], y: &[f64], guess: InitialGuess) -> Result<FanoFit> {
    if x.len() != y.len() {
        return Err(Error::DegenerateSegment("abscissa and ordinate lengths differ".into()));
    }
    if x.len() < 7 {
        return Err(Error::DegenerateSegment(format!("{} points, need at least 7", x.len())));
    }
    let mut distinct: Vec<f64> = y.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::DegenerateSegment(format!("{} distinct ordinates for 5 parameters", distinct.len())));
    }
    let (xlo, xhi) = (x[0].min(x[x.len() - 1]), x[0].max(x[x.len() - 1]));
    let (ylo, yhi) = (distinct[0], distinct[distinct.len() - 1]);
    let sc = Scaling { xc: 0.5 * (xlo + xhi), xs: 0.5 * (xhi - xlo), yc: 0.5 * (ylo + yhi), ys: 0.5 * (yhi - ylo) };
    if !(sc.xs > 0.0) || !(sc.ys > 0.0) {
        return Err(Error::DegenerateSegment("segment has zero extent".into()));
    }
    let u: Vec<f64> = x.iter().map(|&v| (v - sc.xc) / sc.xs).collect();
    let v: Vec<f64> = y.iter().map(|&w| (w - sc.yc) / sc.ys).collect();

    let start = match guess {
        InitialGuess::Given(p) => sc.to_internal(p.positive_width()),
        InitialGuess::FromExtrema => candidates(&u, &v)
            .into_iter()
            .filter(|p| p.width.is_finite() && p.width != 0.0)
            .map(|p| p.positive_width())
            .min_by(|a, b| sse(a, &u, &v).total_cmp(&sse(b, &u, &v)))
            .ok_or_else(|| Error::DegenerateSegment("no usable initial guess".into()))?,
    };

    let mut p = start;
    let mut cost = sse(&p, &u, &v);
    let (mut jtj, mut jtr) = normal_equations(&p, &u, &v);
    let g0 = jtr.norm();
    let mut lambda = INITIAL_DAMPING;
    let mut history = vec![cost];
    let mut converged = g0 == 0.0;
    let mut iterations = 0;
    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut damped = jtj;
        for k in 0..5 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&(-jtr)),
            None => match damped.lu().solve(&(-jtr)) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            },
        };
        let trial = FanoParams::from_vec(&(p.to_vec() + step)).positive_width();
        let trial_cost = sse(&trial, &u, &v);
        if trial_cost.is_finite() && trial_cost < cost {
            let rel_step = step.norm() / p.to_vec().norm().max(f64::MIN_POSITIVE);
            p = trial;
            cost = trial_cost;
            history.push(cost);
            (jtj, jtr) = normal_equations(&p, &u, &v);
            lambda /= 3.0;
            if rel_step < STEP_TOLERANCE || jtr.norm() <= GRADIENT_TOLERANCE * g0 {
                converged = true;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e30 {
                converged = jtr.norm() <= GRADIENT_TOLERANCE * g0;
                break;
            }
        }
    }
    let gradient_ratio = if g0 > 0.0 { jtr.norm() / g0 } else { 0.0 };
    let params = sc.to_external(p).canonical();
    let residual_norm = sse(&params, x, y).sqrt();
    Ok(FanoFit { params, residual_norm, converged, iterations, gradient_ratio, history })
}

/// Segment `[center - 3.5 w, center + 3.5 w]` around a window, clipped to
/// the grid.
pub fn window_segment(
    spec: &SpectrumResult,
    window: &TransparencyWindow,
    quadrature: Quadrature,
) -> (Vec<f64>, Vec<f64>) {
    let half = 3.5 * window.width;
    let (lo, hi) = (window.center - half, window.center + half);
    let y = quadrature.values(spec);
    spec.grid.iter().zip(y).filter(|(x, _)| **x >= lo && **x <= hi).map(|(x, y)| (*x, y)).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(p: &FanoParams, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let y = x.iter().map(|&v| p.eval(v)).collect();
        (x, y)
    }

    #[test]
    fn canonical_form_is_the_same_curve() {
        let p = FanoParams { rho: 0.4, center: 1.0, width: -0.2, amplitude: 2.0, offset: 0.1 };
        let c = p.canonical();
        assert!(c.width > 0.0);
        for x in [0.5, 0.9, 1.0, 1.3] {
            assert!((p.eval(x) - c.eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_rho_branch_is_the_same_curve() {
        for rho in [2.0, -3.5, -1.0, 1.0, 0.3] {
            let p = FanoParams { rho, center: 0.2, width: 0.7, amplitude: 1.3, offset: -0.4 };
            let c = p.canonical();
            assert!(c.rho.abs() <= 1.0);
            assert!(c.rho != -1.0);
            for x in [-2.0, -0.3, 0.2, 0.5, 1.9] {
                assert!((p.eval(x) - c.eval(x)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn recovers_q2_profile() {
        let wm = 1.0;
        let truth = FanoParams { rho: 0.5, center: 0.9 * wm, width: 0.05 * wm, amplitude: 1.0, offset: 0.0 };
        let (x, y) = sample(&truth, 0.6, 1.2, 601);
        let fit = fano_fit(&x, &y, InitialGuess::FromExtrema).unwrap();
        assert!(fit.converged);
        let p = fit.params;
        assert!((p.rho - 0.5).abs() < 1e-6 * 0.5);
        assert!((fit.q() - 2.0).abs() < 1e-6 * 2.0);
        assert!((p.center - 0.9).abs() < 1e-6 * 0.9);
        assert!((p.width - 0.05).abs() < 1e-6 * 0.05);
        assert!((p.amplitude - 1.0).abs() < 1e-6);
        assert!(p.offset.abs() < 1e-6);
    }

    #[test]
    fn lorentzian_dip_has_zero_rho() {
        let truth = FanoParams { rho: 0.0, center: 3.0, width: 0.4, amplitude: -0.7, offset: 1.0 };
        let (x, y) = sample(&truth, 1.0, 5.0, 401);
        let fit = fano_fit(&x, &y, InitialGuess::FromExtrema).unwrap();
        assert!(fit.converged);
        assert!(fit.params.rho.abs() < 1e-6);
    }

    #[test]
    fn accepted_steps_never_increase_cost() {
        let truth = FanoParams { rho: -1.7, center: 0.0, width: 1.0, amplitude: 0.3, offset: 0.2 };
        let (x, y) = sample(&truth, -6.0, 6.0, 301);
        let start = FanoParams { rho: -1.2, center: 0.3, width: 1.3, amplitude: 0.25, offset: 0.15 };
        let fit = fano_fit(&x, &y, InitialGuess::Given(start)).unwrap();
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.converged);
    }

    #[test]
    fn degenerate_segments() {
        let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
        assert!(matches!(fano_fit(&x, &x, InitialGuess::FromExtrema), Err(Error::DegenerateSegment(_))));
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| (v as i64 % 3) as f64).collect();
        assert!(matches!(fano_fit(&x, &y, InitialGuess::FromExtrema), Err(Error::DegenerateSegment(_))));
    }
}
