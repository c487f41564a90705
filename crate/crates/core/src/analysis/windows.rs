//! Transparency-window detection and the transverse-field amplification check.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::response::{spectrum, uniform_grid, SpectrumOptions, SpectrumResult};
use crate::steady::OperatingPoint;
use serde::Serialize;

/// Windows shallower than this fraction of the quadrature's range are dropped.
pub const MIN_RELATIVE_DEPTH: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Re c-.
    Absorption,
    /// Im c-.
    Dispersion,
    /// |c-|^2.
    Power,
}

impl Quadrature {
    pub fn values(self, spec: &SpectrumResult) -> Vec<f64> {
        match self {
            Quadrature::Absorption => spec.absorption(),
            Quadrature::Dispersion => spec.dispersion(),
            Quadrature::Power => spec.power(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransparencyWindow {
    /// Refined dip position (rad/s).
    pub center: f64,
    pub depth: f64,
    /// Full width at half depth (rad/s).
    pub width: f64,
    pub dip_index: usize,
    pub left_max_index: usize,
    pub right_max_index: usize,
    pub dip_value: f64,
}

/// Vertex of the parabola through `(x[i-1..=i+1], y[..])`, or the sample
/// itself at the grid ends.
fn refine(x: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= x.len() {
        return (x[i], y[i]);
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a == 0.0 || !a.is_finite() {
        return (x1, y1);
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y1 + (xv - x1) * (d01 + a * (xv - x0));
    (xv, yv)
}

/// Position where `y` crosses `level` between samples `j` and `k`.
fn crossing(x: &[f64], y: &[f64], j: usize, k: usize, level: f64) -> f64 {
    let t = (level - y[j]) / (y[k] - y[j]);
    x[j] + t * (x[k] - x[j])
}

/// Interior minima bracketed by maxima (grid ends count as maxima).
pub fn find_windows_in(x: &[f64], y: &[f64]) -> Vec<TransparencyWindow> {
    let n = y.len();
    if n < 5 || x.len() != n {
        return Vec::new();
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let threshold = MIN_RELATIVE_DEPTH * (hi - lo);
    let mut out = Vec::new();
    for i in 1..n - 1 {
        if !(y[i] < y[i - 1] && y[i] <= y[i + 1]) {
            continue;
        }
        let mut l = i;
        while l > 0 && y[l - 1] > y[l] {
            l -= 1;
        }
        let mut r = i;
        while r + 1 < n && y[r + 1] >= y[r] {
            r += 1;
        }
        if l == i || r == i {
            continue;
        }
        let (xc, yc) = refine(x, y, i);
        let near = if xc - x[l] <= x[r] - xc { l } else { r };
        let (_, ymax) = refine(x, y, near);
        let depth = ymax - yc;
        if !(depth >= threshold) || depth <= 0.0 {
            continue;
        }
        let level = yc + depth / 2.0;
        let left = (l..i).rev().find(|&j| y[j] >= level).map(|j| crossing(x, y, j, j + 1, level));
        let right = (i + 1..=r).find(|&j| y[j] >= level).map(|j| crossing(x, y, j - 1, j, level));
        let width = match (left, right) {
            (Some(a), Some(b)) => b - a,
            (Some(a), None) => 2.0 * (xc - a),
            (None, Some(b)) => 2.0 * (b - xc),
            (None, None) => x[r] - x[l],
        };
        out.push(TransparencyWindow {
            center: xc,
            depth,
            width,
            dip_index: i,
            left_max_index: l,
            right_max_index: r,
            dip_value: yc,
        });
    }
    out
}

pub fn find_windows(spec: &SpectrumResult, quadrature: Quadrature) -> Vec<TransparencyWindow> {
    find_windows_in(&spec.grid, &quadrature.values(spec))
}

/// Analysis bands `[0.8 f, 1.2 f]` around the atomic and mirror modes,
/// `points` samples each. Windows sit where the probe beat matches a mode.
pub fn mode_bands(model: &ModelParams, points: usize) -> Result<Vec<Vec<f64>>> {
    let mut freqs = [model.atomic_mode_frequency, model.mirror_frequency];
    freqs.sort_by(f64::total_cmp);
    freqs.iter().map(|&f| uniform_grid(0.8 * f, 1.2 * f, points)).collect()
}

/// Windows over several bands, concatenated in band order.
pub fn windows_in_bands(
    model: &ModelParams,
    op: &OperatingPoint,
    bands: &[Vec<f64>],
    opts: SpectrumOptions,
    quadrature: Quadrature,
) -> Result<Vec<TransparencyWindow>> {
    let mut out = Vec::new();
    for band in bands {
        out.extend(find_windows(&spectrum(model, op, band, opts)?, quadrature));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowTrend {
    pub depths: Vec<f64>,
    pub centers: Vec<f64>,
    pub differences: Vec<f64>,
    pub strictly_increasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub transverse_couplings: Vec<f64>,
    pub windows: Vec<WindowTrend>,
    pub all_increasing: bool,
}

/// Window depths across a family differing only in `eta_eff`.
pub fn amplification_check(
    model: &ModelParams,
    op: &OperatingPoint,
    transverse_couplings: &[f64],
    bands: &[Vec<f64>],
    opts: SpectrumOptions,
    quadrature: Quadrature,
) -> Result<MonotonicityReport> {
    let mut family = Vec::with_capacity(transverse_couplings.len());
    for &e in transverse_couplings {
        let m = ModelParams { transverse_coupling: e, ..model.clone() };
        let o = OperatingPoint { transverse_coupling: e, ..*op };
        family.push(windows_in_bands(&m, &o, bands, opts, quadrature)?);
    }
    let counts: Vec<usize> = family.iter().map(|w| w.len()).collect();
    if counts.windows(2).any(|c| c[0] != c[1]) {
        return Err(Error::WindowCountChanged { counts });
    }
    let count = counts.first().copied().unwrap_or(0);
    let windows: Vec<WindowTrend> = (0..count)
        .map(|w| {
            let depths: Vec<f64> = family.iter().map(|f| f[w].depth).collect();
            let centers: Vec<f64> = family.iter().map(|f| f[w].center).collect();
            let differences: Vec<f64> = depths.windows(2).map(|d| d[1] - d[0]).collect();
            let strictly_increasing = differences.iter().all(|&d| d > 0.0);
            WindowTrend { depths, centers, differences, strictly_increasing }
        })
        .collect();
    let all_increasing = windows.iter().all(|w| w.strictly_increasing);
    Ok(MonotonicityReport { transverse_couplings: transverse_couplings.to_vec(), windows, all_increasing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz(x: f64) -> f64 {
        1.0 / (1.0 + x * x)
    }

    #[test]
    fn lorentzian_has_no_window() {
        let x: Vec<f64> = (0..401).map(|i| -5.0 + i as f64 * 0.025).collect();
        let y: Vec<f64> = x.iter().map(|&v| lorentz(v)).collect();
        assert!(find_windows_in(&x, &y).is_empty());
    }

    #[test]
    fn dip_in_a_peak() {
        let x: Vec<f64> = (0..2001).map(|i| -5.0 + i as f64 * 0.005).collect();
        let y: Vec<f64> = x.iter().map(|&v| lorentz(v) - 0.4 * lorentz((v - 0.3) / 0.05)).collect();
        let w = find_windows_in(&x, &y);
        assert_eq!(w.len(), 1);
        let w = &w[0];
        assert!((w.center - 0.3).abs() < 0.01);
        assert!(x[w.left_max_index] < w.center && w.center < x[w.right_max_index]);
        // Measured from the nearer (lower) shoulder of the sloping peak.
        assert!(w.depth > 0.25 && w.depth < 0.4);
        assert!(w.width > 0.05 && w.width < 0.2);
    }

    #[test]
    fn shallow_ripple_dropped() {
        let x: Vec<f64> = (0..1001).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|&v| v + 1e-6 * (40.0 * v).sin()).collect();
        assert!(find_windows_in(&x, &y).is_empty());
    }

    #[test]
    fn parabola_vertex() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 0.0, 2.0];
        let (xv, yv) = refine(&x, &y, 1);
        // y = 1.5 x^2 - 2.5 x + 1, vertex at 5/6
        assert!((xv - 5.0 / 6.0).abs() < 1e-15);
        assert!((yv - (1.0 - 25.0 / 24.0)).abs() < 1e-15);
    }

    #[test]
    fn single_element_family_is_monotone() {
        let m = ModelParams::figure(0.03, 0.0, 0.0, 0.51);
        let op = OperatingPoint::direct(&m).unwrap();
        let bands = mode_bands(&m, 401).unwrap();
        let r =
            amplification_check(&m, &op, &[0.0], &bands, SpectrumOptions::default(), Quadrature::Absorption).unwrap();
        assert!(r.all_increasing);
        assert_eq!(r.windows.len(), 1);
    }
}
