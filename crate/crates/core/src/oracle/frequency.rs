//! First-harmonic solve of the linearized equations.

use crate::drift::{drift_matrix, DriftMatrix, Variant};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::steady::OperatingPoint;
use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use serde::Serialize;

/// Condition number above which the system counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// Amplitudes of `dO(t) = O+ e^{-i dp t} + O- e^{+i dp t}`. Real
/// observables carry `O- = conj(O+)`; only `O+` is stored for them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicSolution {
    pub probe_detuning: f64,
    pub cavity_plus: Complex64,
    pub cavity_minus: Complex64,
    pub mirror_position: Complex64,
    pub mirror_momentum: Complex64,
    pub atomic_position: Complex64,
    pub atomic_momentum: Complex64,
    pub variant: Variant,
    pub condition_number: f64,
    /// Max-norm residual relative to the drive.
    pub residual: f64,
    /// At `dp = 0` both sidebands merge; the static response sits in
    /// `cavity_plus` and `cavity_minus` is zero.
    pub static_response: bool,
}

impl HarmonicSolution {
    /// `(x0+, .., x5+)` over (Re dc, Im dc, dq, dp, dQ, dP).
    pub fn quadratures(&self) -> [Complex64; 6] {
        let re = (self.cavity_plus + self.cavity_minus.conj()) / 2.0;
        let im = (self.cavity_plus - self.cavity_minus.conj()) / Complex64::new(0.0, 2.0);
        [re, im, self.mirror_position, self.mirror_momentum, self.atomic_position, self.atomic_momentum]
    }
}

/// `-i dp I - M`.
pub fn system_matrix(dm: &DriftMatrix, dp: f64) -> Matrix6<Complex64> {
    let mut a = dm.matrix.map(|v| Complex64::new(-v, 0.0));
    for i in 0..6 {
        a[(i, i)] += Complex64::new(0.0, -dp);
    }
    a
}

fn norm1(a: &Matrix6<Complex64>) -> f64 {
    (0..6).map(|j| (0..6).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn solve(a: &Matrix6<Complex64>, b: &Vector6<Complex64>) -> Result<(Vector6<Complex64>, f64, f64)> {
    let lu = a.lu();
    let inv = lu.try_inverse().ok_or(Error::SingularSystem { condition: f64::INFINITY })?;
    let condition = norm1(a) * norm1(&inv);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let x = lu.solve(b).ok_or(Error::SingularSystem { condition: f64::INFINITY })?;
    let r = a * x - b;
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let res = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok((x, condition, if scale > 0.0 { res / scale } else { res }))
}

/// Response to a probe `drive e^{-i dp t}` on the cavity equation.
pub fn harmonic_response(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    variant: Variant,
    drive: f64,
) -> Result<HarmonicSolution> {
    let dm = drift_matrix(model, op, variant);
    let a = system_matrix(&dm, dp);
    let zero = Complex64::new(0.0, 0.0);
    if dp == 0.0 {
        let b = Vector6::from([Complex64::new(drive, 0.0), zero, zero, zero, zero, zero]);
        let (x, condition_number, residual) = solve(&a, &b)?;
        return Ok(HarmonicSolution {
            probe_detuning: dp,
            cavity_plus: Complex64::new(x[0].re, x[1].re),
            cavity_minus: zero,
            mirror_position: x[2],
            mirror_momentum: x[3],
            atomic_position: x[4],
            atomic_momentum: x[5],
            variant,
            condition_number,
            residual,
            static_response: true,
        });
    }
    let b =
        Vector6::from([Complex64::new(drive / 2.0, 0.0), Complex64::new(0.0, -drive / 2.0), zero, zero, zero, zero]);
    let (x, condition_number, residual) = solve(&a, &b)?;
    let i = Complex64::new(0.0, 1.0);
    Ok(HarmonicSolution {
        probe_detuning: dp,
        cavity_plus: x[0] + i * x[1],
        cavity_minus: x[0].conj() + i * x[1].conj(),
        mirror_position: x[2],
        mirror_momentum: x[3],
        atomic_position: x[4],
        atomic_momentum: x[5],
        variant,
        condition_number,
        residual,
        static_response: false,
    })
}

pub fn solve_frequency_domain(
    model: &ModelParams,
    op: &OperatingPoint,
    dp: f64,
    variant: Variant,
) -> Result<HarmonicSolution> {
    harmonic_response(model, op, dp, variant, model.probe_amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady::OperatingSource;

    fn zero_op(d: f64) -> OperatingPoint {
        OperatingPoint {
            detuning: d,
            mirror_coupling: 0.0,
            atomic_coupling: 0.0,
            transverse_coupling: 0.0,
            phase: 0.0,
            source: OperatingSource::Direct,
        }
    }

    #[test]
    fn no_drive_no_response() {
        let m = ModelParams { probe_amplitude: 0.0, ..ModelParams::figure(0.1, 0.08, 0.03, 0.51) };
        let op = OperatingPoint::direct(&m).unwrap();
        let h = solve_frequency_domain(&m, &op, 0.7 * m.mirror_frequency, Variant::PaperExact).unwrap();
        for v in h.quadratures() {
            assert_eq!(v, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn decoupled_cavity_lorentzian() {
        let m = ModelParams::reference();
        let d = 3.3e6;
        for dp in [1e6, 3.3e6, 5e6] {
            let h = solve_frequency_domain(&m, &zero_op(d), dp, Variant::PaperExact).unwrap();
            let expect = m.probe_amplitude / Complex64::new(m.cavity_decay, d - dp);
            assert!((h.cavity_plus - expect).norm() <= 1e-12 * expect.norm());
            assert!(h.cavity_minus.norm() <= 1e-12 * expect.norm());
            assert_eq!(h.mirror_position, Complex64::new(0.0, 0.0));
            assert_eq!(h.atomic_position, Complex64::new(0.0, 0.0));
            assert!(h.residual <= 1e-12);
        }
    }

    #[test]
    fn system_matrix_is_shifted_drift() {
        let m = ModelParams::figure(0.1, 0.08, 0.03, 0.51);
        let op = OperatingPoint::direct(&m).unwrap();
        let dm = drift_matrix(&m, &op, Variant::HamiltonianConsistent);
        let dp = 0.37 * m.mirror_frequency;
        let a = system_matrix(&dm, dp);
        for i in 0..6 {
            for j in 0..6 {
                let shift = if i == j { Complex64::new(0.0, -dp) } else { Complex64::new(0.0, 0.0) };
                assert_eq!(a[(i, j)], shift - dm.matrix[(i, j)]);
            }
        }
    }

    #[test]
    fn static_response() {
        let m = ModelParams::figure(0.03, 0.0, 0.0, 0.51);
        let op = OperatingPoint::direct(&m).unwrap();
        let h = solve_frequency_domain(&m, &op, 0.0, Variant::PaperExact).unwrap();
        assert!(h.static_response);
        // dQ = 0 at rest forces the atomic momentum to vanish.
        assert!(h.atomic_momentum.norm() <= 1e-12 * h.cavity_plus.norm());
    }

    #[test]
    fn undamped_resonance_is_singular() {
        let base = ModelParams::reference();
        let m = ModelParams { mirror_damping: 0.0, ..base };
        let op = OperatingPoint { mirror_coupling: 0.0, ..zero_op(3.3e6) };
        let r = solve_frequency_domain(&m, &op, m.mirror_frequency, Variant::PaperExact);
        assert!(matches!(r, Err(Error::SingularSystem { .. })));
    }
}
