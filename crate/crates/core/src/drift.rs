//! Linearized drift matrix and stability verdicts.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::steady::OperatingPoint;
use nalgebra::Matrix6;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

/// Which reading of the linearized equations to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Printed equations with the atomic back-action sign and restoring
    /// frequency read consistently with the nonlinear equations.
    PaperExact,
    /// `PaperExact` plus the transverse-drive force on the atomic momentum.
    HamiltonianConsistent,
    /// Printed equations verbatim: `+2 G_a` force and `omega_m` restoring
    /// term in the atomic momentum equation.
    PaperLiteral,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::PaperExact, Variant::HamiltonianConsistent, Variant::PaperLiteral];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PaperExact => "paper_exact",
            Variant::HamiltonianConsistent => "hamiltonian_consistent",
            Variant::PaperLiteral => "paper_literal",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// 6x6 real drift matrix over (Re dc, Im dc, dq, dp, dQ, dP).
#[derive(Clone, Debug, PartialEq)]
pub struct DriftMatrix {
    pub matrix: Matrix6<f64>,
    /// Sorted by nonincreasing real part.
    pub eigenvalues: Vec<Complex64>,
    pub variant: Variant,
}

impl DriftMatrix {
    pub fn from_matrix(matrix: Matrix6<f64>, variant: Variant) -> Self {
        let mut eigenvalues: Vec<Complex64> = matrix.complex_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        DriftMatrix { matrix, eigenvalues, variant }
    }

    /// Largest real part of the spectrum.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues[0].re
    }

    /// Eigenvalue closest to the imaginary axis.
    pub fn slowest(&self) -> Complex64 {
        self.eigenvalues[0]
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }
}

pub fn drift_matrix(model: &ModelParams, op: &OperatingPoint, variant: Variant) -> DriftMatrix {
    let k = model.cavity_decay;
    let wm = model.mirror_frequency;
    let gm = model.mirror_damping;
    let gr = model.atomic_damping;
    let om = model.atomic_mode_frequency;
    let d = op.detuning;
    let e = op.transverse_coupling;
    let (su, cu) = op.phase.sin_cos();
    let gmc = op.mirror_coupling;
    let gac = op.atomic_coupling;

    let mut m = Matrix6::<f64>::zeros();
    m[(0, 0)] = -k;
    m[(0, 1)] = d;
    m[(0, 2)] = gmc * cu;
    m[(0, 4)] = -gac * cu;
    m[(1, 0)] = -d;
    m[(1, 1)] = -k;
    m[(1, 2)] = gmc * su;
    m[(1, 4)] = e - gac * su;
    m[(2, 3)] = wm;
    m[(3, 0)] = 2.0 * gmc * cu;
    m[(3, 1)] = 2.0 * gmc * su;
    m[(3, 2)] = -wm;
    m[(3, 3)] = -gm;
    m[(4, 5)] = om;
    let back = match variant {
        Variant::PaperLiteral => 2.0 * gac,
        _ => -2.0 * gac,
    };
    m[(5, 0)] = back * cu;
    m[(5, 1)] = back * su;
    if variant == Variant::HamiltonianConsistent {
        m[(5, 0)] -= 2.0 * e;
    }
    m[(5, 4)] = match variant {
        Variant::PaperLiteral => -wm,
        _ => -om,
    };
    m[(5, 5)] = -gr;
    DriftMatrix::from_matrix(m, variant)
}

/// Relative stability margin applied to the spectral radius.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Eigenvalue verdict cross-checked against Routh-Hurwitz in exact
/// rational arithmetic on the shifted matrix `M + eps I`.
pub fn is_stable(dm: &DriftMatrix) -> Result<bool> {
    let eps = STABILITY_MARGIN * dm.spectral_radius();
    let by_eigen = dm.spectral_abscissa() < -eps;
    let shifted = dm.matrix + Matrix6::identity() * eps;
    let by_routh = routh_hurwitz_stable(&characteristic_polynomial(&shifted));
    if by_eigen != by_routh {
        return Err(Error::InternalInconsistency(format!(
            "eigenvalue verdict {by_eigen} (abscissa {:e}) disagrees with Routh-Hurwitz verdict {by_routh}",
            dm.spectral_abscissa()
        )));
    }
    Ok(by_eigen)
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite matrix entry")
}

/// Monic characteristic polynomial coefficients `[1, c1, .., c6]` of
/// `det(sI - A)`, computed exactly.
pub fn characteristic_polynomial(a: &Matrix6<f64>) -> Vec<BigRational> {
    const N: usize = 6;
    let a: Vec<Vec<BigRational>> = (0..N).map(|i| (0..N).map(|j| exact(a[(i, j)])).collect()).collect();
    let mut coeffs = vec![BigRational::from_integer(BigInt::from(1))];
    let mut mk: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); N]; N];
    for k in 1..=N {
        // M_k = A M_{k-1} + c_{k-1} I
        let mut next = vec![vec![BigRational::zero(); N]; N];
        for i in 0..N {
            for j in 0..N {
                let mut s = BigRational::zero();
                for l in 0..N {
                    if !a[i][l].is_zero() && !mk[l][j].is_zero() {
                        s += &a[i][l] * &mk[l][j];
                    }
                }
                next[i][j] = s;
            }
            next[i][i] += &coeffs[k - 1];
        }
        let mut tr = BigRational::zero();
        for i in 0..N {
            for l in 0..N {
                if !a[i][l].is_zero() && !next[l][i].is_zero() {
                    tr += &a[i][l] * &next[l][i];
                }
            }
        }
        coeffs.push(-tr / BigRational::from_integer(BigInt::from(k)));
        mk = next;
    }
    coeffs
}

/// Strict Hurwitz test on a polynomial with positive leading coefficient.
pub fn routh_hurwitz_stable(coeffs: &[BigRational]) -> bool {
    let n = coeffs.len() - 1;
    if n == 0 {
        return true;
    }
    if !coeffs[0].is_positive() {
        return false;
    }
    let width = n / 2 + 1;
    let row = |start: usize| -> Vec<BigRational> {
        (0..width).map(|j| coeffs.get(start + 2 * j).cloned().unwrap_or_else(BigRational::zero)).collect()
    };
    let mut prev = row(0);
    let mut cur = row(1);
    for _ in 0..n {
        if !cur[0].is_positive() {
            return false;
        }
        let next: Vec<BigRational> = (0..width)
            .map(|j| {
                let a = prev.get(j + 1).cloned().unwrap_or_else(BigRational::zero);
                let b = cur.get(j + 1).cloned().unwrap_or_else(BigRational::zero);
                (&cur[0] * a - &prev[0] * b) / &cur[0]
            })
            .collect();
        prev = cur;
        cur = next;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady::{OperatingPoint, OperatingSource};

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

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn decoupled_spectrum() {
        let m = ModelParams::reference();
        let dm = drift_matrix(&m, &zero_op(m.effective_detuning), Variant::PaperExact);
        let k = m.cavity_decay;
        let d = m.effective_detuning;
        let mech = (m.mirror_frequency.powi(2) - m.mirror_damping.powi(2) / 4.0).sqrt();
        let at = (m.atomic_mode_frequency.powi(2) - m.atomic_damping.powi(2) / 4.0).sqrt();
        let expected = [
            Complex64::new(-k, d),
            Complex64::new(-k, -d),
            Complex64::new(-m.mirror_damping / 2.0, mech),
            Complex64::new(-m.mirror_damping / 2.0, -mech),
            Complex64::new(-m.atomic_damping / 2.0, at),
            Complex64::new(-m.atomic_damping / 2.0, -at),
        ];
        for e in expected {
            assert!(dm.eigenvalues.iter().any(|l| close(*l, e, 1e-9)), "missing {e}");
        }
        assert!(is_stable(&dm).unwrap());
    }

    #[test]
    fn eigenvalues_sorted() {
        let m = ModelParams::figure(0.1, 0.08, 0.03, 0.51);
        let op = OperatingPoint::direct(&m).unwrap();
        let dm = drift_matrix(&m, &op, Variant::HamiltonianConsistent);
        for w in dm.eigenvalues.windows(2) {
            assert!(w[0].re >= w[1].re);
        }
    }

    #[test]
    fn conservative_limit_is_imaginary() {
        let base = ModelParams::reference();
        let m = ModelParams { mirror_damping: 0.0, atomic_damping: 0.0, cavity_decay: 0.0, ..base };
        let op = OperatingPoint { atomic_coupling: 0.0, mirror_coupling: 0.0, ..zero_op(m.effective_detuning) };
        let dm = drift_matrix(&m, &op, Variant::PaperExact);
        let r = dm.spectral_radius();
        for l in &dm.eigenvalues {
            assert!(l.re.abs() <= 1e-9 * r);
        }
    }

    #[test]
    fn positive_eigenvalue_is_unstable() {
        let m = ModelParams::reference();
        let mut mat = drift_matrix(&m, &zero_op(m.effective_detuning), Variant::PaperExact).matrix;
        mat[(0, 0)] = m.cavity_decay;
        mat[(0, 1)] = 0.0;
        mat[(1, 0)] = 0.0;
        let dm = DriftMatrix::from_matrix(mat, Variant::PaperExact);
        assert!((dm.spectral_abscissa() - m.cavity_decay).abs() < 1e-6 * m.cavity_decay);
        assert!(!is_stable(&dm).unwrap());
    }

    #[test]
    fn characteristic_polynomial_of_diagonal() {
        let mut a = Matrix6::<f64>::zeros();
        for i in 0..6 {
            a[(i, i)] = -(i as f64 + 1.0);
        }
        // prod (s + i) for i = 1..6
        let expect = [1, 21, 175, 735, 1624, 1764, 720];
        let c = characteristic_polynomial(&a);
        for (ci, e) in c.iter().zip(expect) {
            assert_eq!(*ci, BigRational::from_integer(BigInt::from(e)));
        }
        assert!(routh_hurwitz_stable(&c));
    }

    #[test]
    fn routh_rejects_marginal() {
        // s^2 + 1
        let c: Vec<BigRational> = [1, 0, 1].iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect();
        assert!(!routh_hurwitz_stable(&c));
        // s^2 + 3s + 2
        let c: Vec<BigRational> = [1, 3, 2].iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect();
        assert!(routh_hurwitz_stable(&c));
        // s^3 + s^2 + s + 2 has a right-half-plane pair
        let c: Vec<BigRational> = [1, 1, 1, 2].iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect();
        assert!(!routh_hurwitz_stable(&c));
    }

    #[test]
    fn variants_differ_only_in_atomic_momentum_row() {
        let m = ModelParams::figure(0.1, 0.08, 0.03, 0.51);
        let op = OperatingPoint::direct(&m).unwrap();
        let a = drift_matrix(&m, &op, Variant::PaperExact).matrix;
        for v in [Variant::HamiltonianConsistent, Variant::PaperLiteral] {
            let b = drift_matrix(&m, &op, v).matrix;
            for i in 0..5 {
                for j in 0..6 {
                    assert_eq!(a[(i, j)], b[(i, j)]);
                }
            }
        }
    }
}
