//! Mean-value fixed point, intensity branches and operating points.

use crate::drift::{drift_matrix, is_stable, Variant};
use crate::error::{Error, Result};
use crate::model::{ModelParams, TransverseMode};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Coefficients of `a3 n^3 + a2 n^2 + a1 n + a0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cubic {
    pub a3: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl Cubic {
    pub fn eval(&self, n: f64) -> f64 {
        ((self.a3 * n + self.a2) * n + self.a1) * n + self.a0
    }

    pub fn max_coefficient(&self) -> f64 {
        [self.a3, self.a2, self.a1, self.a0].iter().map(|c| c.abs()).fold(0.0, f64::max)
    }
}

/// `B = g_a / (4 omega_r - gamma_r)`.
fn atomic_response(model: &ModelParams) -> Result<f64> {
    let s = model.atomic_stiffness();
    if s == 0.0 {
        return Err(Error::DegenerateModel("4 omega_r equals gamma_r".into()));
    }
    Ok(model.atomic_coupling / s)
}

pub fn intensity_polynomial(model: &ModelParams) -> Result<Cubic> {
    let b = atomic_response(model)?;
    let c = model.mirror_coupling * model.mirror_coupling / model.mirror_frequency + model.atomic_coupling * b;
    let d = model.effective_detuning;
    let e = model.transverse_coupling;
    Ok(Cubic {
        a3: c * c,
        a2: -2.0 * d * c - e * e * b * b,
        a1: d * d + model.cavity_decay * model.cavity_decay,
        a0: -model.pump_amplitude * model.pump_amplitude,
    })
}

/// Real nonnegative roots, ascending. Companion-matrix eigenvalues of the
/// rescaled polynomial, one Newton step each.
pub fn nonnegative_roots(p: &Cubic) -> Vec<f64> {
    let mut coeffs = vec![p.a3, p.a2, p.a1, p.a0];
    while coeffs.len() > 1 && coeffs[0] == 0.0 {
        coeffs.remove(0);
    }
    let mut roots = Vec::new();
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
        roots.push(0.0);
    }
    let deg = coeffs.len() - 1;
    if deg >= 1 {
        // n = s z balances the coefficient magnitudes.
        let lead = coeffs[0];
        let s = (1..=deg).map(|k| (coeffs[k] / lead).abs().powf(1.0 / k as f64)).fold(0.0, f64::max);
        let s = if s > 0.0 && s.is_finite() { s } else { 1.0 };
        // monic in z: z^deg + sum b_k z^(deg-k)
        let b: Vec<f64> = (0..=deg).map(|k| coeffs[k] / lead / s.powi(k as i32)).collect();
        let mut comp = DMatrix::<f64>::zeros(deg, deg);
        for k in 0..deg {
            comp[(0, k)] = -b[k + 1];
        }
        for i in 1..deg {
            comp[(i, i - 1)] = 1.0;
        }
        let eig = comp.complex_eigenvalues();
        for z in eig.iter() {
            let mut z = *z;
            let (mut f, mut df) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
            for bk in &b[1..] {
                df = df * z + f;
                f = f * z + *bk;
            }
            if df.norm() > 0.0 {
                z -= f / df;
            }
            if z.im.abs() < 1e-10 * (1.0 + z.re.abs()) && z.re >= 0.0 {
                roots.push(s * z.re);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Open pump range `(eta_lo, eta_hi)` with three positive intensity roots.
/// Only `a0 = -eta^2` depends on the pump, so the edges are the values of
/// `a3 n^3 + a2 n^2 + a1 n` at its positive critical points.
pub fn bistable_pump_range(model: &ModelParams) -> Result<Option<(f64, f64)>> {
    let p = intensity_polynomial(model)?;
    if !(p.a3 > 0.0) {
        return Ok(None);
    }
    let disc = p.a2 * p.a2 - 3.0 * p.a3 * p.a1;
    if !(disc > 0.0) {
        return Ok(None);
    }
    // Stable quadratic formula for 3 a3 n^2 + 2 a2 n + a1 = 0.
    let q = -(p.a2 + p.a2.signum() * disc.sqrt());
    let (r1, r2) = (q / (3.0 * p.a3), p.a1 / q);
    let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    if !(lo > 0.0) {
        return Ok(None);
    }
    let g = |n: f64| ((p.a3 * n + p.a2) * n + p.a1) * n;
    let (top, bottom) = (g(lo), g(hi));
    if !(bottom > 0.0) || !(top > bottom) {
        return Ok(None);
    }
    Ok(Some((bottom.sqrt(), top.sqrt())))
}

/// Fixed point of the mean-value equations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteadyState {
    pub cavity: Complex64,
    pub photon_number: f64,
    pub mirror_position: f64,
    pub mirror_momentum: f64,
    pub atomic_position: f64,
    pub atomic_momentum: f64,
    pub branch_index: usize,
    pub residual: f64,
}

/// Builds the state on the branch with intracavity photon number `n`.
pub fn state_from_photon_number(model: &ModelParams, n: f64, branch_index: usize) -> Result<SteadyState> {
    let b = atomic_response(model)?;
    let q_at = -b * n;
    let p_at = model.atomic_damping / (4.0 * model.recoil) * q_at;
    let q = model.mirror_coupling * n / model.mirror_frequency;
    let denom = Complex64::new(
        model.cavity_decay,
        model.effective_detuning - model.mirror_coupling * q + model.atomic_coupling * q_at,
    );
    let cavity = Complex64::new(model.pump_amplitude, model.transverse_coupling * q_at) / denom;
    let mut ss = SteadyState {
        cavity,
        photon_number: n,
        mirror_position: q,
        mirror_momentum: 0.0,
        atomic_position: q_at,
        atomic_momentum: p_at,
        branch_index,
        residual: 0.0,
    };
    ss.residual = stationarity_residual(model, &ss).into_iter().fold(0.0, f64::max);
    Ok(ss)
}

/// Absolute right-hand sides of the five stationarity equations, with the
/// photon number taken from the reconstructed cavity amplitude.
pub fn stationarity_residual(model: &ModelParams, ss: &SteadyState) -> [f64; 5] {
    let n = ss.cavity.norm_sqr();
    let (q, p, qa, pa) = (ss.mirror_position, ss.mirror_momentum, ss.atomic_position, ss.atomic_momentum);
    let delta = model.effective_detuning - model.mirror_coupling * q + model.atomic_coupling * qa;
    let cav = Complex64::new(model.cavity_decay, delta) * ss.cavity
        - Complex64::new(model.pump_amplitude, model.transverse_coupling * qa);
    [
        cav.norm(),
        (model.mirror_frequency * p).abs(),
        (-model.mirror_frequency * q + model.mirror_coupling * n - model.mirror_damping * p).abs(),
        (4.0 * model.recoil * pa - model.atomic_damping * qa).abs(),
        (-model.atomic_stiffness() * qa - model.atomic_coupling * n).abs(),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    LowestStable,
    HighestStable,
    Index(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Branch {
    pub photon_number: f64,
    pub stable: bool,
    pub spectral_abscissa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchSet {
    pub polynomial: Cubic,
    pub branches: Vec<Branch>,
    pub bistable: bool,
}

impl BranchSet {
    pub fn roots(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.photon_number).collect()
    }
}

/// Where the effective couplings came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingSource {
    Physical { branch_index: usize },
    Inverse,
    Direct,
}

/// Parameters of the linearized problem about a fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatingPoint {
    /// Effective detuning Delta (rad/s).
    pub detuning: f64,
    /// G_m (rad/s).
    pub mirror_coupling: f64,
    /// G_a (rad/s).
    pub atomic_coupling: f64,
    /// eta_eff (rad/s).
    pub transverse_coupling: f64,
    /// Phase of c_s carried into the coupling coefficients.
    pub phase: f64,
    pub source: OperatingSource,
}

/// Whether the phase of c_s enters the linearized couplings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    Complex,
    Real,
}

impl OperatingPoint {
    pub fn from_steady(model: &ModelParams, ss: &SteadyState) -> Self {
        let amp = ss.cavity.norm();
        OperatingPoint {
            detuning: model.effective_detuning - model.mirror_coupling * ss.mirror_position
                + model.atomic_coupling * ss.atomic_position,
            mirror_coupling: model.mirror_coupling * amp,
            atomic_coupling: model.atomic_coupling * amp,
            transverse_coupling: model.transverse_coupling,
            phase: ss.cavity.arg(),
            source: OperatingSource::Physical { branch_index: ss.branch_index },
        }
    }

    /// Figure-mode operating point; requires direct couplings.
    pub fn direct(model: &ModelParams) -> Result<Self> {
        let d = model.direct.ok_or(Error::MissingParameter("direct couplings"))?;
        Ok(OperatingPoint {
            detuning: d.detuning,
            mirror_coupling: d.mirror,
            atomic_coupling: d.atomic,
            transverse_coupling: model.transverse_coupling,
            phase: 0.0,
            source: OperatingSource::Direct,
        })
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        if gauge == Gauge::Real {
            self.phase = 0.0;
        }
        self
    }

    /// Direct couplings when present, else the selected steady branch.
    pub fn resolve(model: &ModelParams, policy: BranchPolicy, variant: Variant, gauge: Gauge) -> Result<Self> {
        if model.direct.is_some() {
            return OperatingPoint::direct(model);
        }
        let (model, ss, _) = solve_self_consistent(model, policy, variant)?;
        Ok(OperatingPoint::from_steady(&model, &ss).with_gauge(gauge))
    }
}

pub fn solve_steady_state(model: &ModelParams, policy: BranchPolicy) -> Result<(SteadyState, BranchSet)> {
    solve_steady_state_with(model, policy, Variant::PaperExact)
}

pub fn solve_steady_state_with(
    model: &ModelParams,
    policy: BranchPolicy,
    variant: Variant,
) -> Result<(SteadyState, BranchSet)> {
    let polynomial = intensity_polynomial(model)?;
    let roots = nonnegative_roots(&polynomial);
    let mut states = Vec::with_capacity(roots.len());
    let mut branches = Vec::with_capacity(roots.len());
    for (i, &n) in roots.iter().enumerate() {
        let ss = state_from_photon_number(model, n, i)?;
        let dm = drift_matrix(model, &OperatingPoint::from_steady(model, &ss), variant);
        branches.push(Branch { photon_number: n, stable: is_stable(&dm)?, spectral_abscissa: dm.spectral_abscissa() });
        states.push(ss);
    }
    let bistable = branches.iter().filter(|b| b.stable).count() >= 2;
    let set = BranchSet { polynomial, branches, bistable };
    let pick = match policy {
        BranchPolicy::LowestStable => set.branches.iter().position(|b| b.stable),
        BranchPolicy::HighestStable => set.branches.iter().rposition(|b| b.stable),
        BranchPolicy::Index(i) => {
            if i >= states.len() {
                return Err(Error::BranchOutOfRange { index: i, count: states.len() });
            }
            Some(i)
        }
    };
    match pick {
        Some(i) => Ok((states.swap_remove(i), set)),
        None => Err(Error::NoStableBranch { roots: set.branches.len() }),
    }
}

/// Photon number realizing `G_a = g_a sqrt(n)`.
pub fn photon_number_for_atomic_coupling(model: &ModelParams, target: f64) -> Result<f64> {
    if !(model.atomic_coupling > 0.0) {
        return Err(Error::InvalidParameter { name: "atomic_coupling", reason: "must be > 0 in inverse mode".into() });
    }
    let r = target / model.atomic_coupling;
    Ok(r * r)
}

/// Inverse mode: the steady state whose atomic coupling is `target`,
/// bypassing the cubic. The pump amplitude is replaced by the one that
/// realizes this state.
pub fn inverse_steady_state(model: &ModelParams, target: f64) -> Result<(ModelParams, SteadyState)> {
    let n = photon_number_for_atomic_coupling(model, target)?;
    let b = atomic_response(model)?;
    let q_at = -b * n;
    let q = model.mirror_coupling * n / model.mirror_frequency;
    let delta = model.effective_detuning - model.mirror_coupling * q + model.atomic_coupling * q_at;
    // |eta + i eta_eff Q|^2 = n (kappa^2 + Delta^2), eta >= 0
    let need = n * (model.cavity_decay.powi(2) + delta * delta) - (model.transverse_coupling * q_at).powi(2);
    if need < 0.0 {
        return Err(Error::InvalidParameter {
            name: "atomic_coupling",
            reason: "target not reachable with a nonnegative pump".into(),
        });
    }
    let implied = ModelParams { pump_amplitude: need.sqrt(), ..model.clone() };
    let ss = state_from_photon_number(&implied, n, 0)?;
    Ok((implied, ss))
}

pub const SELF_CONSISTENT_TOLERANCE: f64 = 1e-12;
pub const SELF_CONSISTENT_MAX_ITER: usize = 200;

/// Solves the steady state, iterating `eta_eff = sqrt(n) eta_perp` when the
/// model asks for it. Returns the model carrying the final `eta_eff`.
pub fn solve_self_consistent(
    model: &ModelParams,
    policy: BranchPolicy,
    variant: Variant,
) -> Result<(ModelParams, SteadyState, BranchSet)> {
    let eta_perp = match model.transverse_mode {
        TransverseMode::Independent => {
            let (ss, set) = solve_steady_state_with(model, policy, variant)?;
            return Ok((model.clone(), ss, set));
        }
        TransverseMode::SelfConsistent { eta_perp } => eta_perp,
    };
    let mut m = model.clone();
    for _ in 0..SELF_CONSISTENT_MAX_ITER {
        let (ss, set) = solve_steady_state_with(&m, policy, variant)?;
        let next = ss.photon_number.sqrt() * eta_perp;
        let change = (next - m.transverse_coupling).abs();
        let scale = next.abs().max(m.transverse_coupling.abs());
        m.transverse_coupling = next;
        if change <= SELF_CONSISTENT_TOLERANCE * scale || scale == 0.0 {
            let (ss, set) = if change == 0.0 { (ss, set) } else { solve_steady_state_with(&m, policy, variant)? };
            return Ok((m, ss, set));
        }
    }
    Err(Error::NotConverged { iterations: SELF_CONSISTENT_MAX_ITER })
}
