//! Parameter sets: laboratory inputs, derived working couplings, validation.

use crate::error::{Error, Result};
use crate::units::{HBAR, SPEED_OF_LIGHT};
use serde::Serialize;
use std::f64::consts::TAU;

/// Laboratory-level inputs. Frequencies in rad/s, SI otherwise.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PhysicalParams {
    pub atom_count: Option<f64>,
    pub cavity_length: Option<f64>,
    pub mirror_mass: Option<f64>,
    pub atom_mass: Option<f64>,
    pub pump_power: Option<f64>,
    pub probe_power: Option<f64>,
    pub pump_frequency: Option<f64>,
    pub probe_frequency: Option<f64>,
    pub cavity_frequency: Option<f64>,
    pub pump_wavelength: Option<f64>,
    pub vacuum_rabi: Option<f64>,
    pub atom_detuning: Option<f64>,
    pub transverse_rabi: Option<f64>,
    pub mirror_frequency: Option<f64>,
    pub mirror_damping: Option<f64>,
    pub atomic_damping: Option<f64>,
    pub cavity_decay: Option<f64>,
    pub rabi_per_photon: Option<f64>,
    pub recoil: Option<f64>,
    /// Maximum mirror amplitude; metadata only.
    pub max_mirror_amplitude: Option<f64>,
    /// Atomic transition frequency; metadata only.
    pub atomic_transition_frequency: Option<f64>,
}

impl PhysicalParams {
    /// The 87Rb / Fabry-Perot reference set. No mirror mass and no pump
    /// wavelength are included; see `reference_overrides`.
    pub fn reference() -> Self {
        PhysicalParams {
            atom_count: Some(2.3e4),
            cavity_length: Some(1.25e-4),
            pump_power: Some(0.0164e-3),
            pump_frequency: Some(TAU * (3.8e14)),
            cavity_frequency: Some(TAU * (15.3e14)),
            vacuum_rabi: Some(TAU * (10.9e6)),
            mirror_frequency: Some(TAU * (1.02e6)),
            mirror_damping: Some(TAU * (1.1e3)),
            atomic_damping: Some(TAU * (0.21e3)),
            cavity_decay: Some(TAU * (1.3e3)),
            rabi_per_photon: Some(TAU * (3.1e6)),
            recoil: Some(TAU * (3.8e3)),
            ..Default::default()
        }
    }

    /// Violations of the input invariants (empty when valid).
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(n) = self.atom_count {
            if !(n >= 1.0) {
                out.push(format!("atom_count must be >= 1 (got {n})"));
            }
        }
        let positive = [
            ("cavity_length", self.cavity_length),
            ("mirror_damping", self.mirror_damping),
            ("atomic_damping", self.atomic_damping),
            ("cavity_decay", self.cavity_decay),
            ("mirror_frequency", self.mirror_frequency),
            ("recoil", self.recoil),
            ("mirror_mass", self.mirror_mass),
            ("atom_mass", self.atom_mass),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0) {
                    out.push(format!("{name} must be > 0 (got {v})"));
                }
            }
        }
        out
    }

    /// Checks the wavelength/frequency pair against the speed of light.
    pub fn check_units(&self) -> Result<()> {
        if let (Some(lambda), Some(omega)) = (self.pump_wavelength, self.pump_frequency) {
            let c = lambda * omega / TAU;
            let rel = (c - SPEED_OF_LIGHT).abs() / SPEED_OF_LIGHT;
            if rel > 1e-3 {
                return Err(Error::UnitMismatch(format!(
                    "pump_wavelength * pump_frequency / 2pi = {c:.6e} m/s differs from c by {:.3}%",
                    rel * 100.0
                )));
            }
        }
        Ok(())
    }
}

/// Frequency used for the condensate side mode in the response formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomicMode {
    /// Omega_at = omega_r.
    Recoil,
    /// Omega_at = 4 omega_r.
    FourRecoil,
}

/// How the transverse coupling is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransverseMode {
    Independent,
    /// eta_eff = sqrt(n) * eta_perp, iterated to self-consistency.
    SelfConsistent {
        eta_perp: f64,
    },
}

/// Effective couplings and detuning fixed directly (figure mode).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectCouplings {
    /// G_m (rad/s).
    pub mirror: f64,
    /// G_a (rad/s).
    pub atomic: f64,
    /// Effective detuning Delta (rad/s).
    pub detuning: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Override,
    Physical,
    Derived(&'static str),
    Default(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub field: &'static str,
    pub value: f64,
    pub source: Source,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DerivedQuantities {
    /// x_0 (m).
    pub zero_point_motion: Option<f64>,
    /// m_bec (kg).
    pub condensate_mass: Option<f64>,
    /// 4 omega_r (rad/s).
    pub four_recoil: f64,
    /// eta^2 / (kappa^2 + Delta_tilde^2).
    pub photon_estimate: f64,
    /// G_m after a steady-state solve.
    pub mirror_effective: Option<f64>,
    /// G_a after a steady-state solve.
    pub atomic_effective: Option<f64>,
}

/// Working parameter set in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    pub effective_detuning: f64,
    pub mirror_frequency: f64,
    pub recoil: f64,
    pub atomic_mode_frequency: f64,
    pub atomic_mode: AtomicMode,
    pub cavity_decay: f64,
    pub mirror_damping: f64,
    pub atomic_damping: f64,
    pub mirror_coupling: f64,
    pub atomic_coupling: f64,
    pub pump_amplitude: f64,
    pub probe_amplitude: f64,
    pub transverse_coupling: f64,
    pub transverse_mode: TransverseMode,
    pub direct: Option<DirectCouplings>,
    pub vacuum_rabi: Option<f64>,
    pub max_mirror_amplitude: Option<f64>,
    pub atomic_transition_frequency: Option<f64>,
    pub derived: DerivedQuantities,
    pub provenance: Vec<Provenance>,
}

/// Direct values that win over derivation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelOverrides {
    pub effective_detuning: Option<f64>,
    pub mirror_frequency: Option<f64>,
    pub recoil: Option<f64>,
    pub atomic_mode_frequency: Option<f64>,
    pub atomic_mode: Option<AtomicMode>,
    pub cavity_decay: Option<f64>,
    pub mirror_damping: Option<f64>,
    pub atomic_damping: Option<f64>,
    pub mirror_coupling: Option<f64>,
    pub atomic_coupling: Option<f64>,
    pub pump_amplitude: Option<f64>,
    pub probe_amplitude: Option<f64>,
    pub transverse_coupling: Option<f64>,
    pub self_consistent_transverse: bool,
    pub direct: Option<DirectCouplings>,
}

impl ModelOverrides {
    /// Overrides shipped with the reference set: the effective detuning is
    /// given directly and the mirror is decoupled (no mass is available).
    pub fn reference() -> Self {
        ModelOverrides { effective_detuning: Some(TAU * (0.52e6)), mirror_coupling: Some(0.0), ..Default::default() }
    }
}

struct Recorder(Vec<Provenance>);

impl Recorder {
    fn take(&mut self, field: &'static str, over: Option<f64>, phys: Option<f64>) -> Result<f64> {
        if let Some(v) = over {
            self.push(field, v, Source::Override);
            Ok(v)
        } else if let Some(v) = phys {
            self.push(field, v, Source::Physical);
            Ok(v)
        } else {
            Err(Error::MissingParameter(field))
        }
    }

    fn push(&mut self, field: &'static str, value: f64, source: Source) {
        self.0.push(Provenance { field, value, source });
    }
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or(Error::MissingParameter(name))
}

/// Builds the working parameter set.
pub fn derive_model(physical: &PhysicalParams, overrides: &ModelOverrides) -> Result<ModelParams> {
    if let Some(v) = physical.violations().into_iter().next() {
        return Err(Error::InvalidParameter { name: "physical", reason: v });
    }
    physical.check_units()?;
    let mut rec = Recorder(Vec::new());

    let omega_m = rec.take("mirror_frequency", overrides.mirror_frequency, physical.mirror_frequency)?;
    let omega_r = rec.take("recoil", overrides.recoil, physical.recoil)?;
    let kappa = rec.take("cavity_decay", overrides.cavity_decay, physical.cavity_decay)?;
    let gamma_m = rec.take("mirror_damping", overrides.mirror_damping, physical.mirror_damping)?;
    let gamma_r = rec.take("atomic_damping", overrides.atomic_damping, physical.atomic_damping)?;

    let u0 = physical.rabi_per_photon.or_else(|| match (physical.vacuum_rabi, physical.atom_detuning) {
        (Some(g0), Some(da)) if da != 0.0 => Some(g0 * g0 / da),
        _ => None,
    });

    let effective_detuning = match overrides.effective_detuning {
        Some(v) => {
            rec.push("effective_detuning", v, Source::Override);
            v
        }
        None => {
            let wc = need(physical.cavity_frequency, "cavity_frequency")?;
            let wp = need(physical.pump_frequency, "pump_frequency")?;
            let n = need(physical.atom_count, "atom_count")?;
            let u0 = need(u0, "rabi_per_photon")?;
            let v = (wc - wp) - n * u0 / 2.0;
            rec.push("effective_detuning", v, Source::Derived("(omega_c - omega_p) - N U_0 / 2"));
            v
        }
    };

    let zero_point_motion = physical.mirror_mass.map(|m| (HBAR / (2.0 * m * omega_m)).sqrt());
    let mirror_coupling = match overrides.mirror_coupling {
        Some(v) => {
            rec.push("mirror_coupling", v, Source::Override);
            v
        }
        None => {
            let x0 = need(zero_point_motion, "mirror_mass")?;
            let wc = need(physical.cavity_frequency, "cavity_frequency")?;
            let l = need(physical.cavity_length, "cavity_length")?;
            let v = std::f64::consts::SQRT_2 * (wc / l) * x0;
            rec.push("mirror_coupling", v, Source::Derived("sqrt(2) (omega_c / L) x_0"));
            v
        }
    };

    let condensate_mass = match (physical.cavity_frequency, physical.cavity_length, physical.atom_count, u0) {
        (Some(wc), Some(l), Some(n), Some(u0)) => Some(HBAR * wc * wc / (l * l * n * u0 * u0 * omega_r)),
        _ => None,
    };
    let atomic_coupling = match overrides.atomic_coupling {
        Some(v) => {
            rec.push("atomic_coupling", v, Source::Override);
            v
        }
        None => {
            let wc = need(physical.cavity_frequency, "cavity_frequency")?;
            let l = need(physical.cavity_length, "cavity_length")?;
            let n = need(physical.atom_count, "atom_count")?;
            let u0 = need(u0, "rabi_per_photon")?;
            let m_bec = HBAR * wc * wc / (l * l * n * u0 * u0 * omega_r);
            let v = (wc / l) * (HBAR / (m_bec * 4.0 * omega_r)).sqrt();
            rec.push("atomic_coupling", v, Source::Derived("(omega_c / L) sqrt(hbar / (m_bec 4 omega_r))"));
            v
        }
    };

    let pump_amplitude = match overrides.pump_amplitude {
        Some(v) => {
            rec.push("pump_amplitude", v, Source::Override);
            v
        }
        None => {
            let p = need(physical.pump_power, "pump_power")?;
            let wp = need(physical.pump_frequency, "pump_frequency")?;
            let v = (p * kappa / (HBAR * wp)).sqrt();
            rec.push("pump_amplitude", v, Source::Derived("sqrt(P_in kappa / (hbar omega_p))"));
            v
        }
    };

    let probe_amplitude = match overrides.probe_amplitude {
        Some(v) => {
            rec.push("probe_amplitude", v, Source::Override);
            v
        }
        None => match (physical.probe_power, physical.probe_frequency.or(physical.pump_frequency)) {
            (Some(p), Some(w)) => {
                let v = (p * kappa / (HBAR * w)).sqrt();
                rec.push("probe_amplitude", v, Source::Derived("sqrt(P_p kappa / (hbar omega_pp))"));
                v
            }
            _ => {
                let v = (2.0 * kappa).sqrt();
                rec.push("probe_amplitude", v, Source::Default("sqrt(2 kappa): unit probe input"));
                v
            }
        },
    };

    let transverse_mode = if overrides.self_consistent_transverse {
        let g0 = need(physical.vacuum_rabi, "vacuum_rabi")?;
        let op = need(physical.transverse_rabi, "transverse_rabi")?;
        let da = need(physical.atom_detuning, "atom_detuning")?;
        let eta_perp = g0 * op / da;
        rec.push("eta_perp", eta_perp, Source::Derived("g_0 Omega_p / Delta_a"));
        TransverseMode::SelfConsistent { eta_perp }
    } else {
        TransverseMode::Independent
    };
    let transverse_coupling = match overrides.transverse_coupling {
        Some(v) => {
            rec.push("transverse_coupling", v, Source::Override);
            v
        }
        None => {
            rec.push("transverse_coupling", 0.0, Source::Default("no transverse drive"));
            0.0
        }
    };

    let atomic_mode = overrides.atomic_mode.unwrap_or(AtomicMode::Recoil);
    let atomic_mode_frequency = match overrides.atomic_mode_frequency {
        Some(v) => {
            rec.push("atomic_mode_frequency", v, Source::Override);
            v
        }
        None => {
            let (v, f) = match atomic_mode {
                AtomicMode::Recoil => (omega_r, "omega_r"),
                AtomicMode::FourRecoil => (4.0 * omega_r, "4 omega_r"),
            };
            rec.push("atomic_mode_frequency", v, Source::Derived(f));
            v
        }
    };

    if let Some(d) = overrides.direct {
        rec.push("direct_mirror_coupling", d.mirror, Source::Override);
        rec.push("direct_atomic_coupling", d.atomic, Source::Override);
        rec.push("direct_detuning", d.detuning, Source::Override);
    }

    let photon_estimate = pump_amplitude * pump_amplitude / (kappa * kappa + effective_detuning * effective_detuning);

    Ok(ModelParams {
        effective_detuning,
        mirror_frequency: omega_m,
        recoil: omega_r,
        atomic_mode_frequency,
        atomic_mode,
        cavity_decay: kappa,
        mirror_damping: gamma_m,
        atomic_damping: gamma_r,
        mirror_coupling,
        atomic_coupling,
        pump_amplitude,
        probe_amplitude,
        transverse_coupling,
        transverse_mode,
        direct: overrides.direct,
        vacuum_rabi: physical.vacuum_rabi,
        max_mirror_amplitude: physical.max_mirror_amplitude,
        atomic_transition_frequency: physical.atomic_transition_frequency,
        derived: DerivedQuantities {
            zero_point_motion,
            condensate_mass,
            four_recoil: 4.0 * omega_r,
            photon_estimate,
            mirror_effective: None,
            atomic_effective: None,
        },
        provenance: rec.0,
    })
}

impl ModelParams {
    /// Reference set with its shipped overrides.
    pub fn reference() -> Self {
        derive_model(&PhysicalParams::reference(), &ModelOverrides::reference()).expect("reference parameters derive")
    }

    /// Reference set in figure mode: effective couplings given as fractions
    /// of omega_m, transverse coupling as a fraction of kappa, detuning as a
    /// fraction of omega_m.
    pub fn figure(ga_over_wm: f64, gm_over_wm: f64, eta_eff_over_kappa: f64, delta_over_wm: f64) -> Self {
        let mut m = ModelParams::reference();
        let wm = m.mirror_frequency;
        m.transverse_coupling = eta_eff_over_kappa * m.cavity_decay;
        m.direct =
            Some(DirectCouplings { mirror: gm_over_wm * wm, atomic: ga_over_wm * wm, detuning: delta_over_wm * wm });
        m
    }

    /// 4 omega_r (1 - gamma_r / (4 omega_r)) = 4 omega_r - gamma_r.
    pub fn atomic_stiffness(&self) -> f64 {
        4.0 * self.recoil - self.atomic_damping
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub resolved_sideband: bool,
    /// `None` when the vacuum Rabi frequency is not supplied.
    pub strong_coupling: Option<bool>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(model: &ModelParams) -> ValidationReport {
    let mut violations = Vec::new();
    let positive = [
        ("cavity_decay", model.cavity_decay),
        ("mirror_damping", model.mirror_damping),
        ("atomic_damping", model.atomic_damping),
        ("mirror_frequency", model.mirror_frequency),
        ("recoil", model.recoil),
        ("atomic_mode_frequency", model.atomic_mode_frequency),
    ];
    for (name, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            violations.push(format!("positivity: {name} must be > 0 (got {v})"));
        }
    }
    let nonneg = [
        ("mirror_coupling", model.mirror_coupling),
        ("atomic_coupling", model.atomic_coupling),
        ("pump_amplitude", model.pump_amplitude),
        ("probe_amplitude", model.probe_amplitude),
        ("transverse_coupling", model.transverse_coupling),
    ];
    for (name, v) in nonneg {
        if !(v >= 0.0) || !v.is_finite() {
            violations.push(format!("nonnegativity: {name} must be >= 0 (got {v})"));
        }
    }
    if !model.effective_detuning.is_finite() {
        violations.push("finiteness: effective_detuning".into());
    }
    if let Some(d) = model.direct {
        if !(d.mirror >= 0.0 && d.atomic >= 0.0) || !d.detuning.is_finite() {
            violations.push("direct couplings must be finite and nonnegative".into());
        }
    }
    let resolved_sideband = model.mirror_frequency / model.cavity_decay > 10.0;
    let strong_coupling = model.vacuum_rabi.map(|g0| g0 > model.atomic_damping && g0 > model.cavity_decay);
    ValidationReport { violations, resolved_sideband, strong_coupling }
}
