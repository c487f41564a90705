//! Flat `key = value [tag]` parameter files.
//!
//! Frequencies must carry a tag (`rad_s`, `two_pi_Hz`, `two_pi_kHz`,
//! `two_pi_MHz`, `per_omega_m`, `per_kappa`). `#` starts a comment.
//! `base = reference` preloads the reference set and its overrides.

use crate::analysis::fano::FanoParams;
use crate::analysis::sweep::{Axis, AxisSpec};
use crate::analysis::windows::Quadrature;
use crate::drift::Variant;
use crate::error::{Error, Result};
use crate::model::{derive_model, AtomicMode, DirectCouplings, ModelOverrides, ModelParams, PhysicalParams};
use crate::response::{ClosedForm, SignConvention, SpectrumOptions, SpectrumSource};
use crate::steady::{BranchPolicy, Gauge, OperatingPoint};
use crate::units::FrequencyUnit;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Physical,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Printed,
    Oracle,
}

/// Grid in units of omega_m.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidGrid(format!("`{s}` is not start:stop:count"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(GridSpec {
            start: parts[0].parse().map_err(|_| bad())?,
            stop: parts[1].parse().map_err(|_| bad())?,
            count: parts[2].parse().map_err(|_| bad())?,
        })
    }

    pub fn to_rad_s(self, omega_m: f64) -> Result<Vec<f64>> {
        crate::response::uniform_grid(self.start * omega_m, self.stop * omega_m, self.count)
    }
}

/// Sweep axis with its values in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxisConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub physical: PhysicalParams,
    pub overrides: ModelOverrides,
    pub variant: Variant,
    pub closed_form: ClosedForm,
    pub source: SourceKind,
    pub sign_convention: SignConvention,
    pub gauge: Gauge,
    pub branch: BranchPolicy,
    pub grid: Option<GridSpec>,
    pub sweep: Vec<SweepAxisConfig>,
    pub quadrature: Quadrature,
    pub verify_envelope: Option<f64>,
    pub verify_time_points: usize,
    /// Fano fit on a synthetic forward model instead of a spectrum.
    pub synthetic_fano: Option<FanoParams>,
    pub fano_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Physical,
            physical: PhysicalParams::default(),
            overrides: ModelOverrides::default(),
            variant: Variant::PaperExact,
            closed_form: ClosedForm::Corrected,
            source: SourceKind::Printed,
            sign_convention: SignConvention::EmptyCavity,
            gauge: Gauge::Complex,
            branch: BranchPolicy::LowestStable,
            grid: None,
            sweep: Vec::new(),
            quadrature: Quadrature::Absorption,
            verify_envelope: None,
            verify_time_points: 9,
            synthetic_fano: None,
            fano_points: 2001,
        }
    }
}

impl RunConfig {
    pub fn model(&self) -> Result<ModelParams> {
        derive_model(&self.physical, &self.overrides)
    }

    /// Model plus the operating point picked by mode, branch and gauge.
    pub fn build(&self) -> Result<(ModelParams, OperatingPoint)> {
        let model = self.model()?;
        let op = OperatingPoint::resolve(&model, self.branch, self.variant, self.gauge)?;
        Ok((model, op))
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        let source = match self.source {
            SourceKind::Printed => SpectrumSource::Printed(self.closed_form),
            SourceKind::Oracle => SpectrumSource::Oracle(self.variant),
        };
        SpectrumOptions { source, sign: self.sign_convention }
    }

    pub fn sweep_axes(&self) -> Vec<AxisSpec> {
        self.sweep.iter().map(|s| AxisSpec::new(s.axis, s.values.clone())).collect()
    }
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    value: String,
    tag: Option<String>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

const FREQUENCY_KEYS: &[&str] = &[
    "pump_frequency",
    "probe_frequency",
    "cavity_frequency",
    "vacuum_rabi",
    "atom_detuning",
    "transverse_rabi",
    "mirror_frequency",
    "mirror_damping",
    "atomic_damping",
    "cavity_decay",
    "rabi_per_photon",
    "recoil",
    "atomic_transition_frequency",
    "effective_detuning",
    "mirror_coupling",
    "atomic_coupling",
    "transverse_coupling",
    "atomic_mode_frequency",
    "pump_amplitude",
    "probe_amplitude",
    "detuning",
    "atomic_effective_coupling",
    "mirror_effective_coupling",
    "synthetic_center",
    "synthetic_width",
];

const OTHER_KEYS: &[&str] = &[
    "base",
    "mode",
    "atom_count",
    "cavity_length",
    "pump_wavelength",
    "mirror_mass",
    "atom_mass",
    "pump_power",
    "probe_power",
    "max_mirror_amplitude",
    "atomic_mode",
    "transverse",
    "variant",
    "closed_form",
    "source",
    "sign_convention",
    "gauge",
    "branch",
    "grid",
    "sweep_axis",
    "sweep_values",
    "sweep_axis_2",
    "sweep_values_2",
    "quadrature",
    "verify_envelope",
    "verify_time_points",
    "synthetic_rho",
    "synthetic_amplitude",
    "synthetic_offset",
    "fano_points",
];

struct Parsed(BTreeMap<String, Entry>);

impl Parsed {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.0.get(key)
    }

    fn word(&self, key: &str) -> Option<(usize, &str)> {
        self.get(key).map(|e| (e.line, e.value.as_str()))
    }

    fn plain(&self, key: &str) -> Result<Option<f64>> {
        let Some(e) = self.get(key) else { return Ok(None) };
        if let Some(t) = &e.tag {
            return Err(err(e.line, format!("`{key}` is dimensionless, unexpected tag `{t}`")));
        }
        number(e.line, &e.value).map(Some)
    }

    fn scaled(&self, key: &str, units: &[(&str, f64)]) -> Result<Option<f64>> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let allowed = units.iter().map(|u| u.0).collect::<Vec<_>>().join(", ");
        let Some(t) = &e.tag else {
            return Err(err(e.line, format!("`{key}` needs a unit tag ({allowed})")));
        };
        let Some(&(_, s)) = units.iter().find(|u| u.0 == t) else {
            return Err(err(e.line, format!("unknown unit tag `{t}` for `{key}` (expected {allowed})")));
        };
        Ok(Some(number(e.line, &e.value)? * s))
    }
}

fn number(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| err(line, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(err(line, format!("`{s}` is not finite")));
    }
    Ok(v)
}

/// Frequency scales that depend on already-known rates.
struct Scales {
    omega_m: Option<f64>,
    kappa: Option<f64>,
}

fn frequency(line: usize, value: f64, tag: Option<&str>, key: &str, scales: &Scales) -> Result<f64> {
    let Some(tag) = tag else {
        return Err(err(
            line,
            format!(
                "frequency `{key}` needs a unit tag (rad_s, two_pi_Hz, two_pi_kHz, two_pi_MHz, per_omega_m, per_kappa)"
            ),
        ));
    };
    if let Some(u) = FrequencyUnit::from_tag(tag) {
        return Ok(crate::units::Frequency::new(value, u).to_rad_s());
    }
    match tag {
        "per_omega_m" => scales
            .omega_m
            .map(|w| value * w)
            .ok_or_else(|| err(line, format!("`{key}` uses per_omega_m but mirror_frequency is not set"))),
        "per_kappa" => scales
            .kappa
            .map(|k| value * k)
            .ok_or_else(|| err(line, format!("`{key}` uses per_kappa but cavity_decay is not set"))),
        _ => Err(err(line, format!("unknown unit tag `{tag}` for `{key}`"))),
    }
}

fn lex(text: &str) -> Result<Parsed> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, rest) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value [tag]`, got `{content}`")))?;
        let key = key.trim();
        if !FREQUENCY_KEYS.contains(&key) && !OTHER_KEYS.contains(&key) {
            return Err(err(line, format!("unknown key `{key}`")));
        }
        let mut words = rest.split_whitespace();
        let value = words.next().ok_or_else(|| err(line, format!("`{key}` has no value")))?.to_string();
        let tag = words.next().map(str::to_string);
        if let Some(extra) = words.next() {
            return Err(err(line, format!("unexpected trailing `{extra}`")));
        }
        if map.insert(key.to_string(), Entry { line, value, tag }).is_some() {
            return Err(err(line, format!("`{key}` given twice")));
        }
    }
    Ok(Parsed(map))
}

/// Parses a config file's contents.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let p = lex(text)?;
    let mut cfg = RunConfig::default();
    if let Some((line, base)) = p.word("base") {
        if base != "reference" {
            return Err(err(line, format!("unknown base `{base}` (expected reference)")));
        }
        cfg.physical = PhysicalParams::reference();
        cfg.overrides = ModelOverrides::reference();
    }

    // Rates needed by the relative tags come first.
    let mut scales = Scales { omega_m: cfg.physical.mirror_frequency, kappa: cfg.physical.cavity_decay };
    let freq = |key: &str, scales: &Scales| -> Result<Option<f64>> {
        match p.get(key) {
            None => Ok(None),
            Some(e) => {
                let v = number(e.line, &e.value)?;
                frequency(e.line, v, e.tag.as_deref(), key, scales).map(Some)
            }
        }
    };
    if let Some(e) = p.get("mirror_frequency") {
        if e.tag.as_deref() == Some("per_omega_m") {
            return Err(err(e.line, "mirror_frequency cannot be relative to itself"));
        }
    }
    if let Some(w) = freq("mirror_frequency", &scales)? {
        scales.omega_m = Some(w);
        cfg.physical.mirror_frequency = Some(w);
    }
    if let Some(e) = p.get("cavity_decay") {
        if e.tag.as_deref() == Some("per_kappa") {
            return Err(err(e.line, "cavity_decay cannot be relative to itself"));
        }
    }
    if let Some(k) = freq("cavity_decay", &scales)? {
        scales.kappa = Some(k);
        cfg.physical.cavity_decay = Some(k);
    }

    let ph = &mut cfg.physical;
    let set = |slot: &mut Option<f64>, v: Option<f64>| {
        if v.is_some() {
            *slot = v;
        }
    };
    set(&mut ph.pump_frequency, freq("pump_frequency", &scales)?);
    set(&mut ph.probe_frequency, freq("probe_frequency", &scales)?);
    set(&mut ph.cavity_frequency, freq("cavity_frequency", &scales)?);
    set(&mut ph.vacuum_rabi, freq("vacuum_rabi", &scales)?);
    set(&mut ph.atom_detuning, freq("atom_detuning", &scales)?);
    set(&mut ph.transverse_rabi, freq("transverse_rabi", &scales)?);
    set(&mut ph.mirror_damping, freq("mirror_damping", &scales)?);
    set(&mut ph.atomic_damping, freq("atomic_damping", &scales)?);
    set(&mut ph.rabi_per_photon, freq("rabi_per_photon", &scales)?);
    set(&mut ph.recoil, freq("recoil", &scales)?);
    set(&mut ph.atomic_transition_frequency, freq("atomic_transition_frequency", &scales)?);
    set(&mut ph.atom_count, p.plain("atom_count")?);
    set(&mut ph.cavity_length, p.scaled("cavity_length", &[("m", 1.0), ("nm", 1e-9)])?);
    set(&mut ph.pump_wavelength, p.scaled("pump_wavelength", &[("m", 1.0), ("nm", 1e-9)])?);
    set(&mut ph.max_mirror_amplitude, p.scaled("max_mirror_amplitude", &[("m", 1.0), ("nm", 1e-9)])?);
    set(&mut ph.mirror_mass, p.scaled("mirror_mass", &[("kg", 1.0)])?);
    set(&mut ph.atom_mass, p.scaled("atom_mass", &[("kg", 1.0)])?);
    set(&mut ph.pump_power, p.scaled("pump_power", &[("W", 1.0), ("mW", 1e-3)])?);
    set(&mut ph.probe_power, p.scaled("probe_power", &[("W", 1.0), ("mW", 1e-3)])?);

    let ov = &mut cfg.overrides;
    set(&mut ov.effective_detuning, freq("effective_detuning", &scales)?);
    set(&mut ov.mirror_coupling, freq("mirror_coupling", &scales)?);
    set(&mut ov.atomic_coupling, freq("atomic_coupling", &scales)?);
    set(&mut ov.transverse_coupling, freq("transverse_coupling", &scales)?);
    set(&mut ov.atomic_mode_frequency, freq("atomic_mode_frequency", &scales)?);
    set(&mut ov.pump_amplitude, freq("pump_amplitude", &scales)?);
    set(&mut ov.probe_amplitude, freq("probe_amplitude", &scales)?);
    if let Some((line, v)) = p.word("atomic_mode") {
        ov.atomic_mode = Some(match v {
            "recoil" => AtomicMode::Recoil,
            "four_recoil" => AtomicMode::FourRecoil,
            _ => return Err(err(line, format!("unknown atomic_mode `{v}` (recoil | four_recoil)"))),
        });
    }
    if let Some((line, v)) = p.word("transverse") {
        ov.self_consistent_transverse = match v {
            "independent" => false,
            "self_consistent" => true,
            _ => return Err(err(line, format!("unknown transverse `{v}` (independent | self_consistent)"))),
        };
    }

    if let Some((line, v)) = p.word("mode") {
        cfg.mode = match v {
            "physical" => Mode::Physical,
            "direct" => Mode::Direct,
            _ => return Err(err(line, format!("unknown mode `{v}` (physical | direct)"))),
        };
    }
    let direct_keys = ["detuning", "atomic_effective_coupling", "mirror_effective_coupling"];
    match cfg.mode {
        Mode::Direct => {
            let detuning = freq("detuning", &scales)?.ok_or_else(|| err(0, "mode = direct needs `detuning`"))?;
            cfg.overrides.direct = Some(DirectCouplings {
                detuning,
                atomic: freq("atomic_effective_coupling", &scales)?.unwrap_or(0.0),
                mirror: freq("mirror_effective_coupling", &scales)?.unwrap_or(0.0),
            });
        }
        Mode::Physical => {
            if let Some(e) = direct_keys.iter().find_map(|k| p.get(k)) {
                return Err(err(e.line, "direct couplings need `mode = direct`"));
            }
        }
    }

    if let Some((line, v)) = p.word("variant") {
        cfg.variant = Variant::from_name(v).ok_or_else(|| err(line, format!("unknown variant `{v}`")))?;
    }
    if let Some((line, v)) = p.word("closed_form") {
        cfg.closed_form = ClosedForm::from_name(v).ok_or_else(|| err(line, format!("unknown closed_form `{v}`")))?;
    }
    if let Some((line, v)) = p.word("source") {
        cfg.source = match v {
            "printed" => SourceKind::Printed,
            "oracle" => SourceKind::Oracle,
            _ => return Err(err(line, format!("unknown source `{v}` (printed | oracle)"))),
        };
    }
    if let Some((line, v)) = p.word("sign_convention") {
        cfg.sign_convention =
            SignConvention::from_name(v).ok_or_else(|| err(line, format!("unknown sign_convention `{v}`")))?;
    }
    if let Some((line, v)) = p.word("gauge") {
        cfg.gauge = match v {
            "complex" => Gauge::Complex,
            "real" => Gauge::Real,
            _ => return Err(err(line, format!("unknown gauge `{v}` (complex | real)"))),
        };
    }
    if let Some((line, v)) = p.word("branch") {
        cfg.branch = match v {
            "lowest" => BranchPolicy::LowestStable,
            "highest" => BranchPolicy::HighestStable,
            _ => BranchPolicy::Index(
                v.parse().map_err(|_| err(line, format!("branch `{v}` is not lowest | highest | index")))?,
            ),
        };
    }
    if let Some((line, v)) = p.word("quadrature") {
        cfg.quadrature = match v {
            "absorption" => Quadrature::Absorption,
            "dispersion" => Quadrature::Dispersion,
            "power" => Quadrature::Power,
            _ => return Err(err(line, format!("unknown quadrature `{v}`"))),
        };
    }
    if let Some((line, v)) = p.word("grid") {
        cfg.grid = Some(GridSpec::parse(v).map_err(|e| err(line, e.to_string()))?);
    }
    if let Some(v) = p.plain("verify_envelope")? {
        cfg.verify_envelope = Some(v);
    }
    if let Some(e) = p.get("verify_time_points") {
        cfg.verify_time_points = e.value.parse().map_err(|_| err(e.line, "verify_time_points must be a count"))?;
    }
    if let Some(e) = p.get("fano_points") {
        cfg.fano_points = e.value.parse().map_err(|_| err(e.line, "fano_points must be a count"))?;
    }

    for (axis_key, values_key) in [("sweep_axis", "sweep_values"), ("sweep_axis_2", "sweep_values_2")] {
        match (p.get(axis_key), p.get(values_key)) {
            (None, None) => {}
            (Some(a), Some(v)) => {
                let axis = Axis::from_name(&a.value).map_err(|e| err(a.line, e.to_string()))?;
                let values = v
                    .value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        let x = number(v.line, s.trim())?;
                        frequency(v.line, x, v.tag.as_deref(), values_key, &scales)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if values.is_empty() {
                    return Err(err(v.line, "sweep axis has no values"));
                }
                cfg.sweep.push(SweepAxisConfig { axis, values });
            }
            (Some(e), None) | (None, Some(e)) => {
                return Err(err(e.line, format!("`{axis_key}` and `{values_key}` go together")));
            }
        }
    }

    let synthetic = ["synthetic_rho", "synthetic_center", "synthetic_width", "synthetic_amplitude", "synthetic_offset"];
    if synthetic.iter().any(|k| p.get(k).is_some()) {
        let need = |k: &str, v: Option<f64>| v.ok_or_else(|| err(0, format!("synthetic Fano data needs `{k}`")));
        cfg.synthetic_fano = Some(FanoParams {
            rho: need("synthetic_rho", p.plain("synthetic_rho")?)?,
            center: need("synthetic_center", freq("synthetic_center", &scales)?)?,
            width: need("synthetic_width", freq("synthetic_width", &scales)?)?,
            amplitude: need("synthetic_amplitude", p.plain("synthetic_amplitude")?)?,
            offset: p.plain("synthetic_offset")?.unwrap_or(0.0),
        });
    }
    Ok(cfg)
}
