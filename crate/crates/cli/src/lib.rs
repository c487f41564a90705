//! `omit` subcommands: steady, spectrum, sweep, verify, fano.

use clap::{Args, Parser, Subcommand, ValueEnum};
use omit_core::analysis::{
    fano_fit, find_windows, find_windows_in, mode_bands, sweep, window_segment, AxisSpec, FanoFit, InitialGuess,
    Quadrature, SweepResult,
};
use omit_core::config::{parse_config, GridSpec, RunConfig, SourceKind};
use omit_core::drift::{drift_matrix, is_stable, Variant};
use omit_core::model::ModelParams;
use omit_core::oracle::compare::{compare, CompareOptions, Envelope, Regime};
use omit_core::response::{spectrum, ClosedForm, SpectrumOptions, SpectrumResult};
use omit_core::steady::{solve_steady_state_with, stationarity_residual, OperatingPoint};
use omit_core::Error;
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NO_STABLE_BRANCH: i32 = 2;
pub const EXIT_POLE: i32 = 3;
pub const EXIT_SWEEP_FAILED: i32 = 4;
pub const EXIT_VERIFY_FAILED: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;

pub const CSV_HEADER: &str = "delta_p_over_omega_m,re_c_minus,im_c_minus,re_c_plus,im_c_plus";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Probe grid (units of omega_m) when neither config nor flag gives one.
pub const DEFAULT_GRID: GridSpec = GridSpec { start: 0.1, stop: 1.5, count: 2001 };

#[derive(Parser, Debug, Clone)]
#[command(name = "omit", version, about = "Probe spectra of a hybrid condensate-optomechanical cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Intensity branches, selected branch, residual and stability.
    Steady,
    /// Output spectrum over the probe grid.
    Spectrum,
    /// One spectrum per outer sweep point plus a manifest.
    Sweep,
    /// Printed formulas vs frequency-domain vs time-domain oracle.
    Verify,
    /// Fano fits of the transparency windows.
    Fano,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Parameter file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// start:stop:count in units of omega_m.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long = "closed-form", global = true, value_enum)]
    pub closed_form: Option<ClosedFormArg>,
    /// axis=v1,v2,... with delta_p, delta, g_a, g_m in units of omega_m and
    /// eta_eff in units of kappa. Repeat for a second axis.
    #[arg(long, global = true)]
    pub sweep: Vec<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum VariantArg {
    PaperExact,
    HamiltonianConsistent,
    PaperLiteral,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::PaperExact => Variant::PaperExact,
            VariantArg::HamiltonianConsistent => Variant::HamiltonianConsistent,
            VariantArg::PaperLiteral => Variant::PaperLiteral,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum ClosedFormArg {
    Corrected,
    AsPrinted,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Doc,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(exit_code(&e), e.to_string())
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config { .. }
        | Error::UnknownAxis(_)
        | Error::InvalidGrid(_)
        | Error::MissingParameter(_)
        | Error::UnitMismatch(_)
        | Error::InvalidParameter { .. }
        | Error::DegenerateModel(_)
        | Error::BranchOutOfRange { .. } => EXIT_CONFIG,
        Error::NoStableBranch { .. } => EXIT_NO_STABLE_BRANCH,
        Error::PoleAtResonance { .. } => EXIT_POLE,
        _ => EXIT_NUMERICAL,
    }
}

/// Shortest round-trip decimal.
pub fn fmt_f64(v: f64) -> String {
    ryu::Buffer::new().format(v).to_string()
}

/// Parses, runs and reports; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    let result = match cli.common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(Failure::new(EXIT_CONFIG, format!("thread pool: {e}"))),
        },
        None => dispatch(cli),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    let cfg = load_config(&cli.common)?;
    fs::create_dir_all(&cli.common.out)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot create {}: {e}", cli.common.out.display())))?;
    let ctx = Context { cfg, out: cli.common.out.clone(), format: cli.common.format };
    match cli.command {
        Command::Steady => cmd_steady(&ctx),
        Command::Spectrum => cmd_spectrum(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Verify => cmd_verify(&ctx),
        Command::Fano => cmd_fano(&ctx),
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    format: Format,
}

/// Config file plus command-line overrides.
pub fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let path = common.config.as_ref().ok_or_else(|| Failure::new(EXIT_CONFIG, "--config is required"))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    if let Some(v) = common.variant {
        cfg.variant = v.into();
    }
    if let Some(c) = common.closed_form {
        cfg.closed_form = match c {
            ClosedFormArg::Corrected => ClosedForm::Corrected,
            ClosedFormArg::AsPrinted => ClosedForm::AsPrinted,
        };
    }
    if let Some(g) = &common.grid {
        cfg.grid = Some(GridSpec::parse(g).map_err(|e| Failure::new(EXIT_CONFIG, format!("--grid: {e}")))?);
    }
    if !common.sweep.is_empty() {
        let model = cfg.model()?;
        cfg.sweep = common.sweep.iter().map(|s| parse_sweep_flag(s, &model)).collect::<Result<_, _>>()?;
    }
    Ok(cfg)
}

fn parse_sweep_flag(s: &str, model: &ModelParams) -> Result<omit_core::config::SweepAxisConfig, Failure> {
    use omit_core::analysis::Axis;
    let (name, values) =
        s.split_once('=').ok_or_else(|| Failure::new(EXIT_CONFIG, format!("--sweep `{s}` is not axis=v1,v2,...")))?;
    let axis = Axis::from_name(name.trim()).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let scale = match axis {
        Axis::TransverseCoupling => model.cavity_decay,
        _ => model.mirror_frequency,
    };
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(|x| x * scale)
                .ok_or_else(|| Failure::new(EXIT_CONFIG, format!("--sweep value `{v}` is not a number")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(omit_core::config::SweepAxisConfig { axis, values })
}

fn grid_of(cfg: &RunConfig, model: &ModelParams) -> Result<Vec<f64>, Failure> {
    Ok(cfg.grid.unwrap_or(DEFAULT_GRID).to_rad_s(model.mirror_frequency)?)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn spectrum_csv(spec: &SpectrumResult, omega_m: f64) -> String {
    let mut s = String::with_capacity(96 * (spec.grid.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for ((dp, cm), cp) in spec.grid.iter().zip(&spec.c_minus).zip(&spec.c_plus) {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(dp / omega_m),
            fmt_f64(cm.re),
            fmt_f64(cm.im),
            fmt_f64(cp.re),
            fmt_f64(cp.im)
        );
    }
    s
}

fn variant_name(cfg: &RunConfig) -> &'static str {
    cfg.variant.name()
}

fn spectrum_sidecar(cfg: &RunConfig, model: &ModelParams, spec: &SpectrumResult) -> serde_json::Value {
    json!({
        "artifact_version": ARTIFACT_VERSION,
        "variant": variant_name(cfg),
        "metadata": spec.metadata,
        "omega_m": model.mirror_frequency,
        "kappa": model.cavity_decay,
        "grid_rad_s": spec.grid,
    })
}

fn spectrum_doc(cfg: &RunConfig, model: &ModelParams, spec: &SpectrumResult) -> serde_json::Value {
    let mut v = spectrum_sidecar(cfg, model, spec);
    v["c_minus"] = json!(spec.c_minus.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>());
    v["c_plus"] = json!(spec.c_plus.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>());
    v
}

fn point_failure(e: &Error) -> Failure {
    match e {
        Error::AtPoint { index, source } if matches!(source.root(), Error::PoleAtResonance { .. }) => {
            Failure::new(EXIT_POLE, format!("grid index {index}: {source}"))
        }
        other => Failure::from(other.clone()),
    }
}

fn emit_spectrum(ctx: &Context, model: &ModelParams, spec: &SpectrumResult, stem: &str) -> Result<(), Failure> {
    match ctx.format {
        Format::Csv => {
            write(&ctx.out.join(format!("{stem}.csv")), &spectrum_csv(spec, model.mirror_frequency))?;
            write(&ctx.out.join(format!("{stem}.json")), &pretty(&spectrum_sidecar(&ctx.cfg, model, spec)))
        }
        Format::Doc => write(&ctx.out.join(format!("{stem}.json")), &pretty(&spectrum_doc(&ctx.cfg, model, spec))),
    }
}

fn cmd_steady(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    let model = cfg.model()?;
    let (ss, set) = solve_steady_state_with(&model, cfg.branch, cfg.variant)?;
    let op = OperatingPoint::from_steady(&model, &ss).with_gauge(cfg.gauge);
    let dm = drift_matrix(&model, &op, cfg.variant);
    let stable = is_stable(&dm)?;
    let residual = stationarity_residual(&model, &ss).into_iter().fold(0.0, f64::max);
    match ctx.format {
        Format::Csv => {
            let mut s = String::from("branch,photon_number,stable,spectral_abscissa,selected\n");
            for (i, b) in set.branches.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{i},{},{},{},{}",
                    fmt_f64(b.photon_number),
                    b.stable,
                    fmt_f64(b.spectral_abscissa),
                    i == ss.branch_index
                );
            }
            write(&ctx.out.join("steady.csv"), &s)?;
        }
        Format::Doc => {}
    }
    let doc = json!({
        "artifact_version": ARTIFACT_VERSION,
        "variant": variant_name(cfg),
        "polynomial": set.polynomial,
        "branches": set.branches,
        "bistable": set.bistable,
        "selected": ss.branch_index,
        "state": {
            "cavity": [ss.cavity.re, ss.cavity.im],
            "photon_number": ss.photon_number,
            "mirror_position": ss.mirror_position,
            "mirror_momentum": ss.mirror_momentum,
            "atomic_position": ss.atomic_position,
            "atomic_momentum": ss.atomic_momentum,
        },
        "residual": residual,
        "operating_point": op,
        "stable": stable,
        "spectral_abscissa": dm.spectral_abscissa(),
    });
    write(&ctx.out.join("steady.json"), &pretty(&doc))?;
    println!(
        "{} branch(es); selected {} with n = {}, residual {:e}, {}",
        set.branches.len(),
        ss.branch_index,
        fmt_f64(ss.photon_number),
        residual,
        if stable { "stable" } else { "unstable" }
    );
    Ok(EXIT_OK)
}

fn cmd_spectrum(ctx: &Context) -> Result<i32, Failure> {
    let (model, op) = ctx.cfg.build()?;
    let grid = grid_of(&ctx.cfg, &model)?;
    let spec = spectrum(&model, &op, &grid, ctx.cfg.spectrum_options()).map_err(|e| point_failure(&e))?;
    emit_spectrum(ctx, &model, &spec, "spectrum")?;
    println!("{} points written to {}", spec.grid.len(), ctx.out.display());
    Ok(EXIT_OK)
}

fn sweep_file_stem(result: &SweepResult, index: &[usize]) -> String {
    let mut s = String::from("sweep");
    for (a, i) in result.outer.iter().zip(index) {
        let _ = write!(s, "_{}_{}", a.axis.name(), i);
    }
    s
}

fn cmd_sweep(ctx: &Context) -> Result<i32, Failure> {
    let (model, op) = ctx.cfg.build()?;
    let axes: Vec<AxisSpec> = ctx.cfg.sweep_axes();
    let grid = grid_of(&ctx.cfg, &model)?;
    let result = sweep(&model, &op, &axes, &grid, ctx.cfg.spectrum_options())?;
    if result.outer.is_empty() {
        let spec = match &result.points[0].result {
            Ok(s) => s,
            Err(e) => return Err(point_failure(e)),
        };
        emit_spectrum(ctx, &model, spec, "spectrum")?;
        println!("no outer axes; {} points written to {}", spec.grid.len(), ctx.out.display());
        return Ok(EXIT_OK);
    }
    let mut entries = Vec::with_capacity(result.points.len());
    for p in &result.points {
        let stem = sweep_file_stem(&result, &p.index);
        match &p.result {
            Ok(spec) => {
                let file = match ctx.format {
                    Format::Csv => {
                        write(&ctx.out.join(format!("{stem}.csv")), &spectrum_csv(spec, model.mirror_frequency))?;
                        format!("{stem}.csv")
                    }
                    Format::Doc => {
                        write(&ctx.out.join(format!("{stem}.json")), &pretty(&spectrum_doc(&ctx.cfg, &model, spec)))?;
                        format!("{stem}.json")
                    }
                };
                entries.push(json!({ "index": p.index, "values": p.values, "file": file, "ok": true }));
            }
            Err(e) => {
                eprintln!("sweep point {:?}: {e}", p.index);
                entries.push(json!({ "index": p.index, "values": p.values, "ok": false, "error": e.to_string() }));
            }
        }
    }
    let manifest = json!({
        "artifact_version": ARTIFACT_VERSION,
        "variant": variant_name(&ctx.cfg),
        "source": ctx.cfg.spectrum_options().source.label(),
        "axes": result.outer,
        "shape": result.shape,
        "omega_m": model.mirror_frequency,
        "kappa": model.cavity_decay,
        "grid_rad_s": result.grid,
        "base": omit_core::response::metadata(&model, &op, ctx.cfg.spectrum_options()),
        "points": entries,
        "failures": result.failures(),
    });
    write(&ctx.out.join("manifest.json"), &pretty(&manifest))?;
    println!("{} sweep point(s), {} failed", result.points.len(), result.failures());
    Ok(if result.failures() > 0 { EXIT_SWEEP_FAILED } else { EXIT_OK })
}

fn cmd_verify(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    let (model, op) = cfg.build()?;
    let grid = grid_of(cfg, &model)?;
    let opts =
        CompareOptions { closed_form: cfg.closed_form, time_points: cfg.verify_time_points, ..Default::default() };
    let report = compare(&model, &op, &grid, cfg.variant, opts);
    let regime = Regime::of(&op);
    let envelope = Envelope::for_regime(regime, &op, cfg.verify_envelope);
    let ok = report.within(&envelope);
    let doc = json!({
        "artifact_version": ARTIFACT_VERSION,
        "regime": regime,
        "envelope": envelope,
        "within_envelope": ok,
        "report": report,
    });
    write(&ctx.out.join("verify.json"), &pretty(&doc))?;
    let show = |s: &Option<omit_core::oracle::compare::DeviationSummary>| match s {
        Some(s) => format!("max {:e} median {:e}", s.max, s.median),
        None => "n/a".to_string(),
    };
    println!("regime {:?}, variant {}", regime, cfg.variant.name());
    println!("printed vs frequency: {}", show(&report.printed_vs_frequency));
    println!("frequency vs time:    {}", show(&report.frequency_vs_time));
    println!("{}", if ok { "within envelope" } else { "OUTSIDE envelope" });
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

struct FitRow {
    point: usize,
    window: usize,
    fit: FanoFit,
}

fn fits_for_spectrum(
    spec: &SpectrumResult,
    quadrature: Quadrature,
    point: usize,
    rows: &mut Vec<FitRow>,
    notes: &mut Vec<String>,
) {
    for (w, win) in find_windows(spec, quadrature).iter().enumerate() {
        let (x, y) = window_segment(spec, win, quadrature);
        match fano_fit(&x, &y, InitialGuess::FromExtrema) {
            Ok(fit) => rows.push(FitRow { point, window: w, fit }),
            Err(e) => notes.push(format!("point {point} window {w}: {e}")),
        }
    }
}

fn cmd_fano(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.cfg;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let omega_m;
    if let Some(truth) = cfg.synthetic_fano {
        omega_m = cfg.physical.mirror_frequency.unwrap_or(1.0);
        let x = match cfg.grid {
            Some(g) => g.to_rad_s(omega_m)?,
            None => {
                let w = truth.width.abs();
                omit_core::response::uniform_grid(truth.center - 10.0 * w, truth.center + 10.0 * w, cfg.fano_points)?
            }
        };
        let y: Vec<f64> = x.iter().map(|&v| truth.eval(v)).collect();
        let windows = find_windows_in(&x, &y);
        let fit = fano_fit(&x, &y, InitialGuess::FromExtrema)?;
        if windows.is_empty() {
            notes.push("synthetic profile has no window; fitted over the whole grid".into());
        }
        rows.push(FitRow { point: 0, window: 0, fit });
    } else {
        let (model, op) = cfg.build()?;
        omega_m = model.mirror_frequency;
        let opts: SpectrumOptions = cfg.spectrum_options();
        let bands: Vec<Vec<f64>> = match cfg.grid {
            Some(g) => vec![g.to_rad_s(omega_m)?],
            None => mode_bands(&model, cfg.fano_points)?,
        };
        let axes = cfg.sweep_axes();
        // Bands are scanned in order, so windows come out sorted by position
        // within each sweep point.
        let mut per_point: Vec<Vec<FitRow>> = Vec::new();
        for band in &bands {
            let result = sweep(&model, &op, &axes, band, opts)?;
            per_point.resize_with(result.points.len(), Vec::new);
            for (k, p) in result.points.iter().enumerate() {
                match &p.result {
                    Ok(spec) => fits_for_spectrum(spec, cfg.quadrature, k, &mut per_point[k], &mut notes),
                    Err(e) => return Err(point_failure(e)),
                }
            }
        }
        for fits in per_point {
            for (w, mut r) in fits.into_iter().enumerate() {
                r.window = w;
                rows.push(r);
            }
        }
    }
    match ctx.format {
        Format::Csv => {
            let mut s = String::from(
                "point,window,rho,center_over_omega_m,width_over_omega_m,amplitude,offset,residual_norm,converged,iterations\n",
            );
            for r in &rows {
                let p = r.fit.params;
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.point,
                    r.window,
                    fmt_f64(p.rho),
                    fmt_f64(p.center / omega_m),
                    fmt_f64(p.width / omega_m),
                    fmt_f64(p.amplitude),
                    fmt_f64(p.offset),
                    fmt_f64(r.fit.residual_norm),
                    r.fit.converged,
                    r.fit.iterations
                );
            }
            write(&ctx.out.join("fano.csv"), &s)?;
        }
        Format::Doc => {
            let doc = json!({
                "artifact_version": ARTIFACT_VERSION,
                "omega_m": omega_m,
                "fits": rows.iter().map(|r| json!({ "point": r.point, "window": r.window, "fit": r.fit })).collect::<Vec<_>>(),
                "notes": notes,
            });
            write(&ctx.out.join("fano.json"), &pretty(&doc))?;
        }
    }
    for n in &notes {
        eprintln!("note: {n}");
    }
    println!("{} fit(s)", rows.len());
    if cfg.source == SourceKind::Oracle {
        println!("spectra from the frequency-domain oracle ({})", cfg.variant.name());
    }
    Ok(EXIT_OK)
}
