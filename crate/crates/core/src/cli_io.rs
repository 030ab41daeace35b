//! Configuration documents, presets, trace files and run reports.
//!
//! Config documents are TOML. Dimensioned fields are strings carrying a unit
//! (`length = "0.1 m"`, `youngs_modulus = "10 GPa"`); dimensionless fields take a
//! number or a fraction string (`W_over_L = "1/12"`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::energy::{CrossSection, EnergyModel, MaterialParams, ModelId};
use crate::error::{Result, RibError};
use crate::integrator::SolverSettings;
use crate::scenarios::{
    detect_transitions, run_compression, run_shear_sweep, run_shear_twist_sweep, run_twist_sweep,
    run_width_homotopy, BenchmarkConfig, Ribbon, SweepDirection, Trace,
};

pub const TRACE_HEADER: &str = "control,H_m_signed_norm,H_m_abs_norm,F_shear_norm,energy_J,step_index";
pub const VERSION_TAG: &str = concat!("ribsim-", env!("CARGO_PKG_VERSION"));

const SHIPPED_REFERENCE: &str = include_str!("../data/fea_reference.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dim {
    Length,
    Pressure,
    Density,
    Time,
    Force,
    Velocity,
    Angle,
}

impl Dim {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dim::Length => &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6)],
            Dim::Pressure => &[("Pa", 1.0), ("kPa", 1e3), ("MPa", 1e6), ("GPa", 1e9)],
            Dim::Density => &[("kg/m^3", 1.0), ("kg/m3", 1.0), ("g/cm^3", 1e3), ("g/cm3", 1e3)],
            Dim::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6)],
            Dim::Force => &[("N", 1.0), ("mN", 1e-3), ("uN", 1e-6), ("µN", 1e-6)],
            Dim::Velocity => &[("m/s", 1.0), ("mm/s", 1e-3)],
            Dim::Angle => &[("rad", 1.0), ("deg", std::f64::consts::PI / 180.0)],
        }
    }
}

/// Parses `"1/12"`, `"0.25"` or `"1e-3"`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

/// Consumes a TOML table key by key so that leftovers can be reported.
struct Section {
    path: String,
    table: Table,
}

impl Section {
    fn new(path: &str, table: Table) -> Self {
        Section { path: path.to_string(), table }
    }

    fn at(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn schema(&self, key: &str, message: impl Into<String>) -> RibError {
        RibError::Schema { path: self.at(key), message: message.into() }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn scalar(&mut self, key: &str) -> Result<Option<f64>> {
        let Some(v) = self.take(key) else { return Ok(None) };
        match &v {
            Value::Integer(i) => Ok(Some(*i as f64)),
            Value::Float(f) => Ok(Some(*f)),
            Value::String(s) => parse_number(s)
                .map(Some)
                .ok_or_else(|| self.schema(key, format!("expected a number or fraction, got {s:?}"))),
            _ => Err(self.schema(key, "expected a number")),
        }
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
            Some(_) => Err(self.schema(key, "expected a non-negative integer")),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.schema(key, "expected a string")),
        }
    }

    fn quantity(&mut self, key: &str, dim: Dim) -> Result<Option<f64>> {
        let Some(v) = self.take(key) else { return Ok(None) };
        let units = dim.units();
        let expected = units.iter().map(|u| u.0).collect::<Vec<_>>().join(", ");
        let Value::String(s) = v else {
            return Err(RibError::Units { path: self.at(key), message: format!("missing unit; expected one of {expected}") });
        };
        let s = s.trim();
        let split = s.find(|c: char| c.is_whitespace()).ok_or_else(|| RibError::Units {
            path: self.at(key),
            message: format!("{s:?} has no unit; expected one of {expected}"),
        })?;
        let (num, unit) = (&s[..split], s[split..].trim());
        let value = parse_number(num).ok_or_else(|| self.schema(key, format!("bad number {num:?}")))?;
        let scale = units.iter().find(|u| u.0 == unit).map(|u| u.1).ok_or_else(|| RibError::Units {
            path: self.at(key),
            message: format!("unit {unit:?} not accepted; expected one of {expected}"),
        })?;
        Ok(Some(value * scale))
    }

    fn subsection(&mut self, key: &str) -> Result<Section> {
        match self.take(key) {
            None => Ok(Section::new(&self.at(key), Table::new())),
            Some(Value::Table(t)) => Ok(Section::new(&self.at(key), t)),
            Some(_) => Err(self.schema(key, "expected a table")),
        }
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().next() {
            Some(k) => Err(self.schema(k, "unknown field")),
            None => Ok(()),
        }
    }
}

/// A validated configuration plus the settings that live outside a single run.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedConfig {
    pub config: BenchmarkConfig,
    /// Final `W/L` of a width homotopy.
    pub target_width_ratio: Option<f64>,
    pub warnings: Vec<String>,
}

/// Parses a config document; every unspecified field takes its default.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| RibError::Schema { path: "<document>".into(), message: e.message().to_string() })?;
    let mut top = Section::new("", table);

    let model: ModelId = match top.string("model")? {
        Some(s) => s.parse().map_err(|_| top.schema("model", format!("unknown model id {s:?}")))?,
        None => ModelId::Kirchhoff,
    };
    let length = top.quantity("length", Dim::Length)?.unwrap_or(0.1);
    let thickness = top.quantity("thickness", Dim::Length)?.unwrap_or(1e-3);
    let ratio = top.scalar("W_over_L")?;
    let width = top.quantity("width", Dim::Length)?;
    let width = match (ratio, width) {
        (Some(_), Some(_)) => return Err(top.schema("width", "give either W_over_L or width, not both")),
        (Some(r), None) => r * length,
        (None, Some(w)) => w,
        (None, None) => length / 20.0,
    };
    let target_width_ratio = top.scalar("target_W_over_L")?;

    let young = top.quantity("youngs_modulus", Dim::Pressure)?.unwrap_or(10e9);
    let poisson = top.scalar("poisson_ratio")?.unwrap_or(0.5);
    let density = top.quantity("density", Dim::Density)?.unwrap_or(1000.0);
    let mut material = MaterialParams::isotropic(young, poisson, density);
    if let Some(g) = top.quantity("shear_modulus", Dim::Pressure)? {
        material.shear_modulus = g;
    }
    let section = CrossSection::new(width, thickness).map_err(|e| top.schema("width", e.to_string()))?;

    let mut config = BenchmarkConfig::new(model, width / length);
    config.length = length;
    config.width = width;
    config.thickness = thickness;
    config.material = material;
    config.solver = SolverSettings::for_ribbon(&material, &section);
    if let Some(n) = top.count("nodes")? {
        config.nodes = n;
    }
    if let Some(s) = top.count("seed")? {
        config.seed = s as u64;
    }
    if let Some(d) = top.string("direction")? {
        config.direction = parse_direction(&d).ok_or_else(|| top.schema("direction", "expected \"pos\" or \"neg\""))?;
    }
    if let Some(r) = top.scalar("compression_ratio")? {
        config.compression_ratio = r;
    }
    if let Some(e) = top.scalar("regularization")? {
        config.model.regularization = e;
    }

    let mut load = top.subsection("loading")?;
    let c = &mut config;
    set(&mut c.compression_time, load.quantity("compression_time", Dim::Time)?);
    set(&mut c.relax_time, load.quantity("relax_time", Dim::Time)?);
    set(&mut c.shear_max, load.scalar("shear_max")?);
    set(&mut c.shear_time, load.quantity("shear_time", Dim::Time)?);
    set(&mut c.twist_max, load.quantity("twist_max", Dim::Angle)?);
    set(&mut c.twist_time, load.quantity("twist_time", Dim::Time)?);
    set(&mut c.twist_per_shear, load.quantity("twist_per_shear", Dim::Angle)?);
    set(&mut c.perturbation, load.scalar("perturbation")?);
    set(&mut c.imperfection, load.scalar("imperfection")?);
    set(&mut c.sample_interval, load.quantity("sample_interval", Dim::Time)?);
    if let Some(n) = load.count("homotopy_steps")? {
        c.homotopy_steps = n;
    }
    if let Some(v) = load.quantity("shear_rate", Dim::Velocity)? {
        if !(v > 0.0) {
            return Err(load.schema("shear_rate", "must be positive"));
        }
        c.shear_time = c.shear_max * c.length / v;
    }
    load.finish()?;

    let mut sol = top.subsection("solver")?;
    let s = &mut config.solver;
    let h = sol.quantity("h", Dim::Time)?;
    set(&mut s.h_min, sol.quantity("h_min", Dim::Time)?);
    set(&mut s.h_max, sol.quantity("h_max", Dim::Time)?);
    s.h = h.unwrap_or(s.h.clamp(s.h_min, s.h_max.max(s.h_min)));
    set(&mut s.delta_f, sol.quantity("delta_F", Dim::Force)?);
    set(&mut s.delta_u, sol.quantity("delta_u", Dim::Velocity)?);
    set(&mut s.delta_stable, sol.quantity("delta_stable", Dim::Length)?);
    if let Some(n) = sol.count("N_stable")? {
        s.n_stable = n;
    }
    if let Some(n) = sol.count("max_newton_iters")? {
        s.max_newton_iters = n;
    }
    set(&mut s.shrink, sol.scalar("shrink")?);
    set(&mut s.grow, sol.scalar("grow")?);
    set(&mut s.lambda0_rel, sol.scalar("lambda0_rel")?);
    set(&mut s.k_max, sol.scalar("K_max")?);
    set(&mut s.penalty_factor, sol.scalar("penalty_factor")?);
    sol.finish()?;
    top.finish()?;

    config.validate().map_err(|e| RibError::Schema { path: "<document>".into(), message: e.to_string() })?;
    if let Some(t) = target_width_ratio {
        CrossSection::new(t * config.length, config.thickness)
            .map_err(|e| RibError::Schema { path: "target_W_over_L".into(), message: e.to_string() })?;
    }
    let warnings = config.warnings();
    Ok(ParsedConfig { config, target_width_ratio, warnings })
}

fn set(slot: &mut f64, v: Option<f64>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn parse_direction(s: &str) -> Option<SweepDirection> {
    match s {
        "pos" => Some(SweepDirection::Pos),
        "neg" => Some(SweepDirection::Neg),
        _ => None,
    }
}

pub fn load_config(path: &Path) -> Result<ParsedConfig> {
    let text = fs::read_to_string(path).map_err(|e| RibError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Named starting points; each is an ordinary config document.
pub const PRESETS: &[(&str, &str)] = &[
    ("narrow", "W_over_L = \"1/20\"\n"),
    ("medium", "W_over_L = \"1/12\"\n"),
    ("wide", "W_over_L = \"1/6\"\n"),
    ("extra-narrow", "W_over_L = \"1/40\"\n"),
    ("homotopy-third", "model = \"sano\"\nW_over_L = \"1/12\"\ntarget_W_over_L = \"1/3\"\n"),
    ("homotopy-half", "model = \"sano\"\nW_over_L = \"1/12\"\ntarget_W_over_L = \"1/2\"\n"),
    ("scaling-45", "W_over_L = \"1/20\"\nnodes = 45\n"),
    ("scaling-63", "W_over_L = \"1/20\"\nnodes = 63\n"),
    ("smoke", "W_over_L = \"1/20\"\nnodes = 15\n[loading]\nshear_max = 0.05\nshear_time = \"0.5 s\"\n"),
];

pub fn preset(name: &str) -> Result<ParsedConfig> {
    let text = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| RibError::Schema { path: "preset".into(), message: format!("unknown preset {name:?}") })?;
    parse_config(text)
}

/// Hex SHA-256 of the canonical JSON form of a config.
pub fn config_hash(config: &BenchmarkConfig) -> String {
    let json = serde_json::to_string(config).expect("config serialises");
    let digest = Sha256::digest(json.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub name: String,
    pub steps: usize,
    pub iterations: usize,
    pub rejected: usize,
    pub wall_seconds: f64,
}

/// Metadata sidecar of one trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub model: ModelId,
    pub nodes: usize,
    pub width_ratio: f64,
    pub seed: u64,
    pub version: String,
    pub parallel: bool,
    pub wall_seconds: f64,
    pub phases: Vec<PhaseStats>,
    pub trace_file: Option<String>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config: &BenchmarkConfig) -> Self {
        RunManifest {
            config_hash: config_hash(config),
            model: config.model.id,
            nodes: config.nodes,
            width_ratio: config.width_ratio(),
            seed: config.seed,
            version: VERSION_TAG.to_string(),
            parallel: crate::par::PARALLEL,
            wall_seconds: 0.0,
            phases: Vec::new(),
            trace_file: None,
            error: None,
        }
    }

}

/// Sidecar path of a trace file: `run.csv` → `run.manifest.json`.
pub fn manifest_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("manifest.json")
}

/// Writes the CSV trace and its manifest sidecar; returns the sidecar path.
pub fn write_trace(trace: &Trace, manifest: &RunManifest, path: &Path) -> Result<PathBuf> {
    if trace.is_empty() {
        return Err(RibError::Io(format!("refusing to write empty trace to {}", path.display())));
    }
    let mut out = String::with_capacity(80 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{}",
            r.control,
            r.height,
            r.height_abs(),
            r.shear_force,
            r.energy,
            r.step
        );
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, out)?;
    let mut m = manifest.clone();
    m.trace_file = path.file_name().map(|f| f.to_string_lossy().into_owned());
    let side = manifest_path(path);
    fs::write(&side, serde_json::to_string_pretty(&m).map_err(|e| RibError::Io(e.to_string()))? + "\n")?;
    Ok(side)
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| RibError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(RibError::Schema { path: path.display().to_string(), message: "missing trace header".into() });
    }
    let mut trace = Trace::default();
    for (i, line) in lines.enumerate() {
        let bad = || RibError::Schema { path: format!("{}:{}", path.display(), i + 2), message: "malformed row".into() };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad());
        }
        let num = |k: usize| cols[k].parse::<f64>().map_err(|_| bad());
        trace.records.push(crate::scenarios::TraceRecord {
            control: num(0)?,
            height: num(1)?,
            shear_force: num(3)?,
            energy: num(4)?,
            step: cols[5].parse().map_err(|_| bad())?,
        });
    }
    Ok(trace)
}

/// FEA critical shears at one width, from the shipped reference data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub u_to_us: f64,
    pub us_to_s: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct FeaSeries {
    pub baseline: f64,
    pub shift_pct: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct FeaReference {
    pub width_ratios: Vec<f64>,
    pub u_to_us: FeaSeries,
    pub us_to_s: FeaSeries,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ModelReference {
    pub u_to_us_shift_pct: Vec<f64>,
    pub u_to_us_delta_e: Vec<f64>,
    pub us_to_s_shift_pct: Vec<f64>,
    pub us_to_s_delta_e: Vec<f64>,
}

/// Transcribed reference constants (never recomputed).
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ReferenceData {
    pub version: String,
    pub fea: FeaReference,
    pub models: BTreeMap<String, ModelReference>,
}

impl ReferenceData {
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_REFERENCE).expect("shipped reference data parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RibError::Schema { path: "<reference>".into(), message: e.message().to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| RibError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn index(&self, width_ratio: f64) -> Option<usize> {
        self.fea.width_ratios.iter().position(|w| (w - width_ratio).abs() <= 1e-6 * w.max(1e-12))
    }

    /// FEA critical shears at a tabulated width.
    pub fn fea_at(&self, width_ratio: f64) -> Option<ReferencePoint> {
        let i = self.index(width_ratio)?;
        let at = |s: &FeaSeries| s.baseline * (1.0 - s.shift_pct[i] / 100.0);
        Some(ReferencePoint { u_to_us: at(&self.fea.u_to_us), us_to_s: at(&self.fea.us_to_s) })
    }

    /// Published `(U→US, US→S)` shift percentages of a 1D model at a tabulated width.
    pub fn model_shift(&self, model: ModelId, width_ratio: f64) -> Option<(f64, f64)> {
        let i = self.index(width_ratio)?;
        let m = self.models.get(model.name())?;
        Some((m.u_to_us_shift_pct[i], m.us_to_s_shift_pct[i]))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionComparison {
    pub baseline: Option<f64>,
    pub other: Option<f64>,
    /// `(1 − other/baseline)·100`.
    pub shift_pct: Option<f64>,
    /// `|other − reference|`.
    pub delta_e: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub u_to_us: TransitionComparison,
    pub us_to_s: TransitionComparison,
}

fn comparison(a: Option<f64>, b: Option<f64>, reference: Option<f64>) -> TransitionComparison {
    TransitionComparison {
        baseline: a,
        other: b,
        shift_pct: a.zip(b).map(|(a, b)| (1.0 - b / a) * 100.0),
        delta_e: b.zip(reference).map(|(b, r)| (b - r).abs()),
    }
}

/// Shift of the critical shears of `b` relative to baseline `a`.
///
/// Fails with `NoTransition` when the U→US point is missing on either side;
/// a missing US→S point is reported as `None`.
pub fn compare_runs(a: &Trace, b: &Trace, reference: Option<&ReferencePoint>) -> Result<ShiftReport> {
    let ta = detect_transitions(&a.controls(), &a.forces());
    let tb = detect_transitions(&b.controls(), &b.forces());
    let mut missing = Vec::new();
    for (side, t) in [("baseline", &ta), ("other", &tb)] {
        if t.first.is_none() {
            missing.push(format!("{side}: U→US absent"));
        }
        if t.second.is_none() {
            missing.push(format!("{side}: US→S absent"));
        }
    }
    if ta.first.is_none() || tb.first.is_none() {
        return Err(RibError::NoTransition(missing.join("; ")));
    }
    Ok(ShiftReport {
        u_to_us: comparison(ta.first, tb.first, reference.map(|r| r.u_to_us)),
        us_to_s: comparison(ta.second, tb.second, reference.map(|r| r.us_to_s)),
    })
}

/// Which sweep follows the compression stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Shear,
    Twist,
    ShearTwist,
}

impl std::str::FromStr for SweepKind {
    type Err = RibError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shear" => Ok(SweepKind::Shear),
            "twist" => Ok(SweepKind::Twist),
            "shear-twist" => Ok(SweepKind::ShearTwist),
            _ => Err(RibError::Schema { path: "kind".into(), message: format!("unknown sweep kind {s:?}") }),
        }
    }
}

/// A finished (or aborted) run: the trace so far, its manifest, and the error if any.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    pub manifest: RunManifest,
    pub error: Option<RibError>,
}

fn stats(name: &str, rib: &Ribbon, before: (usize, usize, usize), wall: f64) -> PhaseStats {
    let d = &rib.sim.diagnostics;
    PhaseStats {
        name: name.to_string(),
        steps: d.steps - before.0,
        iterations: d.iterations - before.1,
        rejected: d.rejected - before.2,
        wall_seconds: wall,
    }
}

fn counters(rib: &Ribbon) -> (usize, usize, usize) {
    let d = &rib.sim.diagnostics;
    (d.steps, d.iterations, d.rejected)
}

/// Compression followed by one sweep. Compression failures are fatal; sweep
/// failures keep the trace recorded so far.
pub fn run_sweep(config: &BenchmarkConfig, kind: SweepKind) -> Result<RunOutcome> {
    let mut manifest = RunManifest::new(config);
    let start = Instant::now();
    let mut rib = run_compression(config)?;
    manifest.phases.push(stats("compression", &rib, (0, 0, 0), start.elapsed().as_secs_f64()));
    let before = counters(&rib);
    let t = Instant::now();
    let (trace, res) = match kind {
        SweepKind::Shear => run_shear_sweep(&mut rib),
        SweepKind::Twist => run_twist_sweep(&mut rib),
        SweepKind::ShearTwist => run_shear_twist_sweep(&mut rib),
    };
    let name = match kind {
        SweepKind::Shear => "shear",
        SweepKind::Twist => "twist",
        SweepKind::ShearTwist => "shear-twist",
    };
    manifest.phases.push(stats(name, &rib, before, t.elapsed().as_secs_f64()));
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    let error = res.err();
    manifest.error = error.as_ref().map(|e| e.to_string());
    Ok(RunOutcome { trace, manifest, error })
}

/// Width homotopy; the returned trace is stage 3 (reverse shear at the target width).
pub fn run_homotopy(config: &BenchmarkConfig, target_width_ratio: f64) -> Result<(crate::scenarios::HomotopyTraces, RunManifest)> {
    let mut manifest = RunManifest::new(config);
    let start = Instant::now();
    let traces = run_width_homotopy(config, target_width_ratio * config.length)?;
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    manifest.width_ratio = target_width_ratio;
    Ok((traces, manifest))
}

/// One row of the efficiency table (shear phase only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfRow {
    pub model: ModelId,
    pub width_ratio: f64,
    pub nodes: usize,
    pub simulated_seconds: f64,
    pub wall_seconds: f64,
    /// Wall-clock / simulated time.
    pub realtime_ratio: f64,
    pub steps: usize,
    pub iterations: usize,
    pub iterations_per_step: f64,
    pub seconds_per_iteration: f64,
    /// Median wall-clock time of one Newton iteration; robust to scheduler
    /// noise and free of the per-step convergence check.
    pub median_seconds_per_iteration: f64,
    pub parallel: bool,
}

/// Times the shear phase of each config.
pub fn bench_perf(configs: &[BenchmarkConfig]) -> Result<Vec<PerfRow>> {
    configs
        .iter()
        .map(|c| {
            let mut rib = run_compression(c)?;
            let before = counters(&rib);
            let first_iteration = rib.sim.diagnostics.iteration_seconds.len();
            let t = Instant::now();
            let (_, res) = run_shear_sweep(&mut rib);
            res?;
            let wall = t.elapsed().as_secs_f64();
            let s = stats("shear", &rib, before, wall);
            let mut per_iter = rib.sim.diagnostics.iteration_seconds[first_iteration..].to_vec();
            per_iter.sort_by(f64::total_cmp);
            let median = per_iter.get(per_iter.len() / 2).copied().unwrap_or(0.0);
            Ok(PerfRow {
                model: c.model.id,
                width_ratio: c.width_ratio(),
                nodes: c.nodes,
                simulated_seconds: c.shear_time,
                wall_seconds: wall,
                realtime_ratio: wall / c.shear_time,
                steps: s.steps,
                iterations: s.iterations,
                iterations_per_step: s.iterations as f64 / s.steps.max(1) as f64,
                seconds_per_iteration: wall / s.iterations.max(1) as f64,
                median_seconds_per_iteration: median,
                parallel: crate::par::PARALLEL,
            })
        })
        .collect()
}

/// Plain-text table with the columns of the efficiency report.
pub fn format_perf(rows: &[PerfRow]) -> String {
    let mut s = String::from("model       W/L      N   xSim   wall_s  steps  iters  iters/step    s/iter  median s/iter\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>6.4} {:>4} {:>6.2} {:>8.2} {:>6} {:>6} {:>11.2} {:>9.2e} {:>14.2e}",
            r.model.name(),
            r.width_ratio,
            r.nodes,
            r.realtime_ratio,
            r.wall_seconds,
            r.steps,
            r.iterations,
            r.iterations_per_step,
            r.seconds_per_iteration,
            r.median_seconds_per_iteration
        );
    }
    s
}

/// Default `EnergyModel` for an id, honouring a config-level regulariser.
pub fn model_with(config: &BenchmarkConfig, id: ModelId) -> EnergyModel {
    EnergyModel { id, ..config.model }
}
