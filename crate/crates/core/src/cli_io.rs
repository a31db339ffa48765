//! Run configuration (TOML) and the CSV / JSON artifacts.
//!
//! Defaults for omitted keys:
//!
//! | key | default |
//! |---|---|
//! | `problem.nonlinearity` | `"abs_ut_p"` |
//! | `problem.epsilon` | `0.1` |
//! | `coefficients.sign` | the family's own form; `"damping"` for `power_speed` and `custom` |
//! | `data.shape` | `"smooth_bump"` |
//! | `data.R` | `1.0` |
//! | `data.amplitude_u0`, `data.amplitude_u1` | `0.0`, `1.0` |
//! | `grid.dx`, `grid.cfl`, `grid.pad_cells` | `1/64`, `0.5`, `8` |
//! | `stop.t_max` | `20.0` |
//! | `stop.blowup_threshold`, `stop.wall_budget` | unset |
//! | `sweep.engine`, `sweep.t_cap` | `"pde"`, `1e300` |
//! | `output.directory`, `output.stride` | `"."`, `50` |

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{
    CoefficientProfile, CustomCoefficients, Family, SignConvention, Table, TailClass,
};
use crate::experiments::{Censoring, Engine, EngineSettings, SweepPoint, SweepResult};
use crate::pde_solver::{
    DataShape, Grid, GridConfig, InitialData, Nonlinearity, Outcome, ProblemSpec, RunResult, StopConfig,
    TraceRecord,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{message}")]
    Validation { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub engine: Engine,
    pub t_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub stride: u64,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub grid: GridConfig,
    pub stop: StopConfig,
    pub sweep: Option<SweepConfig>,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn engine_settings(&self, engine: Engine) -> EngineSettings {
        match engine {
            Engine::Pde => EngineSettings::Pde {
                grid: self.grid,
                stop: self.stop,
            },
            Engine::Ode => EngineSettings::Ode {
                t_cap: self.sweep.as_ref().map_or(DEFAULT_T_CAP, |s| s.t_cap),
            },
        }
    }
}

const DEFAULT_T_CAP: f64 = 1e300;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    coefficients: toml::Table,
    #[serde(default)]
    data: RawData,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    stop: RawStop,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: i64,
    p: f64,
    #[serde(default = "default_nonlinearity")]
    nonlinearity: Nonlinearity,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
}

fn default_nonlinearity() -> Nonlinearity {
    Nonlinearity::AbsUtP
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    #[serde(default = "default_shape")]
    shape: String,
    #[serde(rename = "R", default = "default_r")]
    r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude_u0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude_u1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u1: Option<Vec<f64>>,
}

fn default_shape() -> String {
    "smooth_bump".into()
}

fn default_r() -> f64 {
    1.0
}

impl Default for RawData {
    fn default() -> Self {
        Self {
            shape: default_shape(),
            r: default_r(),
            amplitude_u0: None,
            amplitude_u1: None,
            radii: None,
            u0: None,
            u1: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default = "default_dx")]
    dx: f64,
    #[serde(default = "default_cfl")]
    cfl: f64,
    #[serde(default = "default_pad")]
    pad_cells: i64,
}

fn default_dx() -> f64 {
    1.0 / 64.0
}

fn default_cfl() -> f64 {
    0.5
}

fn default_pad() -> i64 {
    8
}

impl Default for RawGrid {
    fn default() -> Self {
        Self {
            dx: default_dx(),
            cfl: default_cfl(),
            pad_cells: default_pad(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStop {
    #[serde(default = "default_t_max")]
    t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blowup_threshold: Option<f64>,
    /// Seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_budget: Option<f64>,
}

fn default_t_max() -> f64 {
    20.0
}

impl Default for RawStop {
    fn default() -> Self {
        Self {
            t_max: default_t_max(),
            blowup_threshold: None,
            wall_budget: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    epsilons: Vec<f64>,
    #[serde(default = "default_engine")]
    engine: Engine,
    #[serde(default = "default_t_cap")]
    t_cap: f64,
}

fn default_engine() -> Engine {
    Engine::Pde
}

fn default_t_cap() -> f64 {
    DEFAULT_T_CAP
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_directory")]
    directory: PathBuf,
    #[serde(default = "default_stride")]
    stride: i64,
}

fn default_directory() -> PathBuf {
    PathBuf::from(".")
}

fn default_stride() -> i64 {
    50
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            stride: default_stride(),
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses and validates a configuration; relative table paths resolve
/// against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    validate(raw, base_dir)
}

fn validate(raw: RawConfig, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let pr = &raw.problem;
    if pr.n < 1 || pr.n > 3 {
        return Err(ConfigError::invalid("problem.n", format!("problem.n must be 1, 2 or 3, got {}", pr.n)));
    }
    if !(pr.p > 1.0 && pr.p.is_finite()) {
        return Err(ConfigError::invalid("problem.p", "problem.p must exceed 1"));
    }
    if !(pr.epsilon >= 0.0 && pr.epsilon.is_finite()) {
        return Err(ConfigError::invalid("problem.epsilon", "problem.epsilon must be non-negative"));
    }
    let profile = parse_coefficients(raw.coefficients, base_dir)?;
    let data = parse_data(raw.data)?;

    let g = &raw.grid;
    if !(g.dx > 0.0 && g.dx.is_finite()) {
        return Err(ConfigError::invalid("grid.dx", "grid.dx must be positive"));
    }
    if !(g.cfl > 0.0 && g.cfl <= 1.0) {
        return Err(ConfigError::invalid("grid.cfl", "grid.cfl must lie in (0, 1]"));
    }
    if g.pad_cells < 0 {
        return Err(ConfigError::invalid("grid.pad_cells", "grid.pad_cells must be non-negative"));
    }
    let s = &raw.stop;
    if !(s.t_max > 0.0 && s.t_max.is_finite()) {
        return Err(ConfigError::invalid("stop.t_max", "stop.t_max must be positive"));
    }
    if let Some(b) = s.blowup_threshold {
        if !(b > 0.0) {
            return Err(ConfigError::invalid("stop.blowup_threshold", "stop.blowup_threshold must be positive"));
        }
    }
    if let Some(w) = s.wall_budget {
        if !(w > 0.0 && w.is_finite()) {
            return Err(ConfigError::invalid("stop.wall_budget", "stop.wall_budget must be positive seconds"));
        }
    }
    if raw.output.stride < 1 {
        return Err(ConfigError::invalid("output.stride", "output.stride must be at least 1"));
    }
    let sweep = match raw.sweep {
        None => None,
        Some(sw) => {
            if sw.epsilons.len() < 4 {
                return Err(ConfigError::invalid("sweep.epsilons", "sweep.epsilons needs at least 4 values"));
            }
            if sw.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(ConfigError::invalid("sweep.epsilons", "sweep.epsilons must be positive"));
            }
            if !(sw.t_cap > 0.0) {
                return Err(ConfigError::invalid("sweep.t_cap", "sweep.t_cap must be positive"));
            }
            Some(SweepConfig {
                epsilons: sw.epsilons,
                engine: sw.engine,
                t_cap: sw.t_cap,
            })
        }
    };

    let problem = ProblemSpec {
        n: pr.n as u32,
        p: pr.p,
        nonlinearity: pr.nonlinearity,
        epsilon: pr.epsilon,
        data,
        profile,
    };
    problem
        .validate()
        .map_err(|e| ConfigError::invalid("problem", e.to_string()))?;
    Ok(RunConfig {
        problem,
        grid: GridConfig {
            dx: g.dx,
            cfl: g.cfl,
            pad_cells: g.pad_cells as usize,
        },
        stop: StopConfig {
            t_max: s.t_max,
            blowup_threshold: s.blowup_threshold,
            wall_budget: s.wall_budget.map(Duration::from_secs_f64),
            stride: raw.output.stride as u64,
        },
        sweep,
        output: OutputConfig {
            directory: raw.output.directory,
            stride: raw.output.stride as u64,
        },
    })
}

fn family_keys(family: &str) -> Option<(&'static [&'static str], &'static [&'static str])> {
    // (required, optional) besides `family` and `sign`
    Some(match family {
        "flrw_expanding" | "flrw_contracting" => (&["alpha", "mu"], &[]),
        "de_sitter" | "anti_de_sitter" => (&["H", "n"], &[]),
        "power_speed" => (&["alpha"], &[]),
        "custom" => (&[], &["speed", "damping", "speed_csv", "damping_csv", "speed_tail", "damping_tail"]),
        _ => return None,
    })
}

fn natural_sign(family: &str) -> SignConvention {
    match family {
        "anti_de_sitter" | "flrw_contracting" => SignConvention::Antidamping,
        _ => SignConvention::Damping,
    }
}

fn parse_coefficients(mut tbl: toml::Table, base_dir: &Path) -> Result<CoefficientProfile, ConfigError> {
    // Accept the alternative spelling of the exponent.
    if let Some(v) = tbl.remove("alpha_exp") {
        tbl.entry("alpha").or_insert(v);
    }
    let family = match tbl.get("family") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(ConfigError::invalid("coefficients.family", "coefficients.family must be a string")),
        None => return Err(ConfigError::invalid("coefficients.family", "coefficients.family is required")),
    };
    let (required, optional) = family_keys(&family).ok_or_else(|| {
        ConfigError::invalid(
            "coefficients.family",
            format!(
                "coefficients.family {family:?} is not one of flrw_expanding, de_sitter, anti_de_sitter, flrw_contracting, power_speed, custom"
            ),
        )
    })?;
    for key in tbl.keys() {
        if key != "family" && key != "sign" && !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
            return Err(ConfigError::invalid(
                &format!("coefficients.{key}"),
                format!("coefficients.{key} is not a recognized key for family {family}"),
            ));
        }
    }
    for key in required {
        if !tbl.contains_key(*key) {
            return Err(ConfigError::invalid(
                &format!("coefficients.{key}"),
                format!("coefficients.{key} is required for family {family}"),
            ));
        }
    }
    let sign = match tbl.remove("sign") {
        None => natural_sign(&family),
        Some(v) => v
            .try_into()
            .map_err(|e| ConfigError::invalid("coefficients.sign", format!("coefficients.sign: {e}")))?,
    };
    let fam = if family == "custom" {
        let speed = custom_table(&mut tbl, "speed", base_dir)?;
        let damping = custom_table(&mut tbl, "damping", base_dir)?;
        Family::Custom(CustomCoefficients { speed, damping })
    } else {
        toml::Value::Table(tbl)
            .try_into::<Family>()
            .map_err(|e| ConfigError::invalid("coefficients", format!("coefficients: {}", e.message().trim())))?
    };
    CoefficientProfile::new(fam, sign).map_err(|e| ConfigError::invalid("coefficients", format!("coefficients: {e}")))
}

fn custom_table(tbl: &mut toml::Table, name: &str, base_dir: &Path) -> Result<Table, ConfigError> {
    let key = format!("coefficients.{name}");
    let inline = tbl.remove(name);
    let csv = tbl.remove(&format!("{name}_csv"));
    let tail = tbl.remove(&format!("{name}_tail"));
    match (inline, csv) {
        (Some(v), None) => {
            if tail.is_some() {
                return Err(ConfigError::invalid(
                    &key,
                    format!("{key}_tail only applies with {key}_csv; put tail inside {key}"),
                ));
            }
            v.try_into::<Table>()
                .map_err(|e| ConfigError::invalid(&key, format!("{key}: {}", e.message().trim())))
        }
        (None, Some(toml::Value::String(path))) => {
            let tail: TailClass = match tail {
                Some(t) => t
                    .try_into()
                    .map_err(|e| ConfigError::invalid(&key, format!("{key}_tail: {e}")))?,
                None => {
                    return Err(ConfigError::invalid(
                        &format!("{key}_tail"),
                        format!("{key}_tail is required with {key}_csv"),
                    ))
                }
            };
            let path = base_dir.join(path);
            Table::from_csv_path(&path, tail).map_err(|e| ConfigError::invalid(&key, format!("{key}_csv: {e}")))
        }
        (None, Some(_)) => Err(ConfigError::invalid(&key, format!("{key}_csv must be a path string"))),
        (Some(_), Some(_)) => Err(ConfigError::invalid(&key, format!("give either {key} or {key}_csv, not both"))),
        (None, None) => Err(ConfigError::invalid(&key, format!("{key} is required for family custom"))),
    }
}

fn parse_data(raw: RawData) -> Result<InitialData, ConfigError> {
    let shape = match raw.shape.as_str() {
        "smooth_bump" => {
            if raw.radii.is_some() || raw.u0.is_some() || raw.u1.is_some() {
                return Err(ConfigError::invalid(
                    "data",
                    "data.radii, data.u0 and data.u1 only apply to shape = \"tabulated\"",
                ));
            }
            DataShape::SmoothBump {
                amplitude_u0: raw.amplitude_u0.unwrap_or(0.0),
                amplitude_u1: raw.amplitude_u1.unwrap_or(1.0),
            }
        }
        "tabulated" => {
            if raw.amplitude_u0.is_some() || raw.amplitude_u1.is_some() {
                return Err(ConfigError::invalid(
                    "data",
                    "data.amplitude_u0 and data.amplitude_u1 only apply to shape = \"smooth_bump\"",
                ));
            }
            match (raw.radii, raw.u0, raw.u1) {
                (Some(radii), Some(u0), Some(u1)) => DataShape::Tabulated { radii, u0, u1 },
                _ => {
                    return Err(ConfigError::invalid(
                        "data",
                        "tabulated data needs data.radii, data.u0 and data.u1",
                    ))
                }
            }
        }
        other => {
            return Err(ConfigError::invalid(
                "data.shape",
                format!("data.shape {other:?} is not smooth_bump or tabulated"),
            ))
        }
    };
    if !(raw.r > 0.0 && raw.r.is_finite()) {
        return Err(ConfigError::invalid("data.R", "data.R must be positive"));
    }
    Ok(InitialData { shape, r: raw.r })
}

/// Serializes a configuration in the layout [`parse_config`] reads.
pub fn config_to_toml(cfg: &RunConfig) -> String {
    let pr = &cfg.problem;
    let coefficients = match toml::Table::try_from(&pr.profile) {
        Ok(t) => t,
        Err(e) => unreachable!("profiles always serialize: {e}"),
    };
    let data = match &pr.data.shape {
        DataShape::SmoothBump {
            amplitude_u0,
            amplitude_u1,
        } => RawData {
            shape: "smooth_bump".into(),
            r: pr.data.r,
            amplitude_u0: Some(*amplitude_u0),
            amplitude_u1: Some(*amplitude_u1),
            radii: None,
            u0: None,
            u1: None,
        },
        DataShape::Tabulated { radii, u0, u1 } => RawData {
            shape: "tabulated".into(),
            r: pr.data.r,
            amplitude_u0: None,
            amplitude_u1: None,
            radii: Some(radii.clone()),
            u0: Some(u0.clone()),
            u1: Some(u1.clone()),
        },
    };
    let raw = RawConfig {
        problem: RawProblem {
            n: pr.n as i64,
            p: pr.p,
            nonlinearity: pr.nonlinearity,
            epsilon: pr.epsilon,
        },
        coefficients,
        data,
        grid: RawGrid {
            dx: cfg.grid.dx,
            cfl: cfg.grid.cfl,
            pad_cells: cfg.grid.pad_cells as i64,
        },
        stop: RawStop {
            t_max: cfg.stop.t_max,
            blowup_threshold: cfg.stop.blowup_threshold,
            wall_budget: cfg.stop.wall_budget.map(|d| d.as_secs_f64()),
        },
        sweep: cfg.sweep.as_ref().map(|s| RawSweep {
            epsilons: s.epsilons.clone(),
            engine: s.engine,
            t_cap: s.t_cap,
        }),
        output: RawOutput {
            directory: cfg.output.directory.clone(),
            stride: cfg.output.stride as i64,
        },
    };
    match toml::to_string(&raw) {
        Ok(s) => s,
        Err(e) => unreachable!("configs always serialize: {e}"),
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRecord]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "E0", "E1", "W", "support_radius", "max_abs_v", "dt"])?;
    for r in trace {
        w.write_record([r.t, r.e0, r.e1, r.w, r.support_radius, r.max_abs_v, r.dt].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>, OutputError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v = parse_row(&rec, 7, i + 2)?;
        out.push(TraceRecord {
            t: v[0],
            e0: v[1],
            e1: v[2],
            w: v[3],
            support_radius: v[4],
            max_abs_v: v[5],
            dt: v[6],
            forcing_integral: 0.0,
        });
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, width: usize, line: usize) -> Result<Vec<f64>, OutputError> {
    if rec.len() != width {
        return Err(OutputError::Format {
            line,
            message: format!("expected {width} columns, got {}", rec.len()),
        });
    }
    rec.iter()
        .map(|f| {
            f.trim().parse::<f64>().map_err(|_| OutputError::Format {
                line,
                message: format!("{f:?} is not a number"),
            })
        })
        .collect()
}

pub fn write_oracle_csv<W: Write>(out: W, trace: &[(f64, f64)]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "W"])?;
    for &(t, wv) in trace {
        w.write_record([fmt_f64(t), fmt_f64(wv)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: W, sweep: &SweepResult) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "T", "engine", "quality", "censored"])?;
    for p in &sweep.points {
        w.write_record([
            fmt_f64(p.epsilon),
            fmt_f64(p.t),
            sweep.engine.as_str().to_string(),
            fmt_f64(p.quality),
            p.censored.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated companion of the sweep CSV, for gnuplot.
pub fn write_sweep_dat<W: Write>(mut out: W, sweep: &SweepResult) -> Result<(), OutputError> {
    writeln!(out, "# engine {}", sweep.engine.as_str())?;
    writeln!(out, "# epsilon T quality censored")?;
    for p in &sweep.points {
        writeln!(
            out,
            "{} {} {} {}",
            fmt_f64(p.epsilon),
            fmt_f64(p.t),
            fmt_f64(p.quality),
            u8::from(p.is_censored())
        )?;
    }
    Ok(())
}

pub fn write_trace_dat<W: Write>(mut out: W, trace: &[TraceRecord]) -> Result<(), OutputError> {
    writeln!(out, "# t E0 E1 W support_radius max_abs_v dt")?;
    for r in trace {
        let row = [r.t, r.e0, r.e1, r.w, r.support_radius, r.max_abs_v, r.dt].map(fmt_f64);
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Reads a sweep CSV; `spec_echo` is supplied by the caller since the CSV
/// carries only the points.
pub fn read_sweep_csv<R: Read>(input: R, spec_echo: ProblemSpec) -> Result<SweepResult, OutputError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let expected = ["epsilon", "T", "engine", "quality", "censored"];
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(OutputError::Format {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut engine = None;
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 5 {
            return Err(OutputError::Format {
                line,
                message: format!("expected 5 columns, got {}", rec.len()),
            });
        }
        let num = |k: usize| {
            rec[k].trim().parse::<f64>().map_err(|_| OutputError::Format {
                line,
                message: format!("{:?} is not a number", &rec[k]),
            })
        };
        let e: Engine = rec[2]
            .trim()
            .parse()
            .map_err(|message| OutputError::Format { line, message })?;
        if *engine.get_or_insert(e) != e {
            return Err(OutputError::Format {
                line,
                message: "mixed engines in one sweep".into(),
            });
        }
        let censored = Censoring::parse(rec[4].trim()).ok_or_else(|| OutputError::Format {
            line,
            message: format!("unknown censoring {:?}", &rec[4]),
        })?;
        points.push(SweepPoint {
            epsilon: num(0)?,
            t: num(1)?,
            quality: num(3)?,
            width: 0.0,
            censored,
            error: None,
        });
    }
    if points.windows(2).any(|w| !(w[0].epsilon > w[1].epsilon)) {
        points.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    }
    Ok(SweepResult {
        engine: engine.unwrap_or(Engine::Pde),
        points,
        spec_echo,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub outcome: Outcome,
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    pub fit_quality: Option<f64>,
    pub grid: Grid,
    pub steps: u64,
    pub spec_echo: ProblemSpec,
}

impl RunSummary {
    pub fn new(result: &RunResult, spec: &ProblemSpec) -> Self {
        let (t_est, fit_quality) = match result.outcome {
            Outcome::BlowUp { t_est, fit_quality, .. } => (Some(t_est), Some(fit_quality)),
            _ => (None, None),
        };
        Self {
            outcome: result.outcome,
            t_est,
            fit_quality,
            grid: result.grid,
            steps: result.steps,
            spec_echo: spec.clone(),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<(), OutputError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
