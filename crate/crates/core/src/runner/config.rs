//! Experiment configuration: the TOML schema, defaulting, dotted-key
//! overrides and validation.
//!
//! ```toml
//! schema_version = 1
//!
//! [case]
//! kind = "near_equilibrium"   # or temperature_perturbation, oscillatory_perturbation, two_stream
//! delta = 0.1                 # per-case default when omitted
//! alpha = 0.0
//! k_x = 0.3141592653589793
//! domain = [-10.0, 10.0]
//!
//! [scheme]
//! lambda = 0.1                # required
//! dt = 0.002                  # required
//! t_final = 2.0               # required
//! order = 2
//! n_h = 32
//! n_x = 129                   # must be odd
//! t0 = 1.0
//! solver = "auto"             # auto | banded | spectral
//!
//! [sweep]
//! lambdas = [0.32, 0.18, 0.1]
//! alphas = [0.0]
//! dts = [0.04, 0.02, 0.01]
//! dt_max = 0.01
//! dt_per_lambda = 50.0
//! reference_dt = 0.00125
//!
//! [output]
//! dir = "out"
//! snapshot_times = [1.0, 2.0]
//! v_grid = { min = -6.0, max = 6.0, points = 121 }
//! reference_run = false
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cases::{CaseKind, CaseSpec};
use crate::error::{Error, Result};
use crate::grid::Mesh1D;
use crate::hermite::HermiteBasis;
use crate::scheme::{Order, SchemeConfig, SolverChoice};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_T0: f64 = 1.0;
pub const DEFAULT_ORDER: u8 = 2;
pub const DEFAULT_N_H: usize = 32;
pub const DEFAULT_N_X: usize = 129;
pub const DEFAULT_DT_PER_LAMBDA: f64 = 50.0;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// On-disk form of a configuration. Every field is optional so that the
/// same type carries both user input and the fully resolved echo written to
/// the metadata file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub kind: CaseKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_h: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverChoice>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dts: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_per_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_grid: Option<VGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_run: Option<bool>,
}

/// Uniform velocity grid for phase-space snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for VGrid {
    fn default() -> Self {
        Self {
            min: -6.0,
            max: 6.0,
            points: 121,
        }
    }
}

impl VGrid {
    pub fn nodes(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|m| self.min + m as f64 * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub lambda: f64,
    pub dt: f64,
    pub t_final: f64,
    pub order: Order,
    pub n_h: usize,
    pub n_x: usize,
    pub t0: f64,
    pub solver: SolverChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxes {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Empty when no time-step study is configured.
    pub dts: Vec<f64>,
    pub dt_max: Option<f64>,
    pub dt_per_lambda: f64,
    pub reference_dt: Option<f64>,
}

impl SweepAxes {
    /// Convergence-sweep step for a given `lambda`: `lambda / dt_per_lambda`,
    /// capped by `dt_max`.
    pub fn dt_for(&self, lambda: f64) -> f64 {
        let dt = lambda / self.dt_per_lambda;
        match self.dt_max {
            Some(cap) => dt.min(cap),
            None => dt,
        }
    }

    /// Reference step of the time-step study; defaults to an eighth of the
    /// smallest swept step.
    pub fn reference_dt(&self) -> Option<f64> {
        self.reference_dt.or_else(|| {
            self.dts
                .iter()
                .copied()
                .reduce(f64::min)
                .map(|dt| dt / 8.0)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub v_grid: VGrid,
    /// Also write the final Hermite coefficients so the run can serve as a
    /// reference solution.
    pub reference_run: bool,
}

/// Validated experiment with every default applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub case: CaseSpec,
    pub scheme: SchemeParams,
    pub sweep: SweepAxes,
    pub output: OutputSpec,
}

fn key_err(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.into(),
        message: message.into(),
    }
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| key_err(key, "is required"))
}

fn check_positive(value: f64, key: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(key_err(key, format!("must be positive and finite, got {value}")))
    }
}

fn check_list(values: &Option<Vec<f64>>, key: &str, check: impl Fn(f64, &str) -> Result<()>) -> Result<()> {
    if let Some(values) = values {
        if values.is_empty() {
            return Err(key_err(key, "must be nonempty when given"));
        }
        for (i, &v) in values.iter().enumerate() {
            check(v, &format!("{key}[{i}]"))?;
        }
    }
    Ok(())
}

/// Parses a config document. Unknown keys are rejected with their path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_with_overrides(text, &[])
}

/// Parses a config document and applies `key=value` overrides (dotted key
/// paths, TOML-syntax values, bare words taken as strings) before validation.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
    for spec in overrides {
        apply_override(&mut table, spec)?;
    }
    let file: ConfigFile = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        if path == "." {
            Error::ConfigParse(message)
        } else {
            key_err(&path, message)
        }
    })?;
    resolve(file)
}

/// Sets one dotted key in a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if key.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let value = match format!("value = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("value").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(key_err(key, format!("`{part}` is not a table")));
            }
        };
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn resolve(file: ConfigFile) -> Result<ExperimentConfig> {
    let version = file.schema_version.unwrap_or(SCHEMA_VERSION);
    if version != SCHEMA_VERSION {
        return Err(key_err(
            "schema_version",
            format!("unsupported version {version}; this build reads version {SCHEMA_VERSION}"),
        ));
    }
    let case_sec = required(file.case, "case")?;
    let scheme_sec = required(file.scheme, "scheme")?;
    let sweep_sec = file.sweep.unwrap_or_default();
    let out_sec = file.output.unwrap_or_default();

    let lambda = required(scheme_sec.lambda, "scheme.lambda")?;
    let dt = required(scheme_sec.dt, "scheme.dt")?;
    let t_final = required(scheme_sec.t_final, "scheme.t_final")?;
    check_positive(lambda, "scheme.lambda")?;
    check_positive(dt, "scheme.dt")?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(key_err("scheme.t_final", format!("must be non-negative, got {t_final}")));
    }
    let order = Order::from_int(scheme_sec.order.unwrap_or(DEFAULT_ORDER) as i64)
        .map_err(|e| key_err("scheme.order", e.to_string()))?;
    let n_h = scheme_sec.n_h.unwrap_or(DEFAULT_N_H);
    if n_h < 2 {
        return Err(key_err(
            "scheme.n_h",
            format!("must be at least 2 (the first-moment equation couples to mode 2), got {n_h}"),
        ));
    }
    let n_x = scheme_sec.n_x.unwrap_or(DEFAULT_N_X);
    if n_x < 3 {
        return Err(key_err("scheme.n_x", format!("must be at least 3, got {n_x}")));
    }
    if n_x % 2 == 0 {
        return Err(key_err(
            "scheme.n_x",
            format!(
                "n_x = {n_x} is even: the centered difference then has the checkerboard kernel \
                 (-1)^j besides constants, which makes the periodic Poisson operator singular; \
                 use an odd n_x such as {}",
                n_x + 1
            ),
        ));
    }
    let t0 = scheme_sec.t0.unwrap_or(DEFAULT_T0);
    check_positive(t0, "scheme.t0")?;
    let solver = scheme_sec.solver.unwrap_or_default();

    let mut case = CaseSpec::standard(case_sec.kind, lambda);
    case.t0 = t0;
    if let Some(delta) = case_sec.delta {
        case.delta = delta;
    }
    if let Some(alpha) = case_sec.alpha {
        case.alpha = alpha;
    }
    if let Some(k_x) = case_sec.k_x {
        case.k_x = k_x;
    }
    if let Some([a, b]) = case_sec.domain {
        case.domain = (a, b);
    }
    case.validate()?;

    check_list(&sweep_sec.lambdas, "sweep.lambdas", |v, k| check_positive(v, k))?;
    check_list(&sweep_sec.alphas, "sweep.alphas", |v, k| {
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(key_err(k, format!("must lie in [0, 1], got {v}")))
        }
    })?;
    check_list(&sweep_sec.dts, "sweep.dts", |v, k| check_positive(v, k))?;
    if let Some(v) = sweep_sec.dt_max {
        check_positive(v, "sweep.dt_max")?;
    }
    if let Some(v) = sweep_sec.reference_dt {
        check_positive(v, "sweep.reference_dt")?;
    }
    let dt_per_lambda = sweep_sec.dt_per_lambda.unwrap_or(DEFAULT_DT_PER_LAMBDA);
    check_positive(dt_per_lambda, "sweep.dt_per_lambda")?;

    let v_grid = out_sec.v_grid.unwrap_or_default();
    if !(v_grid.min < v_grid.max && v_grid.min.is_finite() && v_grid.max.is_finite()) {
        return Err(key_err(
            "output.v_grid",
            format!("needs min < max, got [{}, {}]", v_grid.min, v_grid.max),
        ));
    }
    if v_grid.points < 2 {
        return Err(key_err("output.v_grid.points", "must be at least 2"));
    }
    let snapshot_times = out_sec.snapshot_times.unwrap_or_default();
    for (i, &s) in snapshot_times.iter().enumerate() {
        if !(s >= 0.0 && s <= t_final) {
            return Err(key_err(
                &format!("output.snapshot_times[{i}]"),
                format!("must lie in [0, t_final = {t_final}], got {s}"),
            ));
        }
    }
    let dir = out_sec.dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    if dir.as_os_str().is_empty() {
        return Err(key_err("output.dir", "must not be empty"));
    }

    Ok(ExperimentConfig {
        sweep: SweepAxes {
            lambdas: sweep_sec.lambdas.unwrap_or_else(|| vec![lambda]),
            alphas: sweep_sec.alphas.unwrap_or_else(|| vec![case.alpha]),
            dts: sweep_sec.dts.unwrap_or_default(),
            dt_max: sweep_sec.dt_max,
            dt_per_lambda,
            reference_dt: sweep_sec.reference_dt,
        },
        case,
        scheme: SchemeParams {
            lambda,
            dt,
            t_final,
            order,
            n_h,
            n_x,
            t0,
            solver,
        },
        output: OutputSpec {
            dir,
            snapshot_times,
            v_grid,
            reference_run: out_sec.reference_run.unwrap_or(false),
        },
    })
}

impl ExperimentConfig {
    pub fn basis(&self) -> Result<HermiteBasis> {
        HermiteBasis::new(self.scheme.t0, self.scheme.n_h)
    }

    pub fn mesh(&self) -> Result<Mesh1D> {
        let (a, b) = self.case.domain;
        Mesh1D::uniform(a, b, self.scheme.n_x)
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        let s = &self.scheme;
        Ok(SchemeConfig::new(
            Arc::new(self.mesh()?),
            self.basis()?,
            s.lambda,
            s.dt,
            s.t_final,
            s.order,
        )?
        .with_solver(s.solver))
    }

    /// Copy pinned to one sweep point. The sweep axes collapse to that point.
    pub fn at_point(&self, lambda: f64, alpha: f64, dt: f64) -> Self {
        let mut cfg = self.clone();
        cfg.scheme.lambda = lambda;
        cfg.case.lambda = lambda;
        cfg.case.alpha = alpha;
        cfg.scheme.dt = dt;
        cfg.sweep.lambdas = vec![lambda];
        cfg.sweep.alphas = vec![alpha];
        cfg
    }

    /// Fully populated on-disk form.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            schema_version: Some(SCHEMA_VERSION),
            case: Some(CaseSection {
                kind: self.case.kind,
                delta: Some(self.case.delta),
                alpha: Some(self.case.alpha),
                k_x: Some(self.case.k_x),
                domain: Some([self.case.domain.0, self.case.domain.1]),
            }),
            scheme: Some(SchemeSection {
                lambda: Some(self.scheme.lambda),
                dt: Some(self.scheme.dt),
                t_final: Some(self.scheme.t_final),
                order: Some(self.scheme.order.as_int()),
                n_h: Some(self.scheme.n_h),
                n_x: Some(self.scheme.n_x),
                t0: Some(self.scheme.t0),
                solver: Some(self.scheme.solver),
            }),
            sweep: Some(SweepSection {
                lambdas: Some(self.sweep.lambdas.clone()),
                alphas: Some(self.sweep.alphas.clone()),
                dts: (!self.sweep.dts.is_empty()).then(|| self.sweep.dts.clone()),
                dt_max: self.sweep.dt_max,
                dt_per_lambda: Some(self.sweep.dt_per_lambda),
                reference_dt: self.sweep.reference_dt,
            }),
            output: Some(OutputSection {
                dir: Some(self.output.dir.clone()),
                snapshot_times: Some(self.output.snapshot_times.clone()),
                v_grid: Some(self.output.v_grid),
                reference_run: Some(self.output.reference_run),
            }),
        }
    }

    /// Resolved configuration as TOML text; parses back to `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}
