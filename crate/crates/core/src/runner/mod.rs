//! Experiment driver behind the command-line tool: single runs with
//! persisted diagnostics and snapshots, lambda sweeps for the convergence and
//! asymptotic-preserving studies, and a time-step self-convergence study.

pub mod config;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::cases::{self, case_quadrature_order};
use crate::diagnostics::{
    energy_anomaly, energy_growth_rate, fit_slope, DiagnosticsRecord, DiagnosticsRecorder, SlopeFit,
    ENERGY_ANOMALY_RATE,
};
use crate::error::{Error, Result};
use crate::field::SOLVABILITY_TOL;
use crate::hermite::HermiteState;
use crate::scheme::{self, RunOutcome, RunSummary, SolverChoice, StepView, DIVERGENCE_THRESHOLD, GAMMA};

pub use config::{parse_config, parse_with_overrides, ConfigFile, ExperimentConfig, VGrid};
pub use output::INCOMPLETE_MARKER;
pub use presets::{find_preset, load_preset, Preset, PRESETS};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const METADATA_FILE: &str = "metadata.toml";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const FINAL_STATE_FILE: &str = "final_state.txt";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const SLOPES_FILE: &str = "slopes.csv";
pub const TIME_STUDY_FILE: &str = "time_convergence.csv";
pub const AP_FILE: &str = "ap_sweep.csv";

/// Phase-space density `f(x_j, v_m)` at one time level (rows are cells).
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub requested: f64,
    pub step: usize,
    pub t: f64,
    pub values: DMatrix<f64>,
}

/// Quantities computed from the configuration that a run depends on.
#[derive(Debug, Clone, Serialize)]
pub struct DerivedParams {
    pub n_steps: usize,
    pub modes: usize,
    pub initial_quadrature_order: usize,
    pub backend: String,
    pub cell_width: f64,
    pub domain_length: f64,
    pub dt_over_lambda: f64,
    pub sdirk_gamma: f64,
    pub divergence_threshold: f64,
    pub solvability_tolerance: f64,
    pub energy_anomaly_rate: f64,
}

/// How a run ended, in the form written to the metadata file.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub outcome: String,
    pub steps: usize,
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_norm: Option<f64>,
    pub energy_growth_rate: f64,
    pub energy_anomaly: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_reformulated_residual: Option<f64>,
}

impl RunResult {
    pub fn diverged(&self) -> bool {
        self.diverged_at_step.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<DiagnosticsRecord>,
    pub summary: RunSummary,
    pub snapshots: Vec<Snapshot>,
    pub derived: DerivedParams,
    pub result: RunResult,
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    code_version: &'static str,
    config: ConfigFile,
    derived: &'a DerivedParams,
    result: &'a RunResult,
}

fn outcome_name(outcome: &RunOutcome) -> &'static str {
    match outcome {
        RunOutcome::Completed => "completed",
        RunOutcome::Diverged { .. } => "diverged",
    }
}

fn derive_params(cfg: &ExperimentConfig) -> Result<DerivedParams> {
    let scheme = cfg.scheme_config()?;
    let backend = match scheme.solver {
        SolverChoice::Spectral => "spectral",
        SolverChoice::Banded => "banded",
        SolverChoice::Auto if scheme.mesh.is_uniform() => "spectral",
        SolverChoice::Auto => "banded",
    };
    Ok(DerivedParams {
        n_steps: scheme.n_steps(),
        modes: scheme.basis.modes(),
        initial_quadrature_order: case_quadrature_order(scheme.basis),
        backend: backend.into(),
        cell_width: scheme.mesh.h(),
        domain_length: scheme.mesh.length(),
        dt_over_lambda: scheme.dt / scheme.lambda,
        sdirk_gamma: GAMMA,
        divergence_threshold: DIVERGENCE_THRESHOLD,
        solvability_tolerance: SOLVABILITY_TOL,
        energy_anomaly_rate: ENERGY_ANOMALY_RATE,
    })
}

/// Runs one configuration in memory: initial data, integration, diagnostics
/// at every level and the requested snapshots. Divergence is reported in the
/// result, not as an error.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let scheme = cfg.scheme_config()?;
    let derived = derive_params(cfg)?;
    let initial = cases::generate(&cfg.case, scheme.basis, Arc::clone(&scheme.mesh))?;
    let v_nodes = cfg.output.v_grid.nodes();
    let n_steps = scheme.n_steps();
    let targets: Vec<(f64, usize)> = cfg
        .output
        .snapshot_times
        .iter()
        .map(|&s| (s, ((s / scheme.dt).round() as usize).min(n_steps)))
        .collect();
    let mut snapshots = Vec::new();
    let mut snap = |view: &StepView<'_>| -> Result<()> {
        let wanted: Vec<f64> = targets
            .iter()
            .filter(|(_, step)| *step == view.n)
            .map(|(s, _)| *s)
            .collect();
        if wanted.is_empty() {
            return Ok(());
        }
        let values = view.state.reconstruct(&v_nodes)?;
        for requested in wanted {
            snapshots.push(Snapshot {
                requested,
                step: view.n,
                t: view.t,
                values: values.clone(),
            });
        }
        Ok(())
    };
    let mut recorder = DiagnosticsRecorder::new();
    let summary = scheme::run(&scheme, initial, &mut [&mut recorder, &mut snap])?;
    let records = recorder.into_records();
    snapshots.sort_by(|a, b| a.requested.total_cmp(&b.requested));
    let (diverged_at_step, divergence_norm) = match summary.outcome {
        RunOutcome::Diverged { step, norm, .. } => (Some(step), Some(norm)),
        RunOutcome::Completed => (None, None),
    };
    let result = RunResult {
        outcome: outcome_name(&summary.outcome).into(),
        steps: summary.steps,
        t_end: summary.t,
        diverged_at_step,
        divergence_norm,
        energy_growth_rate: energy_growth_rate(&records),
        energy_anomaly: energy_anomaly(&records),
        max_reformulated_residual: records
            .iter()
            .filter_map(|r| r.reformulated_residual)
            .reduce(f64::max),
    };
    Ok(Simulation {
        records,
        summary,
        snapshots,
        derived,
        result,
    })
}

/// Where a single run put its files.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub result: RunResult,
    pub records: usize,
    pub snapshots: usize,
}

fn write_simulation(dir: &Path, cfg: &ExperimentConfig, sim: &Simulation) -> Result<()> {
    output::write_csv_with_header(
        &dir.join(DIAGNOSTICS_FILE),
        &DiagnosticsRecord::COLUMNS,
        &sim.records,
    )?;
    if !sim.snapshots.is_empty() {
        let snap_dir = dir.join(SNAPSHOT_DIR);
        output::create_dir(&snap_dir)?;
        output::write_axis(&snap_dir.join("x.txt"), sim.summary.state.mesh().centers())?;
        output::write_axis(&snap_dir.join("v.txt"), &cfg.output.v_grid.nodes())?;
        #[derive(Serialize)]
        struct IndexRow<'a> {
            requested_t: f64,
            step: usize,
            t: f64,
            file: &'a str,
        }
        let names: Vec<String> = sim.snapshots.iter().map(|s| format!("f_step{:07}.txt", s.step)).collect();
        let mut index = Vec::new();
        for (s, name) in sim.snapshots.iter().zip(&names) {
            output::write_matrix(&snap_dir.join(name), &s.values)?;
            index.push(IndexRow {
                requested_t: s.requested,
                step: s.step,
                t: s.t,
                file: name,
            });
        }
        output::write_csv(&snap_dir.join("index.csv"), &index)?;
    }
    if cfg.output.reference_run {
        output::write_matrix(&dir.join(FINAL_STATE_FILE), &coefficient_matrix(&sim.summary.state))?;
    }
    output::write_toml(
        &dir.join(METADATA_FILE),
        &RunMetadata {
            code_version: CODE_VERSION,
            config: cfg.to_file(),
            derived: &sim.derived,
            result: &sim.result,
        },
    )
}

/// Hermite coefficients with one row per mode and one column per cell.
pub fn coefficient_matrix(state: &HermiteState) -> DMatrix<f64> {
    DMatrix::from_row_slice(state.modes(), state.n_x(), state.coeffs())
}

/// Runs `cfg` and writes diagnostics, snapshots and metadata into
/// `cfg.output.dir`. An `INCOMPLETE` marker stays behind if writing fails.
pub fn run_single(cfg: &ExperimentConfig) -> Result<RunReport> {
    let dir = cfg.output.dir.clone();
    let guard = output::OutputGuard::begin(&dir)?;
    guard.wrap(|| {
        let sim = simulate(cfg)?;
        write_simulation(&dir, cfg, &sim)?;
        Ok(RunReport {
            dir: dir.clone(),
            result: sim.result.clone(),
            records: sim.records.len(),
            snapshots: sim.snapshots.len(),
        })
    })
}

fn point_dir(root: &Path, alpha: f64, lambda: f64, dt: Option<f64>) -> PathBuf {
    match dt {
        Some(dt) => root.join(format!("alpha{alpha}_lambda{lambda}_dt{dt}")),
        None => root.join(format!("alpha{alpha}_lambda{lambda}")),
    }
}

/// Runs one sweep point into its own subdirectory and hands back the records.
fn sweep_point(base: &ExperimentConfig, dir: PathBuf, lambda: f64, alpha: f64, dt: f64) -> Result<Simulation> {
    let mut cfg = base.at_point(lambda, alpha, dt);
    cfg.output.dir = dir.clone();
    let guard = output::OutputGuard::begin(&dir)?;
    guard.wrap(|| {
        let sim = simulate(&cfg)?;
        write_simulation(&dir, &cfg, &sim)?;
        Ok(sim)
    })
}

fn sup_from<F: Fn(&DiagnosticsRecord) -> f64>(records: &[DiagnosticsRecord], skip: usize, f: F) -> f64 {
    records.iter().skip(skip).map(f).fold(0.0, f64::max)
}

/// One run of a sweep, as listed in the sweep metadata.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub dt: f64,
}

#[derive(Serialize)]
struct SweepMetadata<'a> {
    code_version: &'static str,
    config: ConfigFile,
    points: &'a [SweepPoint],
    #[serde(skip_serializing_if = "<[RatioSpread]>::is_empty")]
    ratio_spreads: &'a [RatioSpread],
}

fn write_sweep_metadata(
    dir: &Path,
    cfg: &ExperimentConfig,
    points: &[SweepPoint],
    ratio_spreads: &[RatioSpread],
) -> Result<()> {
    output::write_toml(
        &dir.join(METADATA_FILE),
        &SweepMetadata {
            code_version: CODE_VERSION,
            config: cfg.to_file(),
            points,
            ratio_spreads,
        },
    )
}

fn points_of(jobs: &[(f64, f64, f64)]) -> Vec<SweepPoint> {
    jobs.iter()
        .map(|&(alpha, lambda, dt)| SweepPoint { alpha, lambda, dt })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub alpha: f64,
    pub lambda: f64,
    pub dt: f64,
    pub outcome: String,
    pub steps: usize,
    pub max_err0: f64,
    pub max_err1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeRow {
    pub alpha: f64,
    pub points: usize,
    pub slope_err0: Option<f64>,
    pub intercept_err0: Option<f64>,
    pub r_squared_err0: Option<f64>,
    pub slope_err1: Option<f64>,
    pub intercept_err1: Option<f64>,
    pub r_squared_err1: Option<f64>,
}

impl SlopeRow {
    fn new(alpha: f64, points: usize, fit0: Option<SlopeFit>, fit1: Option<SlopeFit>) -> Self {
        Self {
            alpha,
            points,
            slope_err0: fit0.map(|f| f.slope),
            intercept_err0: fit0.map(|f| f.intercept),
            r_squared_err0: fit0.map(|f| f.r_squared),
            slope_err1: fit1.map(|f| f.slope),
            intercept_err1: fit1.map(|f| f.intercept),
            r_squared_err1: fit1.map(|f| f.r_squared),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeStudyRow {
    pub alpha: f64,
    pub lambda: f64,
    pub dt: f64,
    pub reference_dt: f64,
    pub error: f64,
    /// `log(e_prev / e) / log(dt_prev / dt)` against the next larger step.
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceSummary {
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<SlopeRow>,
    pub time_study: Vec<TimeStudyRow>,
}

/// Least-squares slopes of `max err` against `lambda` for one alpha. Rows
/// that diverged or carry a zero error are left out; fewer than three usable
/// rows give no fit.
pub fn fit_error_slopes(alpha: f64, rows: &[ConvergenceRow]) -> SlopeRow {
    let usable: Vec<&ConvergenceRow> = rows
        .iter()
        .filter(|r| r.alpha == alpha && r.outcome == "completed")
        .collect();
    let lambdas: Vec<f64> = usable.iter().map(|r| r.lambda).collect();
    let e0: Vec<f64> = usable.iter().map(|r| r.max_err0).collect();
    let e1: Vec<f64> = usable.iter().map(|r| r.max_err1).collect();
    SlopeRow::new(
        alpha,
        usable.len(),
        fit_slope(&lambdas, &e0).ok(),
        fit_slope(&lambdas, &e1).ok(),
    )
}

/// `sqrt(sum_k sum_j dx_j (a - b)^2)` over all Hermite coefficients.
pub fn coefficient_distance(a: &HermiteState, b: &HermiteState) -> Result<f64> {
    if !a.is_compatible(b) {
        return Err(Error::InvalidInput("states live on different bases or meshes".into()));
    }
    let widths = a.mesh().widths();
    let n_x = a.n_x();
    let sum: f64 = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .enumerate()
        .map(|(i, (x, y))| widths[i % n_x] * (x - y).powi(2))
        .sum();
    Ok(sum.sqrt())
}

/// Orders between successive steps of a descending `dt` list.
pub fn observed_orders(dts: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    (0..dts.len())
        .map(|i| {
            (i > 0).then(|| (errors[i - 1] / errors[i]).ln() / (dts[i - 1] / dts[i]).ln())
        })
        .collect()
}

fn check_dt_divides(cfg: &ExperimentConfig, dt: f64, key: &str) -> Result<()> {
    let ratio = cfg.scheme.t_final / dt;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::ConfigKey {
            key: key.into(),
            message: format!(
                "t_final = {} is not a whole number of steps of {dt}; the time-step study compares states at t_final",
                cfg.scheme.t_final
            ),
        });
    }
    Ok(())
}

/// Time-step self-convergence: final states at each `sweep.dts` entry
/// against a run at `reference_dt`, for every (alpha, lambda) pair.
pub fn run_time_step_study(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<TimeStudyRow>> {
    let Some(reference_dt) = cfg.sweep.reference_dt() else {
        return Ok(Vec::new());
    };
    let mut dts = cfg.sweep.dts.clone();
    dts.sort_by(|a, b| b.total_cmp(a));
    dts.dedup();
    for (i, &dt) in dts.iter().enumerate() {
        check_dt_divides(cfg, dt, &format!("sweep.dts[{i}]"))?;
    }
    check_dt_divides(cfg, reference_dt, "sweep.reference_dt")?;
    let mut jobs = Vec::new();
    for &alpha in &cfg.sweep.alphas {
        for &lambda in &cfg.sweep.lambdas {
            jobs.push((alpha, lambda, reference_dt));
            for &dt in &dts {
                jobs.push((alpha, lambda, dt));
            }
        }
    }
    let study_root = root.join("time_study");
    let states: Vec<Simulation> = jobs
        .par_iter()
        .map(|&(alpha, lambda, dt)| {
            sweep_point(cfg, point_dir(&study_root, alpha, lambda, Some(dt)), lambda, alpha, dt)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (chunk, group) in states.chunks(dts.len() + 1).zip(jobs.chunks(dts.len() + 1)) {
        let (reference, runs) = chunk.split_first().unwrap();
        let (alpha, lambda, _) = group[0];
        // a diverged run has no meaningful final state
        let errors: Vec<f64> = runs
            .iter()
            .map(|s| {
                if s.summary.diverged() || reference.summary.diverged() {
                    Ok(f64::NAN)
                } else {
                    coefficient_distance(&s.summary.state, &reference.summary.state)
                }
            })
            .collect::<Result<_>>()?;
        let orders = observed_orders(&dts, &errors);
        for (i, &dt) in dts.iter().enumerate() {
            out.push(TimeStudyRow {
                alpha,
                lambda,
                dt,
                reference_dt,
                error: errors[i],
                observed_order: orders[i],
            });
        }
    }
    Ok(out)
}

/// Lambda sweep at `dt = min(dt_max, lambda / dt_per_lambda)` for each
/// alpha, recording `max_n` of both continuous error functionals, plus the
/// time-step study when `sweep.dts` is set. Writes `convergence.csv`,
/// `slopes.csv` and, if applicable, `time_convergence.csv`.
pub fn run_convergence_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceSummary> {
    let root = cfg.output.dir.clone();
    let guard = output::OutputGuard::begin(&root)?;
    guard.wrap(|| {
        let mut jobs = Vec::new();
        for &alpha in &cfg.sweep.alphas {
            for &lambda in &cfg.sweep.lambdas {
                jobs.push((alpha, lambda, cfg.sweep.dt_for(lambda)));
            }
        }
        let rows: Vec<ConvergenceRow> = jobs
            .par_iter()
            .map(|&(alpha, lambda, dt)| {
                let sim = sweep_point(cfg, point_dir(&root, alpha, lambda, None), lambda, alpha, dt)?;
                Ok(ConvergenceRow {
                    alpha,
                    lambda,
                    dt,
                    outcome: sim.result.outcome.clone(),
                    steps: sim.result.steps,
                    max_err0: sup_from(&sim.records, 0, |r| r.err0_cont),
                    max_err1: sup_from(&sim.records, 0, |r| r.err1_cont),
                })
            })
            .collect::<Result<_>>()?;
        let slopes: Vec<SlopeRow> = cfg.sweep.alphas.iter().map(|&a| fit_error_slopes(a, &rows)).collect();
        let time_study = if cfg.sweep.dts.is_empty() {
            Vec::new()
        } else {
            run_time_step_study(cfg, &root)?
        };
        output::write_csv(&root.join(CONVERGENCE_FILE), &rows)?;
        output::write_csv(&root.join(SLOPES_FILE), &slopes)?;
        if !time_study.is_empty() {
            output::write_csv(&root.join(TIME_STUDY_FILE), &time_study)?;
        }
        write_sweep_metadata(&root, cfg, &points_of(&jobs), &[])?;
        Ok(ConvergenceSummary {
            rows,
            slopes,
            time_study,
        })
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ApRow {
    pub alpha: f64,
    pub lambda: f64,
    pub dt: f64,
    pub outcome: String,
    pub steps: usize,
    /// `sup_{n >= 1}` of the discrete zeroth-order error functional.
    pub sup_err0: f64,
    /// `sup_{n >= 2}` of the discrete first-order error functional.
    pub sup_err1: f64,
    pub ratio0: f64,
    pub ratio1: f64,
    pub max_potential_energy: f64,
}

/// `max / min` of the error ratios over the completed rows with `lambda < 1`
/// of one alpha; absent with fewer than two such rows.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioSpread {
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio1: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ApSummary {
    pub rows: Vec<ApRow>,
    pub spreads: Vec<RatioSpread>,
}

fn ratio_spread(values: &[f64]) -> Option<f64> {
    if values.len() < 2 || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    Some(max / min)
}

/// Fixed-step lambda sweep in the discrete mode of the error functionals.
/// Blow-up is recorded per row. Writes `ap_sweep.csv`.
pub fn run_ap_sweep(cfg: &ExperimentConfig) -> Result<ApSummary> {
    let root = cfg.output.dir.clone();
    let guard = output::OutputGuard::begin(&root)?;
    guard.wrap(|| {
        let dt = cfg.scheme.dt;
        let mut jobs = Vec::new();
        for &alpha in &cfg.sweep.alphas {
            for &lambda in &cfg.sweep.lambdas {
                jobs.push((alpha, lambda, dt));
            }
        }
        let rows: Vec<ApRow> = jobs
            .par_iter()
            .map(|&(alpha, lambda, dt)| {
                let sim = sweep_point(cfg, point_dir(&root, alpha, lambda, None), lambda, alpha, dt)?;
                let sup_err0 = sup_from(&sim.records, 1, |r| r.err0_disc);
                let sup_err1 = sup_from(&sim.records, 2, |r| r.err1_disc);
                Ok(ApRow {
                    alpha,
                    lambda,
                    dt,
                    outcome: sim.result.outcome.clone(),
                    steps: sim.result.steps,
                    sup_err0,
                    sup_err1,
                    ratio0: sup_err0 / lambda,
                    ratio1: sup_err1 / lambda,
                    max_potential_energy: sup_from(&sim.records, 0, |r| r.potential_energy),
                })
            })
            .collect::<Result<_>>()?;
        let spreads: Vec<RatioSpread> = cfg
            .sweep
            .alphas
            .iter()
            .map(|&alpha| {
                let asym: Vec<&ApRow> = rows
                    .iter()
                    .filter(|r| r.alpha == alpha && r.lambda < 1.0 && r.outcome == "completed")
                    .collect();
                RatioSpread {
                    alpha,
                    ratio0: ratio_spread(&asym.iter().map(|r| r.ratio0).collect::<Vec<_>>()),
                    ratio1: ratio_spread(&asym.iter().map(|r| r.ratio1).collect::<Vec<_>>()),
                }
            })
            .collect();
        output::write_csv(&root.join(AP_FILE), &rows)?;
        write_sweep_metadata(&root, cfg, &points_of(&jobs), &spreads)?;
        Ok(ApSummary { rows, spreads })
    })
}
