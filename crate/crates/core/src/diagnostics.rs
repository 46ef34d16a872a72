//! Observables along a trajectory: conservation functionals, the oscillation
//! error functionals in continuous and discrete form, the reformulated Poisson
//! residual, and the fitting helpers used by the sweeps.

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::FieldSolution;
use crate::grid::Mesh1D;
use crate::hermite::HermiteState;
use crate::scheme::{Observer, StepView};

/// Total-energy growth per unit time above which a run is flagged.
pub const ENERGY_ANOMALY_RATE: f64 = 0.01;

/// Per-level scalars written to the diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub potential_energy: f64,
    pub mass: f64,
    pub flux: f64,
    pub total_energy: f64,
    pub err0_cont: f64,
    pub err1_cont: f64,
    pub err0_disc: f64,
    pub err1_disc: f64,
    pub reformulated_residual: Option<f64>,
    pub e_norm: f64,
    pub e_slow_norm: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 12] = [
        "t",
        "potential_energy",
        "mass",
        "flux",
        "total_energy",
        "err0_cont",
        "err1_cont",
        "err0_disc",
        "err1_disc",
        "reformulated_residual",
        "e_norm",
        "e_slow_norm",
    ];
}

/// `sqrt(2) T0 d_h C_2`, the quasineutral surrogate of the field.
pub fn e_slow(state: &HermiteState) -> Vec<f64> {
    let t0 = state.basis().t0();
    let mut out = vec![0.0; state.n_x()];
    state.mesh().d_h_into(state.mode(2), &mut out);
    let c = std::f64::consts::SQRT_2 * t0;
    out.iter_mut().for_each(|v| *v *= c);
    out
}

/// `1/2 sum_j dx_j E_j^2`.
pub fn potential_energy(mesh: &Mesh1D, e: &[f64]) -> f64 {
    0.5 * mesh.inner(e, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationReport {
    pub mass: f64,
    pub flux: f64,
    pub total_energy: f64,
}

/// Mass `sum dx C_0`, flux `sum dx C_1` and total energy
/// `1/2 sum dx (T0 (sqrt(2) C_2 + C_0) + lambda^2 E^2)`.
pub fn conservation_report(state: &HermiteState, field: &FieldSolution) -> ConservationReport {
    let mesh = state.mesh();
    let t0 = state.basis().t0();
    let l2 = field.lambda * field.lambda;
    let energy_density: Vec<f64> = state
        .mode(0)
        .iter()
        .zip(state.mode(2))
        .zip(&field.e)
        .map(|((c0, c2), e)| t0 * (std::f64::consts::SQRT_2 * c2 + c0) + l2 * e * e)
        .collect();
    ConservationReport {
        mass: mesh.cell_integral(state.mode(0)),
        flux: mesh.cell_integral(state.mode(1)),
        total_energy: 0.5 * mesh.cell_integral(&energy_density),
    }
}

/// Initial data of the fast oscillation: `(E - E_slow)(0)` and `C_1(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReference {
    pub e_fast: Vec<f64>,
    pub c1: Vec<f64>,
    pub lambda: f64,
    pub t0: f64,
}

impl OscillationReference {
    pub fn capture(state: &HermiteState, field: &FieldSolution) -> Self {
        let slow = e_slow(state);
        Self {
            e_fast: field.e.iter().zip(&slow).map(|(e, s)| e - s).collect(),
            c1: state.mode(1).to_vec(),
            lambda: field.lambda,
            t0: state.basis().t0(),
        }
    }

    /// `(E_osc(t), C1_osc(t))`, the free plasma oscillation started from the
    /// reference data.
    pub fn parts(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let phase = t / self.lambda;
        let (s, c) = phase.sin_cos();
        let st0 = self.t0.sqrt();
        let e_osc = self
            .e_fast
            .iter()
            .zip(&self.c1)
            .map(|(e, c1)| c * e - st0 / self.lambda * s * c1)
            .collect();
        let c1_osc = self
            .e_fast
            .iter()
            .zip(&self.c1)
            .map(|(e, c1)| c * c1 + self.lambda / st0 * s * e)
            .collect();
        (e_osc, c1_osc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// Distance to slow part plus free oscillation.
    Continuous,
    /// `||E - E_slow||_{l2}` and `||C_1||_{h1}`.
    Discrete,
}

/// `(E0, E1)` in the requested mode.
pub fn error_functionals(
    state: &HermiteState,
    field: &FieldSolution,
    reference: &OscillationReference,
    t: f64,
    mode: ErrorMode,
) -> (f64, f64) {
    let mesh = state.mesh();
    let slow = e_slow(state);
    match mode {
        ErrorMode::Continuous => {
            let (e_osc, c1_osc) = reference.parts(t);
            let r0: Vec<f64> = field
                .e
                .iter()
                .zip(&slow)
                .zip(&e_osc)
                .map(|((e, s), o)| e - s - o)
                .collect();
            let r1: Vec<f64> = state.mode(1).iter().zip(&c1_osc).map(|(c, o)| c - o).collect();
            (mesh.norm_l2(&r0), mesh.norm_l2(&r1))
        }
        ErrorMode::Discrete => {
            let r0: Vec<f64> = field.e.iter().zip(&slow).map(|(e, s)| e - s).collect();
            (mesh.norm_l2(&r0), mesh.norm_hr(state.mode(1), 1))
        }
    }
}

/// Three consecutive field levels and the data of the newest step.
#[derive(Debug, Clone, Copy)]
pub struct ResidualWindow<'a> {
    pub e_prev: &'a [f64],
    pub e_cur: &'a [f64],
    pub e_next: &'a [f64],
    pub c0_next: &'a [f64],
    /// `C_2` after the linear stage of the newest step.
    pub c2_intermediate: Option<&'a [f64]>,
}

/// `l2` norm of the discrete harmonic-oscillator identity satisfied by the
/// first-order scheme:
/// `lambda^2 d_h(E^{n+1} - 2E^n + E^{n-1}) / dt^2 + d_h(E^{n+1} C_0^{n+1})
///  - d_h^2(sqrt(2) T0 C_2^{(1)} + T0 C_0^{n+1})
///  - lambda^2 d_h(E^{n+1} d_h E^{n+1} - E^n d_h E^n)`.
pub fn reformulated_residual(
    window: &ResidualWindow<'_>,
    dt: f64,
    lambda: f64,
    mesh: &Mesh1D,
    t0: f64,
) -> Result<f64> {
    let c2 = window.c2_intermediate.ok_or_else(|| {
        Error::InvalidInput("the residual needs the post-linear-stage C_2".into())
    })?;
    let n = mesh.len();
    for s in [window.e_prev, window.e_cur, window.e_next, window.c0_next, c2] {
        if s.len() != n {
            return Err(Error::InvalidInput("residual window length mismatch".into()));
        }
    }
    let d = |u: &[f64]| {
        let mut out = vec![0.0; n];
        mesh.d_h_into(u, &mut out);
        out
    };
    let l2 = lambda * lambda;
    let second: Vec<f64> = (0..n)
        .map(|j| window.e_next[j] - 2.0 * window.e_cur[j] + window.e_prev[j])
        .collect();
    let term_time = d(&second);
    let flux: Vec<f64> = (0..n).map(|j| window.e_next[j] * window.c0_next[j]).collect();
    let term_flux = d(&flux);
    let pressure: Vec<f64> = (0..n)
        .map(|j| std::f64::consts::SQRT_2 * t0 * c2[j] + t0 * window.c0_next[j])
        .collect();
    let term_pressure = d(&d(&pressure));
    let de_next = d(window.e_next);
    let de_cur = d(window.e_cur);
    let quad: Vec<f64> = (0..n)
        .map(|j| window.e_next[j] * de_next[j] - window.e_cur[j] * de_cur[j])
        .collect();
    let term_quad = d(&quad);
    let residual: Vec<f64> = (0..n)
        .map(|j| {
            l2 * term_time[j] / (dt * dt) + term_flux[j] - term_pressure[j] - l2 * term_quad[j]
        })
        .collect();
    Ok(mesh.norm_l2(&residual))
}

/// Builds one record per observed level.
#[derive(Debug, Default)]
pub struct DiagnosticsRecorder {
    reference: Option<OscillationReference>,
    e_history: Vec<Vec<f64>>,
    records: Vec<DiagnosticsRecord>,
}

impl DiagnosticsRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<DiagnosticsRecord> {
        self.records
    }

    pub fn reference(&self) -> Option<&OscillationReference> {
        self.reference.as_ref()
    }

    pub fn record(&mut self, view: &StepView<'_>) -> Result<DiagnosticsRecord> {
        let state = view.state;
        let field = view.field;
        let mesh = state.mesh();
        if view.n == 0 || self.reference.is_none() {
            self.reference = Some(OscillationReference::capture(state, field));
            self.e_history.clear();
        }
        let reference = self.reference.as_ref().unwrap();
        let cons = conservation_report(state, field);
        let (err0_cont, err1_cont) =
            error_functionals(state, field, reference, view.t, ErrorMode::Continuous);
        let (err0_disc, err1_disc) =
            error_functionals(state, field, reference, view.t, ErrorMode::Discrete);
        let reformulated_residual = match (view.intermediate_c2, self.e_history.len()) {
            (Some(c2), len) if len >= 2 => Some(reformulated_residual(
                &ResidualWindow {
                    e_prev: &self.e_history[len - 2],
                    e_cur: &self.e_history[len - 1],
                    e_next: &field.e,
                    c0_next: state.mode(0),
                    c2_intermediate: Some(c2),
                },
                view.dt,
                field.lambda,
                mesh,
                state.basis().t0(),
            )?),
            _ => None,
        };
        if self.e_history.len() == 2 {
            self.e_history.remove(0);
        }
        self.e_history.push(field.e.clone());
        let record = DiagnosticsRecord {
            t: view.t,
            potential_energy: potential_energy(mesh, &field.e),
            mass: cons.mass,
            flux: cons.flux,
            total_energy: cons.total_energy,
            err0_cont,
            err1_cont,
            err0_disc,
            err1_disc,
            reformulated_residual,
            e_norm: mesh.norm_l2(&field.e),
            e_slow_norm: mesh.norm_l2(&e_slow(state)),
        };
        let values = [
            record.potential_energy,
            record.mass,
            record.flux,
            record.total_energy,
            record.err0_cont,
            record.err1_cont,
            record.err0_disc,
            record.err1_disc,
            record.e_norm,
            record.e_slow_norm,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite diagnostic at t = {}",
                view.t
            )));
        }
        self.records.push(record);
        Ok(record)
    }
}

impl Observer for DiagnosticsRecorder {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        self.record(view).map(|_| ())
    }
}

/// Largest relative total-energy growth rate `(W(t) - W(0)) / (|W(0)| t)`.
pub fn energy_growth_rate(records: &[DiagnosticsRecord]) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let w0 = first.total_energy.abs().max(f64::MIN_POSITIVE);
    records
        .iter()
        .filter(|r| r.t > first.t)
        .map(|r| (r.total_energy - first.total_energy) / (w0 * (r.t - first.t)))
        .fold(0.0, f64::max)
}

pub fn energy_anomaly(records: &[DiagnosticsRecord]) -> bool {
    energy_growth_rate(records) > ENERGY_ANOMALY_RATE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log(y) = slope log(x) + intercept`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("fit needs equally many abscissae and values".into()));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("fit values must be positive and finite".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly))
}

fn linear_fit(x: &[f64], y: &[f64]) -> SlopeFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    SlopeFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Period of the strongest spectral peak of a uniformly sampled series after
/// mean removal. The series must span at least five periods.
pub fn dominant_period(times: &[f64], values: &[f64]) -> Result<f64> {
    let n = values.len();
    if times.len() != n || n < 8 {
        return Err(Error::InvalidInput("series too short for a period estimate".into()));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::InvalidInput("series must be uniformly sampled in time".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let spread = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread == 0.0 || spread <= 1e-12 * mean.abs() {
        return Err(Error::InvalidInput("series is constant: no oscillation to measure".into()));
    }
    let padded = (8 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = centered
        .iter()
        .map(|v| Complex64::new(*v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(padded)
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let power: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm_sqr()).collect();
    // skip the lobe around zero frequency left by mean removal
    let mut start = 1;
    while start + 1 < power.len() && power[start + 1] < power[start] {
        start += 1;
    }
    let (peak, _) = power
        .iter()
        .enumerate()
        .skip(start)
        .fold((start, f64::MIN), |best, (i, p)| if *p > best.1 { (i, *p) } else { best });
    let mut offset = 0.0;
    if peak > 0 && peak + 1 < power.len() {
        let (a, b, c) = (power[peak - 1], power[peak], power[peak + 1]);
        let denom = a - 2.0 * b + c;
        if denom != 0.0 {
            offset = 0.5 * (a - c) / denom;
        }
    }
    let freq = (peak as f64 + offset) / (padded as f64 * dt);
    if !(freq > 0.0) {
        return Err(Error::InvalidInput("no oscillation peak found".into()));
    }
    let period = 1.0 / freq;
    let span = times[n - 1] - times[0];
    if span < 5.0 * period {
        return Err(Error::InvalidInput(format!(
            "series spans {span} but needs five periods ({})",
            5.0 * period
        )));
    }
    Ok(period)
}

/// Exponential growth rate of a positive series over `[t_start, t_end]`,
/// from a least-squares fit of `log(value)` against time.
pub fn growth_rate(times: &[f64], values: &[f64], t_start: f64, t_end: f64) -> Result<SlopeFit> {
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_start && **t <= t_end)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if t.len() < 3 {
        return Err(Error::InvalidInput("growth fit needs at least 3 samples".into()));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidInput("growth fit needs positive values".into()));
    }
    let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    Ok(linear_fit(&t, &lv))
}
