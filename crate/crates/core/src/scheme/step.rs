use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{FieldSolution, PoissonSolver};
use crate::hermite::HermiteState;
use crate::scheme::config::{Order, SchemeConfig, GAMMA};
use crate::scheme::operator::{assemble_linear, LinearStepOperator};

/// Result of one full time step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: HermiteState,
    pub field: FieldSolution,
    /// `C_2` after the linear stage of a first-order step, kept for the
    /// reformulated Poisson residual.
    pub intermediate_c2: Option<Vec<f64>>,
}

/// Implicit linear stage: solves `(I + sub_dt L) C' = C` together with the
/// Poisson constraint. The operator fixes `sub_dt`.
pub fn linear_step(
    op: &LinearStepOperator,
    state: &HermiteState,
) -> Result<(HermiteState, FieldSolution)> {
    op.solve(state)
}

/// Field-coupling stage with a frozen field:
/// `C_k' = C_k + sub_dt sqrt(k / T0) E (C_{k-1}' - delta_{k1})`, sequentially
/// in `k`. `C_0` is unchanged.
pub fn nonlinear_step(state: &HermiteState, e: &[f64], sub_dt: f64) -> Result<HermiteState> {
    let n = state.n_x();
    if e.len() != n {
        return Err(Error::InvalidInput(format!(
            "field has {} entries but the state has {n} cells",
            e.len()
        )));
    }
    let t0 = state.basis().t0();
    let mut out = state.clone();
    let coeffs = out.coeffs_mut();
    for k in 1..state.modes() {
        let c = sub_dt * (k as f64 / t0).sqrt();
        let shift = if k == 1 { 1.0 } else { 0.0 };
        let (prev, cur) = coeffs.split_at_mut(k * n);
        let prev = &prev[(k - 1) * n..];
        for j in 0..n {
            cur[j] += c * e[j] * (prev[j] - shift);
        }
    }
    Ok(out)
}

/// Both SDIRK2 stages for an implicit flow `y' = -L y`, given the stage solve
/// `rhs -> (I + gamma h L)^{-1} rhs`. Stiffly accurate: the result is the
/// second stage value.
fn sdirk2_implicit(
    y: &[f64],
    mut stage_solve: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let y1 = stage_solve(y)?;
    // rhs2 = y - (1 - gamma) h K1 with K1 = (y - Y1) / (gamma h)
    let ratio = (1.0 - GAMMA) / GAMMA;
    let rhs: Vec<f64> = y.iter().zip(&y1).map(|(c, s)| c - ratio * (c - s)).collect();
    stage_solve(&rhs)
}

pub enum SubstepKind<'a> {
    /// Linear flow; the operator must be factored at `GAMMA * sub_dt`.
    Linear(&'a LinearStepOperator),
    /// Field-coupling flow with the field frozen over the sub-step.
    Nonlinear { e: &'a [f64] },
}

/// One SDIRK2 step of length `sub_dt` for one of the split flows.
///
/// Returns the new state and, for the linear kind, the field coupled to it.
pub fn sdirk2_substep(
    kind: SubstepKind<'_>,
    state: &HermiteState,
    sub_dt: f64,
) -> Result<(HermiteState, Option<FieldSolution>)> {
    let stage = GAMMA * sub_dt;
    match kind {
        SubstepKind::Linear(op) => {
            if (op.sub_dt() - stage).abs() > 1e-12 * stage {
                return Err(Error::InvalidInput(format!(
                    "operator factored at {} but the stage needs {stage}",
                    op.sub_dt()
                )));
            }
            let mut field = None;
            let coeffs = sdirk2_implicit(state.coeffs(), |rhs| {
                let mut b = state.clone();
                b.coeffs_mut().copy_from_slice(rhs);
                let (y, f) = op.solve(&b)?;
                field = Some(f);
                Ok(y.coeffs().to_vec())
            })?;
            let mut out = state.clone();
            out.coeffs_mut().copy_from_slice(&coeffs);
            Ok((out, field))
        }
        SubstepKind::Nonlinear { e } => {
            let y1 = nonlinear_step(state, e, stage)?;
            let ratio = (1.0 - GAMMA) / GAMMA;
            let mut z = state.clone();
            for (r, y) in z.coeffs_mut().iter_mut().zip(y1.coeffs()) {
                *r += ratio * (y - *r);
            }
            Ok((nonlinear_step(&z, e, stage)?, None))
        }
    }
}

/// Advances states with a fixed configuration, caching factorizations by key.
#[derive(Debug)]
pub struct Integrator {
    cfg: SchemeConfig,
    operators: HashMap<(u64, u64, u64, usize, u64), Arc<LinearStepOperator>>,
    poisson: Option<PoissonSolver>,
}

impl Integrator {
    pub fn new(cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            operators: HashMap::new(),
            poisson: None,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    /// Number of distinct factorizations built so far.
    pub fn cached_operators(&self) -> usize {
        self.operators.len()
    }

    pub fn operator(&mut self, sub_dt: f64) -> Result<Arc<LinearStepOperator>> {
        let key = (
            sub_dt.to_bits(),
            self.cfg.lambda.to_bits(),
            self.cfg.mesh.fingerprint(),
            self.cfg.n_h(),
            self.cfg.t0().to_bits(),
        );
        if let Some(op) = self.operators.get(&key) {
            return Ok(Arc::clone(op));
        }
        let op = Arc::new(assemble_linear(&self.cfg, sub_dt)?);
        self.operators.insert(key, Arc::clone(&op));
        Ok(op)
    }

    /// Field of a state from its density alone.
    pub fn field_of(&mut self, state: &HermiteState) -> Result<FieldSolution> {
        if self.poisson.is_none() {
            self.poisson = Some(PoissonSolver::new(Arc::clone(&self.cfg.mesh), self.cfg.lambda)?);
        }
        self.poisson.as_ref().unwrap().solve(state.mode(0))
    }

    fn check_state(&self, state: &HermiteState) -> Result<()> {
        if state.basis() != self.cfg.basis || state.mesh().fingerprint() != self.cfg.mesh.fingerprint() {
            return Err(Error::InvalidInput(
                "state basis or mesh differs from the scheme configuration".into(),
            ));
        }
        Ok(())
    }

    /// Lie splitting: implicit linear stage over `dt`, then the field
    /// coupling with `E^{n+1} = E^{(1)}`.
    pub fn first_order_step(&mut self, state: &HermiteState, dt: f64) -> Result<StepOutput> {
        self.check_state(state)?;
        let op = self.operator(dt)?;
        let (mid, field) = linear_step(&op, state)?;
        let c2 = mid.mode(2).to_vec();
        let next = nonlinear_step(&mid, &field.e, dt)?;
        Ok(StepOutput {
            state: next,
            field,
            intermediate_c2: Some(c2),
        })
    }

    /// Strang splitting: linear over `dt/2`, coupling over `dt`, linear over
    /// `dt/2`, each by SDIRK2. Both linear halves share one factorization.
    pub fn strang_step(&mut self, state: &HermiteState, dt: f64) -> Result<StepOutput> {
        self.check_state(state)?;
        let half = 0.5 * dt;
        let op = self.operator(GAMMA * half)?;
        let (s1, f1) = sdirk2_substep(SubstepKind::Linear(&op), state, half)?;
        let f1 = f1.expect("linear sub-step returns a field");
        let (s2, _) = sdirk2_substep(SubstepKind::Nonlinear { e: &f1.e }, &s1, dt)?;
        let (s3, f3) = sdirk2_substep(SubstepKind::Linear(&op), &s2, half)?;
        Ok(StepOutput {
            state: s3,
            field: f3.expect("linear sub-step returns a field"),
            intermediate_c2: None,
        })
    }

    pub fn step(&mut self, state: &HermiteState) -> Result<StepOutput> {
        let dt = self.cfg.dt;
        match self.cfg.order {
            Order::First => self.first_order_step(state, dt),
            Order::Second => self.strang_step(state, dt),
        }
    }
}
