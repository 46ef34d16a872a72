use crate::error::{Error, Result};
use crate::field::FieldSolution;
use crate::hermite::HermiteState;
use crate::scheme::config::SchemeConfig;
use crate::scheme::step::Integrator;

/// Sup-norm above which a trajectory counts as blown up.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// What an observer sees at time level `n`.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub n: usize,
    pub t: f64,
    pub dt: f64,
    pub state: &'a HermiteState,
    pub field: &'a FieldSolution,
    /// Post-linear-stage `C_2` of the step that produced this level
    /// (first-order scheme, `n >= 1` only).
    pub intermediate_c2: Option<&'a [f64]>,
}

pub trait Observer {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()>;
}

impl<F: FnMut(&StepView<'_>) -> Result<()>> Observer for F {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        self(view)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunOutcome {
    Completed,
    Diverged { step: usize, t: f64, norm: f64 },
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Steps completed (levels `0..=steps` were observed).
    pub steps: usize,
    pub t: f64,
    pub state: HermiteState,
    pub field: FieldSolution,
    pub outcome: RunOutcome,
}

impl RunSummary {
    pub fn diverged(&self) -> bool {
        matches!(self.outcome, RunOutcome::Diverged { .. })
    }

    /// Converts a divergence outcome into an error.
    pub fn into_result(self) -> Result<Self> {
        match self.outcome {
            RunOutcome::Diverged { step, t, norm } => Err(Error::Diverged { step, t, norm }),
            RunOutcome::Completed => Ok(self),
        }
    }
}

fn sup_norm(state: &HermiteState, field: &FieldSolution) -> f64 {
    if !state.is_finite() || field.e.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    field.e.iter().fold(state.max_abs(), |m, v| m.max(v.abs()))
}

/// Advances `initial` for `cfg.n_steps()` steps, calling every observer at
/// each time level including `n = 0`. The initial field comes from a Poisson
/// solve on the initial density.
///
/// Blow-up (sup-norm above [`DIVERGENCE_THRESHOLD`] or non-finite values)
/// stops the run and is reported in the outcome; observer errors abort with
/// the step index.
pub fn run(
    cfg: &SchemeConfig,
    initial: HermiteState,
    observers: &mut [&mut dyn Observer],
) -> Result<RunSummary> {
    cfg.validate()?;
    if initial.basis() != cfg.basis || initial.mesh().fingerprint() != cfg.mesh.fingerprint() {
        return Err(Error::InvalidInput(
            "initial state basis or mesh differs from the scheme configuration".into(),
        ));
    }
    initial.check_finite()?;
    let mut integ = Integrator::new(cfg.clone())?;
    let mut state = initial;
    let mut field = integ.field_of(&state)?;
    let notify = |observers: &mut [&mut dyn Observer], view: StepView<'_>| -> Result<()> {
        for obs in observers.iter_mut() {
            obs.observe(&view).map_err(|e| Error::Observer {
                step: view.n,
                source: Box::new(e),
            })?;
        }
        Ok(())
    };
    notify(
        observers,
        StepView {
            n: 0,
            t: 0.0,
            dt: cfg.dt,
            state: &state,
            field: &field,
            intermediate_c2: None,
        },
    )?;
    let n_steps = cfg.n_steps();
    for n in 1..=n_steps {
        let t = n as f64 * cfg.dt;
        let out = match integ.step(&state) {
            Ok(out) => out,
            Err(Error::Solver { reason, .. }) if reason.contains("non-finite") => {
                return Ok(RunSummary {
                    steps: n - 1,
                    t: (n - 1) as f64 * cfg.dt,
                    state,
                    field,
                    outcome: RunOutcome::Diverged {
                        step: n,
                        t,
                        norm: f64::INFINITY,
                    },
                });
            }
            Err(e) => return Err(e),
        };
        let norm = sup_norm(&out.state, &out.field);
        if !(norm <= DIVERGENCE_THRESHOLD) {
            return Ok(RunSummary {
                steps: n - 1,
                t: (n - 1) as f64 * cfg.dt,
                state,
                field,
                outcome: RunOutcome::Diverged { step: n, t, norm },
            });
        }
        state = out.state;
        field = out.field;
        notify(
            observers,
            StepView {
                n,
                t,
                dt: cfg.dt,
                state: &state,
                field: &field,
                intermediate_c2: out.intermediate_c2.as_deref(),
            },
        )?;
    }
    Ok(RunSummary {
        steps: n_steps,
        t: n_steps as f64 * cfg.dt,
        state,
        field,
        outcome: RunOutcome::Completed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mesh1D;
    use crate::hermite::HermiteBasis;
    use crate::scheme::config::Order;
    use std::sync::Arc;

    fn cfg(t_final: f64) -> SchemeConfig {
        let mesh = Arc::new(Mesh1D::uniform(-1.0, 1.0, 9).unwrap());
        SchemeConfig::new(mesh, HermiteBasis::new(1.0, 4).unwrap(), 0.5, 0.1, t_final, Order::First).unwrap()
    }

    #[test]
    fn zero_final_time_observes_only_initial_level() {
        let c = cfg(0.0);
        let init = HermiteState::equilibrium(c.basis, Arc::clone(&c.mesh));
        let mut levels = Vec::new();
        let mut obs = |v: &StepView<'_>| {
            levels.push(v.n);
            Ok(())
        };
        let s = run(&c, init.clone(), &mut [&mut obs]).unwrap();
        assert_eq!(levels, vec![0]);
        assert_eq!(s.steps, 0);
        assert_eq!(s.state, init);
    }

    #[test]
    fn observer_failure_carries_step_index() {
        let c = cfg(1.0);
        let init = HermiteState::equilibrium(c.basis, Arc::clone(&c.mesh));
        let mut obs = |v: &StepView<'_>| {
            if v.n == 3 {
                Err(Error::InvalidInput("stop".into()))
            } else {
                Ok(())
            }
        };
        let err = run(&c, init, &mut [&mut obs]).unwrap_err();
        assert!(matches!(err, Error::Observer { step: 3, .. }));
    }

    #[test]
    fn emits_one_level_per_step() {
        let c = cfg(1.0);
        let init = HermiteState::equilibrium(c.basis, Arc::clone(&c.mesh));
        let mut count = 0usize;
        let mut obs = |v: &StepView<'_>| {
            assert_eq!(v.intermediate_c2.is_some(), v.n >= 1);
            count += 1;
            Ok(())
        };
        let s = run(&c, init, &mut [&mut obs]).unwrap();
        assert_eq!(count, 11);
        assert_eq!(s.outcome, RunOutcome::Completed);
    }
}
