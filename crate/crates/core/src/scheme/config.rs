use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mesh1D;
use crate::hermite::HermiteBasis;

/// SDIRK2 diagonal coefficient, `1 - 1/sqrt(2)`.
pub const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    /// Lie splitting with implicit Euler for the linear part.
    First,
    /// Strang splitting with SDIRK2 sub-steps.
    Second,
}

impl Order {
    pub fn from_int(order: i64) -> Result<Self> {
        match order {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::Config(format!("order must be 1 or 2, got {order}"))),
        }
    }

    pub fn as_int(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

/// Which factorization backs the implicit linear solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Spectral on uniform meshes, banded otherwise.
    #[default]
    Auto,
    Banded,
    Spectral,
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverChoice::Auto => "auto",
            SolverChoice::Banded => "banded",
            SolverChoice::Spectral => "spectral",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub order: Order,
    pub lambda: f64,
    pub basis: HermiteBasis,
    pub mesh: Arc<Mesh1D>,
    pub solver: SolverChoice,
}

impl SchemeConfig {
    pub fn new(
        mesh: Arc<Mesh1D>,
        basis: HermiteBasis,
        lambda: f64,
        dt: f64,
        t_final: f64,
        order: Order,
    ) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            order,
            lambda,
            basis,
            mesh,
            solver: SolverChoice::Auto,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_solver(mut self, solver: SolverChoice) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "t_final must be non-negative, got {}",
                self.t_final
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.basis.n_h() < 2 {
            return Err(Error::Config("n_h must be at least 2".into()));
        }
        self.mesh.require_odd()?;
        if self.solver == SolverChoice::Spectral && !self.mesh.is_uniform() {
            return Err(Error::Config(
                "the spectral solver requires a uniform mesh".into(),
            ));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        GAMMA
    }

    pub fn t0(&self) -> f64 {
        self.basis.t0()
    }

    pub fn n_h(&self) -> usize {
        self.basis.n_h()
    }

    /// `ceil(t_final / dt)`, with a relative slack so that `t_final = n dt`
    /// in floating point gives exactly `n`.
    pub fn n_steps(&self) -> usize {
        let ratio = self.t_final / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }
}
