//! Hermite velocity basis, projection, reconstruction and macroscopic moments.
//!
//! The basis functions are `Psi_0 = M` (the Maxwellian at temperature `T0`)
//! and `v Psi_k = sqrt(T0 k) Psi_{k-1} + sqrt(T0 (k+1)) Psi_{k+1}`. They are
//! orthonormal for the weight `1 / M`, so the coefficients of a distribution
//! `f` are `C_k = integral f Psi_k / M dv`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Mesh1D;
use crate::quadrature::{hermite_functions, maxwellian, MaxwellianQuadrature};

/// Reference temperature and truncation index of the Hermite expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteBasis {
    t0: f64,
    n_h: usize,
}

impl HermiteBasis {
    /// `n_h` is the highest retained mode; it must be at least 2 because the
    /// first-moment equation involves `C_2`.
    pub fn new(t0: f64, n_h: usize) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidInput(format!("T0 must be positive, got {t0}")));
        }
        if n_h < 2 {
            return Err(Error::InvalidInput(format!(
                "N_H must be at least 2 (the flux equation couples C_2), got {n_h}"
            )));
        }
        Ok(Self { t0, n_h })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    /// Number of stored modes, `n_h + 1`.
    pub fn modes(&self) -> usize {
        self.n_h + 1
    }

    pub fn maxwellian(&self, v: f64) -> f64 {
        maxwellian(v, self.t0)
    }

    /// `Psi_0(v) ..= Psi_{N_H}(v)` by the weighted recurrence.
    pub fn eval(&self, v: f64) -> Result<Vec<f64>> {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("velocity must be finite, got {v}")));
        }
        let mut psi = vec![0.0; self.modes()];
        psi[0] = self.maxwellian(v);
        let mut prev = 0.0;
        for k in 0..self.n_h {
            let kf = k as f64;
            let next = (v * psi[k] - (self.t0 * kf).sqrt() * prev) / (self.t0 * (kf + 1.0)).sqrt();
            prev = psi[k];
            psi[k + 1] = next;
        }
        Ok(psi)
    }

    /// Quadrature order used when none is requested.
    pub fn default_quadrature_order(&self) -> usize {
        (2 * self.n_h + 8).max(128)
    }

    pub fn projector(&self, order: usize) -> Result<Projector> {
        Projector::new(*self, order)
    }

    /// Coefficients `C_0 ..= C_{N_H}` of `profile` with a quadrature of the
    /// given order.
    pub fn project(&self, profile: impl Fn(f64) -> f64, order: usize) -> Result<Vec<f64>> {
        Ok(self.projector(order)?.project(profile))
    }
}

/// Precomputed quadrature data for projecting many velocity profiles.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: HermiteBasis,
    nodes: Vec<f64>,
    /// `(2 pi T0)^{1/4} exp(v_i^2 / (4 T0))`, i.e. `1 / sqrt(M(v_i))`.
    inv_sqrt_m: Vec<f64>,
    /// `chi_k(v_i) / S_i`, mode-major.
    table: Vec<f64>,
}

impl Projector {
    pub fn new(basis: HermiteBasis, order: usize) -> Result<Self> {
        if order < 2 * basis.n_h() {
            return Err(Error::Config(format!(
                "quadrature order {order} is below 2 * N_H = {}; the projection would alias",
                2 * basis.n_h()
            )));
        }
        let quad = MaxwellianQuadrature::new(basis.t0(), order)?;
        let t0 = basis.t0();
        let modes = basis.modes();
        let mut table = vec![0.0; modes * order];
        for (i, (&v, &s)) in quad.nodes().iter().zip(quad.christoffel()).enumerate() {
            let chi = hermite_functions(v, t0, modes);
            for k in 0..modes {
                table[k * order + i] = chi[k] / s;
            }
        }
        let inv_sqrt_m = quad
            .nodes()
            .iter()
            .map(|&v| (2.0 * std::f64::consts::PI * t0).powf(0.25) * (v * v / (4.0 * t0)).exp())
            .collect();
        Ok(Self {
            basis,
            nodes: quad.nodes().to_vec(),
            inv_sqrt_m,
            table,
        })
    }

    pub fn basis(&self) -> HermiteBasis {
        self.basis
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn project(&self, profile: impl Fn(f64) -> f64) -> Vec<f64> {
        let q = self.order();
        let samples: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.inv_sqrt_m)
            .map(|(&v, &g)| {
                let f = profile(v);
                if f == 0.0 {
                    0.0
                } else {
                    f * g
                }
            })
            .collect();
        (0..self.basis.modes())
            .map(|k| {
                self.table[k * q..(k + 1) * q]
                    .iter()
                    .zip(&samples)
                    .map(|(t, s)| t * s)
                    .sum()
            })
            .collect()
    }
}

/// Density, current and kinetic-energy density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub rho: f64,
    pub current: f64,
    pub kinetic: f64,
}

impl Moments {
    /// `rho = C_0`, `j = sqrt(T0) C_1`, `K = T0 (sqrt(2) C_2 + C_0)`.
    pub fn from_coeffs(coeffs: &[f64], t0: f64) -> Result<Self> {
        if coeffs.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "moments need at least C_0..C_2, got {} coefficients",
                coeffs.len()
            )));
        }
        Ok(Self {
            rho: coeffs[0],
            current: t0.sqrt() * coeffs[1],
            kinetic: t0 * (std::f64::consts::SQRT_2 * coeffs[2] + coeffs[0]),
        })
    }
}

/// Hermite coefficients `C_{k,j}` on every cell of a mesh, stored mode-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteState {
    basis: HermiteBasis,
    mesh: Arc<Mesh1D>,
    coeffs: Vec<f64>,
}

impl HermiteState {
    pub fn zeros(basis: HermiteBasis, mesh: Arc<Mesh1D>) -> Self {
        let len = basis.modes() * mesh.len();
        Self {
            basis,
            mesh,
            coeffs: vec![0.0; len],
        }
    }

    /// The quasineutral steady state `C = (1, 0, 0, ...)` on every cell.
    pub fn equilibrium(basis: HermiteBasis, mesh: Arc<Mesh1D>) -> Self {
        let mut state = Self::zeros(basis, mesh);
        state.mode_mut(0).fill(1.0);
        state
    }

    /// Builds a state from per-cell coefficient vectors (`cells[j][k]`).
    pub fn from_cells(basis: HermiteBasis, mesh: Arc<Mesh1D>, cells: &[Vec<f64>]) -> Result<Self> {
        if cells.len() != mesh.len() {
            return Err(Error::InvalidInput(format!(
                "{} cell vectors for a mesh of {} cells",
                cells.len(),
                mesh.len()
            )));
        }
        let mut state = Self::zeros(basis, mesh);
        let n_x = state.n_x();
        for (j, cell) in cells.iter().enumerate() {
            if cell.len() != basis.modes() {
                return Err(Error::InvalidInput(format!(
                    "cell {j} has {} coefficients, expected {}",
                    cell.len(),
                    basis.modes()
                )));
            }
            for (k, c) in cell.iter().enumerate() {
                state.coeffs[k * n_x + j] = *c;
            }
        }
        state.check_finite()?;
        Ok(state)
    }

    pub fn basis(&self) -> HermiteBasis {
        self.basis
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn n_x(&self) -> usize {
        self.mesh.len()
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        let n = self.n_x();
        &self.coeffs[k * n..(k + 1) * n]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.n_x();
        &mut self.coeffs[k * n..(k + 1) * n]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn cell(&self, j: usize) -> Vec<f64> {
        (0..self.modes()).map(|k| self.coeffs[k * self.n_x() + j]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput("state has non-finite coefficients".into()))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// True when both states share basis and mesh geometry.
    pub fn is_compatible(&self, other: &HermiteState) -> bool {
        self.basis == other.basis && self.mesh.fingerprint() == other.mesh.fingerprint()
    }

    /// `f(x_j, v_m) = sum_k C_{k,j} Psi_k(v_m)`; rows are cells, columns velocities.
    pub fn reconstruct(&self, v_grid: &[f64]) -> Result<DMatrix<f64>> {
        let n_x = self.n_x();
        let mut out = DMatrix::zeros(n_x, v_grid.len());
        for (m, &v) in v_grid.iter().enumerate() {
            let psi = self.basis.eval(v)?;
            for j in 0..n_x {
                out[(j, m)] = psi
                    .iter()
                    .enumerate()
                    .map(|(k, p)| self.coeffs[k * n_x + j] * p)
                    .sum();
            }
        }
        Ok(out)
    }

    /// Per-cell `(rho, j, K)`.
    pub fn moments(&self) -> Vec<Moments> {
        let t0 = self.basis.t0();
        let (c0, c1, c2) = (self.mode(0), self.mode(1), self.mode(2));
        (0..self.n_x())
            .map(|j| Moments {
                rho: c0[j],
                current: t0.sqrt() * c1[j],
                kinetic: t0 * (std::f64::consts::SQRT_2 * c2[j] + c0[j]),
            })
            .collect()
    }

    /// Per-cell kinetic-energy density `K = T0 (sqrt(2) C_2 + C_0)`.
    pub fn kinetic_density(&self) -> Vec<f64> {
        self.moments().into_iter().map(|m| m.kinetic).collect()
    }
}
