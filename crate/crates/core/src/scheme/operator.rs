use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{second_difference_entries, FieldSolution};
use crate::grid::Mesh1D;
use crate::hermite::{HermiteBasis, HermiteState};
use crate::linalg::{folded_cell_order, BorderedBandSolver, CsrMatrix, TripletBuilder};
use crate::scheme::config::{SchemeConfig, SolverChoice};
use crate::scheme::spectral::SpectralSolver;

/// Unknown ordering of the assembled implicit system: coefficients mode-major
/// (`k` outer, cell `j` inner), then the potential on every cell, then the
/// zero-mean multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemLayout {
    pub n_x: usize,
    pub modes: usize,
}

impl SystemLayout {
    pub fn coeff(&self, k: usize, j: usize) -> usize {
        k * self.n_x + j
    }

    pub fn phi(&self, j: usize) -> usize {
        self.modes * self.n_x + j
    }

    pub fn multiplier(&self) -> usize {
        (self.modes + 1) * self.n_x
    }

    pub fn size(&self) -> usize {
        (self.modes + 1) * self.n_x + 1
    }
}

/// Identifies a factorization: `(sub_dt, lambda, mesh, N_H, T0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorKey {
    pub sub_dt: f64,
    pub lambda: f64,
    pub mesh: u64,
    pub n_h: usize,
    pub t0: f64,
}

impl OperatorKey {
    /// Bit-exact hashable form.
    pub fn bits(&self) -> (u64, u64, u64, usize, u64) {
        (
            self.sub_dt.to_bits(),
            self.lambda.to_bits(),
            self.mesh,
            self.n_h,
            self.t0.to_bits(),
        )
    }
}

impl fmt::Display for OperatorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(sub_dt = {:e}, lambda = {:e}, mesh = {:016x}, n_h = {}, t0 = {})",
            self.sub_dt, self.lambda, self.mesh, self.n_h, self.t0
        )
    }
}

#[derive(Debug)]
pub enum Backend {
    Banded(BorderedBandSolver),
    Spectral(SpectralSolver),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Banded(_) => "banded",
            Backend::Spectral(_) => "spectral",
        }
    }
}

/// The implicit system `(I + sub_dt L) C = rhs` coupled to the Poisson
/// constraint, with its factorization.
#[derive(Debug)]
pub struct LinearStepOperator {
    key: OperatorKey,
    layout: SystemLayout,
    mesh: Arc<Mesh1D>,
    basis: HermiteBasis,
    lambda: f64,
    matrix: CsrMatrix,
    backend: Backend,
}

/// Assembles the implicit step matrix for one effective sub-step.
///
/// Rows, per cell `j`:
/// * `C_k + sub_dt (sqrt(k T0) d_h C_{k-1} + sqrt((k+1) T0) d_h C_{k+1}) = rhs_k`,
///   with `(sub_dt / sqrt(T0)) d_h phi` added on the `k = 1` row (that is
///   `-(sub_dt / sqrt(T0)) E`);
/// * `-lambda^2 d_h d_h phi - C_0 + dx_j mu = rhs` (the step uses `-1`);
/// * one row `sum_j dx_j phi_j = rhs` (the step uses `0`).
pub fn assemble_matrix(mesh: &Mesh1D, basis: HermiteBasis, lambda: f64, sub_dt: f64) -> CsrMatrix {
    let n = mesh.len();
    let modes = basis.modes();
    let t0 = basis.t0();
    let layout = SystemLayout { n_x: n, modes };
    let size = layout.size();
    let mut b = TripletBuilder::new(size, size);
    let w = mesh.widths();
    for k in 0..modes {
        let lower = sub_dt * (k as f64 * t0).sqrt();
        let upper = sub_dt * ((k + 1) as f64 * t0).sqrt();
        for j in 0..n {
            let row = layout.coeff(k, j);
            let up = (j + 1) % n;
            let down = (j + n - 1) % n;
            let s = 1.0 / (2.0 * w[j]);
            b.push(row, row, 1.0);
            if k > 0 {
                b.push(row, layout.coeff(k - 1, up), lower * s);
                b.push(row, layout.coeff(k - 1, down), -lower * s);
            }
            if k + 1 < modes {
                b.push(row, layout.coeff(k + 1, up), upper * s);
                b.push(row, layout.coeff(k + 1, down), -upper * s);
            }
            if k == 1 {
                let c = sub_dt / t0.sqrt();
                b.push(row, layout.phi(up), c * s);
                b.push(row, layout.phi(down), -c * s);
            }
        }
    }
    let l2 = lambda * lambda;
    for (r, c, v) in second_difference_entries(mesh) {
        b.push(layout.phi(r), layout.phi(c), -l2 * v);
    }
    for j in 0..n {
        b.push(layout.phi(j), layout.coeff(0, j), -1.0);
        b.push(layout.phi(j), layout.multiplier(), w[j]);
        b.push(layout.multiplier(), layout.phi(j), w[j]);
    }
    b.build()
}

/// Assembles and factors the implicit operator for `sub_dt`.
pub fn assemble_linear(cfg: &SchemeConfig, sub_dt: f64) -> Result<LinearStepOperator> {
    LinearStepOperator::new(Arc::clone(&cfg.mesh), cfg.basis, cfg.lambda, sub_dt, cfg.solver)
}

impl LinearStepOperator {
    pub fn new(
        mesh: Arc<Mesh1D>,
        basis: HermiteBasis,
        lambda: f64,
        sub_dt: f64,
        solver: SolverChoice,
    ) -> Result<Self> {
        if !(sub_dt > 0.0 && sub_dt.is_finite()) {
            return Err(Error::InvalidInput(format!("sub-step must be positive, got {sub_dt}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        mesh.require_odd()?;
        let key = OperatorKey {
            sub_dt,
            lambda,
            mesh: mesh.fingerprint(),
            n_h: basis.n_h(),
            t0: basis.t0(),
        };
        let layout = SystemLayout {
            n_x: mesh.len(),
            modes: basis.modes(),
        };
        let matrix = assemble_matrix(&mesh, basis, lambda, sub_dt);
        let use_spectral = match solver {
            SolverChoice::Auto => mesh.is_uniform(),
            SolverChoice::Spectral => {
                if !mesh.is_uniform() {
                    return Err(Error::Config("the spectral solver requires a uniform mesh".into()));
                }
                true
            }
            SolverChoice::Banded => false,
        };
        let wrap = |e: Error| Error::Solver {
            key: key.to_string(),
            reason: e.to_string(),
        };
        let backend = if use_spectral {
            Backend::Spectral(SpectralSolver::new(&mesh, basis, lambda, sub_dt).map_err(wrap)?)
        } else {
            Backend::Banded(banded_backend(&matrix, layout).map_err(wrap)?)
        };
        Ok(Self {
            key,
            layout,
            mesh,
            basis,
            lambda,
            matrix,
            backend,
        })
    }

    pub fn key(&self) -> OperatorKey {
        self.key
    }

    pub fn layout(&self) -> SystemLayout {
        self.layout
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn sub_dt(&self) -> f64 {
        self.key.sub_dt
    }

    /// Solves the full system for an arbitrary right-hand side in the
    /// assembled ordering.
    pub fn solve_system(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.layout.size() {
            return Err(Error::InvalidInput(format!(
                "right-hand side has {} entries, system has {}",
                rhs.len(),
                self.layout.size()
            )));
        }
        let x = match &self.backend {
            Backend::Banded(s) => s.solve(rhs),
            Backend::Spectral(s) => s.solve(rhs),
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                key: self.key.to_string(),
                reason: "non-finite solution".into(),
            });
        }
        Ok(x)
    }

    /// One implicit step: returns the new coefficients and the coupled field.
    pub fn solve(&self, rhs: &HermiteState) -> Result<(HermiteState, FieldSolution)> {
        if rhs.basis() != self.basis || rhs.mesh().fingerprint() != self.key.mesh {
            return Err(Error::InvalidInput(format!(
                "state does not match operator {}",
                self.key
            )));
        }
        // Solve for the deviation from the global Maxwellian (C0 = 1, phi = 0,
        // mu = 0), which the operator maps to the constant Poisson data. An
        // equilibrium input then gives an exactly zero right-hand side.
        let n = self.layout.n_x;
        let mut b = Vec::with_capacity(self.layout.size());
        b.extend_from_slice(rhs.coeffs());
        b[..n].iter_mut().for_each(|c| *c -= 1.0);
        b.extend(std::iter::repeat(0.0).take(n + 1));
        let x = self.solve_system(&b)?;
        let mut out = rhs.clone();
        let nc = self.layout.modes * n;
        out.coeffs_mut().copy_from_slice(&x[..nc]);
        out.mode_mut(0).iter_mut().for_each(|c| *c += 1.0);
        let phi = x[nc..nc + n].to_vec();
        let mut e = vec![0.0; n];
        self.mesh.d_h_into(&phi, &mut e);
        e.iter_mut().for_each(|v| *v = -*v);
        Ok((
            out,
            FieldSolution {
                phi,
                e,
                lambda: self.lambda,
            },
        ))
    }
}

fn banded_backend(matrix: &CsrMatrix, layout: SystemLayout) -> Result<BorderedBandSolver> {
    let n = layout.n_x;
    let block = layout.modes + 1;
    let cell_pos = folded_cell_order(n);
    let mut perm = vec![0usize; layout.size() - 1];
    for j in 0..n {
        for k in 0..layout.modes {
            perm[layout.coeff(k, j)] = cell_pos[j] * block + k;
        }
        perm[layout.phi(j)] = cell_pos[j] * block + layout.modes;
    }
    BorderedBandSolver::new(matrix, perm, layout.phi(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};

    fn setup(n_x: usize, n_h: usize) -> (Arc<Mesh1D>, HermiteBasis) {
        (
            Arc::new(Mesh1D::uniform(-1.0, 2.0, n_x).unwrap()),
            HermiteBasis::new(1.3, n_h).unwrap(),
        )
    }

    fn dense_solve(m: &CsrMatrix, b: &[f64]) -> Vec<f64> {
        m.to_dense()
            .lu()
            .solve(&DVector::from_column_slice(b))
            .unwrap()
            .iter()
            .cloned()
            .collect()
    }

    #[test]
    fn both_backends_match_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (mesh, basis) = setup(5, 2);
        for choice in [SolverChoice::Banded, SolverChoice::Spectral] {
            for &(lambda, dt) in &[(0.1, 0.05), (1.0, 1.0), (1e-3, 10.0)] {
                let op = LinearStepOperator::new(Arc::clone(&mesh), basis, lambda, dt, choice).unwrap();
                let b: Vec<f64> = (0..op.layout().size()).map(|_| rng.gen::<f64>() - 0.5).collect();
                let x = op.solve_system(&b).unwrap();
                let y = dense_solve(op.matrix(), &b);
                let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (u, v) in x.iter().zip(&y) {
                    assert!((u - v).abs() <= 1e-10 * scale.max(1.0), "{choice}: {u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn nonuniform_mesh_uses_banded_backend() {
        let faces = [0.0, 0.1, 0.35, 0.5, 0.8, 1.0];
        let mesh = Arc::new(Mesh1D::from_faces(&faces).unwrap());
        let basis = HermiteBasis::new(1.0, 3).unwrap();
        let op = LinearStepOperator::new(Arc::clone(&mesh), basis, 0.2, 0.1, SolverChoice::Auto).unwrap();
        assert_eq!(op.backend().name(), "banded");
        assert!(LinearStepOperator::new(mesh, basis, 0.2, 0.1, SolverChoice::Spectral).is_err());
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let (mesh, basis) = setup(7, 4);
        let op = LinearStepOperator::new(Arc::clone(&mesh), basis, 0.1, 0.3, SolverChoice::Auto).unwrap();
        let eq = HermiteState::equilibrium(basis, mesh);
        let (next, field) = op.solve(&eq).unwrap();
        assert!(next.coeffs().iter().zip(eq.coeffs()).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(field.e.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn matrix_applied_to_manufactured_unknowns_gives_step_residual() {
        let (mesh, basis) = setup(7, 3);
        let (lambda, s) = (0.4, 0.2);
        let m = assemble_matrix(&mesh, basis, lambda, s);
        let layout = SystemLayout { n_x: 7, modes: 4 };
        let x: Vec<f64> = (0..layout.size()).map(|i| ((i * 7 + 3) as f64).sin()).collect();
        let ax = m.mul_vec(&x);
        let t0 = basis.t0();
        let c = |k: usize| -> Vec<f64> { (0..7).map(|j| x[layout.coeff(k, j)]).collect() };
        let phi: Vec<f64> = (0..7).map(|j| x[layout.phi(j)]).collect();
        let d = |u: &[f64]| mesh.d_h(u).unwrap();
        let e: Vec<f64> = d(&phi).iter().map(|v| -v).collect();
        for k in 0..4 {
            let ck = c(k);
            let lo = if k > 0 { d(&c(k - 1)) } else { vec![0.0; 7] };
            let hi = if k < 3 { d(&c(k + 1)) } else { vec![0.0; 7] };
            for j in 0..7 {
                let mut r = ck[j] + s * ((k as f64 * t0).sqrt() * lo[j] + ((k + 1) as f64 * t0).sqrt() * hi[j]);
                if k == 1 {
                    r -= s / t0.sqrt() * e[j];
                }
                assert!((ax[layout.coeff(k, j)] - r).abs() < 1e-13);
            }
        }
        let de = d(&e);
        let c0 = c(0);
        let mu = x[layout.multiplier()];
        for j in 0..7 {
            let r = lambda * lambda * de[j] - c0[j] + mesh.widths()[j] * mu;
            assert!((ax[layout.phi(j)] - r).abs() < 1e-13);
        }
        assert!((ax[layout.multiplier()] - mesh.cell_integral(&phi)).abs() < 1e-14);
    }
}
