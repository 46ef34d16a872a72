//! Periodic Poisson solve `-lambda^2 d_h(d_h phi) = C0 - 1` with a zero-mean
//! potential, and the field `E = -d_h phi`.
//!
//! The Laplacian is the composition of the centered operator with itself (a
//! five-point stencil), so that `lambda^2 d_h E = C0 - 1` holds exactly with
//! the same `d_h` the transport uses. The zero-mean condition enters through a
//! Lagrange multiplier appended as one extra row and column.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Mesh1D;
use crate::linalg::{folded_cell_order, BorderedBandSolver, CsrMatrix, TripletBuilder};

/// Neutrality tolerance on `sum_j dx_j (C0_j - 1)`.
pub const SOLVABILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub phi: Vec<f64>,
    pub e: Vec<f64>,
    pub lambda: f64,
}

impl FieldSolution {
    pub fn zeros(n_x: usize, lambda: f64) -> Self {
        Self {
            phi: vec![0.0; n_x],
            e: vec![0.0; n_x],
            lambda,
        }
    }

    /// `max_j |lambda^2 (d_h E)_j - (C0_j - 1)|`.
    pub fn composition_defect(&self, mesh: &Mesh1D, c0: &[f64]) -> Result<f64> {
        let de = mesh.d_h(&self.e)?;
        let l2 = self.lambda * self.lambda;
        Ok(de
            .iter()
            .zip(c0)
            .map(|(d, c)| (l2 * d - (c - 1.0)).abs())
            .fold(0.0, f64::max))
    }
}

/// `(d_h d_h)` as triplets `(row, col, value)` over cell indices.
pub(crate) fn second_difference_entries(mesh: &Mesh1D) -> Vec<(usize, usize, f64)> {
    let n = mesh.len();
    let w = mesh.widths();
    let mut out = Vec::with_capacity(4 * n);
    for j in 0..n {
        let up = (j + 1) % n;
        let down = (j + n - 1) % n;
        let sj = 1.0 / (2.0 * w[j]);
        // (d_h u)_up = (u_{up+1} - u_j) / (2 dx_up), (d_h u)_down = (u_j - u_{down-1}) / (2 dx_down)
        let su = sj / (2.0 * w[up]);
        let sd = sj / (2.0 * w[down]);
        out.push((j, (up + 1) % n, su));
        out.push((j, j, -su - sd));
        out.push((j, (down + n - 1) % n, sd));
    }
    out
}

pub fn check_neutrality(mesh: &Mesh1D, c0: &[f64]) -> Result<()> {
    let defect: f64 = c0
        .iter()
        .zip(mesh.widths())
        .map(|(c, dx)| (c - 1.0) * dx)
        .sum();
    if !(defect.abs() <= SOLVABILITY_TOL) {
        return Err(Error::Solvability { defect });
    }
    Ok(())
}

/// Factored Poisson operator for one `(mesh, lambda)` pair.
#[derive(Debug, Clone)]
pub struct PoissonSolver {
    mesh: Arc<Mesh1D>,
    lambda: f64,
    solver: BorderedBandSolver,
}

impl PoissonSolver {
    pub fn new(mesh: Arc<Mesh1D>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        mesh.require_odd()?;
        let matrix = assemble_poisson(&mesh, lambda);
        let solver = BorderedBandSolver::new(&matrix, folded_cell_order(mesh.len()), 0)?;
        Ok(Self {
            mesh,
            lambda,
            solver,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn solve(&self, c0: &[f64]) -> Result<FieldSolution> {
        let n = self.mesh.len();
        if c0.len() != n {
            return Err(Error::InvalidInput(format!(
                "density has {} entries but the mesh has {n} cells",
                c0.len()
            )));
        }
        check_neutrality(&self.mesh, c0)?;
        let mut rhs: Vec<f64> = c0.iter().map(|c| c - 1.0).collect();
        rhs.push(0.0);
        let mut phi = self.solver.solve(&rhs);
        phi.truncate(n);
        let mut e = self.mesh.d_h(&phi)?;
        e.iter_mut().for_each(|v| *v = -*v);
        Ok(FieldSolution {
            phi,
            e,
            lambda: self.lambda,
        })
    }
}

/// `(n+1) x (n+1)` system: `-lambda^2 d_h d_h phi + dx mu = rhs`, `sum dx phi = 0`.
pub fn assemble_poisson(mesh: &Mesh1D, lambda: f64) -> CsrMatrix {
    let n = mesh.len();
    let l2 = lambda * lambda;
    let mut b = TripletBuilder::new(n + 1, n + 1);
    for (r, c, v) in second_difference_entries(mesh) {
        b.push(r, c, -l2 * v);
    }
    for (j, dx) in mesh.widths().iter().enumerate() {
        b.push(j, n, *dx);
        b.push(n, j, *dx);
    }
    b.build()
}

/// One-shot convenience wrapper around [`PoissonSolver`].
pub fn solve_poisson(c0: &[f64], lambda: f64, mesh: &Arc<Mesh1D>) -> Result<FieldSolution> {
    PoissonSolver::new(Arc::clone(mesh), lambda)?.solve(c0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rustfft::{num_complex::Complex64, FftPlanner};

    fn mesh(n: usize) -> Arc<Mesh1D> {
        Arc::new(Mesh1D::uniform(-10.0, 10.0, n).unwrap())
    }

    fn perturbed(mesh: &Mesh1D, eps: f64, k: f64) -> Vec<f64> {
        mesh.centers().iter().map(|x| 1.0 + eps * (k * x).cos()).collect()
    }

    #[test]
    fn neutral_background_gives_zero_field() {
        let m = mesh(33);
        let f = solve_poisson(&vec![1.0; 33], 0.3, &m).unwrap();
        assert!(f.phi.iter().chain(&f.e).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn matches_dense_oracle() {
        let m = mesh(41);
        let lambda = 0.2;
        let c0 = perturbed(&m, 1e-3, std::f64::consts::PI / 10.0);
        let f = solve_poisson(&c0, lambda, &m).unwrap();
        let n = m.len();
        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        let d = DMatrix::from_fn(n, n, |i, j| {
            let h = 2.0 * m.widths()[i];
            if j == (i + 1) % n {
                1.0 / h
            } else if j == (i + n - 1) % n {
                -1.0 / h
            } else {
                0.0
            }
        });
        let lap = &d * &d;
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = -lambda * lambda * lap[(i, j)];
            }
            a[(i, n)] = m.widths()[i];
            a[(n, i)] = m.widths()[i];
        }
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = c0[i] - 1.0;
        }
        let x = a.lu().solve(&rhs).unwrap();
        let phi = x.rows(0, n).into_owned();
        let e = -(&d * phi);
        for j in 0..n {
            assert_abs_diff_eq!(f.e[j], e[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_fourier_oracle() {
        let n = 63;
        let m = mesh(n);
        let lambda = 0.5;
        let c0: Vec<f64> = m
            .centers()
            .iter()
            .map(|x| 1.0 + 0.01 * (0.1 * std::f64::consts::PI * x).cos() - 0.02 * (0.3 * std::f64::consts::PI * x).sin())
            .collect();
        let f = solve_poisson(&c0, lambda, &m).unwrap();

        let dx = m.h();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut buf: Vec<Complex64> = c0.iter().map(|c| Complex64::new(c - 1.0, 0.0)).collect();
        fwd.process(&mut buf);
        for (mode, v) in buf.iter_mut().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * mode as f64 / n as f64;
            let sym = Complex64::new(0.0, theta.sin() / dx);
            // E_hat = -sym * phi_hat, phi_hat = -rho_hat / (lambda^2 sym^2)
            *v = if mode == 0 { Complex64::new(0.0, 0.0) } else { *v / (lambda * lambda * sym) };
        }
        inv.process(&mut buf);
        for j in 0..n {
            assert_abs_diff_eq!(f.e[j], buf[j].re / n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn composition_identity_and_zero_mean() {
        let m = mesh(65);
        let c0 = perturbed(&m, 0.05, std::f64::consts::PI / 5.0);
        let f = solve_poisson(&c0, 0.1, &m).unwrap();
        assert!(f.composition_defect(&m, &c0).unwrap() < 1e-12);
        assert!(m.cell_integral(&f.phi).abs() < 1e-12);
        assert!(m.cell_integral(&f.e).abs() < 1e-12);
    }

    #[test]
    fn field_scales_with_inverse_lambda_squared() {
        let m = mesh(31);
        let c0 = perturbed(&m, 1e-2, std::f64::consts::PI / 10.0);
        let e1 = solve_poisson(&c0, 0.1, &m).unwrap();
        let e2 = solve_poisson(&c0, 0.2, &m).unwrap();
        assert_abs_diff_eq!(m.norm_l2(&e1.e), 4.0 * m.norm_l2(&e2.e), epsilon = 1e-12);
        let small = solve_poisson(&perturbed(&m, 1e-4, std::f64::consts::PI / 10.0), 0.1, &m).unwrap();
        assert_abs_diff_eq!(m.norm_l2(&e1.e), 100.0 * m.norm_l2(&small.e), epsilon = 1e-10);
    }

    #[test]
    fn nonuniform_mesh_keeps_identity() {
        let faces: Vec<f64> = (0..=21)
            .map(|i| {
                let s = i as f64 / 21.0;
                -1.0 + 2.0 * s + 0.05 * (2.0 * std::f64::consts::PI * s).sin()
            })
            .collect();
        let m = Arc::new(Mesh1D::from_faces(&faces).unwrap());
        let raw: Vec<f64> = m.centers().iter().map(|x| (3.0 * x).cos()).collect();
        let mean = m.cell_integral(&raw) / m.length();
        let c0: Vec<f64> = raw.iter().map(|r| 1.0 + 0.1 * (r - mean)).collect();
        let f = solve_poisson(&c0, 0.3, &m).unwrap();
        assert!(f.composition_defect(&m, &c0).unwrap() < 1e-11);
        assert!(m.cell_integral(&f.phi).abs() < 1e-13);
    }

    #[test]
    fn rejects_charged_density_and_even_mesh() {
        let m = mesh(21);
        let err = solve_poisson(&vec![1.1; 21], 0.1, &m).unwrap_err();
        assert!(matches!(err, Error::Solvability { .. }));
        let even = mesh(20);
        let err = solve_poisson(&vec![1.0; 20], 0.1, &even).unwrap_err();
        assert!(matches!(err, Error::Config(ref msg) if msg.contains("checkerboard")));
        assert!(solve_poisson(&vec![1.0; 21], 0.0, &m).is_err());
    }
}
