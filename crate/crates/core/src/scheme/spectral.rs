//! Fourier-diagonalized solver for the implicit system on uniform meshes.
//!
//! On a uniform periodic mesh `d_h` is diagonal in the discrete Fourier basis
//! with symbol `i sin(2 pi m / N) / dx`. Eliminating the potential mode by
//! mode leaves, for each wavenumber, a tridiagonal system in the Hermite index.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Mesh1D;
use crate::hermite::HermiteBasis;
use crate::linalg::TridiagLu;

pub struct SpectralSolver {
    n: usize,
    modes: usize,
    dx: f64,
    lambda: f64,
    sub_dt: f64,
    t0: f64,
    /// Factors for wavenumbers `1..=(n-1)/2`; the others follow by conjugation.
    factors: Vec<TridiagLu>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSolver")
            .field("n", &self.n)
            .field("modes", &self.modes)
            .field("dx", &self.dx)
            .field("lambda", &self.lambda)
            .field("sub_dt", &self.sub_dt)
            .finish_non_exhaustive()
    }
}

impl SpectralSolver {
    pub fn new(mesh: &Mesh1D, basis: HermiteBasis, lambda: f64, sub_dt: f64) -> Result<Self> {
        if !mesh.is_uniform() {
            return Err(Error::Config("the spectral solver requires a uniform mesh".into()));
        }
        mesh.require_odd()?;
        let n = mesh.len();
        let modes = basis.modes();
        let t0 = basis.t0();
        let dx = mesh.h();
        let l2 = lambda * lambda;
        let mut factors = Vec::with_capacity(n / 2);
        for m in 1..=(n - 1) / 2 {
            let d = symbol(m, n, dx);
            let lower: Vec<Complex64> = (1..modes)
                .map(|k| {
                    let mut v = d * (sub_dt * (k as f64 * t0).sqrt());
                    if k == 1 {
                        v -= sub_dt / (t0.sqrt() * l2) / d;
                    }
                    v
                })
                .collect();
            let upper: Vec<Complex64> = (0..modes - 1)
                .map(|k| d * (sub_dt * ((k + 1) as f64 * t0).sqrt()))
                .collect();
            let diag = vec![Complex64::new(1.0, 0.0); modes];
            factors.push(TridiagLu::factor(lower, diag, upper)?);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            modes,
            dx,
            lambda,
            sub_dt,
            t0,
            factors,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    /// Solves the assembled system (same unknown ordering) for `rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, modes) = (self.n, self.modes);
        let blocks = modes + 1;
        assert_eq!(rhs.len(), blocks * n + 1);
        let mut buf: Vec<Complex64> = rhs[..blocks * n]
            .iter()
            .map(|v| Complex64::new(*v, 0.0))
            .collect();
        self.forward.process(&mut buf);

        let l2 = self.lambda * self.lambda;
        let coupling = self.sub_dt / (self.t0.sqrt() * l2);
        let mut x = vec![Complex64::new(0.0, 0.0); modes];
        for m in 1..=(n - 1) / 2 {
            let d = symbol(m, n, self.dx);
            let p = buf[modes * n + m];
            for (k, xk) in x.iter_mut().enumerate() {
                *xk = buf[k * n + m];
            }
            x[1] += p * coupling / d;
            self.factors[m - 1].solve_in_place(&mut x);
            let phi = -(p + x[0]) / (d * d * l2);
            for (k, xk) in x.iter().enumerate() {
                buf[k * n + m] = *xk;
                buf[k * n + n - m] = xk.conj();
            }
            buf[modes * n + m] = phi;
            buf[modes * n + n - m] = phi.conj();
        }
        let p0 = buf[modes * n];
        let c00 = buf[0];
        let nf = n as f64;
        let mu = (p0.re + c00.re) / (nf * self.dx);
        buf[modes * n] = Complex64::new(rhs[blocks * n] / self.dx, 0.0);

        self.inverse.process(&mut buf);
        let mut out: Vec<f64> = buf.iter().map(|c| c.re / nf).collect();
        out.push(mu);
        out
    }
}

fn symbol(m: usize, n: usize, dx: f64) -> Complex64 {
    let theta = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
    Complex64::new(0.0, theta.sin() / dx)
}
