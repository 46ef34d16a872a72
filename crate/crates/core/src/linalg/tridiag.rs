//! Complex tridiagonal LU with partial pivoting (`gttrf`/`gttrs`).

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TridiagLu {
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
    upper2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    /// `lower[i] = A(i+1, i)`, `diag[i] = A(i, i)`, `upper[i] = A(i, i+1)`.
    pub fn factor(
        mut lower: Vec<Complex64>,
        mut diag: Vec<Complex64>,
        mut upper: Vec<Complex64>,
    ) -> Result<Self> {
        let n = diag.len();
        if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(Error::InvalidInput("inconsistent tridiagonal sizes".into()));
        }
        let mut upper2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if diag[i].norm() >= lower[i].norm() {
                if diag[i].norm() != 0.0 {
                    let fact = lower[i] / diag[i];
                    lower[i] = fact;
                    diag[i + 1] -= fact * upper[i];
                }
            } else {
                let fact = diag[i] / lower[i];
                diag[i] = lower[i];
                lower[i] = fact;
                let temp = upper[i];
                upper[i] = diag[i + 1];
                diag[i + 1] = temp - fact * diag[i + 1];
                if i + 2 < n {
                    upper2[i] = upper[i + 1];
                    upper[i + 1] = -fact * upper[i + 1];
                }
                swapped[i] = true;
            }
        }
        if let Some(i) = diag.iter().position(|d| !(d.norm() > 0.0) || !d.is_finite()) {
            return Err(Error::Singular(format!(
                "zero pivot at row {i} of a {n}x{n} tridiagonal system"
            )));
        }
        Ok(Self {
            lower,
            diag,
            upper,
            upper2,
            swapped,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.diag.len();
        assert_eq!(b.len(), n);
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.lower[i] * b[i];
            } else {
                b[i + 1] -= self.lower[i] * b[i];
            }
        }
        b[n - 1] /= self.diag[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.upper[n - 2] * b[n - 1]) / self.diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.upper[i] * b[i + 1] - self.upper2[i] * b[i + 2]) / self.diag[i];
        }
    }
}
