//! Periodic 1D finite-volume mesh and the centered difference operator.
//!
//! Cells are `K_j = (x_{j-1/2}, x_{j+1/2})` for `j = 0..n_x`, with periodic
//! wrap-around so that cell `n_x - 1` neighbours cell `0`. The centered
//! operator is `(d_h u)_j = (u_{j+1} - u_{j-1}) / (2 dx_j)`.

use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

/// Relative tolerance under which two cell widths count as equal.
const UNIFORM_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    a: f64,
    b: f64,
    centers: Vec<f64>,
    widths: Vec<f64>,
    uniform: bool,
    fingerprint: u64,
}

/// Discrete `l2` and `h^r` norms of a cell field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub hr: f64,
}

impl Mesh1D {
    /// Uniform periodic mesh of `n_x` cells on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n_x: usize) -> Result<Self> {
        check_domain(a, b)?;
        if n_x < 3 {
            return Err(Error::InvalidInput(format!(
                "a periodic mesh needs at least 3 cells, got {n_x}"
            )));
        }
        let dx = (b - a) / n_x as f64;
        let centers = (0..n_x).map(|j| a + (j as f64 + 0.5) * dx).collect();
        Ok(Self::build(a, b, centers, vec![dx; n_x], true))
    }

    /// Mesh from an increasing list of `n_x + 1` face positions; the first and
    /// last faces are the domain endpoints.
    pub fn from_faces(faces: &[f64]) -> Result<Self> {
        if faces.len() < 4 {
            return Err(Error::InvalidInput(
                "need at least 4 faces (3 cells) for a periodic mesh".into(),
            ));
        }
        let a = faces[0];
        let b = faces[faces.len() - 1];
        check_domain(a, b)?;
        let mut centers = Vec::with_capacity(faces.len() - 1);
        let mut widths = Vec::with_capacity(faces.len() - 1);
        for w in faces.windows(2) {
            let dx = w[1] - w[0];
            if !(dx > 0.0 && dx.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "faces must be strictly increasing, found {} -> {}",
                    w[0], w[1]
                )));
            }
            centers.push(0.5 * (w[0] + w[1]));
            widths.push(dx);
        }
        let dx0 = widths[0];
        let uniform = widths
            .iter()
            .all(|dx| (dx - dx0).abs() <= UNIFORM_RTOL * dx0);
        Ok(Self::build(a, b, centers, widths, uniform))
    }

    fn build(a: f64, b: f64, centers: Vec<f64>, widths: Vec<f64>, uniform: bool) -> Self {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        a.to_bits().hash(&mut hasher);
        b.to_bits().hash(&mut hasher);
        for dx in &widths {
            dx.to_bits().hash(&mut hasher);
        }
        Self {
            a,
            b,
            centers,
            widths,
            uniform,
            fingerprint: hasher.finish(),
        }
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Domain length `b - a`.
    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Always true; the only topology supported.
    pub fn is_periodic(&self) -> bool {
        true
    }

    /// Largest cell width.
    pub fn h(&self) -> f64 {
        self.widths.iter().cloned().fold(0.0, f64::max)
    }

    /// `max dx_i / min dx_j`.
    pub fn regularity_ratio(&self) -> f64 {
        let min = self.widths.iter().cloned().fold(f64::INFINITY, f64::min);
        self.h() / min
    }

    /// Stable identifier of the geometry, used as a factorization cache key.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Rejects meshes whose centered operator has a checkerboard kernel.
    pub fn require_odd(&self) -> Result<()> {
        if self.len() % 2 == 0 {
            return Err(Error::Config(format!(
                "n_x = {} is even: the centered difference operator then annihilates the \
                 checkerboard mode (-1)^j as well as constants, so the periodic Poisson \
                 operator d_h(d_h .) is singular beyond the zero-mean constraint; use an odd n_x",
                self.len()
            )));
        }
        Ok(())
    }

    fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} entries but the mesh has {} cells",
                field.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Centered periodic difference `(u_{j+1} - u_{j-1}) / (2 dx_j)`.
    pub fn d_h(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.check_len(field)?;
        let mut out = vec![0.0; field.len()];
        self.d_h_into(field, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`Mesh1D::d_h`]; both slices must have `len()` entries.
    pub fn d_h_into(&self, field: &[f64], out: &mut [f64]) {
        let n = field.len();
        debug_assert_eq!(n, self.len());
        debug_assert_eq!(out.len(), n);
        for j in 0..n {
            let up = field[(j + 1) % n];
            let down = field[(j + n - 1) % n];
            out[j] = (up - down) / (2.0 * self.widths[j]);
        }
    }

    /// `sum_j dx_j u_j`.
    pub fn cell_integral(&self, field: &[f64]) -> f64 {
        field
            .iter()
            .zip(&self.widths)
            .map(|(u, dx)| u * dx)
            .sum()
    }

    /// `(sum_j dx_j u_j v_j)`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .zip(&self.widths)
            .map(|((a, b), dx)| a * b * dx)
            .sum()
    }

    pub fn norm_l2(&self, field: &[f64]) -> f64 {
        self.inner(field, field).sqrt()
    }

    /// `||u||_{h^r}^2 = sum_{s <= r} ||d_h^s u||_{l2}^2`.
    pub fn norm_hr(&self, field: &[f64], r: usize) -> f64 {
        let mut acc = self.inner(field, field);
        let mut cur = field.to_vec();
        let mut next = vec![0.0; cur.len()];
        for _ in 0..r {
            self.d_h_into(&cur, &mut next);
            acc += self.inner(&next, &next);
            std::mem::swap(&mut cur, &mut next);
        }
        acc.sqrt()
    }

    pub fn norms(&self, field: &[f64], r: usize) -> Result<Norms> {
        self.check_len(field)?;
        Ok(Norms {
            l2: self.norm_l2(field),
            hr: self.norm_hr(field, r),
        })
    }
}

fn check_domain(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidInput(format!(
            "domain endpoints must satisfy a < b, got [{a}, {b}]"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn constants_are_in_the_kernel() {
        let mesh = Mesh1D::uniform(-1.0, 2.0, 11).unwrap();
        let d = mesh.d_h(&[3.5; 11]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn centered_stencil_fourier_symbol() {
        let (a, b, n) = (-10.0, 10.0, 65);
        let mesh = Mesh1D::uniform(a, b, n).unwrap();
        let k = 3.0 * 2.0 * PI / (b - a);
        let dx = mesh.widths()[0];
        let u: Vec<f64> = mesh.centers().iter().map(|x| (k * x).sin()).collect();
        let d = mesh.d_h(&u).unwrap();
        for (x, dv) in mesh.centers().iter().zip(&d) {
            assert_abs_diff_eq!(*dv, (k * dx).sin() / dx * (k * x).cos(), epsilon = 1e-13);
        }
    }

    #[test]
    fn integral_of_difference_vanishes() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 9).unwrap();
        let u: Vec<f64> = (0..9).map(|j| ((j * j) as f64).sin() + j as f64).collect();
        let d = mesh.d_h(&u).unwrap();
        assert_abs_diff_eq!(mesh.cell_integral(&d), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn integral_of_difference_vanishes_on_nonuniform_mesh() {
        let mesh = Mesh1D::from_faces(&[0.0, 0.1, 0.35, 0.5, 0.8, 1.0]).unwrap();
        assert!(!mesh.is_uniform());
        let u = [1.0, -2.0, 0.5, 4.0, 3.0];
        let d = mesh.d_h(&u).unwrap();
        assert_abs_diff_eq!(mesh.cell_integral(&d), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn length_mismatch_rejected() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 5).unwrap();
        assert!(matches!(mesh.d_h(&[1.0; 4]), Err(Error::InvalidInput(_))));
        assert!(mesh.norms(&[1.0; 6], 1).is_err());
    }

    #[test]
    fn norms_of_zero_and_constant_fields() {
        let mesh = Mesh1D::uniform(-10.0, 10.0, 21).unwrap();
        let zero = mesh.norms(&[0.0; 21], 3).unwrap();
        assert_eq!(zero, Norms { l2: 0.0, hr: 0.0 });
        let c = 1.7;
        for r in 0..4 {
            let n = mesh.norms(&[c; 21], r).unwrap();
            assert_abs_diff_eq!(n.l2, c * 20f64.sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!(n.hr, n.l2, epsilon = 1e-12);
        }
    }

    #[test]
    fn h1_norm_matches_symbol_formula() {
        let (a, b, n) = (0.0, 2.0 * PI, 33);
        let mesh = Mesh1D::uniform(a, b, n).unwrap();
        let k = 4.0;
        let dx = mesh.widths()[0];
        let u: Vec<f64> = mesh.centers().iter().map(|x| (k * x).sin()).collect();
        // sum sin^2 = sum cos^2 = n/2 for a non-aliased mode
        let sigma = (k * dx).sin() / dx;
        let expected = ((1.0 + sigma * sigma) * (b - a) / 2.0).sqrt();
        assert_abs_diff_eq!(mesh.norm_hr(&u, 1), expected, epsilon = 1e-12);
    }

    #[test]
    fn cell_integral_of_unit_field() {
        let mesh = Mesh1D::uniform(-10.0, 10.0, 129).unwrap();
        assert_abs_diff_eq!(mesh.cell_integral(&vec![1.0; 129]), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn odd_field_integrates_to_zero_on_symmetric_mesh() {
        let mesh = Mesh1D::uniform(-3.0, 3.0, 31).unwrap();
        let u: Vec<f64> = mesh.centers().iter().map(|x| x.powi(3) - x).collect();
        assert_abs_diff_eq!(mesh.cell_integral(&u), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn even_cell_count_is_flagged() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 64).unwrap();
        let err = mesh.require_odd().unwrap_err().to_string();
        assert!(err.contains("checkerboard"));
        assert!(Mesh1D::uniform(0.0, 1.0, 65).unwrap().require_odd().is_ok());
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(Mesh1D::uniform(1.0, 1.0, 5).is_err());
        assert!(Mesh1D::uniform(0.0, 1.0, 2).is_err());
        assert!(Mesh1D::from_faces(&[0.0, 0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn regularity_ratio_reported() {
        let mesh = Mesh1D::from_faces(&[0.0, 0.1, 0.3, 0.6, 1.0]).unwrap();
        assert_abs_diff_eq!(mesh.regularity_ratio(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(Mesh1D::uniform(0.0, 1.0, 7).unwrap().regularity_ratio(), 1.0);
    }
}
