//! Initial data generators for the four benchmark problems.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mesh1D;
use crate::hermite::{HermiteBasis, HermiteState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// `(1 + delta lambda^(2 - alpha) cos(k x)) M(v)`.
    NearEquilibrium,
    /// Local Maxwellian with `T(x) = 1 + delta cos(k x)`.
    TemperaturePerturbation,
    /// Local Maxwellian times `1 + delta cos(k x) sin(3 pi v)`.
    OscillatoryPerturbation,
    /// `(1 + 5 v^2 / T) / 6` times a local Maxwellian.
    TwoStream,
}

impl CaseKind {
    pub const ALL: [CaseKind; 4] = [
        CaseKind::NearEquilibrium,
        CaseKind::TemperaturePerturbation,
        CaseKind::OscillatoryPerturbation,
        CaseKind::TwoStream,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::NearEquilibrium => "near_equilibrium",
            CaseKind::TemperaturePerturbation => "temperature_perturbation",
            CaseKind::OscillatoryPerturbation => "oscillatory_perturbation",
            CaseKind::TwoStream => "two_stream",
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown case `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseSpec {
    pub kind: CaseKind,
    pub delta: f64,
    /// Scaling exponent of the perturbation; used by the near-equilibrium case only.
    pub alpha: f64,
    pub k_x: f64,
    pub domain: (f64, f64),
    pub lambda: f64,
    pub t0: f64,
}

impl CaseSpec {
    /// Standard parameters of each problem.
    pub fn standard(kind: CaseKind, lambda: f64) -> Self {
        let (delta, k_x, domain) = match kind {
            CaseKind::NearEquilibrium | CaseKind::TemperaturePerturbation => {
                (0.1, PI / 10.0, (-10.0, 10.0))
            }
            CaseKind::OscillatoryPerturbation => (0.05, PI / 10.0, (-10.0, 10.0)),
            CaseKind::TwoStream => (0.01, PI / 6.0, (-6.0, 6.0)),
        };
        Self {
            kind,
            delta,
            alpha: 0.0,
            k_x,
            domain,
            lambda,
            t0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::ConfigKey {
                key: "case.delta".into(),
                message: format!("must be non-negative, got {}", self.delta),
            });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::ConfigKey {
                key: "case.alpha".into(),
                message: format!("must lie in [0, 1], got {}", self.alpha),
            });
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::ConfigKey {
                key: "scheme.lambda".into(),
                message: format!("must be positive, got {}", self.lambda),
            });
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::ConfigKey {
                key: "scheme.t0".into(),
                message: format!("must be positive, got {}", self.t0),
            });
        }
        let (a, b) = self.domain;
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(Error::ConfigKey {
                key: "case.domain".into(),
                message: format!("needs a < b, got [{a}, {b}]"),
            });
        }
        let periods = self.k_x * (b - a) / (2.0 * PI);
        if !(self.k_x > 0.0) || (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) || periods.round() < 1.0 {
            return Err(Error::ConfigKey {
                key: "case.k_x".into(),
                message: format!(
                    "k_x (b - a) must be a positive multiple of 2 pi for periodicity, got {} periods",
                    periods
                ),
            });
        }
        if self.kind == CaseKind::NearEquilibrium && self.t0 != 1.0 {
            return Err(Error::ConfigKey {
                key: "scheme.t0".into(),
                message: "the near-equilibrium data is a Maxwellian at temperature 1; use t0 = 1".into(),
            });
        }
        if self.kind != CaseKind::NearEquilibrium && self.delta >= 1.0 {
            return Err(Error::ConfigKey {
                key: "case.delta".into(),
                message: format!("T(x) = 1 + delta cos(k x) must stay positive, got delta = {}", self.delta),
            });
        }
        Ok(())
    }

    /// Local temperature `1 + delta cos(k_x x)`.
    pub fn temperature(&self, x: f64) -> f64 {
        1.0 + self.delta * (self.k_x * x).cos()
    }
}

/// Quadrature order used for non-Maxwellian profiles.
pub fn case_quadrature_order(basis: HermiteBasis) -> usize {
    (2 * basis.n_h() + 8).max(256)
}

/// Initial state for `spec` on `mesh`.
pub fn generate(spec: &CaseSpec, basis: HermiteBasis, mesh: Arc<Mesh1D>) -> Result<HermiteState> {
    spec.validate()?;
    if basis.t0() != spec.t0 {
        return Err(Error::Config(format!(
            "basis temperature {} differs from the case temperature {}",
            basis.t0(),
            spec.t0
        )));
    }
    if (mesh.a() - spec.domain.0).abs() > 1e-12 || (mesh.b() - spec.domain.1).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "mesh [{}, {}] does not cover the case domain [{}, {}]",
            mesh.a(),
            mesh.b(),
            spec.domain.0,
            spec.domain.1
        )));
    }
    match spec.kind {
        CaseKind::NearEquilibrium => near_equilibrium(spec, basis, mesh),
        CaseKind::TemperaturePerturbation => temperature_perturbation(spec, basis, mesh),
        CaseKind::OscillatoryPerturbation => oscillatory_perturbation(spec, basis, mesh),
        CaseKind::TwoStream => two_stream(spec, basis, mesh),
    }
}

/// `C_0 = 1 + delta lambda^(2 - alpha) cos(k_x x)`, all other modes zero.
pub fn near_equilibrium(spec: &CaseSpec, basis: HermiteBasis, mesh: Arc<Mesh1D>) -> Result<HermiteState> {
    let amp = spec.delta * spec.lambda.powf(2.0 - spec.alpha);
    let mut state = HermiteState::zeros(basis, mesh);
    let centers = state.mesh().centers().to_vec();
    for (c, x) in state.mode_mut(0).iter_mut().zip(&centers) {
        *c = 1.0 + amp * (spec.k_x * x).cos();
    }
    Ok(state)
}

fn local_maxwellian(v: f64, temp: f64) -> f64 {
    (-v * v / (2.0 * temp)).exp() / (2.0 * PI * temp).sqrt()
}

fn project_cells(
    spec: &CaseSpec,
    basis: HermiteBasis,
    mesh: Arc<Mesh1D>,
    profile: impl Fn(f64, f64, f64) -> f64,
) -> Result<HermiteState> {
    let projector = basis.projector(case_quadrature_order(basis))?;
    let cells: Vec<Vec<f64>> = mesh
        .centers()
        .iter()
        .map(|&x| {
            let temp = spec.temperature(x);
            projector.project(|v| profile(x, v, temp))
        })
        .collect();
    HermiteState::from_cells(basis, mesh, &cells)
}

pub fn temperature_perturbation(spec: &CaseSpec, basis: HermiteBasis, mesh: Arc<Mesh1D>) -> Result<HermiteState> {
    project_cells(spec, basis, mesh, |_, v, temp| local_maxwellian(v, temp))
}

pub fn oscillatory_perturbation(spec: &CaseSpec, basis: HermiteBasis, mesh: Arc<Mesh1D>) -> Result<HermiteState> {
    let (delta, k_x) = (spec.delta, spec.k_x);
    project_cells(spec, basis, mesh, move |x, v, temp| {
        (1.0 + delta * (k_x * x).cos() * (3.0 * PI * v).sin()) * local_maxwellian(v, temp)
    })
}

pub fn two_stream(spec: &CaseSpec, basis: HermiteBasis, mesh: Arc<Mesh1D>) -> Result<HermiteState> {
    project_cells(spec, basis, mesh, |_, v, temp| {
        (1.0 + 5.0 * v * v / temp) / 6.0 * local_maxwellian(v, temp)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn setup(kind: CaseKind, n_x: usize, n_h: usize) -> (CaseSpec, HermiteBasis, Arc<Mesh1D>) {
        let spec = CaseSpec::standard(kind, 0.1);
        let mesh = Arc::new(Mesh1D::uniform(spec.domain.0, spec.domain.1, n_x).unwrap());
        (spec, HermiteBasis::new(1.0, n_h).unwrap(), mesh)
    }

    #[test]
    fn near_equilibrium_value_at_origin_and_mass() {
        let (spec, basis, mesh) = setup(CaseKind::NearEquilibrium, 21, 8);
        let s = generate(&spec, basis, Arc::clone(&mesh)).unwrap();
        // the center of cell 10 is x = 0
        assert_abs_diff_eq!(mesh.centers()[10], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.mode(0)[10], 1.001, epsilon = 1e-14);
        assert_abs_diff_eq!(mesh.cell_integral(s.mode(0)), 20.0, epsilon = 1e-12);
        assert!(s.coeffs()[21..].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn near_equilibrium_matches_quadrature_projection() {
        let (mut spec, basis, mesh) = setup(CaseKind::NearEquilibrium, 9, 10);
        spec.alpha = 0.5;
        let s = generate(&spec, basis, Arc::clone(&mesh)).unwrap();
        let amp = spec.delta * spec.lambda.powf(1.5);
        for (j, &x) in mesh.centers().iter().enumerate() {
            let c = basis
                .project(|v| (1.0 + amp * (spec.k_x * x).cos()) * local_maxwellian(v, 1.0), 128)
                .unwrap();
            for k in 0..basis.modes() {
                assert_abs_diff_eq!(c[k], s.cell(j)[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_amplitude_gives_steady_state() {
        for kind in CaseKind::ALL {
            let (mut spec, basis, mesh) = setup(kind, 7, 12);
            spec.delta = 0.0;
            let s = generate(&spec, basis, Arc::clone(&mesh)).unwrap();
            if kind == CaseKind::TwoStream {
                assert!(s.mode(0).iter().all(|c| (c - 1.0).abs() < 1e-12));
                let first = s.cell(0);
                for j in 1..7 {
                    assert_eq!(s.cell(j), first);
                }
            } else {
                let eq = HermiteState::equilibrium(basis, mesh);
                for (a, b) in s.coeffs().iter().zip(eq.coeffs()) {
                    assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn temperature_case_moments() {
        let (spec, basis, mesh) = setup(CaseKind::TemperaturePerturbation, 11, 24);
        let s = generate(&spec, basis, Arc::clone(&mesh)).unwrap();
        for (m, &x) in s.moments().iter().zip(mesh.centers()) {
            assert_abs_diff_eq!(m.rho, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(m.current, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(m.kinetic, spec.temperature(x), epsilon = 1e-10);
        }
        for k in (1..basis.modes()).step_by(2) {
            assert!(s.mode(k).iter().all(|c| c.abs() < 1e-12));
        }
    }

    #[test]
    fn oscillatory_and_two_stream_densities() {
        for kind in [CaseKind::OscillatoryPerturbation, CaseKind::TwoStream] {
            let (spec, basis, mesh) = setup(kind, 13, 64);
            let s = generate(&spec, basis, Arc::clone(&mesh)).unwrap();
            for m in s.moments() {
                assert_abs_diff_eq!(m.rho, 1.0, epsilon = 1e-10);
                assert!(m.current.abs() < 1e-10);
            }
            assert_abs_diff_eq!(mesh.cell_integral(s.mode(0)), spec.domain.1 - spec.domain.0, epsilon = 1e-10);
            assert!(mesh.cell_integral(s.mode(1)).abs() < 1e-10);
        }
    }

    #[test]
    fn two_stream_is_bimodal() {
        let (spec, basis, mesh) = setup(CaseKind::TwoStream, 5, 48);
        let s = generate(&spec, basis, mesh).unwrap();
        let v: Vec<f64> = (0..=200).map(|i| -5.0 + 0.05 * i as f64).collect();
        let f = s.reconstruct(&v).unwrap();
        let row: Vec<f64> = (0..v.len()).map(|m| f[(2, m)]).collect();
        let maxima: Vec<f64> = (1..v.len() - 1)
            .filter(|&m| row[m] > row[m - 1] && row[m] > row[m + 1])
            .map(|m| v[m])
            .collect();
        assert_eq!(maxima.len(), 2, "{maxima:?}");
        assert_abs_diff_eq!(maxima[0], -maxima[1], epsilon = 1e-9);
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = CaseSpec::standard(CaseKind::TemperaturePerturbation, 0.1);
        let mut s = base;
        s.delta = 1.5;
        assert!(s.validate().is_err());
        let mut s = base;
        s.k_x = 1.0;
        assert!(s.validate().is_err());
        let mut s = base;
        s.alpha = 2.0;
        assert!(s.validate().is_err());
        assert!("bogus".parse::<CaseKind>().is_err());
        assert_eq!("two_stream".parse::<CaseKind>().unwrap(), CaseKind::TwoStream);
    }
}
