//! Gauss quadrature for the Maxwellian measure `M(v) dv`, with
//! `M(v) = (2 pi T0)^{-1/2} exp(-v^2 / (2 T0))`.
//!
//! Nodes are the eigenvalues of the Jacobi matrix of the scaled Hermite
//! recurrence (Golub-Welsch), polished by Newton steps. Weights come from the
//! Christoffel sum evaluated with bounded Hermite functions, so the rule stays
//! usable at orders where the classical weights underflow.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Renormalization threshold for the scaled recurrence.
const RESCALE: f64 = 1e200;

#[derive(Debug, Clone)]
pub struct MaxwellianQuadrature {
    t0: f64,
    nodes: Vec<f64>,
    /// `sum_{l < Q} chi_l(v_i)^2`, where `chi_l = Psi_l / sqrt(M)`.
    christoffel: Vec<f64>,
}

impl MaxwellianQuadrature {
    pub fn new(t0: f64, order: usize) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidInput(format!("T0 must be positive, got {t0}")));
        }
        if order == 0 {
            return Err(Error::InvalidInput("quadrature order must be positive".into()));
        }
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let off = (t0 * k as f64).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eig = nalgebra::SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let scale = (order as f64 / t0).sqrt();
        for v in nodes.iter_mut() {
            for _ in 0..3 {
                let chi = hermite_functions(*v, t0, order + 1);
                let denom = scale * chi[order - 1];
                if denom == 0.0 || !denom.is_finite() {
                    break;
                }
                let step = chi[order] / denom;
                if !step.is_finite() {
                    break;
                }
                *v -= step;
            }
        }
        // the rule is symmetric about v = 0
        for i in 0..order / 2 {
            let m = 0.5 * (nodes[order - 1 - i] - nodes[i]);
            nodes[i] = -m;
            nodes[order - 1 - i] = m;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }

        let christoffel = nodes
            .iter()
            .map(|&v| hermite_functions(v, t0, order).iter().map(|c| c * c).sum())
            .collect();
        Ok(Self {
            t0,
            nodes,
            christoffel,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights of the rule for `integral g(v) M(v) dv`. They underflow to zero
    /// at the outermost nodes for large orders.
    pub fn weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.christoffel)
            .map(|(&v, s)| maxwellian(v, self.t0) / s)
            .collect()
    }

    /// `integral g(v) M(v) dv`.
    pub fn integrate_weighted(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights())
            .map(|(&v, w)| if w == 0.0 { 0.0 } else { w * g(v) })
            .sum()
    }

    pub(crate) fn christoffel(&self) -> &[f64] {
        &self.christoffel
    }
}

pub fn maxwellian(v: f64, t0: f64) -> f64 {
    (-v * v / (2.0 * t0)).exp() / (2.0 * std::f64::consts::PI * t0).sqrt()
}

/// Bounded Hermite functions `chi_k = Psi_k / sqrt(M)` for `k < n`.
///
/// `chi_0 = (2 pi T0)^{-1/4} exp(-v^2 / (4 T0))` and the `chi_k` obey the same
/// three-term recurrence as `Psi_k`. The recurrence is run in rescaled form
/// so that the tiny `chi_0` at large `|v|` does not underflow the whole chain.
pub fn hermite_functions(v: f64, t0: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let log_chi0 = -v * v / (4.0 * t0) - 0.25 * (2.0 * std::f64::consts::PI * t0).ln();
    let mut log_scale = log_chi0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = log_scale.exp();
    for k in 0..n - 1 {
        let kf = k as f64;
        let next = (v * cur - (t0 * kf).sqrt() * prev) / (t0 * (kf + 1.0)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
        }
        out[k + 1] = if cur == 0.0 {
            0.0
        } else {
            cur.signum() * (cur.abs().ln() + log_scale).exp()
        };
    }
    out
}
