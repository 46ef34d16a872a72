//! Banded LU with partial pivoting (the unblocked `gbtf2`/`gbtrs` pair) and
//! a bordered wrapper for systems with one dense constraint row and column.

use crate::error::{Error, Result};
use crate::linalg::sparse::CsrMatrix;

/// LU factors of a band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage follows LAPACK: column-major, leading dimension `2 kl + ku + 1`,
/// with `A(i, j)` at row `kl + ku + i - j` of column `j`. The extra `kl`
/// rows hold fill-in produced by row interchanges.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Factors the `n x n` matrix given by `entries` (row, column, value).
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let ldab = 2 * kl + ku + 1;
        let kv = kl + ku;
        let mut ab = vec![0.0; ldab * n];
        for (i, j, v) in entries {
            if i > j + kl || j > i + ku {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) lies outside the band (kl = {kl}, ku = {ku})"
                )));
            }
            ab[kv + i - j + j * ldab] += v;
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv: vec![0; n],
        };
        lu.factor_in_place()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ldab
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = self.ab[self.idx(j, j)].abs();
            for t in 1..=km {
                let a = self.ab[self.idx(j + t, j)].abs();
                if a > best {
                    best = a;
                    jp = t;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(format!(
                    "zero pivot in column {j} of a {n}x{n} band matrix"
                )));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let (a, b) = (self.idx(j, c), self.idx(j + jp, c));
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let pivot = self.ab[self.idx(j, j)];
                for t in 1..=km {
                    let id = self.idx(j + t, j);
                    self.ab[id] /= pivot;
                }
                for c in j + 1..=ju {
                    let u = self.ab[self.idx(j, c)];
                    if u == 0.0 {
                        continue;
                    }
                    for t in 1..=km {
                        let l = self.ab[self.idx(j + t, j)];
                        let id = self.idx(j + t, c);
                        self.ab[id] -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for j in 0..n.saturating_sub(1) {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let lm = self.kl.min(n - 1 - j);
                for t in 1..=lm {
                    b[j + t] -= self.ab[self.idx(j + t, j)] * bj;
                }
            }
        }
        let kv = self.kl + self.ku;
        for c in (0..n).rev() {
            b[c] /= self.ab[self.idx(c, c)];
            let bc = b[c];
            if bc != 0.0 {
                for i in c.saturating_sub(kv)..c {
                    b[i] -= self.ab[self.idx(i, c)] * bc;
                }
            }
        }
    }
}

/// Direct solver for `[A b; c^T d] [x; mu] = [r; s]` where `A` is banded
/// after a permutation but rank deficient by one, and the last row and column
/// of the full matrix are dense.
///
/// `A` is regularized by a diagonal shift `beta` at one pin index; the
/// bordered system is then recovered from two cached solves and a 2x2
/// capacitance system.
#[derive(Debug, Clone)]
pub struct BorderedBandSolver {
    n: usize,
    /// `perm[old] = new` for the core unknowns.
    perm: Vec<usize>,
    core: BandLu,
    pin: usize,
    beta: f64,
    border_row: Vec<f64>,
    corner: f64,
    y_pin: Vec<f64>,
    y_col: Vec<f64>,
    capacitance: [[f64; 2]; 2],
}

impl BorderedBandSolver {
    /// `matrix` is `(n+1) x (n+1)` with the border in its last row and column;
    /// `perm[old] = new` reorders the core for a narrow band; `pin` is the
    /// (original) index regularized by the diagonal shift.
    pub fn new(matrix: &CsrMatrix, perm: Vec<usize>, pin: usize) -> Result<Self> {
        let total = matrix.nrows();
        if total < 2 || matrix.ncols() != total {
            return Err(Error::InvalidInput("bordered solver needs a square matrix".into()));
        }
        let n = total - 1;
        if perm.len() != n || pin >= n {
            return Err(Error::InvalidInput("permutation or pin out of range".into()));
        }
        let mut border_col = vec![0.0; n];
        let mut border_row = vec![0.0; n];
        let mut corner = 0.0;
        let mut core_entries = Vec::with_capacity(matrix.nnz());
        let mut kl = 0usize;
        let mut ku = 0usize;
        let mut beta = 0.0f64;
        for r in 0..total {
            for (c, v) in matrix.row(r) {
                match (r == n, c == n) {
                    (true, true) => corner += v,
                    (true, false) => border_row[c] += v,
                    (false, true) => border_col[r] += v,
                    (false, false) => {
                        let (pr, pc) = (perm[r], perm[c]);
                        if pr > pc {
                            kl = kl.max(pr - pc);
                        } else {
                            ku = ku.max(pc - pr);
                        }
                        if r == pin {
                            beta = beta.max(v.abs());
                        }
                        core_entries.push((pr, pc, v));
                    }
                }
            }
        }
        if beta == 0.0 {
            beta = 1.0;
        }
        core_entries.push((perm[pin], perm[pin], beta));
        let core = BandLu::factor(n, kl, ku, core_entries)?;

        let mut solver = Self {
            n,
            perm,
            core,
            pin,
            beta,
            border_row,
            corner,
            y_pin: Vec::new(),
            y_col: Vec::new(),
            capacitance: [[0.0; 2]; 2],
        };
        let mut e = vec![0.0; n];
        e[pin] = 1.0;
        solver.y_pin = solver.core_solve(&e);
        solver.y_col = solver.core_solve(&border_col);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        solver.capacitance = [
            [1.0 - beta * solver.y_pin[pin], solver.y_col[pin]],
            [
                beta * dot(&solver.border_row, &solver.y_pin),
                solver.corner - dot(&solver.border_row, &solver.y_col),
            ],
        ];
        let c = solver.capacitance;
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let scale = c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(Error::Singular(format!(
                "bordered system is singular (capacitance determinant {det:e})"
            )));
        }
        Ok(solver)
    }

    /// Size of the full bordered system.
    pub fn size(&self) -> usize {
        self.n + 1
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        self.core.bandwidths()
    }

    fn core_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut work = vec![0.0; self.n];
        for (old, v) in rhs.iter().enumerate() {
            work[self.perm[old]] = *v;
        }
        self.core.solve_in_place(&mut work);
        (0..self.n).map(|old| work[self.perm[old]]).collect()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n + 1);
        let y_r = self.core_solve(&rhs[..self.n]);
        let s = rhs[self.n];
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let g0 = y_r[self.pin];
        let g1 = s - dot(&self.border_row, &y_r);
        let c = self.capacitance;
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let xi = (g0 * c[1][1] - c[0][1] * g1) / det;
        let mu = (c[0][0] * g1 - c[1][0] * g0) / det;
        let mut x: Vec<f64> = y_r
            .iter()
            .zip(&self.y_pin)
            .zip(&self.y_col)
            .map(|((yr, ye), yb)| yr + self.beta * xi * ye - mu * yb)
            .collect();
        x.push(mu);
        x
    }
}

/// Folded ordering of periodic cells, `0, n-1, 1, n-2, ...`, returned as
/// `position[cell]`. Neighbours at periodic distance `d` end up at most `2d`
/// positions apart.
pub fn folded_cell_order(n: usize) -> Vec<usize> {
    (0..n)
        .map(|j| if 2 * j < n { 2 * j } else { 2 * (n - 1 - j) + 1 })
        .collect()
}
