//! Condensed primal-dual KKT system
//!
//! ```txt
//!     [ W + Σ_x + J_gᵀ Σ_s J_g + δ_w I     J_hᵀ  ] [dz]   [r_z]
//!     [ J_h                              -δ_c I ] [dy] = [r_y]
//! ```
//!
//! factorized with a sparse LDLᵀ (no pivoting). The inertia of the
//! factorization decides whether the primal regularization `δ_w` must grow.

use clarabel::algebra::CscMatrix;
use clarabel::qdldl::{QDLDLFactorisation, QDLDLSettingsBuilder};

use crate::problem::Triplets;

const DELTA_W_FIRST: f64 = 1e-6;
const DELTA_W_MIN: f64 = 1e-14;
const DELTA_W_MAX: f64 = 1e20;
pub(crate) const DELTA_C: f64 = 1e-9;

pub(crate) struct KktInputs<'a> {
    pub hessian: &'a Triplets,
    pub primal_diag: &'a [f64],
    pub ineq_jac: &'a Triplets,
    pub ineq_sigma: &'a [f64],
    pub eq_jac: &'a Triplets,
}

pub(crate) struct KktSolver {
    n: usize,
    m: usize,
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    factor: Option<QDLDLFactorisation<f64>>,
    matrix: Option<CscMatrix<f64>>,
    base_diag: Vec<f64>,
    diag_index: Vec<usize>,
    pub last_delta_w: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FactorInfo {
    pub delta_w: f64,
}

impl KktSolver {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            pattern: None,
            factor: None,
            matrix: None,
            base_diag: Vec::new(),
            diag_index: Vec::new(),
            last_delta_w: 0.0,
        }
    }

    /// Assembles and factorizes, growing `δ_w` until the inertia is
    /// `(n, m, 0)`. Returns `None` when no regularization up to the cap works.
    pub fn factorize(&mut self, input: &KktInputs<'_>) -> Option<FactorInfo> {
        self.assemble(input);
        let mut delta_w = 0.0;
        loop {
            if self.factor_with(delta_w) {
                if delta_w > 0.0 {
                    self.last_delta_w = delta_w;
                }
                return Some(FactorInfo { delta_w });
            }
            delta_w = if delta_w == 0.0 {
                if self.last_delta_w == 0.0 {
                    DELTA_W_FIRST
                } else {
                    (self.last_delta_w / 3.0).max(DELTA_W_MIN)
                }
            } else if self.last_delta_w == 0.0 {
                delta_w * 100.0
            } else {
                delta_w * 8.0
            };
            if delta_w > DELTA_W_MAX {
                return None;
            }
        }
    }

    /// Factorizes with an explicit primal regularization, skipping the
    /// inertia check. Used by callers that want a strongly damped step.
    pub fn refactor_with(&mut self, delta_w: f64) -> bool {
        self.factor_with(delta_w)
    }

    fn factor_with(&mut self, delta_w: f64) -> bool {
        let n = self.n;
        let values: Vec<f64> = self
            .base_diag
            .iter()
            .enumerate()
            .map(|(i, &d)| if i < n { d + delta_w } else { d - DELTA_C })
            .collect();
        let matrix = self.matrix.as_mut().expect("assembled");
        for (&idx, &v) in self.diag_index.iter().zip(&values) {
            matrix.nzval[idx] = v;
        }
        let ok = match self.factor.as_mut() {
            Some(f) => {
                f.update_values(&self.diag_index, &values);
                f.refactor().is_ok()
            }
            None => false,
        };
        let ok = if ok {
            true
        } else if self.factor.is_none() {
            let settings = QDLDLSettingsBuilder::default()
                .regularize_enable(false)
                .build()
                .expect("static settings");
            match QDLDLFactorisation::new(matrix, Some(settings)) {
                Ok(f) => {
                    self.factor = Some(f);
                    true
                }
                Err(_) => false,
            }
        } else {
            false
        };
        ok && self
            .factor
            .as_ref()
            .is_some_and(|f| f.positive_inertia() == n && f.D.iter().all(|d| d.is_finite()))
    }

    /// Solves in place with two steps of iterative refinement.
    pub fn solve(&mut self, rhs: &mut [f64]) {
        let f = self.factor.as_mut().expect("factorized");
        let matrix = self.matrix.as_ref().expect("assembled");
        let b = rhs.to_vec();
        f.solve(rhs);
        let mut residual = vec![0.0; rhs.len()];
        for _ in 0..2 {
            sym_upper_mul(matrix, rhs, &mut residual);
            let mut worst = 0.0_f64;
            for (r, bi) in residual.iter_mut().zip(&b) {
                *r = bi - *r;
                worst = worst.max(r.abs());
            }
            if worst <= 1e-14 * (1.0 + b.iter().fold(0.0_f64, |a, v| a.max(v.abs()))) {
                break;
            }
            f.solve(&mut residual);
            for (x, r) in rhs.iter_mut().zip(&residual) {
                *x += r;
            }
        }
    }

    fn assemble(&mut self, input: &KktInputs<'_>) {
        let n = self.n;
        let m = self.m;
        let dim = n + m;
        let mut entries: Vec<(usize, usize, f64)> =
            Vec::with_capacity(input.hessian.len() + 8 * input.ineq_jac.len() + dim);

        for i in 0..dim {
            let d = if i < n { input.primal_diag[i] } else { 0.0 };
            entries.push((i, i, d));
        }
        for (r, c, v) in input.hessian.iter() {
            // lower triangle in, upper triangle out
            let (row, col) = if r >= c { (c, r) } else { (r, c) };
            entries.push((col, row, v));
        }

        // J_gᵀ Σ_s J_g, row by row
        let rows = group_by_row(input.ineq_jac);
        for (k, row) in rows.iter().enumerate() {
            let s = input.ineq_sigma[k];
            for (a, &(ca, va)) in row.iter().enumerate() {
                for &(cb, vb) in &row[a..] {
                    let (lo, hi) = if ca <= cb { (ca, cb) } else { (cb, ca) };
                    entries.push((hi, lo, s * va * vb));
                }
            }
        }

        for (r, c, v) in input.eq_jac.iter() {
            entries.push((n + r, c, v));
        }

        // (col, row) ordering for CSC upper triangle
        entries.sort_unstable_by_key(|&(col, row, _)| (col, row));
        let mut colptr = vec![0usize; dim + 1];
        let mut rowval = Vec::with_capacity(entries.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (col, row, v) in entries {
            if last == Some((col, row)) {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(row);
                nzval.push(v);
                colptr[col + 1] += 1;
                last = Some((col, row));
            }
        }
        for c in 0..dim {
            colptr[c + 1] += colptr[c];
        }

        let mut diag_index = vec![0usize; dim];
        for c in 0..dim {
            // diagonal is the last entry of an upper-triangular column
            let idx = colptr[c + 1] - 1;
            debug_assert_eq!(rowval[idx], c);
            diag_index[c] = idx;
        }
        self.base_diag = diag_index.iter().map(|&i| nzval[i]).collect();

        let same_pattern = self
            .pattern
            .as_ref()
            .is_some_and(|(cp, rv)| *cp == colptr && *rv == rowval);
        if same_pattern {
            if let Some(f) = self.factor.as_mut() {
                let all: Vec<usize> = (0..nzval.len()).collect();
                f.update_values(&all, &nzval);
            }
        } else {
            self.factor = None;
            self.pattern = Some((colptr.clone(), rowval.clone()));
        }
        self.diag_index = diag_index;
        self.matrix = Some(CscMatrix::new(dim, dim, colptr, rowval, nzval));
    }
}

fn group_by_row(t: &Triplets) -> Vec<Vec<(usize, f64)>> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); t.nrows];
    for (r, c, v) in t.iter() {
        let row = &mut rows[r];
        match row.iter_mut().find(|(cc, _)| *cc == c) {
            Some(e) => e.1 += v,
            None => row.push((c, v)),
        }
    }
    rows
}

fn sym_upper_mul(a: &CscMatrix<f64>, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for col in 0..a.n {
        for idx in a.colptr[col]..a.colptr[col + 1] {
            let row = a.rowval[idx];
            let v = a.nzval[idx];
            y[row] += v * x[col];
            if row != col {
                y[col] += v * x[row];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_saddle_point_system() {
        // min ½(z0² + z1²) s.t. z0 + z1 = 1 → z = (½, ½), y = -½
        let mut hess = Triplets::new(2, 2);
        hess.push(0, 0, 1.0);
        hess.push(1, 1, 1.0);
        let mut jac = Triplets::new(1, 2);
        jac.push(0, 0, 1.0);
        jac.push(0, 1, 1.0);
        let empty = Triplets::new(0, 2);
        let mut kkt = KktSolver::new(2, 1);
        let info = kkt
            .factorize(&KktInputs {
                hessian: &hess,
                primal_diag: &[0.0, 0.0],
                ineq_jac: &empty,
                ineq_sigma: &[],
                eq_jac: &jac,
            })
            .unwrap();
        assert_eq!(info.delta_w, 0.0);
        let mut rhs = vec![0.0, 0.0, 1.0];
        kkt.solve(&mut rhs);
        assert!((rhs[0] - 0.5).abs() < 1e-8);
        assert!((rhs[1] - 0.5).abs() < 1e-8);
        assert!((rhs[2] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn indefinite_hessian_is_regularized() {
        let mut hess = Triplets::new(2, 2);
        hess.push(0, 0, -1.0);
        hess.push(1, 1, 1.0);
        let empty_eq = Triplets::new(0, 2);
        let empty_in = Triplets::new(0, 2);
        let mut kkt = KktSolver::new(2, 0);
        let info = kkt
            .factorize(&KktInputs {
                hessian: &hess,
                primal_diag: &[0.0, 0.0],
                ineq_jac: &empty_in,
                ineq_sigma: &[],
                eq_jac: &empty_eq,
            })
            .unwrap();
        assert!(info.delta_w > 1.0);
    }
}
