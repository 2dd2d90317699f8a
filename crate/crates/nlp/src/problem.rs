/// Sparse matrix in coordinate form. Duplicate entries are summed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, capacity: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::with_capacity(capacity),
            cols: Vec::with_capacity(capacity),
            vals: Vec::with_capacity(capacity),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .zip(&self.cols)
            .zip(&self.vals)
            .map(|((&r, &c), &v)| (r, c, v))
    }

    /// `out = A x`
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, c, v) in self.iter() {
            out[r] += v * x[c];
        }
    }

    /// `out += A^T y`
    pub fn add_transpose_mul(&self, y: &[f64], out: &mut [f64]) {
        for (r, c, v) in self.iter() {
            out[c] += v * y[r];
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }
}

/// A smooth nonlinear program
///
/// ```txt
///     min f(z)   s.t.   h(z) = 0,   g(z) <= 0,   lower <= z <= upper
/// ```
///
/// Bounds may be infinite. Evaluators must be deterministic.
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_equalities(&self) -> usize;
    fn num_inequalities(&self) -> usize;

    /// `(lower, upper)` variable bounds.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);

    fn objective(&self, z: &[f64]) -> f64;
    fn objective_gradient(&self, z: &[f64], grad: &mut [f64]);

    /// `h(z)`, one entry per equality.
    fn equalities(&self, z: &[f64], out: &mut [f64]);
    /// `g(z)`, feasible when every entry is `<= 0`.
    fn inequalities(&self, z: &[f64], out: &mut [f64]);

    fn equality_jacobian(&self, z: &[f64]) -> Triplets;
    fn inequality_jacobian(&self, z: &[f64]) -> Triplets;

    /// Lower triangle (`row >= col`) of
    /// `obj_factor * ∇²f + Σ eq_mult[i] ∇²h_i + Σ ineq_mult[i] ∇²g_i`.
    ///
    /// Returning `None` makes the solver fall back to a damped BFGS
    /// approximation.
    fn lagrangian_hessian(
        &self,
        _z: &[f64],
        _obj_factor: f64,
        _eq_mult: &[f64],
        _ineq_mult: &[f64],
    ) -> Option<Triplets> {
        None
    }
}
