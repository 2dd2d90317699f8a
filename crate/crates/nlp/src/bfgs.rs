use nalgebra::{DMatrix, DVector};

use crate::problem::Triplets;

/// Dense damped BFGS approximation of the Lagrangian Hessian (Powell damping).
///
/// The approximation stays positive definite; it is reset to a scaled identity
/// whenever the damped curvature along a step is not safely positive.
pub(crate) struct DampedBfgs {
    b: DMatrix<f64>,
    scaled: bool,
}

impl DampedBfgs {
    pub fn new(n: usize) -> Self {
        Self {
            b: DMatrix::identity(n, n),
            scaled: false,
        }
    }

    pub fn lower_triplets(&self) -> Triplets {
        let n = self.b.nrows();
        let mut t = Triplets::with_capacity(n, n, n * (n + 1) / 2);
        for c in 0..n {
            for r in c..n {
                let v = self.b[(r, c)];
                if v != 0.0 || r == c {
                    t.push(r, c, v);
                }
            }
        }
        t
    }

    /// `step = z_new - z_old`, `grad_change = ∇L(z_new) - ∇L(z_old)` at the new
    /// multipliers.
    pub fn update(&mut self, step: &[f64], grad_change: &[f64]) {
        let s = DVector::from_column_slice(step);
        let y = DVector::from_column_slice(grad_change);
        let ss = s.dot(&s);
        if ss <= f64::EPSILON * f64::EPSILON {
            return;
        }
        let sy = s.dot(&y);
        if !self.scaled && sy > 0.0 {
            // first useful pair: rescale the identity to the observed curvature
            let yy = y.dot(&y);
            self.b *= (yy / sy).clamp(1e-6, 1e6);
            self.scaled = true;
        }
        let bs = &self.b * &s;
        let sbs = s.dot(&bs);
        if sbs <= 0.0 || !sbs.is_finite() {
            self.reset();
            return;
        }
        let theta = if sy >= 0.2 * sbs {
            1.0
        } else {
            0.8 * sbs / (sbs - sy)
        };
        let r = &y * theta + &bs * (1.0 - theta);
        let sr = s.dot(&r);
        if sr <= 1e-12 * ss || !sr.is_finite() {
            self.reset();
            return;
        }
        self.b -= &bs * bs.transpose() / sbs;
        self.b += &r * r.transpose() / sr;
    }

    fn reset(&mut self) {
        let n = self.b.nrows();
        self.b = DMatrix::identity(n, n);
        self.scaled = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_quadratic_curvature_along_steps() {
        // f = ½ zᵀ A z with A = diag(2, 5); gradient differences are exact.
        let a = [2.0, 5.0];
        let mut bfgs = DampedBfgs::new(2);
        for step in [[1.0, 0.0], [0.0, 1.0], [0.3, -0.2]] {
            let y = [a[0] * step[0], a[1] * step[1]];
            bfgs.update(&step, &y);
        }
        let b = bfgs.lower_triplets().to_dense();
        assert!((b[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((b[(1, 1)] - 5.0).abs() < 1e-8);
    }

    #[test]
    fn negative_curvature_keeps_matrix_positive_definite() {
        let mut bfgs = DampedBfgs::new(2);
        bfgs.update(&[1.0, 0.0], &[-3.0, 0.0]);
        let b = bfgs.lower_triplets().to_dense();
        let b = &b + b.transpose() - DMatrix::from_diagonal(&b.diagonal());
        assert!(b.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
    }
}
