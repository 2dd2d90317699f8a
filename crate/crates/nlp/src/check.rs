//! Central finite-difference checks of user derivatives.

use crate::problem::NlpProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub objective: f64,
    pub equalities: f64,
    pub inequalities: f64,
}

impl GradientCheck {
    pub fn max(&self) -> f64 {
        self.objective.max(self.equalities).max(self.inequalities)
    }
}

fn rel_err(a: f64, fd: f64) -> f64 {
    (a - fd).abs() / 1f64.max(a.abs()).max(fd.abs())
}

fn step(x: f64, h: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Largest relative error of the objective gradient and constraint Jacobians
/// against central differences with relative step `h`.
pub fn check_gradients<P: NlpProblem + ?Sized>(p: &P, z: &[f64], h: f64) -> GradientCheck {
    let n = p.num_variables();
    let me = p.num_equalities();
    let mi = p.num_inequalities();
    let mut grad = vec![0.0; n];
    p.objective_gradient(z, &mut grad);
    let je = p.equality_jacobian(z).to_dense();
    let ji = p.inequality_jacobian(z).to_dense();

    let mut out = GradientCheck {
        objective: 0.0,
        equalities: 0.0,
        inequalities: 0.0,
    };
    let mut zp = z.to_vec();
    let (mut hp, mut hm) = (vec![0.0; me], vec![0.0; me]);
    let (mut gp, mut gm) = (vec![0.0; mi], vec![0.0; mi]);
    for j in 0..n {
        let dj = step(z[j], h);
        zp[j] = z[j] + dj;
        let fp = p.objective(&zp);
        p.equalities(&zp, &mut hp);
        p.inequalities(&zp, &mut gp);
        zp[j] = z[j] - dj;
        let fm = p.objective(&zp);
        p.equalities(&zp, &mut hm);
        p.inequalities(&zp, &mut gm);
        zp[j] = z[j];

        out.objective = out.objective.max(rel_err(grad[j], (fp - fm) / (2.0 * dj)));
        for i in 0..me {
            out.equalities = out
                .equalities
                .max(rel_err(je[(i, j)], (hp[i] - hm[i]) / (2.0 * dj)));
        }
        for i in 0..mi {
            out.inequalities = out
                .inequalities
                .max(rel_err(ji[(i, j)], (gp[i] - gm[i]) / (2.0 * dj)));
        }
    }
    out
}

/// Largest relative error of the Lagrangian Hessian against central
/// differences of the Lagrangian gradient. `None` if the problem supplies no
/// Hessian.
pub fn check_hessian<P: NlpProblem + ?Sized>(
    p: &P,
    z: &[f64],
    eq_mult: &[f64],
    ineq_mult: &[f64],
    h: f64,
) -> Option<f64> {
    let n = p.num_variables();
    let hess = p.lagrangian_hessian(z, 1.0, eq_mult, ineq_mult)?.to_dense();
    let grad_lag = |z: &[f64]| {
        let mut g = vec![0.0; n];
        p.objective_gradient(z, &mut g);
        p.equality_jacobian(z).add_transpose_mul(eq_mult, &mut g);
        p.inequality_jacobian(z)
            .add_transpose_mul(ineq_mult, &mut g);
        g
    };
    let mut worst = 0.0_f64;
    let mut zp = z.to_vec();
    for j in 0..n {
        let dj = step(z[j], h);
        zp[j] = z[j] + dj;
        let gp = grad_lag(&zp);
        zp[j] = z[j] - dj;
        let gm = grad_lag(&zp);
        zp[j] = z[j];
        // only the lower triangle is stored
        for i in j..n {
            worst = worst.max(rel_err(hess[(i, j)], (gp[i] - gm[i]) / (2.0 * dj)));
        }
    }
    Some(worst)
}
