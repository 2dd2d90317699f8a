use log::{debug, trace};

use crate::bfgs::DampedBfgs;
use crate::kkt::{KktInputs, KktSolver};
use crate::problem::{NlpProblem, Triplets};
use crate::NlpError;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Scaled dual infeasibility and complementarity.
    pub kkt_tolerance: f64,
    /// Max equality residual / inequality violation.
    pub constraint_tolerance: f64,
    /// Starting barrier parameter. Small values suit warm starts.
    pub initial_barrier: f64,
    /// Relative distance by which the start is pushed inside bounds and
    /// inequality slacks.
    pub bound_push: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            kkt_tolerance: 1e-6,
            constraint_tolerance: 1e-6,
            initial_barrier: 0.1,
            bound_push: 1e-2,
        }
    }
}

impl SolveOptions {
    /// Settings for restarting from a nearby solution.
    pub fn warm(&self) -> Self {
        Self {
            initial_barrier: 1e-4,
            bound_push: 1e-4,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Multipliers {
    pub equalities: Vec<f64>,
    pub inequalities: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub z: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub multipliers: Multipliers,
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub objective: f64,
    pub merit: f64,
    pub barrier: f64,
    pub step_norm: f64,
    pub violation: f64,
    pub kkt_residual: f64,
    pub alpha: f64,
    pub regularization: f64,
}

pub fn solve<P: NlpProblem + ?Sized>(
    problem: &P,
    z_init: &[f64],
    opts: &SolveOptions,
) -> Result<SolveResult, NlpError> {
    solve_with_log(problem, z_init, opts, &mut |_| {})
}

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const KAPPA_SIGMA: f64 = 1e10;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const S_MAX: f64 = 100.0;
const PENALTY_RHO: f64 = 0.1;
const PENALTY_LIMIT: f64 = 1e12;
const STALL_WINDOW: usize = 40;
const SOC_ROUNDS: usize = 4;
const BOUND_RELAX: f64 = 1e-8;

struct Eval {
    f: f64,
    grad: Vec<f64>,
    h: Vec<f64>,
    g: Vec<f64>,
}

impl Eval {
    fn at<P: NlpProblem + ?Sized>(p: &P, z: &[f64]) -> Self {
        let mut grad = vec![0.0; z.len()];
        let mut h = vec![0.0; p.num_equalities()];
        let mut g = vec![0.0; p.num_inequalities()];
        p.objective_gradient(z, &mut grad);
        p.equalities(z, &mut h);
        p.inequalities(z, &mut g);
        Self {
            f: p.objective(z),
            grad,
            h,
            g,
        }
    }

    fn values_only<P: NlpProblem + ?Sized>(p: &P, z: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let mut h = vec![0.0; p.num_equalities()];
        let mut g = vec![0.0; p.num_inequalities()];
        p.equalities(z, &mut h);
        p.inequalities(z, &mut g);
        (p.objective(z), h, g)
    }

    fn finite(&self) -> bool {
        self.f.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.h.iter().all(|v| v.is_finite())
            && self.g.iter().all(|v| v.is_finite())
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn violation(h: &[f64], g: &[f64]) -> f64 {
    norm_inf(h).max(g.iter().fold(0.0_f64, |a, &x| a.max(x)))
}

fn triplets_finite(t: &Triplets) -> bool {
    t.vals.iter().all(|v| v.is_finite())
}

/// Bound bookkeeping: which variables carry a finite lower/upper bound.
struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    has_lower: Vec<bool>,
    has_upper: Vec<bool>,
}

impl Bounds {
    fn lower_gap(&self, z: &[f64], i: usize) -> f64 {
        z[i] - self.lower[i]
    }
    fn upper_gap(&self, z: &[f64], i: usize) -> f64 {
        self.upper[i] - z[i]
    }
}

/// Largest step in (0, 1] keeping `x + α dx >= (1 - τ) x` for all `x > 0`.
fn fraction_to_boundary(x: impl Iterator<Item = (f64, f64)>, tau: f64) -> f64 {
    let mut alpha = 1.0_f64;
    for (v, dv) in x {
        if dv < 0.0 {
            alpha = alpha.min(-tau * v / dv);
        }
    }
    alpha.max(0.0)
}

fn primal_step(bounds: &Bounds, z: &[f64], s: &[f64], dir: &Direction, tau: f64) -> f64 {
    let n = z.len();
    fraction_to_boundary(
        s.iter()
            .copied()
            .zip(dir.ds.iter().copied())
            .chain(
                (0..n)
                    .filter(|&i| bounds.has_lower[i])
                    .map(|i| (bounds.lower_gap(z, i), dir.dz[i])),
            )
            .chain(
                (0..n)
                    .filter(|&i| bounds.has_upper[i])
                    .map(|i| (bounds.upper_gap(z, i), -dir.dz[i])),
            ),
        tau,
    )
}

fn dual_step(
    bounds: &Bounds,
    y_in: &[f64],
    z_lower: &[f64],
    z_upper: &[f64],
    dir: &Direction,
    tau: f64,
) -> f64 {
    let n = z_lower.len();
    fraction_to_boundary(
        y_in.iter()
            .copied()
            .zip(dir.dy_in.iter().copied())
            .chain(
                (0..n)
                    .filter(|&i| bounds.has_lower[i])
                    .map(|i| (z_lower[i], dir.dz_lower[i])),
            )
            .chain(
                (0..n)
                    .filter(|&i| bounds.has_upper[i])
                    .map(|i| (z_upper[i], dir.dz_upper[i])),
            ),
        tau,
    )
}

pub fn solve_with_log<P: NlpProblem + ?Sized>(
    problem: &P,
    z_init: &[f64],
    opts: &SolveOptions,
    log_fn: &mut dyn FnMut(&IterationLog),
) -> Result<SolveResult, NlpError> {
    let n = problem.num_variables();
    let me = problem.num_equalities();
    let mi = problem.num_inequalities();
    if z_init.len() != n {
        return Err(NlpError::DimensionMismatch {
            expected: n,
            got: z_init.len(),
        });
    }
    let (mut lower, mut upper) = problem.bounds();
    for i in 0..n {
        if lower[i] > upper[i] {
            return Err(NlpError::InconsistentBounds {
                index: i,
                lower: lower[i],
                upper: upper[i],
            });
        }
        // a strict interior must exist, also for values pinned on a bound
        lower[i] -= BOUND_RELAX * lower[i].abs().max(1.0);
        upper[i] += BOUND_RELAX * upper[i].abs().max(1.0);
    }
    let bounds = Bounds {
        has_lower: lower.iter().map(|l| l.is_finite()).collect(),
        has_upper: upper.iter().map(|u| u.is_finite()).collect(),
        lower,
        upper,
    };

    // push the start strictly inside the bounds
    let kappa = opts.bound_push;
    let mut z: Vec<f64> = z_init.to_vec();
    for i in 0..n {
        let (l, u) = (bounds.lower[i], bounds.upper[i]);
        let pl = kappa * l.abs().max(1.0);
        let pu = kappa * u.abs().max(1.0);
        match (bounds.has_lower[i], bounds.has_upper[i]) {
            (true, true) => {
                let pl = pl.min(kappa * (u - l)).min(0.5 * (u - l));
                let pu = pu.min(kappa * (u - l)).min(0.5 * (u - l));
                z[i] = z[i].max(l + pl).min(u - pu);
            }
            (true, false) => z[i] = z[i].max(l + pl),
            (false, true) => z[i] = z[i].min(u - pu),
            (false, false) => {}
        }
    }

    let mut eval = Eval::at(problem, &z);
    let status;
    let mut mu = opts.initial_barrier.max(opts.kkt_tolerance / 10.0);
    let mu_min = opts.kkt_tolerance.min(opts.constraint_tolerance) / 10.0;
    let mut tau = (1.0 - mu).max(0.99);

    let mut s: Vec<f64> = eval
        .g
        .iter()
        .map(|&g| (-g).max(kappa * g.abs().max(1.0)))
        .collect();
    let mut y_in: Vec<f64> = s.iter().map(|&s| (mu / s).clamp(1e-8, 1e3)).collect();
    let mut z_lower: Vec<f64> = (0..n)
        .map(|i| {
            if bounds.has_lower[i] {
                (mu / bounds.lower_gap(&z, i)).clamp(1e-8, 1e3)
            } else {
                0.0
            }
        })
        .collect();
    let mut z_upper: Vec<f64> = (0..n)
        .map(|i| {
            if bounds.has_upper[i] {
                (mu / bounds.upper_gap(&z, i)).clamp(1e-8, 1e3)
            } else {
                0.0
            }
        })
        .collect();
    let mut y_eq = vec![0.0; me];

    let mut kkt = KktSolver::new(n, me);
    let mut bfgs: Option<DampedBfgs> = None;
    let mut penalty = 1.0_f64;
    let mut iterations = 0;
    let mut kkt_residual;
    let mut theta_history: Vec<f64> = Vec::new();

    if !eval.finite() {
        return Ok(finish(
            problem,
            z,
            SolveStatus::NumericalFailure,
            0,
            f64::INFINITY,
            y_eq,
            y_in,
            z_lower,
            z_upper,
        ));
    }

    let mut jac_eq = problem.equality_jacobian(&z);
    let mut jac_in = problem.inequality_jacobian(&z);

    // least-squares equality multipliers
    if me > 0 {
        let mut rest = eval.grad.clone();
        jac_in.add_transpose_mul(&y_in, &mut rest);
        for i in 0..n {
            rest[i] += z_upper[i] - z_lower[i];
        }
        let mut ident = Triplets::with_capacity(n, n, n);
        for i in 0..n {
            ident.push(i, i, 1.0);
        }
        let empty = Triplets::new(0, n);
        let mut ls = KktSolver::new(n, me);
        if ls
            .factorize(&KktInputs {
                hessian: &ident,
                primal_diag: &vec![0.0; n],
                ineq_jac: &empty,
                ineq_sigma: &[],
                eq_jac: &jac_eq,
            })
            .is_some()
        {
            let mut rhs: Vec<f64> = rest.iter().map(|v| -v).chain(vec![0.0; me]).collect();
            ls.solve(&mut rhs);
            let y = &rhs[n..];
            if y.iter().all(|v| v.is_finite()) && norm_inf(y) <= 1e3 {
                y_eq.copy_from_slice(y);
            }
        }
    }

    loop {
        // ---- optimality measures
        let mut grad_lag = eval.grad.clone();
        jac_eq.add_transpose_mul(&y_eq, &mut grad_lag);
        jac_in.add_transpose_mul(&y_in, &mut grad_lag);
        let dual_res: Vec<f64> = (0..n)
            .map(|i| grad_lag[i] - z_lower[i] + z_upper[i])
            .collect();
        let n_lower = bounds.has_lower.iter().filter(|b| **b).count();
        let n_upper = bounds.has_upper.iter().filter(|b| **b).count();
        let mult_sum: f64 = y_eq
            .iter()
            .chain(&y_in)
            .chain(&z_lower)
            .chain(&z_upper)
            .map(|v| v.abs())
            .sum();
        let s_d = (mult_sum / ((me + mi + n_lower + n_upper).max(1) as f64)).max(S_MAX) / S_MAX;
        let bound_sum: f64 = y_in
            .iter()
            .chain(&z_lower)
            .chain(&z_upper)
            .map(|v| v.abs())
            .sum();
        let s_c = (bound_sum / ((mi + n_lower + n_upper).max(1) as f64)).max(S_MAX) / S_MAX;
        let complementarity = |target: f64| -> f64 {
            let mut c = 0.0_f64;
            for k in 0..mi {
                c = c.max((y_in[k] * s[k] - target).abs());
            }
            for i in 0..n {
                if bounds.has_lower[i] {
                    c = c.max((z_lower[i] * bounds.lower_gap(&z, i) - target).abs());
                }
                if bounds.has_upper[i] {
                    c = c.max((z_upper[i] * bounds.upper_gap(&z, i) - target).abs());
                }
            }
            c
        };
        let dual_inf = norm_inf(&dual_res) / s_d;
        let slack_res = eval
            .g
            .iter()
            .zip(&s)
            .fold(0.0_f64, |a, (g, s)| a.max((g + s).abs()));
        let primal_inf = norm_inf(&eval.h).max(slack_res);
        let viol = violation(&eval.h, &eval.g);
        kkt_residual = dual_inf.max(complementarity(0.0) / s_c);

        if kkt_residual <= opts.kkt_tolerance
            && viol <= opts.constraint_tolerance
            && slack_res <= opts.constraint_tolerance
        {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= opts.max_iterations {
            status = SolveStatus::MaxIter;
            break;
        }

        // ---- barrier update
        loop {
            let barrier_err = dual_inf.max(primal_inf).max(complementarity(mu) / s_c);
            if barrier_err > KAPPA_EPS * mu || mu <= mu_min {
                break;
            }
            mu = mu_min.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
            tau = (1.0 - mu).max(0.99);
        }

        // ---- Newton step
        let hessian = match problem.lagrangian_hessian(&z, 1.0, &y_eq, &y_in) {
            Some(h) => h,
            None => bfgs
                .get_or_insert_with(|| DampedBfgs::new(n))
                .lower_triplets(),
        };
        if !triplets_finite(&hessian) || !triplets_finite(&jac_eq) || !triplets_finite(&jac_in) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let primal_diag: Vec<f64> = (0..n)
            .map(|i| {
                let mut d = 0.0;
                if bounds.has_lower[i] {
                    d += z_lower[i] / bounds.lower_gap(&z, i);
                }
                if bounds.has_upper[i] {
                    d += z_upper[i] / bounds.upper_gap(&z, i);
                }
                d
            })
            .collect();
        let sigma_s: Vec<f64> = (0..mi).map(|k| y_in[k] / s[k]).collect();
        let Some(info) = kkt.factorize(&KktInputs {
            hessian: &hessian,
            primal_diag: &primal_diag,
            ineq_jac: &jac_in,
            ineq_sigma: &sigma_s,
            eq_jac: &jac_eq,
        }) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let mut delta_w = info.delta_w;

        let mut accepted = None;
        for attempt in 0..4 {
            if attempt > 0 {
                delta_w = (delta_w * 100.0).max(1e-3);
                if !kkt.refactor_with(delta_w) {
                    continue;
                }
            }
            let dir = newton_direction(
                &mut kkt, &bounds, &z, &s, &y_in, &z_lower, &z_upper, &y_eq, &eval, &jac_eq,
                &jac_in, mu,
            );
            if !dir.finite() {
                continue;
            }

            let alpha_p = primal_step(&bounds, &z, &s, &dir, tau);
            let alpha_d = dual_step(&bounds, &y_in, &z_lower, &z_upper, &dir, tau);

            // ---- merit function and penalty
            let theta0 = l1_infeasibility(&eval.h, &eval.g, &s);
            let barrier_slope = {
                let mut d: f64 = eval.grad.iter().zip(&dir.dz).map(|(g, d)| g * d).sum();
                for k in 0..mi {
                    d -= mu * dir.ds[k] / s[k];
                }
                for i in 0..n {
                    if bounds.has_lower[i] {
                        d -= mu * dir.dz[i] / bounds.lower_gap(&z, i);
                    }
                    if bounds.has_upper[i] {
                        d += mu * dir.dz[i] / bounds.upper_gap(&z, i);
                    }
                }
                d
            };
            let curvature = {
                let mut c = quad_form_lower(&hessian, &dir.dz) + delta_w * dot(&dir.dz, &dir.dz);
                for i in 0..n {
                    c += primal_diag[i] * dir.dz[i] * dir.dz[i];
                }
                for k in 0..mi {
                    c += sigma_s[k] * dir.ds[k] * dir.ds[k];
                }
                c
            };
            if theta0 > 0.0 {
                let needed =
                    (barrier_slope + 0.5 * curvature.max(0.0)) / ((1.0 - PENALTY_RHO) * theta0);
                if needed > penalty {
                    penalty = (2.0 * needed).max(penalty);
                }
            }
            let slope = barrier_slope - penalty * theta0;
            let merit0 = merit(eval.f, &eval.h, &eval.g, &z, &s, &bounds, mu, penalty);

            let armijo_ok = |m: f64, alpha: f64| {
                m <= merit0 + ARMIJO * alpha * slope.min(0.0) || (slope >= 0.0 && m <= merit0)
            };
            let mut alpha = alpha_p;
            while alpha >= MIN_STEP {
                let z_trial: Vec<f64> = z.iter().zip(&dir.dz).map(|(a, b)| a + alpha * b).collect();
                let s_trial: Vec<f64> = s.iter().zip(&dir.ds).map(|(a, b)| a + alpha * b).collect();
                let (f, h, g) = Eval::values_only(problem, &z_trial);
                if f.is_finite() && h.iter().chain(&g).all(|v| v.is_finite()) {
                    let m = merit(f, &h, &g, &z_trial, &s_trial, &bounds, mu, penalty);
                    if armijo_ok(m, alpha) {
                        accepted = Some((alpha, alpha_d, z_trial, s_trial, dir.clone(), merit0));
                        break;
                    }
                    if alpha == alpha_p && l1_infeasibility(&h, &g, &s_trial) >= theta0 {
                        // second-order correction against the curvature of the constraints
                        let mut soc_h: Vec<f64> =
                            eval.h.iter().zip(&h).map(|(a, b)| alpha * a + b).collect();
                        let mut soc_r: Vec<f64> = (0..mi)
                            .map(|k| alpha * (eval.g[k] + s[k]) + g[k] + s_trial[k])
                            .collect();
                        let mut theta_prev = l1_infeasibility(&h, &g, &s_trial);
                        for _ in 0..SOC_ROUNDS {
                            let shifted = Eval {
                                f: eval.f,
                                grad: eval.grad.clone(),
                                h: soc_h.clone(),
                                g: soc_r.iter().zip(&s).map(|(r, s)| r - s).collect(),
                            };
                            let soc = newton_direction(
                                &mut kkt, &bounds, &z, &s, &y_in, &z_lower, &z_upper, &y_eq,
                                &shifted, &jac_eq, &jac_in, mu,
                            );
                            if !soc.finite() {
                                break;
                            }
                            let alpha_soc = primal_step(&bounds, &z, &s, &soc, tau);
                            let z_soc: Vec<f64> = z
                                .iter()
                                .zip(&soc.dz)
                                .map(|(a, b)| a + alpha_soc * b)
                                .collect();
                            let s_soc: Vec<f64> = s
                                .iter()
                                .zip(&soc.ds)
                                .map(|(a, b)| a + alpha_soc * b)
                                .collect();
                            let (f, h, g) = Eval::values_only(problem, &z_soc);
                            if !(f.is_finite() && h.iter().chain(&g).all(|v| v.is_finite())) {
                                break;
                            }
                            let m = merit(f, &h, &g, &z_soc, &s_soc, &bounds, mu, penalty);
                            if armijo_ok(m, alpha) {
                                let alpha_d = alpha_d
                                    .min(dual_step(&bounds, &y_in, &z_lower, &z_upper, &soc, tau));
                                accepted = Some((alpha_soc, alpha_d, z_soc, s_soc, soc, merit0));
                                break;
                            }
                            let theta = l1_infeasibility(&h, &g, &s_soc);
                            if theta > 0.99 * theta_prev {
                                break;
                            }
                            theta_prev = theta;
                            for (a, b) in soc_h.iter_mut().zip(&h) {
                                *a = alpha_soc * *a + b;
                            }
                            for k in 0..mi {
                                soc_r[k] = alpha_soc * soc_r[k] + g[k] + s_soc[k];
                            }
                        }
                        if accepted.is_some() {
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            trace!("line search failed at iteration {iterations}, attempt {attempt}");
        }

        let Some((alpha, alpha_d, z_new, s_new, dir, merit0)) = accepted else {
            let theta = l1_infeasibility(&eval.h, &eval.g, &s);
            status = if theta > opts.constraint_tolerance {
                SolveStatus::Infeasible
            } else {
                SolveStatus::NumericalFailure
            };
            debug!("line search failure (violation {theta:.3e})");
            break;
        };

        // ---- accept
        let step_norm = norm_inf(&dir.dz) * alpha;
        let z_old = std::mem::replace(&mut z, z_new);
        s = s_new;
        for (y, d) in y_eq.iter_mut().zip(&dir.dy_eq) {
            *y += alpha * d;
        }
        for (y, d) in y_in.iter_mut().zip(&dir.dy_in) {
            *y += alpha_d * d;
        }
        for i in 0..n {
            if bounds.has_lower[i] {
                z_lower[i] += alpha_d * dir.dz_lower[i];
                let gap = bounds.lower_gap(&z, i);
                z_lower[i] = z_lower[i].clamp(mu / (KAPPA_SIGMA * gap), KAPPA_SIGMA * mu / gap);
            }
            if bounds.has_upper[i] {
                z_upper[i] += alpha_d * dir.dz_upper[i];
                let gap = bounds.upper_gap(&z, i);
                z_upper[i] = z_upper[i].clamp(mu / (KAPPA_SIGMA * gap), KAPPA_SIGMA * mu / gap);
            }
        }
        for k in 0..mi {
            y_in[k] = y_in[k].clamp(mu / (KAPPA_SIGMA * s[k]), KAPPA_SIGMA * mu / s[k]);
        }

        eval = Eval::at(problem, &z);
        if !eval.finite() {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let jac_eq_old = std::mem::replace(&mut jac_eq, problem.equality_jacobian(&z));
        let jac_in_old = std::mem::replace(&mut jac_in, problem.inequality_jacobian(&z));

        if let Some(b) = bfgs.as_mut() {
            // ∇L(z_new) - ∇L(z_old) at the new multipliers
            let mut new = eval.grad.clone();
            jac_eq.add_transpose_mul(&y_eq, &mut new);
            jac_in.add_transpose_mul(&y_in, &mut new);
            let mut old = vec![0.0; n];
            problem.objective_gradient(&z_old, &mut old);
            jac_eq_old.add_transpose_mul(&y_eq, &mut old);
            jac_in_old.add_transpose_mul(&y_in, &mut old);
            let step: Vec<f64> = z.iter().zip(&z_old).map(|(a, b)| a - b).collect();
            let change: Vec<f64> = new.iter().zip(&old).map(|(a, b)| a - b).collect();
            b.update(&step, &change);
        }

        iterations += 1;
        let viol = violation(&eval.h, &eval.g);
        log_fn(&IterationLog {
            iteration: iterations,
            objective: eval.f,
            merit: merit0,
            barrier: mu,
            step_norm,
            violation: viol,
            kkt_residual,
            alpha,
            regularization: delta_w,
        });
        trace!(
            "it {iterations:3} f {:.6e} viol {viol:.2e} kkt {kkt_residual:.2e} mu {mu:.1e} alpha {alpha:.2e} dw {delta_w:.1e}",
            eval.f
        );

        // infeasibility detection: penalty blow-up or stalled violation
        let theta = l1_infeasibility(&eval.h, &eval.g, &s);
        theta_history.push(theta);
        if penalty > PENALTY_LIMIT && viol > opts.constraint_tolerance {
            status = SolveStatus::Infeasible;
            break;
        }
        if theta_history.len() > STALL_WINDOW {
            let old = theta_history[theta_history.len() - 1 - STALL_WINDOW];
            if viol > 1e3 * opts.constraint_tolerance && theta > 0.999 * old && mu <= mu_min * 10.0
            {
                status = SolveStatus::Infeasible;
                break;
            }
        }
    }

    Ok(finish(
        problem,
        z,
        status,
        iterations,
        kkt_residual,
        y_eq,
        y_in,
        z_lower,
        z_upper,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish<P: NlpProblem + ?Sized>(
    problem: &P,
    z: Vec<f64>,
    status: SolveStatus,
    iterations: usize,
    kkt_residual: f64,
    y_eq: Vec<f64>,
    y_in: Vec<f64>,
    z_lower: Vec<f64>,
    z_upper: Vec<f64>,
) -> SolveResult {
    let (objective, h, g) = Eval::values_only(problem, &z);
    let constraint_violation = if h.iter().chain(&g).all(|v| v.is_finite()) {
        violation(&h, &g)
    } else {
        f64::INFINITY
    };
    SolveResult {
        z,
        status,
        iterations,
        objective,
        kkt_residual,
        constraint_violation,
        multipliers: Multipliers {
            equalities: y_eq,
            inequalities: y_in,
            lower: z_lower,
            upper: z_upper,
        },
    }
}

#[derive(Clone)]
struct Direction {
    dz: Vec<f64>,
    ds: Vec<f64>,
    dy_eq: Vec<f64>,
    dy_in: Vec<f64>,
    dz_lower: Vec<f64>,
    dz_upper: Vec<f64>,
}

impl Direction {
    fn finite(&self) -> bool {
        self.dz
            .iter()
            .chain(&self.ds)
            .chain(&self.dy_eq)
            .chain(&self.dy_in)
            .chain(&self.dz_lower)
            .chain(&self.dz_upper)
            .all(|v| v.is_finite())
    }
}

#[allow(clippy::too_many_arguments)]
fn newton_direction(
    kkt: &mut KktSolver,
    bounds: &Bounds,
    z: &[f64],
    s: &[f64],
    y_in: &[f64],
    z_lower: &[f64],
    z_upper: &[f64],
    y_eq: &[f64],
    eval: &Eval,
    jac_eq: &Triplets,
    jac_in: &Triplets,
    mu: f64,
) -> Direction {
    let n = z.len();
    let me = y_eq.len();
    let mi = y_in.len();

    // condensed dual residual
    let mut r = eval.grad.clone();
    jac_eq.add_transpose_mul(y_eq, &mut r);
    let w: Vec<f64> = (0..mi)
        .map(|k| y_in[k] + (y_in[k] * eval.g[k] + mu) / s[k])
        .collect();
    jac_in.add_transpose_mul(&w, &mut r);
    for i in 0..n {
        if bounds.has_lower[i] {
            r[i] -= mu / bounds.lower_gap(z, i);
        }
        if bounds.has_upper[i] {
            r[i] += mu / bounds.upper_gap(z, i);
        }
    }
    let mut rhs: Vec<f64> = r
        .iter()
        .map(|v| -v)
        .chain(eval.h.iter().map(|v| -v))
        .collect();
    kkt.solve(&mut rhs);
    let dz = rhs[..n].to_vec();
    let dy_eq = rhs[n..n + me].to_vec();

    let mut jdz = vec![0.0; mi];
    jac_in.mul_vec(&dz, &mut jdz);
    let dy_in: Vec<f64> = (0..mi)
        .map(|k| (y_in[k] * (jdz[k] + eval.g[k]) + mu) / s[k])
        .collect();
    let ds: Vec<f64> = (0..mi).map(|k| -(eval.g[k] + s[k]) - jdz[k]).collect();
    let dz_lower: Vec<f64> = (0..n)
        .map(|i| {
            if bounds.has_lower[i] {
                let gap = bounds.lower_gap(z, i);
                mu / gap - z_lower[i] - z_lower[i] * dz[i] / gap
            } else {
                0.0
            }
        })
        .collect();
    let dz_upper: Vec<f64> = (0..n)
        .map(|i| {
            if bounds.has_upper[i] {
                let gap = bounds.upper_gap(z, i);
                mu / gap - z_upper[i] + z_upper[i] * dz[i] / gap
            } else {
                0.0
            }
        })
        .collect();
    Direction {
        dz,
        ds,
        dy_eq,
        dy_in,
        dz_lower,
        dz_upper,
    }
}

fn l1_infeasibility(h: &[f64], g: &[f64], s: &[f64]) -> f64 {
    h.iter().map(|v| v.abs()).sum::<f64>()
        + g.iter().zip(s).map(|(g, s)| (g + s).abs()).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
fn merit(
    f: f64,
    h: &[f64],
    g: &[f64],
    z: &[f64],
    s: &[f64],
    bounds: &Bounds,
    mu: f64,
    penalty: f64,
) -> f64 {
    let mut barrier = 0.0;
    for &sk in s {
        if sk <= 0.0 {
            return f64::INFINITY;
        }
        barrier -= sk.ln();
    }
    for i in 0..z.len() {
        if bounds.has_lower[i] {
            let gap = bounds.lower_gap(z, i);
            if gap <= 0.0 {
                return f64::INFINITY;
            }
            barrier -= gap.ln();
        }
        if bounds.has_upper[i] {
            let gap = bounds.upper_gap(z, i);
            if gap <= 0.0 {
                return f64::INFINITY;
            }
            barrier -= gap.ln();
        }
    }
    f + mu * barrier + penalty * l1_infeasibility(h, g, s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `dᵀ H d` for a symmetric matrix stored as its lower triangle.
fn quad_form_lower(h: &Triplets, d: &[f64]) -> f64 {
    h.iter()
        .map(|(r, c, v)| {
            if r == c {
                v * d[r] * d[r]
            } else {
                2.0 * v * d[r] * d[c]
            }
        })
        .sum()
}
