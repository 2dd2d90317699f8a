use hitch_nlp::{NlpProblem, SolveResult, Triplets};
use nalgebra::SVector;
use num_dual::{hessian, jacobian, DualNum};

use super::layout::Layout;
use super::solution::{MultiStageSolution, StageSolution};
use super::OcpSpec;
use crate::geometry::{body_rect, corner_offsets, Body, Corridor, Halfplane};
use crate::vehicle::{integrate_interval_dual, Control, State};
use crate::CoreError;

/// One corner of one body against one halfplane at one node.
#[derive(Debug, Clone, Copy)]
struct VertexRow {
    stage: usize,
    k: usize,
    body: Body,
    h: usize,
    hp: Halfplane,
    /// Corner offset from the rotation center of the body: the truck rotates
    /// about the hitch, the trailer about its axle.
    ox: f64,
    oy: f64,
}

#[derive(Debug, Clone, Copy)]
struct NodeRef {
    stage: usize,
    k: usize,
}

/// The transcribed OCP as a smooth NLP.
#[derive(Debug, Clone)]
pub struct OcpProblem {
    spec: OcpSpec,
    layout: Layout,
    stage_t: [f64; 3],
    vertex_rows: Vec<VertexRow>,
    beta_nodes: Vec<NodeRef>,
    num_eq: usize,
    num_in: usize,
}

fn local_dual<D: DualNum<Primitive = f64>>(
    w: &SVector<D, 9>,
    n: usize,
    substeps: usize,
    l1: f64,
    m0: f64,
) -> [D; 4] {
    let x = [w[0].clone(), w[1].clone(), w[2].clone(), w[3].clone()];
    let u0 = [w[4].clone(), w[5].clone()];
    let u1 = [w[6].clone(), w[7].clone()];
    let dt = w[8].clone() / n as f64;
    integrate_interval_dual(&x, &u0, &u1, &dt, substeps, l1, m0)
}

impl OcpProblem {
    pub fn new(spec: &OcpSpec, pair: (&Corridor, &Corridor)) -> Result<Self, CoreError> {
        spec.validate()?;
        let corridors = [pair.0.halfplanes().to_vec(), pair.1.halfplanes().to_vec()];
        let hp_count: [[usize; 2]; 3] = std::array::from_fn(|j| {
            [
                corridors[spec.stages[j].corridor_truck].len(),
                corridors[spec.stages[j].corridor_trailer].len(),
            ]
        });
        let n = spec.stages.map(|s| s.n);
        let free = spec.stages.map(|s| s.t_fixed.is_none());
        let layout = Layout::new(n, free, hp_count);
        let p = &spec.params;

        let skip = |j: usize, k: usize| j == 0 && k == 0 && !spec.constrain_initial_node;
        let mut vertex_rows = Vec::new();
        let mut beta_nodes = Vec::new();
        for j in 0..3 {
            for k in 0..=n[j] {
                if skip(j, k) {
                    continue;
                }
                beta_nodes.push(NodeRef { stage: j, k });
                for body in Body::BOTH {
                    let hps = &corridors[spec.stages[j].corridor_of(body)];
                    let shift = if body == Body::Truck { p.m0 } else { 0.0 };
                    for (h, hp) in hps.iter().enumerate() {
                        for (lx, ly) in corner_offsets(body_rect(p, body)) {
                            vertex_rows.push(VertexRow {
                                stage: j,
                                k,
                                body,
                                h,
                                hp: *hp,
                                ox: lx + shift,
                                oy: ly,
                            });
                        }
                    }
                }
            }
        }
        let intervals: usize = n.iter().sum();
        let num_eq = 4
            + 2 * usize::from(spec.u0.is_some())
            + 4 * intervals
            + 2 * 6
            + 4
            + 2 * usize::from(spec.uf.is_some());
        let num_in = vertex_rows.len() + 4 * intervals + 2 * beta_nodes.len();
        Ok(Self {
            stage_t: spec.stages.map(|s| s.t_fixed.unwrap_or(0.0)),
            spec: spec.clone(),
            layout,
            vertex_rows,
            beta_nodes,
            num_eq,
            num_in,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn spec(&self) -> &OcpSpec {
        &self.spec
    }

    fn stage_time(&self, z: &[f64], j: usize) -> f64 {
        match self.layout.time(j) {
            Some(i) => z[i],
            None => self.stage_t[j],
        }
    }

    fn state(&self, z: &[f64], j: usize, k: usize) -> [f64; 4] {
        let i = self.layout.state(j, k);
        [z[i], z[i + 1], z[i + 2], z[i + 3]]
    }

    fn local_vector(&self, z: &[f64], j: usize, k: usize) -> SVector<f64, 9> {
        let xs = self.layout.state(j, k);
        let ua = self.layout.control(j, k);
        let ub = self.layout.control(j, k + 1);
        SVector::from([
            z[xs],
            z[xs + 1],
            z[xs + 2],
            z[xs + 3],
            z[ua],
            z[ua + 1],
            z[ub],
            z[ub + 1],
            self.stage_time(z, j),
        ])
    }

    /// Global indices of the local defect variables; `None` for a frozen time.
    fn local_indices(&self, j: usize, k: usize) -> [Option<usize>; 9] {
        let xs = self.layout.state(j, k);
        let ua = self.layout.control(j, k);
        let ub = self.layout.control(j, k + 1);
        [
            Some(xs),
            Some(xs + 1),
            Some(xs + 2),
            Some(xs + 3),
            Some(ua),
            Some(ua + 1),
            Some(ub),
            Some(ub + 1),
            self.layout.time(j),
        ]
    }

    fn intervals(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..3).flat_map(move |j| (0..self.layout.n[j]).map(move |k| (j, k)))
    }

    /// Rotation-center position and rotation angle of a body at a node, plus
    /// the hitch-arm term for the truck.
    fn vertex_value(&self, z: &[f64], row: &VertexRow) -> f64 {
        let x = self.state(z, row.stage, row.k);
        let s = z[self.layout.slack(row.stage, row.k, row.body, row.h)];
        let (cx, cy, phi) = match row.body {
            Body::Trailer => (x[0], x[1], x[2]),
            Body::Truck => (
                x[0] + self.spec.params.l1 * x[2].cos(),
                x[1] + self.spec.params.l1 * x[2].sin(),
                x[3],
            ),
        };
        let (c, sn) = (phi.cos(), phi.sin());
        let px = cx + c * row.ox - sn * row.oy;
        let py = cy + sn * row.ox + c * row.oy;
        row.hp.a * px + row.hp.b * py + row.hp.c - s
    }

    /// Packs an initial guess. Slacks of mismatched shape fall back to
    /// `-s_d`.
    pub fn pack(&self, guess: &[StageSolution]) -> Result<Vec<f64>, CoreError> {
        if guess.len() != 3 {
            return Err(CoreError::InvalidSpec(format!(
                "guess has {} stages, expected 3",
                guess.len()
            )));
        }
        let mut z = vec![0.0; self.layout.num_variables()];
        for (j, g) in guess.iter().enumerate() {
            let n = self.layout.n[j];
            if g.states.len() != n + 1 || g.controls.len() != n + 1 {
                return Err(CoreError::InvalidSpec(format!(
                    "guess stage {j} has the wrong node count"
                )));
            }
            for k in 0..=n {
                let i = self.layout.state(j, k);
                z[i..i + 4].copy_from_slice(&g.states[k].to_array());
                let i = self.layout.control(j, k);
                z[i..i + 2].copy_from_slice(&g.controls[k].to_array());
                for (slot, body) in Body::BOTH.into_iter().enumerate() {
                    let count = self.layout.num_halfplanes(j, body);
                    let given = g.slacks[slot].get(k).filter(|v| v.len() == count);
                    for h in 0..count {
                        z[self.layout.slack(j, k, body, h)] =
                            given.map_or(-self.spec.s_d, |v| v[h]);
                    }
                }
            }
            if let Some(i) = self.layout.time(j) {
                z[i] = g.t;
            }
        }
        Ok(z)
    }

    pub fn unpack(&self, result: &SolveResult) -> MultiStageSolution {
        let z = &result.z;
        let stages = (0..3)
            .map(|j| {
                let n = self.layout.n[j];
                let states = (0..=n)
                    .map(|k| State::from_array(self.state(z, j, k)))
                    .collect();
                let controls = (0..=n)
                    .map(|k| {
                        let i = self.layout.control(j, k);
                        Control::new(z[i], z[i + 1])
                    })
                    .collect();
                let slacks = Body::BOTH.map(|body| {
                    (0..=n)
                        .map(|k| {
                            (0..self.layout.num_halfplanes(j, body))
                                .map(|h| z[self.layout.slack(j, k, body, h)])
                                .collect()
                        })
                        .collect()
                });
                StageSolution {
                    states,
                    controls,
                    t: self.stage_time(z, j),
                    slacks,
                }
            })
            .collect();
        MultiStageSolution {
            stages,
            status: result.status,
            iterations: result.iterations,
            objective: result.objective,
            kkt_residual: result.kkt_residual,
            constraint_violation: result.constraint_violation,
        }
    }
}

impl NlpProblem for OcpProblem {
    fn num_variables(&self) -> usize {
        self.layout.num_variables()
    }

    fn num_equalities(&self) -> usize {
        self.num_eq
    }

    fn num_inequalities(&self) -> usize {
        self.num_in
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.layout.num_variables();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        let p = &self.spec.params;
        for j in 0..3 {
            for k in 0..=self.layout.n[j] {
                let i = self.layout.control(j, k);
                lo[i] = p.u_min.v0;
                hi[i] = p.u_max.v0;
                lo[i + 1] = p.u_min.omega0;
                hi[i + 1] = p.u_max.omega0;
                for body in Body::BOTH {
                    for h in 0..self.layout.num_halfplanes(j, body) {
                        hi[self.layout.slack(j, k, body, h)] = 0.0;
                    }
                }
            }
            if let Some(i) = self.layout.time(j) {
                lo[i] = self.spec.t_min;
                hi[i] = self.spec.t_max;
            }
        }
        // pinned nodes are fixed by equalities; a bound next to the pin only
        // degrades the barrier
        let pinned = [
            (self.spec.u0.is_some(), self.layout.control(0, 0)),
            (
                self.spec.uf.is_some(),
                self.layout.control(2, self.layout.n[2]),
            ),
        ];
        for (_, i) in pinned.into_iter().filter(|p| p.0) {
            for v in [i, i + 1] {
                lo[v] = f64::NEG_INFINITY;
                hi[v] = f64::INFINITY;
            }
        }
        (lo, hi)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let mut f: f64 = (0..3).map(|j| self.stage_time(z, j)).sum();
        for j in 0..3 {
            for k in 0..=self.layout.n[j] {
                for body in Body::BOTH {
                    let w = self.spec.weight(body);
                    for h in 0..self.layout.num_halfplanes(j, body) {
                        let s = z[self.layout.slack(j, k, body, h)];
                        f += w * (s + self.spec.s_d).powi(2);
                    }
                }
            }
        }
        f
    }

    fn objective_gradient(&self, z: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        for j in 0..3 {
            if let Some(i) = self.layout.time(j) {
                grad[i] = 1.0;
            }
            for k in 0..=self.layout.n[j] {
                for body in Body::BOTH {
                    let w = self.spec.weight(body);
                    for h in 0..self.layout.num_halfplanes(j, body) {
                        let i = self.layout.slack(j, k, body, h);
                        grad[i] = 2.0 * w * (z[i] + self.spec.s_d);
                    }
                }
            }
        }
    }

    fn equalities(&self, z: &[f64], out: &mut [f64]) {
        let l = &self.layout;
        let mut r = 0;
        let mut push = |v: f64| {
            out[r] = v;
            r += 1;
        };
        let x0 = self.spec.x0.to_array();
        let s = l.state(0, 0);
        for i in 0..4 {
            push(z[s + i] - x0[i]);
        }
        if let Some(u0) = self.spec.u0 {
            let c = l.control(0, 0);
            push(z[c] - u0.v0);
            push(z[c + 1] - u0.omega0);
        }
        let p = &self.spec.params;
        for (j, k) in self.intervals() {
            let w = self.local_vector(z, j, k);
            let f = local_dual(&w, l.n[j], self.spec.substeps, p.l1, p.m0);
            let next = l.state(j, k + 1);
            for i in 0..4 {
                push(z[next + i] - f[i]);
            }
        }
        for j in 0..2 {
            let a = l.state(j, l.n[j]);
            let b = l.state(j + 1, 0);
            for i in 0..4 {
                push(z[a + i] - z[b + i]);
            }
            let a = l.control(j, l.n[j]);
            let b = l.control(j + 1, 0);
            for i in 0..2 {
                push(z[a + i] - z[b + i]);
            }
        }
        let xf = self.spec.xf.to_array();
        let s = l.state(2, l.n[2]);
        for i in 0..4 {
            push(z[s + i] - xf[i]);
        }
        if let Some(uf) = self.spec.uf {
            let c = l.control(2, l.n[2]);
            push(z[c] - uf.v0);
            push(z[c + 1] - uf.omega0);
        }
        debug_assert_eq!(r, self.num_eq);
    }

    fn inequalities(&self, z: &[f64], out: &mut [f64]) {
        let l = &self.layout;
        let p = &self.spec.params;
        let mut r = 0;
        for row in &self.vertex_rows {
            out[r] = self.vertex_value(z, row);
            r += 1;
        }
        let du_max = p.du_max.to_array();
        let du_min = p.du_min.to_array();
        for (j, k) in self.intervals() {
            let h = self.stage_time(z, j) / l.n[j] as f64;
            let a = l.control(j, k);
            let b = l.control(j, k + 1);
            for c in 0..2 {
                let d = z[b + c] - z[a + c];
                out[r] = d - du_max[c] * h;
                out[r + 1] = du_min[c] * h - d;
                r += 2;
            }
        }
        for node in &self.beta_nodes {
            let x = self.state(z, node.stage, node.k);
            let beta = x[3] - x[2];
            out[r] = p.beta_min - beta;
            out[r + 1] = beta - p.beta_max;
            r += 2;
        }
        debug_assert_eq!(r, self.num_in);
    }

    fn equality_jacobian(&self, z: &[f64]) -> Triplets {
        let l = &self.layout;
        let p = &self.spec.params;
        let mut t = Triplets::with_capacity(self.num_eq, l.num_variables(), 40 * self.num_eq);
        let mut r = 0;
        let s = l.state(0, 0);
        for i in 0..4 {
            t.push(r, s + i, 1.0);
            r += 1;
        }
        if self.spec.u0.is_some() {
            let c = l.control(0, 0);
            t.push(r, c, 1.0);
            t.push(r + 1, c + 1, 1.0);
            r += 2;
        }
        for (j, k) in self.intervals() {
            let w = self.local_vector(z, j, k);
            let (n, sub) = (l.n[j], self.spec.substeps);
            let (_, jac) = jacobian(|w| SVector::from(local_dual(&w, n, sub, p.l1, p.m0)), &w);
            let idx = self.local_indices(j, k);
            let next = l.state(j, k + 1);
            for i in 0..4 {
                t.push(r + i, next + i, 1.0);
                for (c, g) in idx.iter().enumerate() {
                    if let Some(g) = g {
                        t.push(r + i, *g, -jac[(i, c)]);
                    }
                }
            }
            r += 4;
        }
        for j in 0..2 {
            let a = l.state(j, l.n[j]);
            let b = l.state(j + 1, 0);
            for i in 0..4 {
                t.push(r, a + i, 1.0);
                t.push(r, b + i, -1.0);
                r += 1;
            }
            let a = l.control(j, l.n[j]);
            let b = l.control(j + 1, 0);
            for i in 0..2 {
                t.push(r, a + i, 1.0);
                t.push(r, b + i, -1.0);
                r += 1;
            }
        }
        let s = l.state(2, l.n[2]);
        for i in 0..4 {
            t.push(r, s + i, 1.0);
            r += 1;
        }
        if self.spec.uf.is_some() {
            let c = l.control(2, l.n[2]);
            t.push(r, c, 1.0);
            t.push(r + 1, c + 1, 1.0);
            r += 2;
        }
        debug_assert_eq!(r, self.num_eq);
        t
    }

    fn inequality_jacobian(&self, z: &[f64]) -> Triplets {
        let l = &self.layout;
        let p = &self.spec.params;
        let mut t = Triplets::with_capacity(self.num_in, l.num_variables(), 6 * self.num_in);
        let mut r = 0;
        for row in &self.vertex_rows {
            let x = self.state(z, row.stage, row.k);
            let s = l.state(row.stage, row.k);
            let (a, b) = (row.hp.a, row.hp.b);
            let phi = if row.body == Body::Truck { x[3] } else { x[2] };
            let (c, sn) = (phi.cos(), phi.sin());
            // d/dφ of the rotated offset
            let dphi = a * (-sn * row.ox - c * row.oy) + b * (c * row.ox - sn * row.oy);
            t.push(r, s, a);
            t.push(r, s + 1, b);
            match row.body {
                Body::Trailer => t.push(r, s + 2, dphi),
                Body::Truck => {
                    let l1 = p.l1;
                    t.push(r, s + 2, a * (-l1 * x[2].sin()) + b * (l1 * x[2].cos()));
                    t.push(r, s + 3, dphi);
                }
            }
            t.push(r, l.slack(row.stage, row.k, row.body, row.h), -1.0);
            r += 1;
        }
        let du_max = p.du_max.to_array();
        let du_min = p.du_min.to_array();
        for (j, k) in self.intervals() {
            let a = l.control(j, k);
            let b = l.control(j, k + 1);
            let inv_n = 1.0 / l.n[j] as f64;
            for c in 0..2 {
                t.push(r, b + c, 1.0);
                t.push(r, a + c, -1.0);
                t.push(r + 1, b + c, -1.0);
                t.push(r + 1, a + c, 1.0);
                if let Some(ti) = l.time(j) {
                    t.push(r, ti, -du_max[c] * inv_n);
                    t.push(r + 1, ti, du_min[c] * inv_n);
                }
                r += 2;
            }
        }
        for node in &self.beta_nodes {
            let s = l.state(node.stage, node.k);
            t.push(r, s + 2, 1.0);
            t.push(r, s + 3, -1.0);
            t.push(r + 1, s + 2, -1.0);
            t.push(r + 1, s + 3, 1.0);
            r += 2;
        }
        debug_assert_eq!(r, self.num_in);
        t
    }

    fn lagrangian_hessian(
        &self,
        z: &[f64],
        obj_factor: f64,
        eq_mult: &[f64],
        ineq_mult: &[f64],
    ) -> Option<Triplets> {
        let l = &self.layout;
        let p = &self.spec.params;
        let n = l.num_variables();
        let mut t = Triplets::with_capacity(
            n,
            n,
            45 * l.n.iter().sum::<usize>() + l.num_slacks() + 3 * l.num_nodes(),
        );

        for j in 0..3 {
            for k in 0..=l.n[j] {
                for body in Body::BOTH {
                    let w = self.spec.weight(body);
                    for h in 0..l.num_halfplanes(j, body) {
                        let i = l.slack(j, k, body, h);
                        t.push(i, i, 2.0 * w * obj_factor);
                    }
                }
            }
        }

        // defect rows start after the initial-state (and pinned control) rows
        let mut r = 4 + 2 * usize::from(self.spec.u0.is_some());
        for (j, k) in self.intervals() {
            let lambda = [eq_mult[r], eq_mult[r + 1], eq_mult[r + 2], eq_mult[r + 3]];
            r += 4;
            let w = self.local_vector(z, j, k);
            let (nj, sub) = (l.n[j], self.spec.substeps);
            let (_, _, hess) = hessian(
                |w| {
                    let f = local_dual(&w, nj, sub, p.l1, p.m0);
                    // the defect is x_next - F, so the multipliers enter with a minus
                    f[0] * (-lambda[0])
                        + f[1] * (-lambda[1])
                        + f[2] * (-lambda[2])
                        + f[3] * (-lambda[3])
                },
                &w,
            );
            let idx = self.local_indices(j, k);
            for a in 0..9 {
                let Some(ga) = idx[a] else { continue };
                for b in 0..=a {
                    let Some(gb) = idx[b] else { continue };
                    let (row, col) = if ga >= gb { (ga, gb) } else { (gb, ga) };
                    t.push(row, col, hess[(a, b)]);
                }
            }
        }

        for (row, &y) in self.vertex_rows.iter().zip(ineq_mult) {
            let x = self.state(z, row.stage, row.k);
            let s = l.state(row.stage, row.k);
            let (a, b) = (row.hp.a, row.hp.b);
            let phi = if row.body == Body::Truck { x[3] } else { x[2] };
            let (c, sn) = (phi.cos(), phi.sin());
            let d2phi = -(a * (c * row.ox - sn * row.oy) + b * (sn * row.ox + c * row.oy));
            match row.body {
                Body::Trailer => t.push(s + 2, s + 2, y * d2phi),
                Body::Truck => {
                    let d2arm = -p.l1 * (a * x[2].cos() + b * x[2].sin());
                    t.push(s + 2, s + 2, y * d2arm);
                    t.push(s + 3, s + 3, y * d2phi);
                }
            }
        }
        Some(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::corridor_from_rect;
    use crate::ocp::{Direction, OcpDefaults};
    use crate::vehicle::VehicleParams;
    use hitch_nlp::{check_gradients, check_hessian};

    fn setup(n: [usize; 3]) -> (OcpSpec, Corridor, Corridor) {
        let a = corridor_from_rect([1.0, 0.0], [4.0, 1.2], 0.0).unwrap();
        let b = corridor_from_rect([3.0, 1.0], [1.2, 4.0], 0.0).unwrap();
        let d = OcpDefaults {
            n,
            ..OcpDefaults::default()
        };
        let spec = OcpSpec::new(
            State::new(0.0, 0.0, 0.0, 0.0),
            State::new(3.0, 1.5, 1.5, 1.5),
            VehicleParams::default(),
            Direction::Forward,
            &d,
        );
        (spec, a, b)
    }

    #[test]
    fn dimensions_match_hand_count() {
        let (spec, a, b) = setup([4, 4, 4]);
        let p = OcpProblem::new(&spec, (&a, &b)).unwrap();
        assert_eq!(p.num_variables(), 213);
        let mut frozen = spec.clone();
        frozen.stages[1].t_fixed = Some(0.1);
        assert_eq!(
            OcpProblem::new(&frozen, (&a, &b)).unwrap().num_variables(),
            212
        );
    }

    #[test]
    fn rejects_foreign_corridor_index() {
        let (mut spec, a, b) = setup([4, 4, 4]);
        spec.stages[0].corridor_truck = 3;
        assert!(OcpProblem::new(&spec, (&a, &b)).is_err());
    }

    fn pseudo_random_point(p: &OcpProblem, seed: u64) -> Vec<f64> {
        // deterministic spread of values strictly inside the bounds
        let (lo, hi) = p.bounds();
        let mut state = seed;
        (0..p.num_variables())
            .map(|i| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let u = (state >> 11) as f64 / (1u64 << 53) as f64;
                let (l, h) = (lo[i].max(-1.0), hi[i].min(2.0));
                let l = if lo[i].is_finite() {
                    l.max(lo[i] + 0.05 * (h - lo[i].max(-1.0)))
                } else {
                    l
                };
                l + (h - l) * (0.05 + 0.9 * u)
            })
            .collect()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (mut spec, a, b) = setup([3, 2, 3]);
        spec.u0 = Some(Control::new(0.1, 0.2));
        spec.uf = Some(Control::ZERO);
        for frozen in [None, Some(0.1)] {
            spec.stages[0].t_fixed = frozen;
            let p = OcpProblem::new(&spec, (&a, &b)).unwrap();
            for seed in 1..4 {
                let z = pseudo_random_point(&p, seed);
                let err = check_gradients(&p, &z, 1e-6);
                assert!(err.max() < 1e-5, "{err:?}");
                let ye: Vec<f64> = (0..p.num_equalities())
                    .map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.1)
                    .collect();
                let yi: Vec<f64> = (0..p.num_inequalities())
                    .map(|i| (i % 5) as f64 * 0.2)
                    .collect();
                let herr = check_hessian(&p, &z, &ye, &yi, 1e-5).unwrap();
                assert!(herr < 1e-4, "hessian {herr}");
            }
        }
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        struct Corrupt(OcpProblem);
        impl NlpProblem for Corrupt {
            fn num_variables(&self) -> usize {
                self.0.num_variables()
            }
            fn num_equalities(&self) -> usize {
                self.0.num_equalities()
            }
            fn num_inequalities(&self) -> usize {
                self.0.num_inequalities()
            }
            fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
                self.0.bounds()
            }
            fn objective(&self, z: &[f64]) -> f64 {
                self.0.objective(z)
            }
            fn objective_gradient(&self, z: &[f64], g: &mut [f64]) {
                self.0.objective_gradient(z, g);
                g[5] += 1.0;
            }
            fn equalities(&self, z: &[f64], o: &mut [f64]) {
                self.0.equalities(z, o)
            }
            fn inequalities(&self, z: &[f64], o: &mut [f64]) {
                self.0.inequalities(z, o)
            }
            fn equality_jacobian(&self, z: &[f64]) -> Triplets {
                self.0.equality_jacobian(z)
            }
            fn inequality_jacobian(&self, z: &[f64]) -> Triplets {
                self.0.inequality_jacobian(z)
            }
        }
        let (spec, a, b) = setup([2, 2, 2]);
        let p = Corrupt(OcpProblem::new(&spec, (&a, &b)).unwrap());
        let z = pseudo_random_point(&p.0, 9);
        assert!(check_gradients(&p, &z, 1e-6).max() >= 0.1);
    }
}
