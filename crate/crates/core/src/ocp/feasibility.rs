//! Independent check of an OCP solution: re-integrates every shooting
//! interval and evaluates each constraint family from the geometry module,
//! without going through the NLP transcription.

use std::fmt;

use super::solution::MultiStageSolution;
use super::OcpSpec;
use crate::geometry::{max_residual, vehicle_vertices, Body, Corridor};
use crate::vehicle::{shoot, Control, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintFamily {
    InitialState,
    Dynamics,
    Stitching,
    TerminalState,
    Corridor,
    ControlBounds,
    RateBounds,
    Articulation,
    StageTimes,
    Shape,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintFamily::InitialState => "initial state",
            ConstraintFamily::Dynamics => "dynamics",
            ConstraintFamily::Stitching => "stage stitching",
            ConstraintFamily::TerminalState => "terminal state",
            ConstraintFamily::Corridor => "corridor",
            ConstraintFamily::ControlBounds => "control bounds",
            ConstraintFamily::RateBounds => "control rate bounds",
            ConstraintFamily::Articulation => "articulation angle",
            ConstraintFamily::StageTimes => "stage times",
            ConstraintFamily::Shape => "solution shape",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Largest violation per family (0 when satisfied).
    pub violations: Vec<(ConstraintFamily, f64)>,
    pub tol: f64,
}

impl FeasibilityReport {
    pub fn pass(&self) -> bool {
        self.violations.iter().all(|(_, v)| *v <= self.tol)
    }

    pub fn violation(&self, family: ConstraintFamily) -> f64 {
        self.violations
            .iter()
            .find(|(f, _)| *f == family)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn worst(&self) -> (ConstraintFamily, f64) {
        self.violations
            .iter()
            .copied()
            .fold((ConstraintFamily::InitialState, 0.0), |a, b| {
                if b.1 > a.1 {
                    b
                } else {
                    a
                }
            })
    }
}

fn state_gap(a: &State, b: &State) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn control_gap(a: &Control, b: &Control) -> f64 {
    (a.v0 - b.v0).abs().max((a.omega0 - b.omega0).abs())
}

pub fn check_feasibility(
    sol: &MultiStageSolution,
    spec: &OcpSpec,
    pair: (&Corridor, &Corridor),
    tol: f64,
) -> FeasibilityReport {
    let mut worst = std::collections::BTreeMap::new();
    let mut record = |f: ConstraintFamily, v: f64| {
        let e = worst.entry(f).or_insert(0.0_f64);
        // NaN counts as infinitely bad
        *e = if v.is_nan() { f64::INFINITY } else { e.max(v) };
    };
    for f in [
        ConstraintFamily::InitialState,
        ConstraintFamily::Dynamics,
        ConstraintFamily::Stitching,
        ConstraintFamily::TerminalState,
        ConstraintFamily::Corridor,
        ConstraintFamily::ControlBounds,
        ConstraintFamily::RateBounds,
        ConstraintFamily::Articulation,
        ConstraintFamily::StageTimes,
    ] {
        record(f, 0.0);
    }

    let shape_ok = sol.stages.len() == 3
        && sol
            .stages
            .iter()
            .zip(&spec.stages)
            .all(|(s, st)| s.states.len() == st.n + 1 && s.controls.len() == st.n + 1);
    if !shape_ok {
        record(ConstraintFamily::Shape, f64::INFINITY);
        return finish(worst, tol);
    }

    let p = &spec.params;
    let corridors = [pair.0, pair.1];
    record(
        ConstraintFamily::InitialState,
        state_gap(&sol.initial_state(), &spec.x0),
    );
    if let Some(u0) = spec.u0 {
        record(
            ConstraintFamily::InitialState,
            control_gap(&sol.stages[0].controls[0], &u0),
        );
    }
    record(
        ConstraintFamily::TerminalState,
        state_gap(&sol.terminal_state(), &spec.xf),
    );
    if let Some(uf) = spec.uf {
        let last = sol.stages[2].controls.last().expect("nodes");
        record(ConstraintFamily::TerminalState, control_gap(last, &uf));
    }

    for (j, (stage, st)) in sol.stages.iter().zip(&spec.stages).enumerate() {
        let t = stage.t;
        match st.t_fixed {
            Some(tf) => record(ConstraintFamily::StageTimes, (t - tf).abs()),
            None => {
                record(ConstraintFamily::StageTimes, spec.t_min - t);
                record(ConstraintFamily::StageTimes, t - spec.t_max);
            }
        }
        let dt = t / st.n as f64;
        for k in 0..st.n {
            let pair = [stage.controls[k], stage.controls[k + 1]];
            let end = shoot(&stage.states[k], &pair, dt, p, spec.substeps)[1];
            record(
                ConstraintFamily::Dynamics,
                state_gap(&end, &stage.states[k + 1]),
            );

            let du = [pair[1].v0 - pair[0].v0, pair[1].omega0 - pair[0].omega0];
            let hi = p.du_max.to_array();
            let lo = p.du_min.to_array();
            for c in 0..2 {
                record(ConstraintFamily::RateBounds, du[c] - hi[c] * dt);
                record(ConstraintFamily::RateBounds, lo[c] * dt - du[c]);
            }
        }
        for k in 0..=st.n {
            let u = stage.controls[k];
            record(ConstraintFamily::ControlBounds, p.u_min.v0 - u.v0);
            record(ConstraintFamily::ControlBounds, u.v0 - p.u_max.v0);
            record(ConstraintFamily::ControlBounds, p.u_min.omega0 - u.omega0);
            record(ConstraintFamily::ControlBounds, u.omega0 - p.u_max.omega0);
            if j == 0 && k == 0 && !spec.constrain_initial_node {
                continue;
            }
            let x = &stage.states[k];
            let beta = x.theta0 - x.theta1;
            record(ConstraintFamily::Articulation, p.beta_min - beta);
            record(ConstraintFamily::Articulation, beta - p.beta_max);
            for body in Body::BOTH {
                let c = corridors[st.corridor_of(body)];
                record(
                    ConstraintFamily::Corridor,
                    max_residual(c, &vehicle_vertices(x, p, body)),
                );
            }
        }
        if j < 2 {
            let next = &sol.stages[j + 1];
            record(
                ConstraintFamily::Stitching,
                state_gap(stage.states.last().expect("nodes"), &next.states[0]),
            );
            record(
                ConstraintFamily::Stitching,
                control_gap(stage.controls.last().expect("nodes"), &next.controls[0]),
            );
        }
    }
    finish(worst, tol)
}

fn finish(worst: std::collections::BTreeMap<ConstraintFamily, f64>, tol: f64) -> FeasibilityReport {
    FeasibilityReport {
        violations: worst.into_iter().collect(),
        tol,
    }
}
