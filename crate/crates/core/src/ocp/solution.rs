use hitch_nlp::SolveStatus;

use crate::geometry::Body;
use crate::vehicle::{Control, State};

/// Nodes, duration and slacks of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub states: Vec<State>,
    pub controls: Vec<Control>,
    pub t: f64,
    /// `slacks[body][node][halfplane]`, truck first.
    pub slacks: [Vec<Vec<f64>>; 2],
}

impl StageSolution {
    pub fn slacks_of(&self, body: Body) -> &[Vec<f64>] {
        match body {
            Body::Truck => &self.slacks[0],
            Body::Trailer => &self.slacks[1],
        }
    }

    pub fn intervals(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn dt(&self) -> f64 {
        self.t / self.intervals().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStageSolution {
    pub stages: Vec<StageSolution>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
}

impl MultiStageSolution {
    pub fn total_time(&self) -> f64 {
        self.stages.iter().map(|s| s.t).sum()
    }

    pub fn initial_state(&self) -> State {
        self.stages[0].states[0]
    }

    pub fn terminal_state(&self) -> State {
        *self
            .stages
            .last()
            .expect("three stages")
            .states
            .last()
            .expect("nodes")
    }

    /// Node times relative to the start, node states and node controls over
    /// all stages, with the duplicated boundary nodes removed.
    pub fn nodes(&self) -> Vec<(f64, State, Control)> {
        let mut out = Vec::new();
        let mut t0 = 0.0;
        for (j, s) in self.stages.iter().enumerate() {
            let dt = s.dt();
            for k in 0..s.states.len() {
                if j > 0 && k == 0 {
                    continue;
                }
                out.push((t0 + k as f64 * dt, s.states[k], s.controls[k]));
            }
            t0 += s.t;
        }
        out
    }

    /// Piecewise-linear interpolation of the node states and controls at
    /// time `t` from the start; held constant outside `[0, total_time]`.
    pub fn sample(&self, t: f64) -> (State, Control) {
        let mut t0 = 0.0;
        for s in &self.stages {
            if t <= t0 + s.t {
                let dt = s.dt();
                let tau = ((t - t0) / dt).max(0.0);
                let k = (tau.floor() as usize).min(s.intervals().saturating_sub(1));
                let frac = (tau - k as f64).clamp(0.0, 1.0);
                return (
                    s.states[k].lerp(&s.states[k + 1], frac),
                    s.controls[k].lerp(&s.controls[k + 1], frac),
                );
            }
            t0 += s.t;
        }
        let last = self.stages.last().expect("three stages");
        (
            *last.states.last().expect("nodes"),
            *last.controls.last().expect("nodes"),
        )
    }
}
