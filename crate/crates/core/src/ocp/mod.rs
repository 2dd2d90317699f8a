//! Three-stage optimal control problem through a pair of corridors.
//!
//! Stage 1 keeps both bodies in the first corridor, stage 3 keeps both in the
//! second, and stage 2 lets the leading body move into the second corridor
//! while the trailing body is still in the first. Every stage has its own free
//! duration; the objective is the total time plus a penalty pulling the
//! corridor slacks toward a safety distance.

mod feasibility;
mod layout;
mod problem;
mod solution;

pub use feasibility::{check_feasibility, ConstraintFamily, FeasibilityReport};
pub use layout::Layout;
pub use problem::OcpProblem;
pub use solution::{MultiStageSolution, StageSolution};

use hitch_nlp::{solve_with_log, IterationLog, SolveOptions};

use crate::geometry::{Body, Corridor};
use crate::vehicle::{Control, State, VehicleParams};
use crate::CoreError;

/// Which corridor of the pair (0 = first, 1 = second) holds each body during
/// one stage, and its horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpec {
    pub n: usize,
    pub corridor_truck: usize,
    pub corridor_trailer: usize,
    /// Frozen stage duration.
    pub t_fixed: Option<f64>,
}

impl StageSpec {
    pub fn corridor_of(&self, body: Body) -> usize {
        match body {
            Body::Truck => self.corridor_truck,
            Body::Trailer => self.corridor_trailer,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec {
    pub stages: [StageSpec; 3],
    pub x0: State,
    pub xf: State,
    pub params: VehicleParams,
    pub s_d: f64,
    /// Slack weight of the truck.
    pub w0: f64,
    /// Slack weight of the trailer.
    pub w1: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// RK4 steps per shooting interval.
    pub substeps: usize,
    /// Pins the first control node.
    pub u0: Option<Control>,
    /// Pins the last control node.
    pub uf: Option<Control>,
    /// When false, corridor and articulation constraints are not imposed on
    /// the (fixed) first node.
    pub constrain_initial_node: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcpDefaults {
    pub n: [usize; 3],
    pub s_d: f64,
    pub w0: f64,
    pub w1: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub eps_t: f64,
    pub substeps: usize,
}

impl Default for OcpDefaults {
    fn default() -> Self {
        Self {
            n: [10, 10, 10],
            s_d: 0.05,
            w0: 0.1,
            w1: 0.1,
            t_min: 0.05,
            t_max: 60.0,
            eps_t: 0.1,
            substeps: 2,
        }
    }
}

impl OcpSpec {
    /// All three stages free, corridors assigned for `direction`.
    pub fn new(
        x0: State,
        xf: State,
        params: VehicleParams,
        direction: Direction,
        d: &OcpDefaults,
    ) -> Self {
        let assign = assign_stage_corridors(direction);
        let stages = std::array::from_fn(|j| StageSpec {
            n: d.n[j],
            corridor_truck: assign[j].0,
            corridor_trailer: assign[j].1,
            t_fixed: None,
        });
        Self {
            stages,
            x0,
            xf,
            params,
            s_d: d.s_d,
            w0: d.w0,
            w1: d.w1,
            t_min: d.t_min,
            t_max: d.t_max,
            substeps: d.substeps,
            u0: None,
            uf: None,
            constrain_initial_node: true,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |m: &str| Err(CoreError::InvalidSpec(m.to_string()));
        self.params.validate()?;
        for s in &self.stages {
            if s.n == 0 {
                return bad("every stage needs at least one interval");
            }
            if s.corridor_truck > 1 || s.corridor_trailer > 1 {
                return bad("stage corridor index must refer to the pair (0 or 1)");
            }
            if let Some(t) = s.t_fixed {
                if !(t > 0.0 && t.is_finite()) {
                    return bad("fixed stage time must be positive");
                }
            }
        }
        if !(self.w0 >= 0.0 && self.w1 >= 0.0) {
            return bad("slack weights must be nonnegative");
        }
        if !(self.s_d >= 0.0) {
            return bad("safety distance must be nonnegative");
        }
        if !(self.t_min > 0.0 && self.t_min <= self.t_max) {
            return bad("need 0 < T_min <= T_max");
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1");
        }
        if !self.x0.is_finite() || !self.xf.is_finite() {
            return bad("non-finite boundary state");
        }
        Ok(())
    }

    pub fn weight(&self, body: Body) -> f64 {
        match body {
            Body::Truck => self.w0,
            Body::Trailer => self.w1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }
}

/// `(truck corridor, trailer corridor)` for each stage. The leading body
/// enters the second corridor first: the truck when driving forward, the
/// trailer when reversing.
pub fn assign_stage_corridors(direction: Direction) -> [(usize, usize); 3] {
    let middle = match direction {
        Direction::Forward => (1, 0),
        Direction::Reverse => (0, 1),
    };
    [(0, 0), middle, (1, 1)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoutePosition {
    /// Both bodies still in the first corridor.
    Interior,
    /// The vehicle straddles the two corridors.
    EnteringLast,
    /// Both bodies in the second corridor.
    InLast,
}

/// Freezes the stages that are already behind the vehicle to `eps_t`. A
/// frozen stage takes over the corridor assignment of the next open stage.
pub fn close_corridor_stages(spec: &OcpSpec, position: RoutePosition, eps_t: f64) -> OcpSpec {
    let mut out = spec.clone();
    let frozen = match position {
        RoutePosition::Interior => 0,
        RoutePosition::EnteringLast => 1,
        RoutePosition::InLast => 2,
    };
    for j in 0..3 {
        out.stages[j].t_fixed = None;
    }
    for j in 0..frozen {
        let open = out.stages[frozen];
        out.stages[j].t_fixed = Some(eps_t);
        out.stages[j].corridor_truck = open.corridor_truck;
        out.stages[j].corridor_trailer = open.corridor_trailer;
    }
    out
}

pub fn build_nlp(spec: &OcpSpec, pair: (&Corridor, &Corridor)) -> Result<OcpProblem, CoreError> {
    OcpProblem::new(spec, pair)
}

/// Builds and solves the OCP from an initial guess.
pub fn solve_ocp(
    spec: &OcpSpec,
    pair: (&Corridor, &Corridor),
    guess: &[StageSolution],
    opts: &SolveOptions,
    log: &mut dyn FnMut(&IterationLog),
) -> Result<MultiStageSolution, CoreError> {
    let problem = OcpProblem::new(spec, pair)?;
    let z0 = problem.pack(guess)?;
    let result = solve_with_log(&problem, &z0, opts, log)
        .map_err(|e| CoreError::InvalidSpec(e.to_string()))?;
    Ok(problem.unpack(&result))
}
