//! Closed-loop simulation: plant integration at the controller rate, planner
//! solves stamped with a latency model, and a maneuver state machine.
//!
//! Solves run synchronously inside the loop. A solve requested at `t`
//! becomes available at `t + latency` and is stitched at `t + Δt_u`; a result
//! that arrives after its stitch time is dropped as a stall.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use hitch_nlp::{IterationLog, SolveOptions, SolveStatus};

use crate::geometry::{validate_route, Corridor, Route};
use crate::mpc::{
    apply_update, cold_iterations, num_pairs, pair, pair_violation, plan_initial, solve_update,
    InitKind, MpcConfig, PlannerState, StructureKey, UpdateOutcome,
};
use crate::ocp::{check_feasibility, ConstraintFamily, OcpDefaults};
use crate::tracking::{control_correction, frame_error, GainSchedule, TrackingError};
use crate::trajectory::stitch_jump;
use crate::vehicle::{
    integrate_interval_dual, trailer_speed, wrap_angle, Control, State, VehicleParams,
};
use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatencyModel {
    /// Every solve takes `τ` seconds.
    Fixed(f64),
    /// `base + per_iteration · iterations`.
    PerIteration { base: f64, per_iteration: f64 },
    /// Measured solve time times `scale`. Not reproducible.
    WallClock { scale: f64 },
}

impl LatencyModel {
    fn latency(&self, out: &UpdateOutcome) -> f64 {
        match *self {
            LatencyModel::Fixed(tau) => tau,
            LatencyModel::PerIteration {
                base,
                per_iteration,
            } => base + per_iteration * out.iterations() as f64,
            LatencyModel::WallClock { scale } => out.wall_time.as_secs_f64() * scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    /// Standard deviation of the noise added to `v0` [m/s].
    pub sigma_v: f64,
    /// Standard deviation of the noise added to `omega0` [rad/s].
    pub sigma_omega: f64,
    /// Offset of the plant start from the planned start.
    pub initial_offset: State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rate_hz: f64,
    pub plant_substeps: usize,
    pub latency: LatencyModel,
    /// Lead time of each update point [s].
    pub update_window: f64,
    pub disturbance: Disturbance,
    pub seed: u64,
    pub max_time: f64,
    pub position_tol: f64,
    pub heading_tol: f64,
    /// Time the vehicle rests after its reference ends before the terminal
    /// pose is checked [s].
    pub settle_time: f64,
    pub smart_init: bool,
    pub solver: SolveOptions,
    /// Re-solve every warm or smart-initialized update from the flat guess
    /// to record the cold iteration count.
    pub cold_comparison: bool,
    /// Only every `cold_stride`-th warm update is re-solved; transitions
    /// always are.
    pub cold_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rate_hz: 100.0,
            plant_substeps: 4,
            latency: LatencyModel::Fixed(0.1),
            update_window: 0.2,
            disturbance: Disturbance::default(),
            seed: 0,
            max_time: 300.0,
            position_tol: 0.05,
            heading_tol: 2f64.to_radians(),
            settle_time: 0.5,
            smart_init: true,
            solver: SolveOptions::default(),
            cold_comparison: false,
            cold_stride: 10,
        }
    }
}

impl SimConfig {
    /// Fixed latency `tau` with the update window at twice that.
    pub fn with_latency(mut self, tau: f64) -> Self {
        self.latency = LatencyModel::Fixed(tau);
        self.update_window = 2.0 * tau;
        self
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |m: &str| Err(CoreError::InvalidSpec(m.to_string()));
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return bad("controller rate must be positive");
        }
        if self.plant_substeps == 0 {
            return bad("plant substeps must be at least 1");
        }
        if !(self.update_window > 0.0) {
            return bad("update window must be positive");
        }
        if !(self.max_time > 0.0) {
            return bad("max time must be positive");
        }
        if !(self.disturbance.sigma_v >= 0.0 && self.disturbance.sigma_omega >= 0.0) {
            return bad("noise levels must be nonnegative");
        }
        let latency_ok = match self.latency {
            LatencyModel::Fixed(t) => t >= 0.0,
            LatencyModel::PerIteration {
                base,
                per_iteration,
            } => base >= 0.0 && per_iteration >= 0.0,
            LatencyModel::WallClock { scale } => scale >= 0.0,
        };
        if !latency_ok {
            return bad("latency must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maneuver {
    /// Indices into the scenario corridors, in driving order.
    pub corridors: Vec<usize>,
    pub terminal: State,
    /// Rest after reaching the terminal pose [s].
    pub wait: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: VehicleParams,
    pub corridors: Vec<Corridor>,
    pub initial: State,
    pub maneuvers: Vec<Maneuver>,
    pub gains: GainSchedule,
    pub ocp: OcpDefaults,
}

impl Scenario {
    pub fn route(&self, m: usize) -> Route {
        let man = &self.maneuvers[m];
        Route {
            corridors: man
                .corridors
                .iter()
                .map(|&i| self.corridors[i].clone())
                .collect(),
            terminal: man.terminal,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.params.validate()?;
        self.gains.validate()?;
        if self.maneuvers.is_empty() {
            return Err(CoreError::InvalidRoute("scenario has no maneuvers".into()));
        }
        for (m, man) in self.maneuvers.iter().enumerate() {
            if man.corridors.is_empty() {
                return Err(CoreError::InvalidRoute(format!(
                    "maneuver {m} has no corridors"
                )));
            }
            if let Some(&i) = man.corridors.iter().find(|&&i| i >= self.corridors.len()) {
                return Err(CoreError::InvalidRoute(format!(
                    "maneuver {m} uses unknown corridor {i}"
                )));
            }
            if !(man.wait >= 0.0) {
                return Err(CoreError::InvalidRoute(format!(
                    "maneuver {m} has a negative wait"
                )));
            }
            if let Some(v) = validate_route(&self.route(m), &self.params).first() {
                return Err(CoreError::InvalidRoute(format!("maneuver {m}: {v}")));
            }
        }
        Ok(())
    }

    /// Global pair index: the scenario index of the pair's first corridor.
    fn global_pair(&self, m: usize, pair: usize) -> usize {
        let c = &self.maneuvers[m].corridors;
        c[pair.min(c.len() - 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: State,
    pub x_ref: State,
    pub u_ff: Control,
    pub u_applied: Control,
    pub error: TrackingError,
    pub pair_index: usize,
    pub maneuver: usize,
    /// Worst corridor residual of either body against the active pair [m].
    pub corridor_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveRecord {
    pub maneuver: usize,
    pub t_request: f64,
    pub t_available: f64,
    pub t_stitch: f64,
    pub key: StructureKey,
    pub init: InitKind,
    pub iterations: usize,
    pub status: SolveStatus,
    pub wall_time: f64,
    /// Arrived after its stitch time and was dropped.
    pub stalled: bool,
    /// Stitched into the reference.
    pub accepted: bool,
    /// Worst constraint family of the independent re-check (converged only).
    pub feasibility: Option<(ConstraintFamily, f64)>,
    /// Largest stage stitching mismatch (converged only).
    pub stitching: Option<f64>,
    pub total_time: f64,
    /// Straight-line trailer distance of the solve divided by the top speed.
    pub min_time: f64,
    /// Reference jump at the stitch time; `None` unless stitched into an
    /// existing reference (a maneuver's first plan has nothing to stitch to).
    pub stitch_jump: Option<f64>,
    /// Iterations and status of the same problem solved from the flat guess.
    pub cold: Option<(usize, SolveStatus)>,
}

impl SolveRecord {
    /// Solve started without reusing a previous solution.
    pub fn transition(&self) -> bool {
        self.init != InitKind::Warm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverSummary {
    pub completed: bool,
    pub start: f64,
    pub end: f64,
    pub position_error: f64,
    pub heading_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub success: bool,
    pub total_time: f64,
    pub maneuvers: Vec<ManeuverSummary>,
    pub max_err: f64,
    pub mean_err: f64,
    pub max_corridor_violation: f64,
    pub solves: usize,
    pub converged: usize,
    pub stalls: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trace: Vec<TraceRow>,
    pub solves: Vec<SolveRecord>,
    pub summary: Summary,
}

/// Additive Gaussian control noise from a seeded generator.
pub struct ControlNoise {
    rng: ChaCha8Rng,
    v: Option<Normal<f64>>,
    omega: Option<Normal<f64>>,
}

impl ControlNoise {
    pub fn new(seed: u64, sigma_v: f64, sigma_omega: f64) -> Self {
        let normal =
            |s: f64| (s > 0.0).then(|| Normal::new(0.0, s).expect("finite nonnegative deviation"));
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            v: normal(sigma_v),
            omega: normal(sigma_omega),
        }
    }

    pub fn sample(&mut self) -> Control {
        let v = self.v.map_or(0.0, |d| d.sample(&mut self.rng));
        let omega = self.omega.map_or(0.0, |d| d.sample(&mut self.rng));
        Control::new(v, omega)
    }
}

/// Integrates the plant over `dt` with the control held constant.
pub fn step_plant(
    x: &State,
    u_applied: &Control,
    noise: &Control,
    dt: f64,
    substeps: usize,
    p: &VehicleParams,
) -> State {
    let u = [u_applied.v0 + noise.v0, u_applied.omega0 + noise.omega0];
    State::from_array(integrate_interval_dual(
        &x.to_array(),
        &u,
        &u,
        &dt,
        substeps.max(1),
        p.l1,
        p.m0,
    ))
}

struct Pending {
    outcome: UpdateOutcome,
    t_request: f64,
    t_available: f64,
}

enum Phase {
    /// Waiting for the first plan of a maneuver.
    Planning {
        t_available: f64,
        planner: Box<PlannerState>,
    },
    Driving {
        planner: Box<PlannerState>,
        pending: Option<Pending>,
    },
    Resting {
        until: f64,
        hold: State,
    },
    Done,
}

struct Recorder<'a> {
    scn: &'a Scenario,
    cfg: &'a SimConfig,
    mpc: MpcConfig,
    solves: Vec<SolveRecord>,
}

impl Recorder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        m: usize,
        route: &Route,
        out: &UpdateOutcome,
        t_request: f64,
        t_available: f64,
        stalled: bool,
        accepted: bool,
        jump: Option<f64>,
    ) {
        let sol = &out.solution;
        let converged = sol.status == SolveStatus::Converged;
        let report =
            converged.then(|| check_feasibility(sol, &out.spec, pair(route, out.key.pair), 1e-4));
        let sampled = match out.init {
            InitKind::Flat => false,
            InitKind::Smart => true,
            InitKind::Warm => {
                let warm = self
                    .solves
                    .iter()
                    .filter(|s| s.init == InitKind::Warm)
                    .count();
                warm % self.cfg.cold_stride.max(1) == 0
            }
        };
        let cold = (self.cfg.cold_comparison && sampled)
            .then(|| cold_iterations(out, route, &self.mpc).ok())
            .flatten()
            .map(|s| (s.iterations, s.status));
        let dist = (out.spec.xf.px1 - out.spec.x0.px1).hypot(out.spec.xf.py1 - out.spec.x0.py1);
        self.solves.push(SolveRecord {
            maneuver: m,
            t_request,
            t_available,
            t_stitch: out.t_stitch,
            key: StructureKey {
                pair: self.scn.global_pair(m, out.key.pair),
                ..out.key
            },
            init: out.init,
            iterations: sol.iterations,
            status: sol.status,
            wall_time: out.wall_time.as_secs_f64(),
            stalled,
            accepted,
            feasibility: report.as_ref().map(|r| r.worst()),
            stitching: report
                .as_ref()
                .map(|r| r.violation(ConstraintFamily::Stitching)),
            total_time: sol.total_time(),
            min_time: dist / out.spec.params.v_max(),
            stitch_jump: jump,
            cold,
        });
    }
}

fn terminal_errors(x: &State, target: &State) -> (f64, f64) {
    (
        (x.px1 - target.px1).hypot(x.py1 - target.py1),
        wrap_angle(x.theta1 - target.theta1).abs(),
    )
}

/// Runs every maneuver of the scenario in closed loop.
pub fn run_closed_loop(scn: &Scenario, cfg: &SimConfig) -> Result<SimResult, CoreError> {
    run_closed_loop_logged(scn, cfg, &mut |_| {})
}

/// [`run_closed_loop`] with every solver iteration passed to `log`.
pub fn run_closed_loop_logged(
    scn: &Scenario,
    cfg: &SimConfig,
    log: &mut dyn FnMut(&IterationLog),
) -> Result<SimResult, CoreError> {
    scn.validate()?;
    cfg.validate()?;
    let p = scn.params;
    let dt = 1.0 / cfg.rate_hz;
    let mpc = MpcConfig {
        ocp: scn.ocp,
        solver: cfg.solver.clone(),
        smart_init: cfg.smart_init,
        update_window: cfg.update_window,
        ..MpcConfig::default()
    };
    let mut rec = Recorder {
        scn,
        cfg,
        mpc: mpc.clone(),
        solves: Vec::new(),
    };
    let mut noise = ControlNoise::new(
        cfg.seed,
        cfg.disturbance.sigma_v,
        cfg.disturbance.sigma_omega,
    );
    let off = cfg.disturbance.initial_offset;
    let mut x = State::new(
        scn.initial.px1 + off.px1,
        scn.initial.py1 + off.py1,
        scn.initial.theta1 + off.theta1,
        scn.initial.theta0 + off.theta0,
    );

    let mut trace = Vec::new();
    let mut maneuvers: Vec<ManeuverSummary> = Vec::new();
    let mut failure = None;
    let mut m = 0;
    let mut route = scn.route(0);

    let start_maneuver = |m: usize,
                          x0: &State,
                          t: f64,
                          rec: &mut Recorder<'_>,
                          log: &mut dyn FnMut(&IterationLog)|
     -> Result<Phase, CoreError> {
        let route = scn.route(m);
        let (mut planner, out) = plan_initial(&route, x0, &p, &rec.mpc, t, log)?;
        // the plan starts once it is available; the vehicle rests meanwhile
        let t_available = t + cfg.latency.latency(&out);
        planner.retime(t_available)?;
        rec.record(m, &route, &out, t, t_available, false, true, None);
        Ok(Phase::Planning {
            t_available,
            planner: Box::new(planner),
        })
    };

    let mut phase = {
        let ph = start_maneuver(0, &scn.initial, 0.0, &mut rec, log)?;
        maneuvers.push(ManeuverSummary {
            completed: false,
            start: 0.0,
            end: f64::NAN,
            position_error: f64::NAN,
            heading_error: f64::NAN,
        });
        ph
    };

    let mut tick: u64 = 0;
    loop {
        let t = tick as f64 * dt;
        if t > cfg.max_time {
            failure = Some(format!(
                "maximum simulation time {} s reached",
                cfg.max_time
            ));
            break;
        }

        // ---- planner events and the maneuver state machine
        let mut next_phase = None;
        match &mut phase {
            Phase::Planning {
                t_available,
                planner,
            } => {
                if t >= *t_available {
                    next_phase = Some(Phase::Driving {
                        planner: planner.clone(),
                        pending: None,
                    });
                }
            }
            Phase::Driving { planner, pending } => {
                if let Some(pd) = pending.as_ref().filter(|pd| t >= pd.t_available) {
                    let stalled = pd.t_available > pd.outcome.t_stitch;
                    let mut accepted = false;
                    let mut jump = None;
                    if !stalled {
                        let next = apply_update(planner, &pd.outcome)?;
                        if pd.outcome.reference.is_some() {
                            jump = Some(stitch_jump(
                                &planner.reference,
                                &next.reference,
                                pd.outcome.t_stitch,
                            ));
                            accepted = true;
                        }
                        **planner = next;
                    }
                    let (out, t_req, t_av) = (pd.outcome.clone(), pd.t_request, pd.t_available);
                    *pending = None;
                    rec.record(m, &route, &out, t_req, t_av, stalled, accepted, jump);
                }
                if pending.is_none() && planner.can_update(t + cfg.update_window, &mpc) {
                    let out = solve_update(planner, t + cfg.update_window, &mpc, log)?;
                    let t_available = t + cfg.latency.latency(&out);
                    *pending = Some(Pending {
                        outcome: out,
                        t_request: t,
                        t_available,
                    });
                }
                let end = planner.reference.end();
                if pending.is_none() && t >= end + cfg.settle_time {
                    let target = route.terminal;
                    let (pos, head) = terminal_errors(&x, &target);
                    if pos <= cfg.position_tol && head <= cfg.heading_tol {
                        let s = maneuvers.last_mut().expect("started");
                        s.completed = true;
                        s.end = end;
                        s.position_error = pos;
                        s.heading_error = head;
                        next_phase = Some(Phase::Resting {
                            until: t + scn.maneuvers[m].wait,
                            hold: x,
                        });
                    }
                }
            }
            Phase::Resting { until, hold } => {
                if t >= *until {
                    if m + 1 < scn.maneuvers.len() {
                        m += 1;
                        route = scn.route(m);
                        let x0 = *hold;
                        match start_maneuver(m, &x0, t, &mut rec, log) {
                            Ok(ph) => {
                                maneuvers.push(ManeuverSummary {
                                    completed: false,
                                    start: t,
                                    end: f64::NAN,
                                    position_error: f64::NAN,
                                    heading_error: f64::NAN,
                                });
                                next_phase = Some(ph);
                            }
                            Err(e) => {
                                failure = Some(format!("maneuver {m}: {e}"));
                                break;
                            }
                        }
                    } else {
                        next_phase = Some(Phase::Done);
                    }
                }
            }
            Phase::Done => {}
        }
        if let Some(ph) = next_phase {
            phase = ph;
        }
        if matches!(phase, Phase::Done) {
            break;
        }

        // ---- control
        let (x_ref, u_ff, u, error, pair_idx, violation) = match &phase {
            Phase::Driving { planner, .. } => {
                let (x_ref, u_ff) = planner.reference.sample(t);
                let (u, e) = control_correction(&x, &planner.reference, t, &p, &scn.gains);
                let tag = planner.reference.tag_at(t).min(num_pairs(&route) - 1);
                let viol = pair_violation(&route, tag, &x, &p);
                (x_ref, u_ff, u, e, scn.global_pair(m, tag), viol)
            }
            Phase::Planning { planner, .. } => {
                let x_ref = planner.reference.state(t);
                let e = frame_error(&x, &x_ref, 0.0, scn.gains.v_dz);
                let viol = pair_violation(&route, 0, &x, &p);
                (
                    x_ref,
                    Control::ZERO,
                    Control::ZERO,
                    e,
                    scn.global_pair(m, 0),
                    viol,
                )
            }
            Phase::Resting { hold, .. } => {
                let target = route.terminal.unwrapped_near(hold.theta1);
                let e = frame_error(&x, &target, 0.0, scn.gains.v_dz);
                let last = num_pairs(&route) - 1;
                let viol = pair_violation(&route, last, &x, &p);
                (
                    target,
                    Control::ZERO,
                    Control::ZERO,
                    e,
                    scn.global_pair(m, last),
                    viol,
                )
            }
            Phase::Done => unreachable!("loop exits on Done"),
        };
        trace.push(TraceRow {
            t,
            x,
            x_ref,
            u_ff,
            u_applied: u,
            error,
            pair_index: pair_idx,
            maneuver: m,
            corridor_violation: violation,
        });
        let w = if matches!(phase, Phase::Driving { .. }) {
            noise.sample()
        } else {
            Control::ZERO
        };
        x = step_plant(&x, &u, &w, dt, cfg.plant_substeps, &p);
        tick += 1;
    }

    let driving: Vec<&TraceRow> = trace
        .iter()
        .filter(|r| trailer_speed(&r.x_ref, &r.u_ff, &p) != 0.0)
        .collect();
    let errs: Vec<f64> = driving
        .iter()
        .map(|r| r.error.dpx1.hypot(r.error.dpy1))
        .collect();
    let success = failure.is_none()
        && maneuvers.len() == scn.maneuvers.len()
        && maneuvers.iter().all(|s| s.completed);
    let summary = Summary {
        success,
        total_time: trace.last().map_or(0.0, |r| r.t),
        max_err: errs.iter().copied().fold(0.0, f64::max),
        mean_err: if errs.is_empty() {
            0.0
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        },
        max_corridor_violation: trace
            .iter()
            .map(|r| r.corridor_violation)
            .fold(f64::NEG_INFINITY, f64::max),
        maneuvers,
        solves: rec.solves.len(),
        converged: rec
            .solves
            .iter()
            .filter(|s| s.status == SolveStatus::Converged)
            .count(),
        stalls: rec.solves.iter().filter(|s| s.stalled).count(),
        failure,
    };
    Ok(SimResult {
        trace,
        solves: rec.solves,
        summary,
    })
}

/// A solve of the smart-init run next to the flat-guess solve of the same
/// problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparedSolve {
    /// Position in the solve sequence of the smart-init run.
    pub index: usize,
    pub smart: (InitKind, usize, SolveStatus),
    /// `None` when the flat solve could not be set up.
    pub flat: Option<(usize, SolveStatus)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub solves: Vec<ComparedSolve>,
    /// The subset of `solves` that entered a new structure.
    pub transitions: Vec<ComparedSolve>,
    pub smart_summary: Summary,
    /// Closed loop run with flat transition guesses throughout.
    pub flat_summary: Summary,
}

/// Runs the scenario with interpolated initialization, re-solving every
/// update from the flat guess, and once more with flat transition guesses
/// in the loop.
pub fn compare_init_strategies(
    scn: &Scenario,
    cfg: &SimConfig,
) -> Result<CompareReport, CoreError> {
    let smart = run_closed_loop(
        scn,
        &SimConfig {
            smart_init: true,
            cold_comparison: true,
            ..cfg.clone()
        },
    )?;
    let flat = run_closed_loop(
        scn,
        &SimConfig {
            smart_init: false,
            cold_comparison: false,
            ..cfg.clone()
        },
    )?;
    let solves: Vec<ComparedSolve> = smart
        .solves
        .iter()
        .enumerate()
        .map(|(index, s)| ComparedSolve {
            index,
            smart: (s.init, s.iterations, s.status),
            flat: s.cold,
        })
        .collect();
    let transitions = solves
        .iter()
        .filter(|c| c.smart.0 != InitKind::Warm)
        .cloned()
        .collect();
    Ok(CompareReport {
        solves,
        transitions,
        smart_summary: smart.summary,
        flat_summary: flat.summary,
    })
}
