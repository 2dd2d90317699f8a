//! Receding-horizon planning along a route of corridors.
//!
//! Each solve covers one pair of consecutive corridors. The initial state of
//! an update is taken from the active reference a short window ahead of the
//! current time, and the new solution is stitched into the reference at that
//! point.

use std::time::{Duration, Instant};

use hitch_nlp::{IterationLog, SolveOptions, SolveStatus};

use crate::geometry::{
    contains, max_residual, validate_route, vehicle_vertices, Body, Corridor, Route,
};
use crate::ocp::{
    check_feasibility, close_corridor_stages, solve_ocp, Direction, MultiStageSolution,
    OcpDefaults, OcpSpec, RoutePosition, StageSolution,
};
use crate::trajectory::TimedTrajectory;
use crate::vehicle::{Control, State, VehicleParams};
use crate::CoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub ocp: OcpDefaults,
    pub solver: SolveOptions,
    /// Initialize transition solves by interpolation; otherwise they start
    /// from a flat guess.
    pub smart_init: bool,
    /// Lead time of the update point ahead of the request time [s].
    pub update_window: f64,
    /// Knot spacing of the reference [s].
    pub reference_dt: f64,
    /// Containment tolerance when locating the vehicle on the route [m].
    pub containment_tol: f64,
    /// No updates are made once less than this remains of the reference [s].
    pub min_remaining: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            ocp: OcpDefaults::default(),
            solver: SolveOptions::default(),
            smart_init: true,
            update_window: 0.2,
            reference_dt: 0.01,
            containment_tol: 1e-3,
            min_remaining: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitKind {
    Smart,
    Flat,
    Warm,
}

/// Everything that changes the shape of the OCP. A new key means the
/// previous solution is not reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StructureKey {
    pub pair: usize,
    pub position: RoutePosition,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    pub route: Route,
    pub params: VehicleParams,
    pub pair_index: usize,
    pub reference: TimedTrajectory,
    pub last_solution: MultiStageSolution,
    pub key: StructureKey,
    /// Clock time at which `last_solution` starts.
    pub origin: f64,
    pub update_window: f64,
    directions: Vec<Option<Direction>>,
}

/// Result of one planner solve, before it is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub t_stitch: f64,
    pub key: StructureKey,
    pub init: InitKind,
    pub spec: OcpSpec,
    pub solution: MultiStageSolution,
    /// New reference from `t_stitch` on, when the solve converged.
    pub reference: Option<TimedTrajectory>,
    pub wall_time: Duration,
}

impl UpdateOutcome {
    pub fn converged(&self) -> bool {
        self.solution.status == SolveStatus::Converged
    }

    pub fn iterations(&self) -> usize {
        self.solution.iterations
    }
}

pub fn num_pairs(route: &Route) -> usize {
    route.corridors.len().saturating_sub(1).max(1)
}

/// Corridors of pair `i`; a single-corridor route pairs the corridor with
/// itself.
pub fn pair(route: &Route, i: usize) -> (&Corridor, &Corridor) {
    let c = &route.corridors;
    if c.len() == 1 {
        (&c[0], &c[0])
    } else {
        (&c[i], &c[i + 1])
    }
}

fn both_inside(c: &Corridor, x: &State, p: &VehicleParams, tol: f64) -> bool {
    Body::BOTH
        .iter()
        .all(|&b| contains(c, &vehicle_vertices(x, p, b), -tol))
}

/// Pair index (never below `from`) and position of `x` within that pair.
/// The pair advances once both bodies are inside its second corridor.
pub fn locate(
    route: &Route,
    from: usize,
    x: &State,
    p: &VehicleParams,
    tol: f64,
) -> (usize, RoutePosition) {
    let last = num_pairs(route) - 1;
    let mut i = from.min(last);
    loop {
        let (a, b) = pair(route, i);
        if both_inside(b, x, p, tol) {
            if i < last {
                i += 1;
                continue;
            }
            return (i, RoutePosition::InLast);
        }
        let position = if both_inside(a, x, p, tol) {
            RoutePosition::Interior
        } else {
            RoutePosition::EnteringLast
        };
        return (i, position);
    }
}

/// Terminal state of the pair: the route terminal for the final pair, the
/// waypoint of the second corridor otherwise.
pub fn local_target(route: &Route, i: usize) -> State {
    if i + 1 >= num_pairs(route) {
        route.terminal
    } else {
        pair(route, i).1.waypoint().to_state()
    }
}

/// Intermediate point of the interpolated guess: the waypoint of the second
/// corridor while the vehicle is still in the first one.
fn guide_point(route: &Route, i: usize, position: RoutePosition) -> Option<State> {
    let is_final = i + 1 >= num_pairs(route);
    (is_final && route.corridors.len() > 1 && position == RoutePosition::Interior)
        .then(|| pair(route, i).1.waypoint().to_state())
}

/// Forward when the displacement toward `toward` points along the trailer
/// heading.
pub fn expected_direction(x: &State, toward: &State) -> Direction {
    let d = (toward.px1 - x.px1) * x.theta1.cos() + (toward.py1 - x.py1) * x.theta1.sin();
    if d < 0.0 {
        Direction::Reverse
    } else {
        Direction::Forward
    }
}

fn path_length(points: &[State]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].px1 - w[0].px1).hypot(w[1].py1 - w[0].py1))
        .sum()
}

/// Point at arc length `s` along the polyline, interpolating all components.
fn along(points: &[State], s: f64) -> State {
    let mut acc = 0.0;
    for w in points.windows(2) {
        let len = (w[1].px1 - w[0].px1).hypot(w[1].py1 - w[0].py1);
        if s <= acc + len && len > 0.0 {
            return w[0].lerp(&w[1], ((s - acc) / len).clamp(0.0, 1.0));
        }
        acc += len;
    }
    if acc <= 1e-12 {
        points[0]
    } else {
        points[points.len() - 1]
    }
}

/// Interpolated guess: states along the polyline `x0 → waypoint → xf`
/// (componentwise), constant full-speed controls in the expected direction,
/// stage times from the path length, slacks at the safety distance.
pub fn smart_init(
    x0: &State,
    waypoint: Option<&State>,
    xf: &State,
    spec: &OcpSpec,
) -> Vec<StageSolution> {
    let mut points = vec![*x0];
    if let Some(w) = waypoint {
        points.push(w.unwrapped_near(x0.theta1));
    }
    points.push(xf.unwrapped_near(x0.theta1));
    let total = path_length(&points);
    let v_max = spec.params.v_max();
    let direction = expected_direction(x0, &points[1]);
    let u = Control::new(direction.sign() * v_max, 0.0);

    // frozen stages cover the distance driven at full speed in their time
    let frozen_len: Vec<Option<f64>> = spec
        .stages
        .iter()
        .map(|s| s.t_fixed.map(|t| (t * v_max).min(total / 3.0)))
        .collect();
    let rest = (total - frozen_len.iter().flatten().sum::<f64>()).max(0.0);
    let free_n: usize = spec
        .stages
        .iter()
        .filter(|s| s.t_fixed.is_none())
        .map(|s| s.n)
        .sum();
    let mut start = 0.0;
    spec.stages
        .iter()
        .zip(&frozen_len)
        .map(|(st, fl)| {
            let len = fl.unwrap_or(rest * st.n as f64 / free_n.max(1) as f64);
            let states = (0..=st.n)
                .map(|k| along(&points, start + len * k as f64 / st.n as f64))
                .collect();
            start += len;
            StageSolution {
                states,
                controls: vec![u; st.n + 1],
                t: st.t_fixed.unwrap_or((len / v_max).max(spec.t_min)),
                slacks: [Vec::new(), Vec::new()],
            }
        })
        .collect()
}

/// Uninformed guess: every node at `x0`, zero controls, unit stage times and
/// zero slacks.
pub fn flat_init(x0: &State, spec: &OcpSpec) -> Vec<StageSolution> {
    spec.stages
        .iter()
        .map(|st| StageSolution {
            states: vec![*x0; st.n + 1],
            controls: vec![Control::ZERO; st.n + 1],
            t: st.t_fixed.unwrap_or(1.0_f64.clamp(spec.t_min, spec.t_max)),
            slacks: [Vec::new(), Vec::new()],
        })
        .collect()
}

fn slack_guess(
    x: &State,
    corridor: &Corridor,
    body: Body,
    p: &VehicleParams,
    s_d: f64,
) -> Vec<f64> {
    let v = vehicle_vertices(x, p, body);
    corridor
        .halfplanes()
        .iter()
        .map(|h| {
            let r = (0..4)
                .map(|j| h.residual(v.corners[j][0], v.corners[j][1]))
                .fold(f64::NEG_INFINITY, f64::max);
            r.max(-s_d).min(0.0)
        })
        .collect()
}

/// Previous solution re-timed to start `delta` seconds later. Stage
/// boundaries stay where they were; a stage that has (nearly) passed keeps
/// the minimum duration. Slacks are recomputed from the shifted states.
pub fn shift_solution(
    prev: &MultiStageSolution,
    delta: f64,
    spec: &OcpSpec,
    pair: (&Corridor, &Corridor),
) -> Vec<StageSolution> {
    let corridors = [pair.0, pair.1];
    let mut boundaries = Vec::with_capacity(3);
    let mut acc = 0.0;
    for s in &prev.stages {
        acc += s.t;
        boundaries.push(acc);
    }
    let mut cursor = delta;
    spec.stages
        .iter()
        .enumerate()
        .map(|(j, st)| {
            let d = st
                .t_fixed
                .unwrap_or((boundaries[j] - cursor).max(spec.t_min));
            let nodes: Vec<(State, Control)> = (0..=st.n)
                .map(|k| prev.sample(cursor + d * k as f64 / st.n as f64))
                .collect();
            cursor += d;
            let states: Vec<State> = nodes.iter().map(|n| n.0).collect();
            let slacks = Body::BOTH.map(|body| {
                let c = corridors[st.corridor_of(body)];
                states
                    .iter()
                    .map(|x| slack_guess(x, c, body, &spec.params, spec.s_d))
                    .collect()
            });
            StageSolution {
                states,
                controls: nodes.iter().map(|n| n.1).collect(),
                t: d,
                slacks,
            }
        })
        .collect()
}

/// OCP for pair `i` from `x_init` with the stages behind the vehicle closed.
fn pair_spec(
    route: &Route,
    key: &StructureKey,
    x_init: &State,
    u_init: Control,
    params: &VehicleParams,
    cfg: &MpcConfig,
) -> OcpSpec {
    let target = local_target(route, key.pair).unwrapped_near(x_init.theta1);
    let mut spec = OcpSpec::new(*x_init, target, *params, key.direction, &cfg.ocp);
    spec = close_corridor_stages(&spec, key.position, cfg.ocp.eps_t);
    spec.u0 = Some(u_init);
    if key.pair + 1 >= num_pairs(route) {
        spec.uf = Some(Control::ZERO);
    }
    spec.constrain_initial_node = false;
    spec
}

fn solve_with(
    spec: &OcpSpec,
    corridors: (&Corridor, &Corridor),
    guess: &[StageSolution],
    opts: &SolveOptions,
    log: &mut dyn FnMut(&IterationLog),
) -> Result<(MultiStageSolution, Duration), CoreError> {
    let t0 = Instant::now();
    let sol = solve_ocp(spec, corridors, guess, opts, log)?;
    Ok((sol, t0.elapsed()))
}

fn outcome(
    t_stitch: f64,
    key: StructureKey,
    init: InitKind,
    spec: OcpSpec,
    solution: MultiStageSolution,
    wall_time: Duration,
    cfg: &MpcConfig,
) -> Result<UpdateOutcome, CoreError> {
    let reference = if solution.status == SolveStatus::Converged {
        Some(TimedTrajectory::from_solution(
            &solution,
            &spec.x0,
            t_stitch,
            cfg.reference_dt,
            &spec.params,
            key.pair,
        )?)
    } else {
        None
    };
    Ok(UpdateOutcome {
        t_stitch,
        key,
        init,
        spec,
        solution,
        reference,
        wall_time,
    })
}

/// Plans the first pair of a route from rest at `x0`, with the reference
/// clock starting at `t0`.
pub fn plan_initial(
    route: &Route,
    x0: &State,
    params: &VehicleParams,
    cfg: &MpcConfig,
    t0: f64,
    log: &mut dyn FnMut(&IterationLog),
) -> Result<(PlannerState, UpdateOutcome), CoreError> {
    params.validate()?;
    if let Some(v) = validate_route(route, params).first() {
        return Err(CoreError::InvalidRoute(v.to_string()));
    }
    if !both_inside(&route.corridors[0], x0, params, cfg.containment_tol) {
        return Err(CoreError::StartOutsideRoute);
    }
    let mut directions = vec![None; num_pairs(route)];
    let (i, position) = locate(route, 0, x0, params, cfg.containment_tol);
    let toward = guide_point(route, i, position).unwrap_or_else(|| local_target(route, i));
    let direction = expected_direction(x0, &toward);
    directions[i] = Some(direction);
    let key = StructureKey {
        pair: i,
        position,
        direction,
    };
    let spec = pair_spec(route, &key, x0, Control::ZERO, params, cfg);
    let corridors = pair(route, i);
    let guess = smart_init(
        x0,
        guide_point(route, i, position).as_ref(),
        &spec.xf,
        &spec,
    );
    let (solution, wall) = solve_with(&spec, corridors, &guess, &cfg.solver, log)?;
    let out = outcome(t0, key, InitKind::Smart, spec, solution, wall, cfg)?;
    let Some(reference) = out.reference.clone() else {
        let (family, v) = check_feasibility(&out.solution, &out.spec, corridors, 1e-4).worst();
        return Err(CoreError::PlanFailed(format!(
            "first solve ended with status {:?} after {} iterations; largest violation in {family} constraints ({v:.3e})",
            out.solution.status, out.solution.iterations
        )));
    };
    let state = PlannerState {
        route: route.clone(),
        params: *params,
        pair_index: i,
        reference,
        last_solution: out.solution.clone(),
        key,
        origin: t0,
        update_window: cfg.update_window,
        directions,
    };
    Ok((state, out))
}

impl PlannerState {
    /// Whether an update stitched at `t_stitch` would still change anything.
    pub fn can_update(&self, t_stitch: f64, cfg: &MpcConfig) -> bool {
        t_stitch >= self.reference.start() && t_stitch + cfg.min_remaining < self.reference.end()
    }

    /// Moves the reference clock so the plan starts at `t0`.
    pub fn retime(&mut self, t0: f64) -> Result<(), CoreError> {
        let dt = t0 - self.reference.start();
        self.reference = self.reference.shifted(dt)?;
        self.origin += dt;
        Ok(())
    }

    pub fn direction_of(&self, pair: usize) -> Option<Direction> {
        self.directions.get(pair).copied().flatten()
    }
}

/// Solves the update that starts on the reference at `t_stitch`. The planner
/// state is not modified.
pub fn solve_update(
    ps: &PlannerState,
    t_stitch: f64,
    cfg: &MpcConfig,
    log: &mut dyn FnMut(&IterationLog),
) -> Result<UpdateOutcome, CoreError> {
    if !ps.can_update(t_stitch, cfg) {
        return Err(CoreError::InvalidTrajectory(format!(
            "update point {t_stitch} is outside the active reference"
        )));
    }
    let (x_init, u_init) = ps.reference.sample(t_stitch);
    let (i, position) = locate(
        &ps.route,
        ps.pair_index,
        &x_init,
        &ps.params,
        cfg.containment_tol,
    );
    let direction = ps.direction_of(i).unwrap_or_else(|| {
        let toward =
            guide_point(&ps.route, i, position).unwrap_or_else(|| local_target(&ps.route, i));
        expected_direction(&x_init, &toward)
    });
    let key = StructureKey {
        pair: i,
        position,
        direction,
    };
    let spec = pair_spec(&ps.route, &key, &x_init, u_init, &ps.params, cfg);
    let corridors = pair(&ps.route, i);
    let (init, guess, opts) = if key == ps.key {
        let shifted = shift_solution(&ps.last_solution, t_stitch - ps.origin, &spec, corridors);
        (InitKind::Warm, shifted, cfg.solver.warm())
    } else if cfg.smart_init {
        let waypoint = guide_point(&ps.route, i, position);
        (
            InitKind::Smart,
            smart_init(&x_init, waypoint.as_ref(), &spec.xf, &spec),
            cfg.solver.clone(),
        )
    } else {
        (
            InitKind::Flat,
            flat_init(&x_init, &spec),
            cfg.solver.clone(),
        )
    };
    let (solution, wall) = solve_with(&spec, corridors, &guess, &opts, log)?;
    outcome(t_stitch, key, init, spec, solution, wall, cfg)
}

/// Cold solve of the same problem as `out` from the flat guess, for
/// comparing iteration counts.
pub fn cold_iterations(
    out: &UpdateOutcome,
    route: &Route,
    cfg: &MpcConfig,
) -> Result<MultiStageSolution, CoreError> {
    let guess = flat_init(&out.spec.x0, &out.spec);
    solve_ocp(
        &out.spec,
        pair(route, out.key.pair),
        &guess,
        &cfg.solver,
        &mut |_| {},
    )
}

/// Stitches a converged outcome into the reference. A failed solve leaves
/// the reference untouched; the pair index still follows the vehicle.
pub fn apply_update(ps: &PlannerState, out: &UpdateOutcome) -> Result<PlannerState, CoreError> {
    let mut next = ps.clone();
    next.pair_index = next.pair_index.max(out.key.pair);
    if next.directions[out.key.pair].is_none() {
        next.directions[out.key.pair] = Some(out.key.direction);
    }
    if let Some(r) = &out.reference {
        next.reference = ps.reference.stitch(out.t_stitch, r)?;
        next.last_solution = out.solution.clone();
        next.key = out.key;
        next.origin = out.t_stitch;
    }
    Ok(next)
}

/// Requests an update at `t_now`, pinned on the reference `Δt_u` ahead, and
/// applies it immediately.
pub fn update(
    ps: &PlannerState,
    t_now: f64,
    cfg: &MpcConfig,
    log: &mut dyn FnMut(&IterationLog),
) -> Result<(PlannerState, UpdateOutcome), CoreError> {
    let out = solve_update(ps, t_now + ps.update_window, cfg, log)?;
    let next = apply_update(ps, &out)?;
    Ok((next, out))
}

/// Largest corridor residual of either body at `x`, taking for each body
/// the better of the two corridors of pair `i`.
pub fn pair_violation(route: &Route, i: usize, x: &State, p: &VehicleParams) -> f64 {
    let (a, b) = pair(route, i.min(num_pairs(route) - 1));
    Body::BOTH
        .iter()
        .map(|&body| {
            let v = vehicle_vertices(x, p, body);
            max_residual(a, &v).min(max_residual(b, &v))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::corridor_from_rect;
    use crate::ocp::check_feasibility;
    use crate::trajectory::stitch_jump;

    fn straight_route() -> Route {
        Route {
            corridors: vec![
                corridor_from_rect([1.0, 0.0], [4.0, 1.0], 0.0).unwrap(),
                corridor_from_rect([4.0, 0.0], [4.0, 1.0], 0.0).unwrap(),
            ],
            terminal: State::new(4.5, 0.0, 0.0, 0.0),
        }
    }

    fn spec_with(n: [usize; 3]) -> OcpSpec {
        let d = OcpDefaults {
            n,
            ..Default::default()
        };
        OcpSpec::new(
            State::default(),
            State::new(4.0, 0.0, 0.0, 0.0),
            VehicleParams::default(),
            Direction::Forward,
            &d,
        )
    }

    #[test]
    fn smart_init_interpolates_by_arc_length() {
        let spec = spec_with([1, 2, 1]);
        let w = State::new(2.0, 0.0, 0.0, 0.0);
        let g = smart_init(&spec.x0, Some(&w), &spec.xf, &spec);
        let xs: Vec<f64> = g
            .iter()
            .enumerate()
            .flat_map(|(j, s)| s.states.iter().skip(usize::from(j > 0)).map(|x| x.px1))
            .collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let v_max = spec.params.v_max();
        assert!(g
            .iter()
            .all(|s| s.controls.iter().all(|u| *u == Control::new(v_max, 0.0))));
        assert!((g[1].t - 2.0 / v_max).abs() < 1e-12);
    }

    #[test]
    fn smart_init_reverses_toward_a_target_behind() {
        let mut spec = spec_with([2, 2, 2]);
        spec.xf = State::new(-3.0, 0.0, 0.0, 0.0);
        let g = smart_init(&spec.x0, None, &spec.xf, &spec);
        assert!(g[0].controls.iter().all(|u| u.v0 < 0.0 && u.omega0 == 0.0));
    }

    #[test]
    fn smart_init_at_the_target_stays_put() {
        let mut spec = spec_with([2, 2, 2]);
        spec.xf = spec.x0;
        let g = smart_init(&spec.x0, None, &spec.xf, &spec);
        for s in &g {
            assert!(s.states.iter().all(|x| *x == spec.x0));
            assert_eq!(s.t, spec.t_min);
        }
    }

    #[test]
    fn smart_init_gives_frozen_stages_their_time() {
        let spec = close_corridor_stages(&spec_with([2, 2, 2]), RoutePosition::InLast, 0.1);
        let g = smart_init(&spec.x0, None, &spec.xf, &spec);
        assert_eq!(g[0].t, 0.1);
        assert_eq!(g[1].t, 0.1);
        assert!((g[2].states[0].px1 - 0.1).abs() < 1e-12);
        assert_eq!(g[2].states[2].px1, 4.0);
    }

    #[test]
    fn locate_follows_the_trailing_body() {
        let r = straight_route();
        let p = VehicleParams::default();
        assert_eq!(
            locate(&r, 0, &State::default(), &p, 1e-3),
            (0, RoutePosition::Interior)
        );
        // truck past x = 3 while the trailer is still before x = 2
        let x = State::new(2.15, 0.0, 0.0, 0.0);
        assert_eq!(
            locate(&r, 0, &x, &p, 1e-3),
            (0, RoutePosition::EnteringLast)
        );
        let x = State::new(4.5, 0.0, 0.0, 0.0);
        assert_eq!(locate(&r, 0, &x, &p, 1e-3), (0, RoutePosition::InLast));
    }

    #[test]
    fn single_corridor_route_is_one_degenerate_pair() {
        let c = corridor_from_rect([0.0, 0.0], [4.0, 1.0], 0.0).unwrap();
        let r = Route {
            corridors: vec![c.clone()],
            terminal: State::new(0.5, 0.0, 0.0, 0.0),
        };
        assert_eq!(num_pairs(&r), 1);
        let (a, b) = pair(&r, 0);
        assert_eq!(a, b);
        let p = VehicleParams::default();
        let (ps, out) = plan_initial(
            &r,
            &State::default(),
            &p,
            &MpcConfig::default(),
            0.0,
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(out.key.position, RoutePosition::InLast);
        assert!(out.converged());
        assert!((ps.reference.terminal_state().px1 - 0.5).abs() < 1e-5);
    }

    #[test]
    fn start_outside_is_rejected() {
        let r = straight_route();
        let p = VehicleParams::default();
        let x = State::new(-5.0, 0.0, 0.0, 0.0);
        let err = plan_initial(&r, &x, &p, &MpcConfig::default(), 0.0, &mut |_| {}).unwrap_err();
        assert_eq!(err, CoreError::StartOutsideRoute);
    }

    #[test]
    fn straight_plan_respects_the_speed_limit_and_updates_stitch_cleanly() {
        let r = straight_route();
        let p = VehicleParams::default();
        let cfg = MpcConfig::default();
        let (mut ps, out) =
            plan_initial(&r, &State::default(), &p, &cfg, 0.0, &mut |_| {}).unwrap();
        assert!(out.converged());
        assert!(ps.reference.end() >= 4.5 / p.v_max());
        let report = check_feasibility(&out.solution, &out.spec, pair(&r, 0), 1e-4);
        assert!(report.pass(), "{report:?}");

        let mut t = 0.0;
        let mut kinds = Vec::new();
        while ps.can_update(t + cfg.update_window, &cfg) {
            let old = ps.reference.clone();
            let (next, out) = update(&ps, t, &cfg, &mut |_| {}).unwrap();
            assert!(out.converged(), "{:?} at t = {t}", out.solution.status);
            assert_eq!(stitch_jump(&old, &next.reference, out.t_stitch), 0.0);
            assert!(next.pair_index >= ps.pair_index);
            kinds.push(out.init);
            ps = next;
            t += 0.5;
        }
        assert!(kinds.contains(&InitKind::Warm));
        assert!((ps.reference.terminal_state().px1 - 4.5).abs() < 1e-5);
    }

    #[test]
    fn shift_keeps_stage_boundaries() {
        let spec = spec_with([2, 2, 2]);
        let stages: Vec<StageSolution> = (0..3)
            .map(|j| StageSolution {
                states: (0..3)
                    .map(|k| State::new((2 * j + k) as f64, 0.0, 0.0, 0.0))
                    .collect(),
                controls: vec![Control::new(0.5, 0.0); 3],
                t: 2.0,
                slacks: [Vec::new(), Vec::new()],
            })
            .collect();
        let prev = MultiStageSolution {
            stages,
            status: SolveStatus::Converged,
            iterations: 0,
            objective: 0.0,
            kkt_residual: 0.0,
            constraint_violation: 0.0,
        };
        let c = corridor_from_rect([3.0, 0.0], [10.0, 2.0], 0.0).unwrap();
        let g = shift_solution(&prev, 1.0, &spec, (&c, &c));
        assert_eq!(g[0].t, 1.0);
        assert_eq!(g[1].t, 2.0);
        assert!((g[0].states[0].px1 - 1.0).abs() < 1e-12);
        assert!((g[1].states[0].px1 - 2.0).abs() < 1e-12);
        // past the first boundary the stage keeps the floor duration
        let g = shift_solution(&prev, 2.5, &spec, (&c, &c));
        assert_eq!(g[0].t, spec.t_min);
    }
}
