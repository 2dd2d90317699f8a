//! Trace, solve log, summary and plan writers.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use hitch_core::mpc::InitKind;
use hitch_core::ocp::{FeasibilityReport, MultiStageSolution};
use hitch_core::sim::{CompareReport, ComparedSolve, SimResult, Summary};
use hitch_nlp::SolveStatus;

use crate::CliError;

pub const TRACE_COLUMNS: [&str; 17] = [
    "t",
    "px1",
    "py1",
    "theta1",
    "theta0",
    "ref_px1",
    "ref_py1",
    "ref_theta1",
    "ref_theta0",
    "v0_ff",
    "omega0_ff",
    "v0_applied",
    "omega0_applied",
    "err_long",
    "err_lat",
    "err_theta",
    "pair_index",
];

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| io(path, e))
}

pub fn write_trace(path: &Path, result: &SimResult) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_COLUMNS).map_err(|e| io(path, e))?;
    for r in &result.trace {
        let nums = [
            r.t,
            r.x.px1,
            r.x.py1,
            r.x.theta1,
            r.x.theta0,
            r.x_ref.px1,
            r.x_ref.py1,
            r.x_ref.theta1,
            r.x_ref.theta0,
            r.u_ff.v0,
            r.u_ff.omega0,
            r.u_applied.v0,
            r.u_applied.omega0,
            r.error.dpx1,
            r.error.dpy1,
            r.error.dtheta1,
        ];
        let mut rec: Vec<String> = nums.iter().map(|v| v.to_string()).collect();
        rec.push(r.pair_index.to_string());
        w.write_record(&rec).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// Checks the column contract and strictly increasing times; returns the
/// number of rows.
pub fn validate_trace(path: &Path) -> Result<usize, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| io(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if header != TRACE_COLUMNS {
        return Err(CliError::Schema(format!(
            "trace header {header:?} does not match the column contract"
        )));
    }
    let mut last = f64::NEG_INFINITY;
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| io(path, e))?;
        if rec.len() != TRACE_COLUMNS.len() {
            return Err(CliError::Schema(format!(
                "row {rows} has {} fields",
                rec.len()
            )));
        }
        for (i, field) in rec.iter().enumerate() {
            let ok = if i + 1 == TRACE_COLUMNS.len() {
                field.parse::<usize>().is_ok()
            } else {
                field.parse::<f64>().is_ok()
            };
            if !ok {
                return Err(CliError::Schema(format!(
                    "row {rows}: bad {} value {field:?}",
                    TRACE_COLUMNS[i]
                )));
            }
        }
        let t: f64 = rec[0].parse().expect("checked");
        if t <= last {
            return Err(CliError::Schema(format!(
                "row {rows}: time {t} does not increase"
            )));
        }
        last = t;
        rows += 1;
    }
    Ok(rows)
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::NumericalFailure => "numerical_failure",
    }
}

fn init_name(i: InitKind) -> &'static str {
    match i {
        InitKind::Smart => "smart",
        InitKind::Flat => "flat",
        InitKind::Warm => "warm",
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub const SOLVE_COLUMNS: [&str; 20] = [
    "maneuver",
    "t_request",
    "t_available",
    "t_stitch",
    "pair_index",
    "position",
    "direction",
    "init",
    "iterations",
    "status",
    "accepted",
    "stalled",
    "stitch_jump",
    "worst_family",
    "worst_violation",
    "stitching",
    "total_time",
    "min_time",
    "cold_iterations",
    "cold_status",
];

/// One row per solve. Wall-clock times are left out so the file is
/// reproducible.
pub fn write_solves(path: &Path, result: &SimResult) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(SOLVE_COLUMNS).map_err(|e| io(path, e))?;
    for s in &result.solves {
        let rec = [
            s.maneuver.to_string(),
            s.t_request.to_string(),
            s.t_available.to_string(),
            s.t_stitch.to_string(),
            s.key.pair.to_string(),
            format!("{:?}", s.key.position),
            format!("{:?}", s.key.direction),
            init_name(s.init).to_string(),
            s.iterations.to_string(),
            status_name(s.status).to_string(),
            s.accepted.to_string(),
            s.stalled.to_string(),
            opt(s.stitch_jump),
            opt(s.feasibility.map(|f| f.0.to_string())),
            opt(s.feasibility.map(|f| f.1)),
            opt(s.stitching),
            s.total_time.to_string(),
            s.min_time.to_string(),
            opt(s.cold.map(|c| c.0)),
            opt(s.cold.map(|c| status_name(c.1))),
        ];
        w.write_record(&rec).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

#[derive(Debug, Serialize)]
struct SolvesJson {
    count: usize,
    converged: usize,
    failed: usize,
    stalled: usize,
    iterations: Vec<usize>,
    status: Vec<&'static str>,
}

#[derive(Debug, Serialize)]
struct ManeuverJson {
    completed: bool,
    start: f64,
    end: Option<f64>,
    position_error: Option<f64>,
    heading_error_deg: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SummaryJson<'a> {
    scenario: &'a str,
    success: bool,
    total_time: f64,
    max_err: f64,
    mean_err: f64,
    max_corridor_violation: f64,
    solves: SolvesJson,
    maneuvers: Vec<ManeuverJson>,
    failure: Option<&'a str>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn summary_json(name: &str, result: &SimResult) -> String {
    let s: &Summary = &result.summary;
    let doc = SummaryJson {
        scenario: name,
        success: s.success,
        total_time: s.total_time,
        max_err: s.max_err,
        mean_err: s.mean_err,
        max_corridor_violation: s.max_corridor_violation,
        solves: SolvesJson {
            count: s.solves,
            converged: s.converged,
            failed: s.solves - s.converged,
            stalled: s.stalls,
            iterations: result.solves.iter().map(|r| r.iterations).collect(),
            status: result
                .solves
                .iter()
                .map(|r| status_name(r.status))
                .collect(),
        },
        maneuvers: s
            .maneuvers
            .iter()
            .map(|m| ManeuverJson {
                completed: m.completed,
                start: m.start,
                end: finite(m.end),
                position_error: finite(m.position_error),
                heading_error_deg: finite(m.heading_error.to_degrees()),
            })
            .collect(),
        failure: s.failure.as_deref(),
    };
    serde_json::to_string_pretty(&doc).expect("summary serializes")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io(path, e))?;
    f.write_all(b"\n").map_err(|e| io(path, e))
}

/// Node table of a planned trajectory.
pub fn write_plan(path: &Path, sol: &MultiStageSolution) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "stage", "k", "t", "px1", "py1", "theta1", "theta0", "v0", "omega0",
    ])
    .map_err(|e| io(path, e))?;
    let mut t0 = 0.0;
    for (j, st) in sol.stages.iter().enumerate() {
        for (k, (x, u)) in st.states.iter().zip(&st.controls).enumerate() {
            let t = t0 + k as f64 * st.dt();
            let rec = [
                j.to_string(),
                k.to_string(),
                t.to_string(),
                x.px1.to_string(),
                x.py1.to_string(),
                x.theta1.to_string(),
                x.theta0.to_string(),
                u.v0.to_string(),
                u.omega0.to_string(),
            ];
            w.write_record(&rec).map_err(|e| io(path, e))?;
        }
        t0 += st.t;
    }
    w.flush().map_err(|e| io(path, e))
}

#[derive(Debug, Serialize)]
struct FeasibilityJson {
    status: &'static str,
    iterations: usize,
    stage_times: Vec<f64>,
    total_time: f64,
    tol: f64,
    pass: bool,
    violations: Vec<(String, f64)>,
}

pub fn feasibility_json(sol: &MultiStageSolution, report: &FeasibilityReport) -> String {
    let doc = FeasibilityJson {
        status: status_name(sol.status),
        iterations: sol.iterations,
        stage_times: sol.stages.iter().map(|s| s.t).collect(),
        total_time: sol.total_time(),
        tol: report.tol,
        pass: report.pass(),
        violations: report
            .violations
            .iter()
            .map(|(f, v)| (f.to_string(), *v))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

pub const COMPARE_COLUMNS: [&str; 7] = [
    "kind",
    "index",
    "init",
    "iterations",
    "status",
    "flat_iterations",
    "flat_status",
];

pub fn write_compare(path: &Path, report: &CompareReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(COMPARE_COLUMNS).map_err(|e| io(path, e))?;
    let flat = |s: &Option<(usize, SolveStatus)>| match s {
        Some((n, st)) => [n.to_string(), status_name(*st).to_string()],
        None => [String::new(), "missing".to_string()],
    };
    let mut put = |kind: &str, rows: &[ComparedSolve]| -> Result<(), CliError> {
        for r in rows {
            let mut rec = vec![kind.to_string(), r.index.to_string()];
            let (init, n, st) = r.smart;
            rec.extend([
                init_name(init).to_string(),
                n.to_string(),
                status_name(st).to_string(),
            ]);
            rec.extend(flat(&r.flat));
            w.write_record(&rec).map_err(|e| io(path, e))?;
        }
        Ok(())
    };
    put("solve", &report.solves)?;
    put("transition", &report.transitions)?;
    w.flush().map_err(|e| io(path, e))
}
