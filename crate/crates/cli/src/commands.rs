//! The `plan`, `simulate` and `compare-init` commands.

use std::path::Path;

use hitch_core::mpc::{plan_initial, MpcConfig};
use hitch_core::ocp::check_feasibility;
use hitch_core::sim::{compare_init_strategies, run_closed_loop_logged, CompareReport, SimResult};
use hitch_core::CoreError;
use hitch_nlp::IterationLog;

use crate::output;
use crate::scenario::ScenarioFile;
use crate::CliError;

/// Command-line overrides of the scenario's `[sim]` section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub no_smart_init: bool,
    /// Fixed latency [s]; the update window follows at twice this.
    pub latency: Option<f64>,
    /// Noise standard deviations `[v0, omega0]`.
    pub noise: Option<[f64; 2]>,
}

impl Overrides {
    pub fn apply(&self, file: &mut ScenarioFile) {
        if let Some(seed) = self.seed {
            file.sim.seed = seed;
        }
        if self.no_smart_init {
            file.sim.smart_init = false;
        }
        if let Some(tau) = self.latency {
            file.sim.latency = tau;
            file.sim.update_window = None;
        }
        if let Some(n) = self.noise {
            file.sim.noise = n;
        }
    }
}

fn printer(verbose: bool) -> impl FnMut(&IterationLog) {
    move |l: &IterationLog| {
        if verbose {
            eprintln!(
                "iter {:4}  merit {:.6e}  step {:.3e}  viol {:.3e}  kkt {:.3e}  mu {:.1e}  alpha {:.3}",
                l.iteration, l.merit, l.step_norm, l.violation, l.kkt_residual, l.barrier, l.alpha
            );
        }
    }
}

fn core_error(e: CoreError) -> CliError {
    match e {
        CoreError::InvalidParams(_) | CoreError::InvalidCorridor(_) | CoreError::InvalidSpec(_) => {
            CliError::Schema(e.to_string())
        }
        CoreError::SimFailed(_) => CliError::SimFailed(e.to_string()),
        _ => CliError::Solve(e.to_string()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Plans the first pair of the first maneuver. Writes the node table to
/// `out` and the feasibility report next to it (`.feasibility.json`).
pub fn plan(scenario: &Path, out: &Path, verbose: bool) -> Result<(), CliError> {
    let file = ScenarioFile::load(scenario)?;
    let (scn, cfg) = file.build()?;
    let route = scn.route(0);
    let mpc = MpcConfig {
        ocp: scn.ocp,
        solver: cfg.solver.clone(),
        ..MpcConfig::default()
    };
    let (ps, outcome) = plan_initial(
        &route,
        &scn.initial,
        &scn.params,
        &mpc,
        0.0,
        &mut printer(verbose),
    )
    .map_err(core_error)?;
    let corridors = hitch_core::mpc::pair(&route, ps.key.pair);
    let report = check_feasibility(&outcome.solution, &outcome.spec, corridors, 1e-4);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    output::write_plan(out, &outcome.solution)?;
    output::write_text(
        &out.with_extension("feasibility.json"),
        &output::feasibility_json(&outcome.solution, &report),
    )?;
    if !report.pass() {
        let (family, v) = report.worst();
        return Err(CliError::Solve(format!(
            "planned trajectory violates the {family} constraints by {v:.3e}"
        )));
    }
    Ok(())
}

/// Loads a scenario file with the overrides applied.
pub fn load(
    scenario: &Path,
    overrides: &Overrides,
) -> Result<(hitch_core::sim::Scenario, hitch_core::sim::SimConfig), CliError> {
    let mut file = ScenarioFile::load(scenario)?;
    overrides.apply(&mut file);
    file.build()
}

/// Runs the closed loop and writes `trace.csv`, `solves.csv` and
/// `summary.json` into `out_dir`.
pub fn simulate(
    scenario: &Path,
    out_dir: &Path,
    overrides: &Overrides,
    verbose: bool,
) -> Result<SimResult, CliError> {
    let (scn, cfg) = load(scenario, overrides)?;
    simulate_with(&scn, &cfg, out_dir, verbose)
}

pub fn simulate_with(
    scn: &hitch_core::sim::Scenario,
    cfg: &hitch_core::sim::SimConfig,
    out_dir: &Path,
    verbose: bool,
) -> Result<SimResult, CliError> {
    let result = run_closed_loop_logged(scn, cfg, &mut printer(verbose)).map_err(core_error)?;
    create_dir(out_dir)?;
    output::write_trace(&out_dir.join("trace.csv"), &result)?;
    output::write_solves(&out_dir.join("solves.csv"), &result)?;
    output::write_text(
        &out_dir.join("summary.json"),
        &output::summary_json(&scn.name, &result),
    )?;
    Ok(result)
}

/// Exit status of a finished simulation.
pub fn sim_status(result: &SimResult) -> Result<(), CliError> {
    if result.summary.success {
        Ok(())
    } else {
        Err(CliError::SimFailed(
            result
                .summary
                .failure
                .clone()
                .unwrap_or_else(|| "maneuvers not completed".into()),
        ))
    }
}

/// Runs the scenario with and without interpolated initialization and
/// writes the paired report to `out`.
pub fn compare_init(
    scenario: &Path,
    out: &Path,
    overrides: &Overrides,
) -> Result<CompareReport, CliError> {
    let (scn, cfg) = load(scenario, overrides)?;
    let report = compare_init_strategies(&scn, &cfg).map_err(core_error)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    output::write_compare(out, &report)?;
    Ok(report)
}
