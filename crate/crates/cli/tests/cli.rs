use std::path::Path;
use std::process::{Command, Output};

use hitch_cli::output::TRACE_COLUMNS;

const STRAIGHT: &str = r#"
name = "straight"
start = [0.0, 0.0, 0.0, 0.0]

[[corridors]]
rect = { center = [1.0, 0.0], size = [4.0, 1.0] }

[[corridors]]
halfplanes = [[1.0, 0.0, -6.0], [-1.0, 0.0, 2.0], [0.0, 1.0, -0.5], [0.0, -1.0, -0.5]]
waypoint = [4.0, 0.0, 0.0]

[[maneuvers]]
route = [0, 1]
terminal = [4.5, 0.0, 0.0, 0.0]
"#;

fn hitch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn plan_writes_nodes_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "s.toml", STRAIGHT);
    let out = dir.path().join("plan/nodes.csv");
    let r = hitch(&["plan", "--scenario", &scn, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(std::fs::read_to_string(&out).unwrap().lines().count() > 30);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.with_extension("feasibility.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true), "{report}");
}

#[test]
fn malformed_scenarios_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let two = STRAIGHT.replace(
        "[[1.0, 0.0, -6.0], [-1.0, 0.0, 2.0], [0.0, 1.0, -0.5], [0.0, -1.0, -0.5]]",
        "[[1.0, 0.0, -6.0], [-1.0, 0.0, 2.0]]",
    );
    let out = dir.path().join("o.csv");
    for text in [two.as_str(), "name = 3", "this is not toml ["] {
        let scn = write(dir.path(), "bad.toml", text);
        let r = hitch(&["plan", "--scenario", &scn, "--out", out.to_str().unwrap()]);
        assert_eq!(
            code(&r),
            2,
            "{text}: {}",
            String::from_utf8_lossy(&r.stderr)
        );
    }
    let missing = dir.path().join("missing.toml");
    let r = hitch(&[
        "plan",
        "--scenario",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn unreachable_terminal_is_not_a_success() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(
        dir.path(),
        "s.toml",
        &STRAIGHT.replace(
            "terminal = [4.5, 0.0, 0.0, 0.0]",
            "terminal = [9.0, 0.0, 0.0, 0.0]",
        ),
    );
    let out = dir.path().join("o.csv");
    let r = hitch(&["plan", "--scenario", &scn, "--out", out.to_str().unwrap()]);
    assert_ne!(code(&r), 0);
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error: "));
}

#[test]
fn simulate_is_reproducible_and_writes_a_valid_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "s.toml", STRAIGHT);
    let mut traces = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.path().join(tag);
        let r = hitch(&[
            "simulate",
            "--scenario",
            &scn,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "5",
            "--noise",
            "0.01,0.02",
        ]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        assert!(out.join("summary.json").exists() && out.join("solves.csv").exists());
        traces.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    let text = String::from_utf8(traces.remove(0)).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_COLUMNS.join(","));
    hitch_cli::output::validate_trace(&dir.path().join("a/trace.csv")).unwrap();
}

#[test]
fn bad_noise_flag_is_a_usage_error() {
    let r = hitch(&[
        "simulate",
        "--scenario",
        "x.toml",
        "--out",
        "o",
        "--noise",
        "-1",
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn bundled_scenarios_match_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let r = hitch(&["generate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["perpendicular.toml", "parallel.toml"] {
        assert_eq!(
            std::fs::read_to_string(dir.path().join(name)).unwrap(),
            std::fs::read_to_string(shipped.join(name)).unwrap(),
            "{name}"
        );
    }
}
