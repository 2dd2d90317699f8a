//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hitch_cli::commands::{self, Overrides};
use hitch_core::mpc::InitKind;
use hitch_core::sim::{CompareReport, SimResult};
use hitch_core::tracking::{control_correction, GainSchedule};
use hitch_core::trajectory::{Knot, TimedTrajectory};
use hitch_core::vehicle::{beta01, ode, rk4_step, shoot};
use hitch_core::{Control, State, VehicleParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2]) as f64
    }
}

fn euler(x: &State, u0: &Control, u1: &Control, t: f64, steps: usize, p: &VehicleParams) -> State {
    let h = t / steps as f64;
    let mut a = x.to_array();
    for i in 0..steps {
        let s = i as f64 / steps as f64;
        let d = ode(&State::from_array(a), &u0.lerp(u1, s), p).to_array();
        for k in 0..4 {
            a[k] += h * d[k];
        }
    }
    State::from_array(a)
}

fn dist(a: &State, b: &State) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    (0..4).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

fn model_correctness() -> Outcome {
    let start = Instant::now();
    let p = VehicleParams::default();
    let mut worst_hand = 0.0_f64;
    let cases = [
        (
            State::new(1.0, 2.0, 0.0, 0.0),
            Control::new(0.5, 0.0),
            [0.5, 0.0, 0.0, 0.0],
        ),
        (
            State::new(0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2),
            Control::new(0.4, 1.0),
            [0.05, 0.0, 0.4 / 0.6, 1.0],
        ),
        (
            State::new(
                0.0,
                0.0,
                std::f64::consts::FRAC_PI_2,
                std::f64::consts::FRAC_PI_2 + std::f64::consts::FRAC_PI_6,
            ),
            Control::new(-0.3, 0.5),
            [0.0, -0.2473076211353316, -0.2860843918243516, 0.5],
        ),
    ];
    for (x, u, want) in cases {
        let got = ode(&x, &u, &p).to_array();
        for i in 0..4 {
            worst_hand = worst_hand.max((got[i] - want[i]).abs());
        }
    }

    // RK4 against Euler with 10^4 substeps, sharpened by one Richardson step
    // with 2·10^4 so its own error stays well below the RK4 error
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..50 {
        let b = rng.random_range(-0.8..0.8);
        let th = rng.random_range(-3.0..3.0);
        let x = State::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            th,
            th + b,
        );
        let u0 = Control::new(rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0));
        let u1 = Control::new(rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0));
        let t = 0.5;
        let e1 = euler(&x, &u0, &u1, t, 10_000, &p).to_array();
        let e2 = euler(&x, &u0, &u1, t, 20_000, &p).to_array();
        let oracle = State::from_array(std::array::from_fn(|i| 2.0 * e2[i] - e1[i]));
        let coarse = shoot(&x, &[u0, u1], t, &p, 1)[1];
        let fine = shoot(&x, &[u0, u1], t, &p, 2)[1];
        worst_ratio = worst_ratio.min(dist(&coarse, &oracle) / dist(&fine, &oracle));
    }
    let elapsed = start.elapsed().as_secs_f64();
    (
        worst_hand < 1e-12 && worst_ratio >= 12.0 && elapsed < 1.0,
        format!(
            "hand cases max error {worst_hand:.1e}, smallest RK4 halving ratio {worst_ratio:.1}, {elapsed:.2} s"
        ),
    )
}

fn straight_reverse(v0: f64, duration: f64) -> TimedTrajectory {
    let n = (duration / 0.01).round() as usize;
    let knots = (0..=n)
        .map(|i| {
            let t = i as f64 * 0.01;
            Knot {
                t,
                x: State::new(v0 * t, 0.0, 0.0, 0.0),
                u: Control::new(v0, 0.0),
                tag: 0,
            }
        })
        .collect();
    TimedTrajectory::new(knots).unwrap()
}

fn reverse_stability() -> Outcome {
    let start = Instant::now();
    let p = VehicleParams::default();
    let dt = 0.01;
    let x0 = State::new(0.0, 0.0, 0.0, 0.05);

    let u = Control::new(-0.3, 0.0);
    let mut x = x0;
    let mut blowup = None;
    for i in 1..=1000 {
        x = rk4_step(&x, &u, &u, dt, &p);
        if beta01(&x).abs() > 0.5 {
            blowup = Some(i as f64 * dt);
            break;
        }
    }

    let g = GainSchedule::default();
    let reference = straight_reverse(-0.3, 20.0);
    let mut x = x0;
    let mut late = 0.0_f64;
    for i in 0..2000 {
        let t = i as f64 * dt;
        let (u, e) = control_correction(&x, &reference, t, &p, &g);
        if t >= 15.0 {
            late = late.max(e.dpy1.hypot(e.dtheta1));
        }
        x = rk4_step(&x, &u, &u, dt, &p);
    }
    let elapsed = start.elapsed().as_secs_f64();
    (
        blowup.is_some() && late < 0.01 && elapsed < 5.0,
        format!(
            "open loop |beta| > 0.5 at {}, closed loop error after 15 s {late:.2e}, {elapsed:.2} s",
            blowup.map_or("never".into(), |t| format!("{t:.2} s"))
        ),
    )
}

struct Run {
    name: &'static str,
    result: SimResult,
    seconds: f64,
    compare: CompareReport,
}

fn feasibility(runs: &[Run]) -> Outcome {
    let mut checked = 0;
    let (mut viol, mut stitch, mut wall) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut short = 0;
    let mut missing = 0;
    for r in runs {
        for s in r.result.solves.iter().filter(|s| s.status.is_converged()) {
            checked += 1;
            match (s.feasibility, s.stitching) {
                (Some((_, v)), Some(j)) => {
                    viol = viol.max(v);
                    stitch = stitch.max(j);
                }
                _ => missing += 1,
            }
            if s.total_time < s.min_time {
                short += 1;
            }
            wall = wall.max(s.wall_time);
        }
    }
    (
        checked > 0 && missing == 0 && viol <= 1e-4 && stitch <= 1e-4 && short == 0 && wall < 30.0,
        format!(
            "{checked} converged solves, worst violation {viol:.1e}, stitching {stitch:.1e}, \
             {short} below the time bound, slowest {wall:.2} s"
        ),
    )
}

fn maneuvers(runs: &[Run]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let s = &r.result.summary;
        let pos = s
            .maneuvers
            .iter()
            .map(|m| m.position_error)
            .fold(0.0, f64::max);
        let head = s
            .maneuvers
            .iter()
            .map(|m| m.heading_error.to_degrees())
            .fold(0.0, f64::max);
        let corridor = r
            .result
            .trace
            .iter()
            .map(|row| row.corridor_violation)
            .fold(f64::NEG_INFINITY, f64::max);
        let good = s.success
            && s.maneuvers.iter().all(|m| m.completed)
            && pos <= 0.05
            && head <= 2.0
            && corridor <= 0.01
            && r.seconds < 300.0;
        ok &= good;
        parts.push(format!(
            "{} position {pos:.4} m, heading {head:.2} deg, corridor {corridor:.4} m, {:.1} s",
            r.name, r.seconds
        ));
    }
    (ok, parts.join("; "))
}

fn stitching(runs: &[Run]) -> Outcome {
    let mut stitched = 0;
    let mut worst = 0.0_f64;
    let mut first_plans = 0;
    let mut maneuvers = 0;
    for r in runs {
        maneuvers += r.result.summary.maneuvers.len();
        for s in r.result.solves.iter().filter(|s| s.accepted) {
            match s.stitch_jump {
                Some(j) => {
                    stitched += 1;
                    worst = worst.max(j);
                }
                None => first_plans += 1,
            }
        }
    }
    (
        stitched > 0 && worst == 0.0 && first_plans == maneuvers,
        format!("{stitched} stitched updates, largest jump {worst:e}, {first_plans} initial plans"),
    )
}

fn smart_init(runs: &[Run]) -> Outcome {
    let mut total = 0;
    let mut smart_failures = 0;
    let mut worse = 0;
    for r in runs {
        for c in &r.compare.transitions {
            total += 1;
            let (_, n, status) = c.smart;
            if !status.is_converged() {
                smart_failures += 1;
            }
            match c.flat {
                Some((m, st)) if st.is_converged() && m <= 4 * n => {}
                _ => worse += 1,
            }
        }
    }
    (
        total > 0 && smart_failures == 0 && worse > 0,
        format!(
            "{total} transition solves, {smart_failures} fail with smart init, \
             {worse} fail or need over 4x the iterations from the flat guess"
        ),
    )
}

fn warm_start(runs: &[Run]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let pairs: Vec<(usize, usize)> = r
            .compare
            .solves
            .iter()
            .filter(|c| c.smart.0 == InitKind::Warm)
            .filter_map(|c| c.flat.map(|f| (c.smart.1, f.0)))
            .collect();
        let warm = median(pairs.iter().map(|p| p.0).collect());
        let cold = median(pairs.iter().map(|p| p.1).collect());
        ok &= !pairs.is_empty() && warm <= 0.25 * cold;
        parts.push(format!(
            "{} median warm {warm} vs cold {cold} over {} updates",
            r.name,
            pairs.len()
        ));
    }
    (ok, parts.join("; "))
}

fn determinism(dir: &Path) -> Outcome {
    let noisy = |seed| Overrides {
        seed: Some(seed),
        noise: Some([0.02, 0.05]),
        ..Overrides::default()
    };
    let trace = |tag: &str, seed| -> Result<Vec<u8>, String> {
        let out = dir.join(tag);
        commands::simulate(&scenario("perpendicular"), &out, &noisy(seed), false)
            .map_err(|e| e.to_string())?;
        std::fs::read(out.join("trace.csv")).map_err(|e| e.to_string())
    };
    match (trace("a", 11), trace("b", 11), trace("c", 12)) {
        (Ok(a), Ok(b), Ok(c)) => (
            a == b,
            format!(
                "seed 11 twice: {} ({} bytes); seed 12 {}",
                if a == b { "identical" } else { "different" },
                a.len(),
                if a == c { "identical" } else { "differs" }
            ),
        ),
        (a, b, c) => (
            false,
            format!(
                "{:?}",
                [a.err(), b.err(), c.err()]
                    .into_iter()
                    .flatten()
                    .collect::<Vec<_>>()
            ),
        ),
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut lines: Vec<(&str, Outcome)> = vec![
        ("model correctness", model_correctness()),
        (
            "reverse instability and closed-loop stabilization",
            reverse_stability(),
        ),
    ];

    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for name in ["perpendicular", "parallel"] {
        let path = scenario(name);
        let start = Instant::now();
        let result =
            commands::simulate(&path, &dir.path().join(name), &Overrides::default(), false);
        let seconds = start.elapsed().as_secs_f64();
        let compare = commands::compare_init(
            &path,
            &dir.path().join(format!("{name}_compare.csv")),
            &Overrides::default(),
        );
        match (result, compare) {
            (Ok(result), Ok(compare)) => runs.push(Run {
                name,
                result,
                seconds,
                compare,
            }),
            (a, b) => errors.push(format!(
                "{name}: {}",
                [
                    a.err().map(|e| e.to_string()),
                    b.err().map(|e| e.to_string())
                ]
                .into_iter()
                .flatten()
                .collect::<Vec<_>>()
                .join(", ")
            )),
        }
    }
    let scenario_check = |f: fn(&[Run]) -> Outcome| -> Outcome {
        if errors.is_empty() {
            f(&runs)
        } else {
            (false, errors.join("; "))
        }
    };
    lines.push(("OCP feasibility", scenario_check(feasibility)));
    lines.push(("end-to-end maneuvers", scenario_check(maneuvers)));
    lines.push(("stitching continuity", scenario_check(stitching)));
    lines.push(("smart initialization", scenario_check(smart_init)));
    lines.push(("warm start", scenario_check(warm_start)));
    lines.push(("determinism", determinism(dir.path())));

    let mut failed = 0;
    for (i, (name, (ok, detail))) in lines.iter().enumerate() {
        println!(
            "{} {}. {name}: {detail}",
            if *ok { "PASS" } else { "FAIL" },
            i + 1
        );
        failed += usize::from(!ok);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
