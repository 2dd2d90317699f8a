//! Scenario file schema (TOML) and its conversion to simulator inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use hitch_core::geometry::{corridor_from_rect, Corridor, Halfplane, Pose};
use hitch_core::ocp::OcpDefaults;
use hitch_core::sim::{Disturbance, LatencyModel, Maneuver, Scenario, SimConfig};
use hitch_core::tracking::{GainSchedule, Slopes};
use hitch_core::vehicle::BodyRect;
use hitch_core::{Control, State, VehicleParams};
use hitch_nlp::SolveOptions;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    /// Initial state `[px1, py1, theta1, theta0]` [m, m, rad, rad].
    pub start: [f64; 4],
    #[serde(default)]
    pub vehicle: VehicleSection,
    pub corridors: Vec<CorridorSection>,
    pub maneuvers: Vec<ManeuverSection>,
    #[serde(default)]
    pub ocp: OcpSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    pub length_front: f64,
    pub length_rear: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSection {
    pub l1: f64,
    pub m0: f64,
    pub truck: BodySection,
    pub trailer: BodySection,
    /// `[v0, omega0]` bounds [m/s, rad/s].
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
    /// Rate bounds [m/s², rad/s²].
    pub du_min: [f64; 2],
    pub du_max: [f64; 2],
    /// Articulation bounds [rad].
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for VehicleSection {
    fn default() -> Self {
        let p = VehicleParams::default();
        let body = |b: &BodyRect| BodySection {
            length_front: b.length_front,
            length_rear: b.length_rear,
            half_width: b.half_width,
        };
        Self {
            l1: p.l1,
            m0: p.m0,
            truck: body(&p.truck_body),
            trailer: body(&p.trailer_body),
            u_min: p.u_min.to_array(),
            u_max: p.u_max.to_array(),
            du_min: p.du_min.to_array(),
            du_max: p.du_max.to_array(),
            beta_min: p.beta_min,
            beta_max: p.beta_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSection {
    pub center: [f64; 2],
    /// Length along the heading and width across it [m].
    pub size: [f64; 2],
    #[serde(default)]
    pub heading: f64,
}

/// Either `rect`, or `halfplanes` (`[a, b, c]` with `a x + b y + c <= 0`)
/// together with `waypoint` (`[x, y, theta]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<RectSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfplanes: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoint: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManeuverSection {
    /// Corridor indices in driving order.
    pub route: Vec<usize>,
    /// Terminal state `[px1, py1, theta1, theta0]`.
    pub terminal: [f64; 4],
    /// Rest after arrival [s].
    #[serde(default)]
    pub wait: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcpSection {
    /// Control intervals per stage.
    pub n: [usize; 3],
    /// Safety distance [m].
    pub s_d: f64,
    pub w0: f64,
    pub w1: f64,
    /// Stage time bounds [s].
    pub t_min: f64,
    pub t_max: f64,
    /// Duration of a closed stage [s].
    pub eps_t: f64,
    pub substeps: usize,
    pub max_iterations: usize,
}

impl Default for OcpSection {
    fn default() -> Self {
        let d = OcpDefaults::default();
        Self {
            n: d.n,
            s_d: d.s_d,
            w0: d.w0,
            w1: d.w1,
            t_min: d.t_min,
            t_max: d.t_max,
            eps_t: d.eps_t,
            substeps: d.substeps,
            max_iterations: SolveOptions::default().max_iterations,
        }
    }
}

/// Gain slopes `[forward, backward]` per m/s of reference speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub kx: [f64; 2],
    pub ky: [f64; 2],
    pub ktheta: [f64; 2],
    pub k_omega0: f64,
    /// Dead zone half-width [m/s].
    pub v_dz: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let g = GainSchedule::default();
        let s = |s: Slopes| [s.forward, s.backward];
        Self {
            kx: s(g.kx),
            ky: s(g.ky),
            ktheta: s(g.ktheta),
            k_omega0: g.k_omega0,
            v_dz: g.v_dz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub rate_hz: f64,
    pub plant_substeps: usize,
    /// Fixed planner latency [s]; the update window is twice this unless
    /// given.
    pub latency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub update_window: Option<f64>,
    /// Control noise standard deviations [m/s, rad/s].
    pub noise: [f64; 2],
    pub initial_offset: [f64; 4],
    pub seed: u64,
    pub max_time: f64,
    pub position_tol: f64,
    pub heading_tol_deg: f64,
    pub settle_time: f64,
    pub smart_init: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        let c = SimConfig::default();
        Self {
            rate_hz: c.rate_hz,
            plant_substeps: c.plant_substeps,
            latency: 0.1,
            update_window: None,
            noise: [0.0, 0.0],
            initial_offset: [0.0; 4],
            seed: c.seed,
            max_time: c.max_time,
            position_tol: c.position_tol,
            heading_tol_deg: c.heading_tol.to_degrees(),
            settle_time: c.settle_time,
            smart_init: true,
        }
    }
}

fn state(a: [f64; 4]) -> State {
    State::new(a[0], a[1], a[2], a[3])
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

impl CorridorSection {
    pub fn to_corridor(&self, index: usize) -> Result<Corridor, CliError> {
        let err = |m: String| schema(format!("corridor {index}: {m}"));
        match (&self.rect, &self.halfplanes, &self.waypoint) {
            (Some(r), None, None) => {
                corridor_from_rect(r.center, r.size, r.heading).map_err(|e| err(e.to_string()))
            }
            (None, Some(hps), Some(w)) => {
                if hps.len() < 3 {
                    return Err(err(format!(
                        "needs at least 3 halfplanes, got {}",
                        hps.len()
                    )));
                }
                let hps = hps
                    .iter()
                    .enumerate()
                    .map(|(i, h)| {
                        Halfplane::normalized(h[0], h[1], h[2]).ok_or_else(|| {
                            err(format!("halfplane {i} has a zero or non-finite normal"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Corridor::new(&hps, Pose::new(w[0], w[1], w[2])).map_err(|e| err(e.to_string()))
            }
            (None, Some(_), None) => Err(err("halfplanes need a waypoint".into())),
            _ => Err(err(
                "give either `rect` or `halfplanes` with `waypoint`".into()
            )),
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn params(&self) -> VehicleParams {
        let v = &self.vehicle;
        let body = |b: &BodySection| BodyRect {
            length_front: b.length_front,
            length_rear: b.length_rear,
            half_width: b.half_width,
        };
        VehicleParams {
            l1: v.l1,
            m0: v.m0,
            truck_body: body(&v.truck),
            trailer_body: body(&v.trailer),
            u_min: Control::from_array(v.u_min),
            u_max: Control::from_array(v.u_max),
            du_min: Control::from_array(v.du_min),
            du_max: Control::from_array(v.du_max),
            beta_min: v.beta_min,
            beta_max: v.beta_max,
        }
    }

    /// Builds and validates the simulator inputs. Geometric feasibility of
    /// the routes is left to the planner.
    pub fn build(&self) -> Result<(Scenario, SimConfig), CliError> {
        let params = self.params();
        params.validate().map_err(|e| schema(e.to_string()))?;
        if self.corridors.is_empty() {
            return Err(schema("no corridors"));
        }
        if self.maneuvers.is_empty() {
            return Err(schema("no maneuvers"));
        }
        let corridors = self
            .corridors
            .iter()
            .enumerate()
            .map(|(i, c)| c.to_corridor(i))
            .collect::<Result<Vec<_>, _>>()?;
        let mut maneuvers = Vec::new();
        for (m, man) in self.maneuvers.iter().enumerate() {
            if man.route.is_empty() {
                return Err(schema(format!("maneuver {m}: empty route")));
            }
            if let Some(i) = man.route.iter().find(|&&i| i >= corridors.len()) {
                return Err(schema(format!("maneuver {m}: unknown corridor {i}")));
            }
            if !(man.wait >= 0.0 && man.wait.is_finite()) {
                return Err(schema(format!(
                    "maneuver {m}: wait must be a nonnegative duration"
                )));
            }
            maneuvers.push(Maneuver {
                corridors: man.route.clone(),
                terminal: state(man.terminal),
                wait: man.wait,
            });
        }
        let c = &self.controller;
        let slopes = |s: [f64; 2]| Slopes::new(s[0], s[1]);
        let gains = GainSchedule {
            kx: slopes(c.kx),
            ky: slopes(c.ky),
            ktheta: slopes(c.ktheta),
            k_omega0: c.k_omega0,
            v_dz: c.v_dz,
        };
        gains.validate().map_err(|e| schema(e.to_string()))?;
        let o = &self.ocp;
        if o.n.contains(&0) || o.substeps == 0 || o.max_iterations == 0 {
            return Err(schema(
                "ocp: interval counts, substeps and max_iterations must be positive",
            ));
        }
        let ocp = OcpDefaults {
            n: o.n,
            s_d: o.s_d,
            w0: o.w0,
            w1: o.w1,
            t_min: o.t_min,
            t_max: o.t_max,
            eps_t: o.eps_t,
            substeps: o.substeps,
        };
        let scenario = Scenario {
            name: self.name.clone(),
            params,
            corridors,
            initial: state(self.start),
            maneuvers,
            gains,
            ocp,
        };
        let s = &self.sim;
        let cfg = SimConfig {
            rate_hz: s.rate_hz,
            plant_substeps: s.plant_substeps,
            latency: LatencyModel::Fixed(s.latency),
            update_window: s.update_window.unwrap_or(2.0 * s.latency),
            disturbance: Disturbance {
                sigma_v: s.noise[0],
                sigma_omega: s.noise[1],
                initial_offset: state(s.initial_offset),
            },
            seed: s.seed,
            max_time: s.max_time,
            position_tol: s.position_tol,
            heading_tol: s.heading_tol_deg.to_radians(),
            settle_time: s.settle_time,
            smart_init: s.smart_init,
            solver: SolveOptions {
                max_iterations: o.max_iterations,
                ..SolveOptions::default()
            },
            cold_comparison: false,
            cold_stride: 10,
        };
        cfg.validate().map_err(|e| schema(e.to_string()))?;
        Ok((scenario, cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
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

    #[test]
    fn minimal_file_uses_defaults() {
        let f = ScenarioFile::parse(MINIMAL).unwrap();
        let (scn, cfg) = f.build().unwrap();
        assert_eq!(scn.corridors.len(), 2);
        assert_eq!(scn.params, VehicleParams::default());
        assert_eq!(scn.gains, GainSchedule::default());
        assert_eq!(cfg.update_window, 0.2);
        assert_eq!(scn.corridors[1].waypoint(), Pose::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("name = \"straight\"", "name = \"straight\"\ncolour = 3");
        assert!(matches!(
            ScenarioFile::parse(&text),
            Err(CliError::Schema(_))
        ));
        let text = MINIMAL.replace("size = [4.0, 1.0]", "size = [4.0, 1.0], angle = 1.0");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn two_halfplanes_are_a_schema_error() {
        let text = MINIMAL.replace(
            "[[1.0, 0.0, -6.0], [-1.0, 0.0, 2.0], [0.0, 1.0, -0.5], [0.0, -1.0, -0.5]]",
            "[[1.0, 0.0, -6.0], [-1.0, 0.0, 2.0]]",
        );
        let err = ScenarioFile::parse(&text).unwrap().build().unwrap_err();
        assert!(
            matches!(&err, CliError::Schema(m) if m.contains("3 halfplanes")),
            "{err}"
        );
    }

    #[test]
    fn round_trips_through_toml() {
        let f = ScenarioFile::parse(MINIMAL).unwrap();
        let again = ScenarioFile::parse(&f.to_toml()).unwrap();
        assert_eq!(f, again);
    }
}
