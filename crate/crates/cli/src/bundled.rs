//! Generator for the two reference parking scenarios.
//!
//! Both use the same road: a right lane (corridor 0) and the full road width
//! (corridor 1) along x. The vehicle first drives forward past the parking
//! spot and stops, then reverses into corridor 2.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use crate::scenario::{
    ControllerSection, CorridorSection, ManeuverSection, OcpSection, RectSection, ScenarioFile,
    SimSection, VehicleSection,
};
use crate::CliError;

fn rect(center: [f64; 2], size: [f64; 2], heading: f64) -> CorridorSection {
    CorridorSection {
        rect: Some(RectSection {
            center,
            size,
            heading,
        }),
        halfplanes: None,
        waypoint: None,
    }
}

fn road() -> Vec<CorridorSection> {
    vec![
        rect([1.5, -0.45], [6.0, 0.9], 0.0),
        rect([5.0, 0.0], [6.0, 1.8], 0.0),
    ]
}

fn base(name: &str, spot: CorridorSection, park: [f64; 4]) -> ScenarioFile {
    let mut corridors = road();
    corridors.push(spot);
    ScenarioFile {
        name: name.into(),
        start: [0.0, -0.45, 0.0, 0.0],
        vehicle: VehicleSection::default(),
        corridors,
        maneuvers: vec![
            ManeuverSection {
                route: vec![0, 1],
                terminal: [6.0, 0.0, 0.0, 0.0],
                wait: 2.0,
            },
            ManeuverSection {
                route: vec![1, 2],
                terminal: park,
                wait: 0.0,
            },
        ],
        ocp: OcpSection::default(),
        controller: ControllerSection::default(),
        sim: SimSection::default(),
    }
}

/// Reverse into a driveway on the left of the road.
pub fn perpendicular() -> ScenarioFile {
    base(
        "perpendicular",
        rect([4.0, 1.6], [3.4, 1.0], -FRAC_PI_2),
        [4.0, 2.6, -FRAC_PI_2, -FRAC_PI_2],
    )
}

/// Reverse sideways into a slot along the left edge of the road.
pub fn parallel() -> ScenarioFile {
    base(
        "parallel",
        rect([4.0, 0.9], [3.0, 1.2], 0.0),
        [3.2, 1.2, 0.0, 0.0],
    )
}

pub fn all() -> Vec<ScenarioFile> {
    vec![perpendicular(), parallel()]
}

/// Writes `<name>.toml` for every bundled scenario into `dir`.
pub fn write_all(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    all()
        .into_iter()
        .map(|s| {
            let path = dir.join(format!("{}.toml", s.name));
            std::fs::write(&path, s.to_toml())
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_files_parse_back_identically() {
        for s in all() {
            let again = ScenarioFile::parse(&s.to_toml()).unwrap();
            assert_eq!(again, s);
            again.build().unwrap();
        }
    }
}
