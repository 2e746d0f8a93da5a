//! Configuration and datasets compiled into the binary, and lookup of
//! scenarios by name.

use std::path::{Path, PathBuf};

use taxelwbc_core::calib::SweepSample;
use taxelwbc_core::control::{BaseAdmittanceParams, ImpedanceGains};
use taxelwbc_core::sim::Plant;
use taxelwbc_core::taxels::{CalibrationModel, TaxelLayout};
use taxelwbc_core::RobotModel;

use crate::config::{self, ConfigError, LoadedScenario};
use crate::sweeps;

pub const ROBOT: &str = include_str!("../data/robot.toml");
pub const LAYOUT: &str = include_str!("../data/layout.toml");
pub const CALIBRATION: &str = include_str!("../data/calibration.toml");
pub const GAINS: &str = include_str!("../data/gains.toml");

pub const SCENARIOS: &[(&str, &str)] = &[
    ("impedance_demo", include_str!("../data/scenarios/impedance_demo.toml")),
    ("follow_me_demo", include_str!("../data/scenarios/follow_me_demo.toml")),
    ("collision", include_str!("../data/scenarios/collision.toml")),
];

pub const SWEEPS: &[(&str, &str)] = &[
    ("pu_foam_ld30.csv", include_str!("../data/calibration/pu_foam_ld30.csv")),
    ("cc_foam.csv", include_str!("../data/calibration/cc_foam.csv")),
    ("pe_foam_ld45_5mm.csv", include_str!("../data/calibration/pe_foam_ld45_5mm.csv")),
    ("pe_foam_ld45_3mm.csv", include_str!("../data/calibration/pe_foam_ld45_3mm.csv")),
];

/// Environment variable naming an extra directory searched for
/// `<name>.toml` scenarios before the bundled set.
pub const CONFIG_DIR_ENV: &str = "TAXELWBC_CONFIG_DIR";

pub fn robot() -> RobotModel {
    config::load_robot(ROBOT, "robot.toml").expect("bundled robot is valid")
}

pub fn layout(model: &RobotModel) -> TaxelLayout {
    config::load_layout(LAYOUT, "layout.toml", &model.footprint()).expect("bundled layout is valid")
}

pub fn calibration() -> CalibrationModel {
    config::load_calibration(CALIBRATION, "calibration.toml").expect("bundled calibration is valid")
}

pub fn gains() -> (ImpedanceGains, BaseAdmittanceParams) {
    config::load_gains(GAINS, "gains.toml").expect("bundled gains are valid")
}

pub fn plant() -> Plant {
    let model = robot();
    let layout = layout(&model);
    Plant { model, layout, calibration: calibration(), base: gains().1 }
}

/// A bundled scenario by name.
pub fn scenario(name: &str, layout: &TaxelLayout) -> Option<LoadedScenario> {
    let (_, text) = SCENARIOS.iter().find(|(n, _)| *n == name)?;
    Some(config::load_scenario(text, &format!("{name}.toml"), layout).expect("bundled scenario is valid"))
}

pub fn sweeps() -> Vec<(String, Vec<SweepSample>)> {
    SWEEPS
        .iter()
        .flat_map(|(name, text)| sweeps::read_sweeps(text.as_bytes(), name).expect("bundled sweep is valid"))
        .collect()
}

/// Resolves `spec` as a file path, then `<dir>/<spec>.toml` under
/// `config_dir`, then a bundled name.
pub fn resolve_scenario(
    spec: &str,
    config_dir: Option<&Path>,
    layout: &TaxelLayout,
) -> Result<LoadedScenario, ConfigError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = config::read_file(path)?;
        return config::load_scenario(&text, &path.display().to_string(), layout);
    }
    if let Some(dir) = config_dir {
        let candidate: PathBuf = dir.join(format!("{spec}.toml"));
        if candidate.is_file() {
            let text = config::read_file(&candidate)?;
            return config::load_scenario(&text, &candidate.display().to_string(), layout);
        }
    }
    scenario(spec, layout).ok_or_else(|| ConfigError::UnknownScenario(spec.to_string()))
}
