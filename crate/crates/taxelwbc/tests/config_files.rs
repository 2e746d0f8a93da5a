use std::fs;

use taxelwbc::bundled;
use taxelwbc::config::{self, ConfigError};
use taxelwbc_core::control::{BaseAdmittanceParams, ImpedanceGains};
use taxelwbc_core::sim::{BaseMode, ControllerKind, ForceTarget};
use taxelwbc_core::taxels::{default_layout, CalibrationModel};
use taxelwbc_core::RobotModel;

#[test]
fn bundled_files_equal_library_defaults() {
    let model = RobotModel::default();
    assert_eq!(bundled::robot(), model);
    assert_eq!(bundled::layout(&model), default_layout(&model.footprint()));
    assert_eq!(bundled::calibration(), CalibrationModel::pu_foam_ld30());
    assert_eq!(bundled::gains(), (ImpedanceGains::default(), BaseAdmittanceParams::default()));
}

#[test]
fn bundled_scenarios_load() {
    let layout = bundled::plant().layout;
    let imp = bundled::scenario("impedance_demo", &layout).unwrap();
    assert_eq!(imp.scenario.controller, ControllerKind::Impedance);
    assert_eq!(imp.config.duration, 30.0);
    assert_eq!(imp.config.taxel_noise_std, 1.0);
    assert_eq!(imp.label_window("iv"), Some((19.0, 19.4)));
    let iii = imp.only_label("iii");
    assert_eq!(iii.scenario.events.len(), 1);
    assert_eq!(iii.scenario.events[0].target, ForceTarget::Taxel(6));
    assert_eq!(iii.scenario.events[0].magnitude, 30.0);

    let fm = bundled::scenario("follow_me_demo", &layout).unwrap();
    assert_eq!(fm.scenario.controller, ControllerKind::FollowMe);
    let iv = fm.only_label("iv");
    assert_eq!(iv.scenario.events.len(), 2);
    assert!(iv.scenario.events.iter().any(|e| e.target == ForceTarget::EndEffector));

    let col = bundled::scenario("collision", &layout).unwrap();
    assert_eq!(col.scenario.base_mode, BaseMode::Admittance);
    assert_eq!(col.scenario.obstacles.len(), 1);
    assert_eq!(col.scenario.trajectory.len(), 1);
    assert!(bundled::scenario("missing", &layout).is_none());
}

#[test]
fn scenario_resolution_order() {
    let layout = bundled::plant().layout;
    let dir = tempfile::tempdir().unwrap();
    let text = bundled::SCENARIOS[2].1.replace("name = \"collision\"", "name = \"from_dir\"");
    fs::write(dir.path().join("collision.toml"), &text).unwrap();
    fs::write(dir.path().join("custom.toml"), &text).unwrap();

    // the config directory shadows bundled names
    let s = bundled::resolve_scenario("collision", Some(dir.path()), &layout).unwrap();
    assert_eq!(s.scenario.name, "from_dir");
    let s = bundled::resolve_scenario("collision", None, &layout).unwrap();
    assert_eq!(s.scenario.name, "collision");

    let path = dir.path().join("custom.toml");
    let s = bundled::resolve_scenario(path.to_str().unwrap(), None, &layout).unwrap();
    assert_eq!(s.scenario.name, "from_dir");

    assert!(matches!(bundled::resolve_scenario("custom", None, &layout), Err(ConfigError::UnknownScenario(_))));
}

#[test]
fn diagnostics_point_at_line_and_field() {
    let model = RobotModel::default();
    let layout = default_layout(&model.footprint());

    // type error on line 9 of the robot file
    let robot = bundled::ROBOT.replacen("gravity = 9.81", "gravity = \"down\"", 1);
    let line = robot.lines().position(|l| l.starts_with("gravity")).unwrap() + 1;
    match config::load_robot(&robot, "robot.toml") {
        Err(ConfigError::Syntax { line: l, source_name, .. }) => {
            assert_eq!(l, line);
            assert_eq!(source_name, "robot.toml");
        }
        other => panic!("{other:?}"),
    }

    let robot = bundled::ROBOT.replacen("mass = 3.59", "mass = -3.59", 1);
    let err = config::load_robot(&robot, "robot.toml").unwrap_err().to_string();
    assert!(err.contains("links[4].mass"), "{err}");

    let robot = bundled::ROBOT.replacen("inertia = [0.025, 0.01, 0.028]", "inertia = [0.025, 0.01]", 1);
    let err = config::load_robot(&robot, "robot.toml").unwrap_err().to_string();
    assert!(err.contains("links[4].inertia"), "{err}");

    let lay = bundled::LAYOUT.replacen("x = 0.49", "x = 0.9", 1);
    let err = config::load_layout(&lay, "layout.toml", &model.footprint()).unwrap_err().to_string();
    assert!(err.contains("outside the base footprint"), "{err}");

    let cal = bundled::CALIBRATION.replace("slope = 0.84", "slope = 0.0");
    let err = config::load_calibration(&cal, "calibration.toml").unwrap_err().to_string();
    assert!(err.contains("slope must be positive"), "{err}");

    let gains = bundled::GAINS.replace("q_ref = [", "q_ref = [0.0, ");
    let err = config::load_gains(&gains, "gains.toml").unwrap_err().to_string();
    assert!(err.contains("nullspace.q_ref") && err.contains("expected 7"), "{err}");

    let scen = bundled::SCENARIOS[0].1.replacen("target = 6", "target = 12", 1);
    let err = config::load_scenario(&scen, "impedance_demo.toml", &layout).unwrap_err().to_string();
    assert!(err.contains("events[3]") && err.contains("unknown taxel 12"), "{err}");

    let scen = bundled::SCENARIOS[1].1.replacen("controller = \"follow_me\"", "controller = \"followme\"", 1);
    let expected_line = scen.lines().position(|l| l.contains("followme")).unwrap() + 1;
    match config::load_scenario(&scen, "follow_me_demo.toml", &layout) {
        Err(ConfigError::Syntax { line, message, .. }) => {
            assert_eq!(line, expected_line);
            assert!(message.contains("followme"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}
