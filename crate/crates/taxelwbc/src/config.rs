//! TOML file formats for the robot description, taxel layout, calibration,
//! controller gains and scenarios.
//!
//! Every loader takes the text plus a name used in diagnostics. Syntax and
//! type errors carry line and column, semantic errors name the offending
//! field (`links[3].mass`, `events[2].t_end`, ...).

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, SMatrix, Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use taxelwbc_core::control::{BaseAdmittanceParams, CartesianDamping, ImpedanceGains};
use taxelwbc_core::math::ArmVector;
use taxelwbc_core::model::{Footprint, JointLimits, LinkParams, MountPose, RobotModel, ToolFrame};
use taxelwbc_core::sim::{
    BaseMode, ControllerKind, ForceEvent, ForceFrame, ForceTarget, ObstacleModel, Scenario, SimConfig,
    TrajectorySegment,
};
use taxelwbc_core::taxels::{CalibrationModel, TaxelGeometry, TaxelLayout};
use taxelwbc_core::ARM_DOF;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{source_name}: {err}")]
    Io { source_name: String, err: std::io::Error },
    #[error("{source_name}:{line}:{column}: {message}")]
    Syntax { source_name: String, line: usize, column: usize, message: String },
    #[error("{source_name}: field `{field}`: {message}")]
    Invalid { source_name: String, field: String, message: String },
    #[error("unknown scenario `{0}` (not a file, not bundled, not in the config directory)")]
    UnknownScenario(String),
}

impl ConfigError {
    fn invalid(source_name: &str, field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Invalid { source_name: source_name.to_string(), field: field.into(), message: message.to_string() }
    }
}

/// Byte offset to 1-based line and column.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

fn parse<T: DeserializeOwned>(text: &str, source_name: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ConfigError::Syntax { source_name: source_name.to_string(), line, column, message: e.message().to_string() }
    })
}

pub fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|err| ConfigError::Io { source_name: path.display().to_string(), err })
}

/// A square matrix written as a scalar (times identity), a diagonal, or
/// nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl MatrixSpec {
    fn to_matrix<const N: usize>(&self) -> Result<SMatrix<f64, N, N>, String> {
        let m = match self {
            MatrixSpec::Scalar(s) => SMatrix::<f64, N, N>::identity() * *s,
            MatrixSpec::Diagonal(d) if d.len() == N => {
                SMatrix::<f64, N, N>::from_diagonal(&SMatrix::<f64, N, 1>::from_column_slice(d))
            }
            MatrixSpec::Diagonal(d) => return Err(format!("expected {N} diagonal entries, found {}", d.len())),
            MatrixSpec::Full(rows) => {
                if rows.len() != N || rows.iter().any(|r| r.len() != N) {
                    return Err(format!("expected a {N}x{N} matrix"));
                }
                SMatrix::<f64, N, N>::from_fn(|i, j| rows[i][j])
            }
        };
        if m.iter().all(|v| v.is_finite()) {
            Ok(m)
        } else {
            Err("entries must be finite".into())
        }
    }

    fn from_matrix<const N: usize>(m: &SMatrix<f64, N, N>) -> Self {
        let diag = SMatrix::<f64, N, N>::from_diagonal(&m.diagonal());
        if *m == diag {
            let d = m.diagonal();
            if d.iter().all(|v| *v == d[0]) {
                MatrixSpec::Scalar(d[0])
            } else {
                MatrixSpec::Diagonal(d.iter().copied().collect())
            }
        } else {
            MatrixSpec::Full((0..N).map(|i| (0..N).map(|j| m[(i, j)]).collect()).collect())
        }
    }
}

fn fixed<const N: usize>(v: &[f64], source: &str, field: &str) -> Result<[f64; N], ConfigError> {
    let arr: [f64; N] = v
        .try_into()
        .map_err(|_| ConfigError::invalid(source, field, format!("expected {N} values, found {}", v.len())))?;
    if arr.iter().all(|x| x.is_finite()) {
        Ok(arr)
    } else {
        Err(ConfigError::invalid(source, field, "values must be finite"))
    }
}

// ---------------------------------------------------------------- robot

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotFile {
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    pub footprint: FootprintSpec,
    pub mount: MountSpec,
    pub tool: ToolSpec,
    pub limits: LimitsSpec,
    pub links: Vec<LinkSpec>,
}

fn default_gravity() -> f64 {
    9.81
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootprintSpec {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountSpec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub translation: Vec<f64>,
    /// Roll, pitch, yaw (rad).
    #[serde(default = "zero3")]
    pub rpy: Vec<f64>,
}

fn zero3() -> Vec<f64> {
    vec![0.0; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
    pub mass: f64,
    pub com: Vec<f64>,
    pub inertia: MatrixSpec,
    #[serde(default)]
    pub armature: f64,
}

impl RobotFile {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        parse(text, source)
    }

    pub fn to_model(&self, source: &str) -> Result<RobotModel, ConfigError> {
        if self.links.len() != ARM_DOF {
            return Err(ConfigError::invalid(
                source,
                "links",
                format!("expected {ARM_DOF} links, found {}", self.links.len()),
            ));
        }
        let mut links = Vec::with_capacity(ARM_DOF);
        for (i, l) in self.links.iter().enumerate() {
            let field = |name: &str| format!("links[{}].{name}", i + 1);
            let com = fixed::<3>(&l.com, source, &field("com"))?;
            let inertia: Matrix3<f64> =
                l.inertia.to_matrix().map_err(|m| ConfigError::invalid(source, field("inertia"), m))?;
            links.push(LinkParams {
                a: l.a,
                alpha: l.alpha,
                d: l.d,
                theta_offset: l.theta_offset,
                mass: l.mass,
                com: Vector3::from(com),
                inertia,
                armature: l.armature,
            });
        }
        let translation = fixed::<3>(&self.tool.translation, source, "tool.translation")?;
        let rpy = fixed::<3>(&self.tool.rpy, source, "tool.rpy")?;
        let tool = ToolFrame {
            translation: Vector3::from(translation),
            rotation: Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        };
        let limits = JointLimits {
            lower: ArmVector::from(fixed::<ARM_DOF>(&self.limits.lower, source, "limits.lower")?),
            upper: ArmVector::from(fixed::<ARM_DOF>(&self.limits.upper, source, "limits.upper")?),
            velocity: ArmVector::from(fixed::<ARM_DOF>(&self.limits.velocity, source, "limits.velocity")?),
        };
        let footprint = Footprint { length: self.footprint.length, width: self.footprint.width };
        let mount = MountPose { x: self.mount.x, y: self.mount.y, z: self.mount.z, yaw: self.mount.yaw };
        let links: [LinkParams; ARM_DOF] = links.try_into().expect("length checked above");
        RobotModel::new(footprint, mount, links, tool, limits, self.gravity).map_err(|e| {
            use taxelwbc_core::model::ModelError::*;
            let field = match &e {
                NonPositiveMass { link } => format!("links[{}].mass", link + 1),
                InertiaNotSpd { link } => format!("links[{}].inertia", link + 1),
                InvalidLimits { joint } => format!("limits (joint {})", joint + 1),
                InvalidFootprint => "footprint".into(),
                NonFinite(what) => (*what).into(),
            };
            ConfigError::invalid(source, field, e)
        })
    }

    pub fn from_model(model: &RobotModel) -> Self {
        let fp = model.footprint();
        let m = model.mount();
        let tool = model.tool();
        let (r, p, y) = tool.rotation.euler_angles();
        let lim = model.limits();
        RobotFile {
            gravity: model.gravity(),
            footprint: FootprintSpec { length: fp.length, width: fp.width },
            mount: MountSpec { x: m.x, y: m.y, z: m.z, yaw: m.yaw },
            tool: ToolSpec { translation: tool.translation.iter().copied().collect(), rpy: vec![r, p, y] },
            limits: LimitsSpec {
                lower: lim.lower.iter().copied().collect(),
                upper: lim.upper.iter().copied().collect(),
                velocity: lim.velocity.iter().copied().collect(),
            },
            links: model
                .links()
                .iter()
                .map(|l| LinkSpec {
                    a: l.a,
                    alpha: l.alpha,
                    d: l.d,
                    theta_offset: l.theta_offset,
                    mass: l.mass,
                    com: l.com.iter().copied().collect(),
                    inertia: MatrixSpec::from_matrix(&l.inertia),
                    armature: l.armature,
                })
                .collect(),
        }
    }
}

pub fn load_robot(text: &str, source: &str) -> Result<RobotModel, ConfigError> {
    RobotFile::parse(text, source)?.to_model(source)
}

// --------------------------------------------------------------- layout

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub taxels: Vec<TaxelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxelSpec {
    pub index: usize,
    /// Position in the base frame (m).
    pub x: f64,
    pub y: f64,
    /// Orientation about the base z-axis (rad).
    pub phi: f64,
}

impl LayoutFile {
    pub fn to_layout(&self, source: &str, footprint: &Footprint) -> Result<TaxelLayout, ConfigError> {
        let taxels = self
            .taxels
            .iter()
            .map(|t| TaxelGeometry { index: t.index, position: Vector2::new(t.x, t.y), phi: t.phi })
            .collect();
        TaxelLayout::new(taxels, footprint).map_err(|e| ConfigError::invalid(source, "taxels", e))
    }

    pub fn from_layout(layout: &TaxelLayout) -> Self {
        LayoutFile {
            taxels: layout
                .taxels()
                .iter()
                .map(|t| TaxelSpec { index: t.index, x: t.position.x, y: t.position.y, phi: t.phi })
                .collect(),
        }
    }
}

pub fn load_layout(text: &str, source: &str, footprint: &Footprint) -> Result<TaxelLayout, ConfigError> {
    parse::<LayoutFile>(text, source)?.to_layout(source, footprint)
}

// ---------------------------------------------------------- calibration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub material: String,
    /// Counts per newton.
    pub slope: f64,
    #[serde(default)]
    pub offset: f64,
    pub max_force: f64,
}

pub fn load_calibration(text: &str, source: &str) -> Result<CalibrationModel, ConfigError> {
    let f: CalibrationFile = parse(text, source)?;
    CalibrationModel::new(f.material, f.slope, f.offset, f.max_force)
        .map_err(|e| ConfigError::invalid(source, "calibration", e))
}

// ---------------------------------------------------------------- gains

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    #[serde(default)]
    pub cartesian: CartesianSpec,
    #[serde(default)]
    pub nullspace: NullspaceSpec,
    #[serde(default)]
    pub weights: WeightsSpec,
    #[serde(default)]
    pub base: BaseSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartesianSpec {
    pub stiffness: Option<MatrixSpec>,
    /// Fixed damping matrix; exclusive with `damping_ratio`.
    pub damping: Option<MatrixSpec>,
    pub damping_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullspaceSpec {
    pub stiffness: Option<MatrixSpec>,
    pub damping: Option<MatrixSpec>,
    pub q_ref: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub eta_arm: Option<f64>,
    pub eta_base: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    /// Diagonal virtual mass `(x, y, yaw)`.
    pub mass: Option<Vec<f64>>,
    pub damping: Option<Vec<f64>>,
}

impl GainsFile {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        parse(text, source)
    }

    /// Applies the file on top of the library defaults.
    pub fn resolve(&self, source: &str) -> Result<(ImpedanceGains, BaseAdmittanceParams), ConfigError> {
        let g = self.controller_update().apply(source, ImpedanceGains::default())?;
        let mut base = BaseAdmittanceParams::default();
        if let Some(m) = &self.base.mass {
            base.mass = Vector3::from(fixed::<3>(m, source, "base.mass")?);
        }
        if let Some(d) = &self.base.damping {
            base.damping = Vector3::from(fixed::<3>(d, source, "base.damping")?);
        }
        base.validate().map_err(|e| ConfigError::invalid(source, "base", e))?;
        Ok((g, base))
    }

    pub fn controller_update(&self) -> GainsUpdate {
        GainsUpdate {
            cartesian: self.cartesian.clone(),
            nullspace: self.nullspace.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// The controller part of a gains file, applied over existing gains. The
/// base admittance is part of the plant and cannot change mid-run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsUpdate {
    #[serde(default)]
    pub cartesian: CartesianSpec,
    #[serde(default)]
    pub nullspace: NullspaceSpec,
    #[serde(default)]
    pub weights: WeightsSpec,
}

impl GainsUpdate {
    pub fn apply(&self, source: &str, mut g: ImpedanceGains) -> Result<ImpedanceGains, ConfigError> {
        let bad = |field: &str, m: String| ConfigError::invalid(source, field, m);
        if let Some(k) = &self.cartesian.stiffness {
            g.stiffness = k.to_matrix().map_err(|m| bad("cartesian.stiffness", m))?;
        }
        match (&self.cartesian.damping, self.cartesian.damping_ratio) {
            (Some(_), Some(_)) => {
                return Err(bad("cartesian.damping", "give either `damping` or `damping_ratio`, not both".into()))
            }
            (Some(d), None) => {
                g.damping = CartesianDamping::Fixed(d.to_matrix().map_err(|m| bad("cartesian.damping", m))?)
            }
            (None, Some(ratio)) => g.damping = CartesianDamping::Critical { ratio },
            (None, None) => {}
        }
        if let Some(k) = &self.nullspace.stiffness {
            g.nullspace_stiffness = k.to_matrix().map_err(|m| bad("nullspace.stiffness", m))?;
        }
        if let Some(d) = &self.nullspace.damping {
            g.nullspace_damping = d.to_matrix().map_err(|m| bad("nullspace.damping", m))?;
        }
        if let Some(q) = &self.nullspace.q_ref {
            g.q_ref = ArmVector::from(fixed::<ARM_DOF>(q, source, "nullspace.q_ref")?);
        }
        if let Some(e) = self.weights.eta_arm {
            g.eta_arm = e;
        }
        if let Some(e) = self.weights.eta_base {
            g.eta_base = e;
        }
        g.validate().map_err(|e| {
            let field = match &e {
                taxelwbc_core::control::ControlError::InvalidGains(m) if m.contains("loco") => "weights",
                taxelwbc_core::control::ControlError::InvalidGains(m) if m.contains("null") => "nullspace",
                taxelwbc_core::control::ControlError::InvalidGains(m) if m.contains("q_ref") => "nullspace.q_ref",
                _ => "cartesian",
            };
            ConfigError::invalid(source, field, e)
        })?;
        Ok(g)
    }
}

impl GainsFile {
    pub fn from_gains(g: &ImpedanceGains, base: &BaseAdmittanceParams) -> Self {
        let (damping, damping_ratio) = match g.damping {
            CartesianDamping::Fixed(d) => (Some(MatrixSpec::from_matrix(&d)), None),
            CartesianDamping::Critical { ratio } => (None, Some(ratio)),
        };
        GainsFile {
            cartesian: CartesianSpec { stiffness: Some(MatrixSpec::from_matrix(&g.stiffness)), damping, damping_ratio },
            nullspace: NullspaceSpec {
                stiffness: Some(MatrixSpec::from_matrix(&g.nullspace_stiffness)),
                damping: Some(MatrixSpec::from_matrix(&g.nullspace_damping)),
                q_ref: Some(g.q_ref.iter().copied().collect()),
            },
            weights: WeightsSpec { eta_arm: Some(g.eta_arm), eta_base: Some(g.eta_base) },
            base: BaseSpec {
                mass: Some(base.mass.iter().copied().collect()),
                damping: Some(base.damping.iter().copied().collect()),
            },
        }
    }
}

pub fn load_gains(text: &str, source: &str) -> Result<(ImpedanceGains, BaseAdmittanceParams), ConfigError> {
    GainsFile::parse(text, source)?.resolve(source)
}

// ------------------------------------------------------------- scenario

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub controller: ControllerName,
    #[serde(default)]
    pub base_mode: BaseModeName,
    pub sim: SimSpec,
    #[serde(default)]
    pub initial_base: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_arm: Option<Vec<f64>>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub trajectory: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerName {
    Impedance,
    FollowMe,
}

impl From<ControllerName> for ControllerKind {
    fn from(c: ControllerName) -> Self {
        match c {
            ControllerName::Impedance => ControllerKind::Impedance,
            ControllerName::FollowMe => ControllerKind::FollowMe,
        }
    }
}

impl From<ControllerKind> for ControllerName {
    fn from(c: ControllerKind) -> Self {
        match c {
            ControllerKind::Impedance => ControllerName::Impedance,
            ControllerKind::FollowMe => ControllerName::FollowMe,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseModeName {
    #[default]
    Admittance,
    Rigid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub taxel_noise_std: f64,
}

fn default_dt() -> f64 {
    SimConfig::default().dt
}

fn default_noise() -> f64 {
    SimConfig::default().taxel_noise_std
}

/// `6` for a taxel, `"ee"` for the end-effector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Taxel(usize),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    /// Free-form tag, e.g. the demo case the event belongs to.
    #[serde(default)]
    pub label: Option<String>,
    pub t_start: f64,
    pub t_end: f64,
    pub target: TargetSpec,
    pub magnitude: f64,
    /// End-effector events only.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    /// Frame of `direction`, `world` unless given.
    #[serde(default)]
    pub frame: FrameName,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameName {
    #[default]
    World,
    Base,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub stiffness: Option<f64>,
    #[serde(default)]
    pub damping: Option<f64>,
    #[serde(default)]
    pub thickness: Option<f64>,
    #[serde(default)]
    pub t_on: Option<f64>,
    #[serde(default)]
    pub t_off: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub velocity: Vec<f64>,
}

/// A scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub config: SimConfig,
    pub description: String,
    /// Label of each event, parallel to `scenario.events`.
    pub labels: Vec<Option<String>>,
}

impl LoadedScenario {
    /// Copy keeping only the events tagged `label`, obstacles and
    /// trajectory untouched.
    pub fn only_label(&self, label: &str) -> LoadedScenario {
        let mut out = self.clone();
        let keep: Vec<(ForceEvent, Option<String>)> = self
            .scenario
            .events
            .iter()
            .zip(self.labels.iter())
            .filter(|(_, l)| l.as_deref() == Some(label))
            .map(|(e, l)| (*e, l.clone()))
            .collect();
        out.scenario.events = keep.iter().map(|(e, _)| *e).collect();
        out.labels = keep.into_iter().map(|(_, l)| l).collect();
        out
    }

    /// Time window spanned by the events tagged `label`.
    pub fn label_window(&self, label: &str) -> Option<(f64, f64)> {
        self.scenario.events.iter().zip(self.labels.iter()).filter(|(_, l)| l.as_deref() == Some(label)).fold(
            None,
            |acc: Option<(f64, f64)>, (e, _)| {
                Some(acc.map_or((e.t_start, e.t_end), |(a, b)| (a.min(e.t_start), b.max(e.t_end))))
            },
        )
    }
}

impl ScenarioFile {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        parse(text, source)
    }

    pub fn resolve(&self, source: &str, layout: &TaxelLayout) -> Result<LoadedScenario, ConfigError> {
        let config = SimConfig {
            dt: self.sim.dt,
            duration: self.sim.duration,
            seed: self.sim.seed,
            taxel_noise_std: self.sim.taxel_noise_std,
        };
        config.validate().map_err(|e| ConfigError::invalid(source, "sim", e))?;

        let mut scenario = Scenario::new(self.name.clone(), self.controller.into());
        scenario.base_mode = match self.base_mode {
            BaseModeName::Admittance => BaseMode::Admittance,
            BaseModeName::Rigid => BaseMode::Rigid,
        };
        if let Some(b) = &self.initial_base {
            scenario.initial_base = Vector3::from(fixed::<3>(b, source, "initial_base")?);
        }
        if let Some(q) = &self.initial_arm {
            scenario.initial_arm = Some(ArmVector::from(fixed::<ARM_DOF>(q, source, "initial_arm")?));
        }
        let mut labels = Vec::with_capacity(self.events.len());
        for (i, e) in self.events.iter().enumerate() {
            let field = |name: &str| format!("events[{}].{name}", i + 1);
            let target = match &e.target {
                TargetSpec::Taxel(k) => ForceTarget::Taxel(*k),
                TargetSpec::Named(n) if n == "ee" || n == "end_effector" => ForceTarget::EndEffector,
                TargetSpec::Named(n) => {
                    return Err(ConfigError::invalid(
                        source,
                        field("target"),
                        format!("`{n}` is neither a taxel index nor \"ee\""),
                    ))
                }
            };
            let direction = match &e.direction {
                Some(d) => Vector3::from(fixed::<3>(d, source, &field("direction"))?),
                None => Vector3::zeros(),
            };
            let frame = match e.frame {
                FrameName::World => ForceFrame::World,
                FrameName::Base => ForceFrame::Base,
            };
            scenario.events.push(ForceEvent {
                t_start: e.t_start,
                t_end: e.t_end,
                target,
                magnitude: e.magnitude,
                direction,
                frame,
            });
            labels.push(e.label.clone());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let field = |name: &str| format!("obstacles[{}].{name}", i + 1);
            let a = fixed::<2>(&o.a, source, &field("a"))?;
            let b = fixed::<2>(&o.b, source, &field("b"))?;
            let mut m = ObstacleModel::new(Vector2::from(a), Vector2::from(b));
            if let Some(k) = o.stiffness {
                m.stiffness = k;
            }
            if let Some(c) = o.damping {
                m.damping = c;
            }
            if let Some(t) = o.thickness {
                m.thickness = t;
            }
            if let Some(t) = o.t_on {
                m.t_on = t;
            }
            if let Some(t) = o.t_off {
                m.t_off = t;
            }
            scenario.obstacles.push(m);
        }
        for (i, s) in self.trajectory.iter().enumerate() {
            let v = fixed::<3>(&s.velocity, source, &format!("trajectory[{}].velocity", i + 1))?;
            scenario.trajectory.push(TrajectorySegment {
                t_start: s.t_start,
                t_end: s.t_end,
                velocity: Vector3::from(v),
            });
        }
        scenario.validate(&config, layout).map_err(|e| {
            let msg = e.to_string();
            let field = ["event", "obstacle", "trajectory segment"]
                .iter()
                .zip(["events", "obstacles", "trajectory"])
                .find_map(|(needle, name)| {
                    let rest = msg.strip_prefix("invalid scenario: ")?.strip_prefix(needle)?;
                    let n: String = rest.trim_start().chars().take_while(|c| c.is_ascii_digit()).collect();
                    Some(format!("{name}[{n}]"))
                })
                .unwrap_or_else(|| "scenario".into());
            ConfigError::invalid(source, field, msg)
        })?;
        Ok(LoadedScenario { scenario, config, description: self.description.clone(), labels })
    }
}

pub fn load_scenario(text: &str, source: &str, layout: &TaxelLayout) -> Result<LoadedScenario, ConfigError> {
    ScenarioFile::parse(text, source)?.resolve(source, layout)
}
