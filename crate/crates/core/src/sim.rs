//! Deterministic fixed-step closed-loop simulator.
//!
//! Each step: taxel forces from scripted events and obstacle contact, the
//! virtual base external torque, the active controller, then semi-implicit
//! Euler integration of the arm torque dynamics and of the base admittance.
//! The base is velocity controlled and tracks the admittance output ideally.
//! Arm and base are dynamically decoupled, as in the block-diagonal model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3, Vector6};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::{
    base_admittance_step, base_wrench_to_world, cartesian_impedance_force, follow_me_virtual_torque,
    nullspace_posture_torque, pose_error, wb_impedance_torques_with, ArmTaskOperators, BaseAdmittanceParams,
    ControlError, ImpedanceGains, WholeBodyContext,
};
use crate::math::{rot2, ArmVector, PlanarWrench, Wrench};
use crate::model::{
    arm_dynamics_from, forward_kinematics, mount_rotation, ArmKinematics, JointState, Pose, RobotModel,
};
use crate::taxels::{default_layout, CalibrationModel, TaxelEncoder, TaxelLayout, TaxelReading};
use crate::TAXEL_COUNT;

/// Arm joint speed (rad/s) or base speed (m/s, rad/s) treated as blow-up.
const DIVERGENCE_SPEED: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidConfig(&'static str),
    InvalidScenario(String),
    Control { t: f64, source: ControlError },
    Diverged { t: f64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidConfig(what) => write!(f, "invalid simulation config: {what}"),
            SimError::InvalidScenario(what) => write!(f, "invalid scenario: {what}"),
            SimError::Control { t, source } => write!(f, "controller failed at t = {t:.3} s: {source}"),
            SimError::Diverged { t } => write!(f, "simulation diverged at t = {t:.3} s"),
        }
    }
}

impl core::error::Error for SimError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            SimError::Control { source, .. } => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    /// Standard deviation (counts) of uniform noise added before the count
    /// quantization. Zero leaves quantization as the only sensor error.
    /// Readings inside the noise band are zeroed, see `TaxelEncoder`.
    pub taxel_noise_std: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1e-3, duration: 10.0, seed: 0, taxel_noise_std: 1.0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig("dt must be positive"));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(SimError::InvalidConfig("duration must be at least one step"));
        }
        if !(self.taxel_noise_std >= 0.0 && self.taxel_noise_std.is_finite()) {
            return Err(SimError::InvalidConfig("taxel noise must be non-negative"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        libm::round(self.duration / self.dt) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Impedance,
    FollowMe,
}

/// `Rigid` disables the base admittance: the base moves with the planar
/// part of the desired trajectory velocity, whatever the contact forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMode {
    Admittance,
    Rigid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceTarget {
    /// 1-based taxel index. The force acts inward along the taxel axis.
    Taxel(usize),
    EndEffector,
}

/// External force applied over `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceEvent {
    pub t_start: f64,
    pub t_end: f64,
    pub target: ForceTarget,
    /// N, non-negative.
    pub magnitude: f64,
    /// Direction of an end-effector force; ignored for taxels.
    pub direction: Vector3<f64>,
    pub frame: ForceFrame,
}

/// Frame of an end-effector force direction. `Base` directions turn with
/// the base yaw, like a push given by someone standing at the robot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ForceFrame {
    #[default]
    World,
    Base,
}

impl ForceEvent {
    pub fn active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }

    fn world_force(&self, base_yaw: f64) -> Vector3<f64> {
        let n = self.direction.norm();
        if !(n > 0.0) {
            return Vector3::zeros();
        }
        let d = self.direction * (self.magnitude / n);
        match self.frame {
            ForceFrame::World => d,
            ForceFrame::Base => {
                let (s, c) = (libm::sin(base_yaw), libm::cos(base_yaw));
                Vector3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z)
            }
        }
    }
}

/// A planar obstacle face, the segment `a -> b` in the world frame. Its
/// free side is to the left of `a -> b`; the solid extends `thickness`
/// behind it. Present only while `t_on <= t < t_off`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleModel {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
    /// N/m.
    pub stiffness: f64,
    /// N s/m.
    pub damping: f64,
    pub thickness: f64,
    pub t_on: f64,
    pub t_off: f64,
}

impl ObstacleModel {
    /// Foam-equivalent stiffness: 100 N at 11.4 mm.
    pub const DEFAULT_STIFFNESS: f64 = 100.0 / 0.0114;
    pub const DEFAULT_DAMPING: f64 = 20.0;
    pub const DEFAULT_THICKNESS: f64 = 0.3;

    pub fn new(a: Vector2<f64>, b: Vector2<f64>) -> Self {
        Self {
            a,
            b,
            stiffness: Self::DEFAULT_STIFFNESS,
            damping: Self::DEFAULT_DAMPING,
            thickness: Self::DEFAULT_THICKNESS,
            t_on: 0.0,
            t_off: f64::INFINITY,
        }
    }

    pub fn present(&self, t: f64) -> bool {
        t >= self.t_on && t < self.t_off
    }

    /// Unit normal pointing to the free side.
    pub fn normal(&self) -> Vector2<f64> {
        let d = (self.b - self.a).normalize();
        Vector2::new(-d.y, d.x)
    }
}

/// Constant world-frame end-effector velocity over `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySegment {
    pub t_start: f64,
    pub t_end: f64,
    pub velocity: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub controller: ControllerKind,
    pub base_mode: BaseMode,
    pub events: Vec<ForceEvent>,
    pub obstacles: Vec<ObstacleModel>,
    pub trajectory: Vec<TrajectorySegment>,
    /// Initial base pose `(x, y, yaw)`.
    pub initial_base: Vector3<f64>,
    /// Initial arm configuration; `None` uses the null-space reference.
    pub initial_arm: Option<ArmVector>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, controller: ControllerKind) -> Self {
        Self {
            name: name.into(),
            controller,
            base_mode: BaseMode::Admittance,
            events: Vec::new(),
            obstacles: Vec::new(),
            trajectory: Vec::new(),
            initial_base: Vector3::zeros(),
            initial_arm: None,
        }
    }

    pub fn validate(&self, config: &SimConfig, layout: &TaxelLayout) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        let end = config.duration + 0.5 * config.dt;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.t_start >= 0.0 && e.t_start < e.t_end && e.t_end <= end) {
                return bad(format!("event {} window [{}, {}) is not inside the run", i + 1, e.t_start, e.t_end));
            }
            if !(e.magnitude >= 0.0 && e.magnitude.is_finite()) {
                return bad(format!("event {} magnitude must be non-negative", i + 1));
            }
            match e.target {
                ForceTarget::Taxel(k) if layout.get(k).is_none() => {
                    return bad(format!("event {} targets unknown taxel {k}", i + 1))
                }
                ForceTarget::EndEffector if !(e.direction.norm() > 0.0) => {
                    return bad(format!("event {} needs a non-zero direction", i + 1))
                }
                _ => {}
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.stiffness > 0.0 && o.stiffness.is_finite()) {
                return bad(format!("obstacle {} stiffness must be positive", i + 1));
            }
            if !(o.damping >= 0.0 && o.thickness > 0.0) {
                return bad(format!("obstacle {} needs non-negative damping and positive thickness", i + 1));
            }
            if !((o.b - o.a).norm() > 0.0) {
                return bad(format!("obstacle {} has zero length", i + 1));
            }
        }
        for (i, s) in self.trajectory.iter().enumerate() {
            if !(s.t_start >= 0.0 && s.t_start < s.t_end && crate::math::all_finite(&s.velocity)) {
                return bad(format!("trajectory segment {} is malformed", i + 1));
            }
        }
        Ok(())
    }

    /// Displacement of the desired end-effector position after `t`.
    pub fn trajectory_offset(&self, t: f64) -> Vector3<f64> {
        self.trajectory.iter().map(|s| s.velocity * (t.clamp(s.t_start, s.t_end) - s.t_start)).sum()
    }

    pub fn trajectory_velocity(&self, t: f64) -> Vector3<f64> {
        self.trajectory.iter().filter(|s| t >= s.t_start && t < s.t_end).map(|s| s.velocity).sum()
    }
}

/// The robot and its sensing hardware.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub model: RobotModel,
    pub layout: TaxelLayout,
    pub calibration: CalibrationModel,
    pub base: BaseAdmittanceParams,
}

impl Default for Plant {
    fn default() -> Self {
        let model = RobotModel::default();
        let layout = default_layout(&model.footprint());
        Self { model, layout, calibration: CalibrationModel::default(), base: BaseAdmittanceParams::default() }
    }
}

/// One logged sample, taken after the step that ends at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: JointState,
    /// World-frame end-effector pose as `(position, rotation vector)`.
    pub ee_pose: Vector6<f64>,
    pub ee_desired: Vector6<f64>,
    /// Decoded taxel forces (N), slot `i` holds taxel `i + 1`.
    pub taxel_forces: [f64; TAXEL_COUNT],
    /// Physical contact and push forces before the sensor (N), same slots.
    pub applied_forces: [f64; TAXEL_COUNT],
    /// Virtual base external torque `(F_x, F_y, M_z)` in `F_B`.
    pub base_wrench: PlanarWrench,
    /// Applied external end-effector wrench, world frame.
    pub ee_wrench: Wrench,
    pub tau_base: Vector3<f64>,
    pub tau_arm: ArmVector,
    pub command_wrench: Wrench,
}

impl StepRecord {
    pub fn tracking_error(&self) -> f64 {
        (self.ee_pose.fixed_rows::<3>(0) - self.ee_desired.fixed_rows::<3>(0)).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub dt: f64,
    pub records: Vec<StepRecord>,
}

impl SimLog {
    pub fn summary(&self) -> RunSummary {
        let mut peak = [0.0; TAXEL_COUNT];
        let mut applied = [0.0; TAXEL_COUNT];
        let mut max_err: f64 = 0.0;
        for r in &self.records {
            for (p, f) in peak.iter_mut().zip(r.taxel_forces.iter()) {
                *p = f64::max(*p, *f);
            }
            for (p, f) in applied.iter_mut().zip(r.applied_forces.iter()) {
                *p = f64::max(*p, *f);
            }
            max_err = max_err.max(r.tracking_error());
        }
        RunSummary {
            rows: self.records.len(),
            duration: self.records.last().map_or(0.0, |r| r.t),
            peak_taxel_force: peak,
            peak_applied_force: applied,
            max_tracking_error: max_err,
            final_base: self.records.last().map_or(Vector3::zeros(), |r| r.state.base),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub rows: usize,
    pub duration: f64,
    pub peak_taxel_force: [f64; TAXEL_COUNT],
    pub peak_applied_force: [f64; TAXEL_COUNT],
    /// Maximum end-effector position error (m).
    pub max_tracking_error: f64,
    pub final_base: Vector3<f64>,
}

/// Contact of one footprint edge with one obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub taxel: usize,
    pub depth: f64,
    pub force: f64,
}

struct Edge {
    p0: Vector2<f64>,
    p1: Vector2<f64>,
    outward: Vector2<f64>,
}

fn sensorized_edges(length: f64, width: f64) -> [Edge; 3] {
    let (hl, hw) = (0.5 * length, 0.5 * width);
    [
        Edge { p0: Vector2::new(-hl, hw), p1: Vector2::new(hl, hw), outward: Vector2::new(0.0, 1.0) },
        Edge { p0: Vector2::new(hl, hw), p1: Vector2::new(hl, -hw), outward: Vector2::new(1.0, 0.0) },
        Edge { p0: Vector2::new(-hl, -hw), p1: Vector2::new(hl, -hw), outward: Vector2::new(0.0, -1.0) },
    ]
}

/// Contacts between the sensorized footprint edges and the obstacles
/// present at `t`. The penetration force `k d + c dd` is clamped to
/// `[0, 2 k d]` so it vanishes with the penetration and goes to the single
/// nearest taxel facing the contact.
pub fn contacts(
    model: &RobotModel,
    state: &JointState,
    obstacles: &[ObstacleModel],
    layout: &TaxelLayout,
    t: f64,
) -> Vec<Contact> {
    let fp = model.footprint();
    let c = Vector2::new(state.base.x, state.base.y);
    let r = rot2(state.base.z);
    let v = Vector2::new(state.base_vel.x, state.base_vel.y);
    let w = state.base_vel.z;
    let mut out = Vec::new();
    for o in obstacles.iter().filter(|o| o.present(t)) {
        let n = o.normal();
        let span = (o.b - o.a).norm();
        let tangent = (o.b - o.a) / span;
        for edge in sensorized_edges(fp.length, fp.width).iter() {
            if (r * edge.outward).dot(&n) >= 0.0 {
                continue;
            }
            let p0 = c + r * edge.p0;
            let p1 = c + r * edge.p1;
            // clip the edge to the part that projects onto the obstacle
            let (t0, t1) = (tangent.dot(&(p0 - o.a)), tangent.dot(&(p1 - o.a)));
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            if libm::fabs(t1 - t0) < 1e-12 {
                if !(0.0..=span).contains(&t0) {
                    continue;
                }
            } else {
                let sa = (0.0 - t0) / (t1 - t0);
                let sb = (span - t0) / (t1 - t0);
                lo = lo.max(sa.min(sb));
                hi = hi.min(sa.max(sb));
                if lo > hi {
                    continue;
                }
            }
            let depth_at = |s: f64| -n.dot(&(p0 + (p1 - p0) * s - o.a));
            let (d_lo, d_hi) = (depth_at(lo), depth_at(hi));
            let s = if libm::fabs(d_hi - d_lo) < 1e-12 {
                0.5 * (lo + hi)
            } else if d_lo > d_hi {
                lo
            } else {
                hi
            };
            let depth = depth_at(s);
            if !(depth > 0.0 && depth <= o.thickness) {
                continue;
            }
            let p = p0 + (p1 - p0) * s;
            let rel = p - c;
            let vp = v + Vector2::new(-w * rel.y, w * rel.x);
            let rate = -n.dot(&vp);
            let elastic = o.stiffness * depth;
            let force = (elastic + o.damping * rate).clamp(0.0, 2.0 * elastic);
            let local = r.transpose() * rel;
            let n_local = r.transpose() * n;
            let inward = -edge.outward;
            let nearest =
                layout.taxels().iter().filter(|tx| tx.axis().dot(&inward) >= libm::cos(crate::math::PI / 4.0)).min_by(
                    |x, y| {
                        (x.position - local)
                            .norm()
                            .partial_cmp(&(y.position - local).norm())
                            .unwrap_or(core::cmp::Ordering::Equal)
                    },
                );
            if let Some(tx) = nearest {
                let sensed = force * n_local.dot(&tx.axis()).max(0.0);
                out.push(Contact { taxel: tx.index, depth, force: sensed });
            }
        }
    }
    out
}

/// True per-taxel normal forces for the obstacles currently in contact.
pub fn contact_forces(
    model: &RobotModel,
    state: &JointState,
    obstacles: &[ObstacleModel],
    layout: &TaxelLayout,
    t: f64,
) -> Vec<TaxelReading> {
    let mut forces = alloc::vec![0.0; layout.len()];
    for c in contacts(model, state, obstacles, layout, t) {
        if let Some(slot) = layout.slot(c.taxel) {
            forces[slot] += c.force;
        }
    }
    layout.taxels().iter().zip(forces).map(|(tx, f)| TaxelReading { index: tx.index, raw: 0.0, force: f }).collect()
}

fn block_rotate(r: &Matrix3<f64>, w: &Wrench) -> Wrench {
    let f = r * w.fixed_rows::<3>(0);
    let m = r * w.fixed_rows::<3>(3);
    Wrench::new(f.x, f.y, f.z, m.x, m.y, m.z)
}

fn block_rotation(r: &Matrix3<f64>) -> Matrix6<f64> {
    let mut b = Matrix6::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    b.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    b
}

pub struct Simulator {
    plant: Plant,
    gains: ImpedanceGains,
    config: SimConfig,
    scenario: Scenario,
    encoder: TaxelEncoder,
    rng: ChaCha8Rng,
    state: JointState,
    step_index: u64,
    controller: ControllerKind,
    /// World pose the trajectory offset is added to.
    desired_origin: Pose,
    /// Follow-me end-effector reference in `F_A`.
    desired_local: Pose,
    pushes: Vec<ForceEvent>,
    last: StepRecord,
}

impl Simulator {
    pub fn new(plant: Plant, gains: ImpedanceGains, config: SimConfig, scenario: Scenario) -> Result<Self, SimError> {
        config.validate()?;
        plant.base.validate().map_err(|e| SimError::Control { t: 0.0, source: e })?;
        gains.validate().map_err(|e| SimError::Control { t: 0.0, source: e })?;
        scenario.validate(&config, &plant.layout)?;
        let arm = scenario.initial_arm.unwrap_or(gains.q_ref);
        let mut state = JointState::at_rest(scenario.initial_base, arm);
        state.normalize(plant.model.limits());
        let encoder = TaxelEncoder::new(plant.calibration.clone(), config.taxel_noise_std);
        let pose = forward_kinematics(&plant.model, &state);
        let local = ArmKinematics::new(&plant.model, &state.arm).ee_pose();
        let last = StepRecord {
            t: 0.0,
            state,
            ee_pose: pose.to_vector(),
            ee_desired: pose.to_vector(),
            taxel_forces: [0.0; TAXEL_COUNT],
            applied_forces: [0.0; TAXEL_COUNT],
            base_wrench: PlanarWrench::zeros(),
            ee_wrench: Wrench::zeros(),
            tau_base: Vector3::zeros(),
            tau_arm: ArmVector::zeros(),
            command_wrench: Wrench::zeros(),
        };
        Ok(Self {
            controller: scenario.controller,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            plant,
            gains,
            config,
            scenario,
            encoder,
            state,
            step_index: 0,
            desired_origin: pose,
            desired_local: local,
            pushes: Vec::new(),
            last,
        })
    }

    pub fn state(&self) -> &JointState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.config.dt
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn gains(&self) -> &ImpedanceGains {
        &self.gains
    }

    pub fn controller(&self) -> ControllerKind {
        self.controller
    }

    /// Most recent logged sample (the initial state before the first step).
    pub fn last_record(&self) -> &StepRecord {
        &self.last
    }

    /// Switches controller at the next step. References are re-anchored at
    /// the current end-effector pose so the switch is bumpless.
    pub fn set_controller(&mut self, kind: ControllerKind) {
        if kind != self.controller {
            self.controller = kind;
            self.anchor_references();
        }
    }

    pub fn set_gains(&mut self, gains: ImpedanceGains) -> Result<(), ControlError> {
        gains.validate()?;
        self.gains = gains;
        Ok(())
    }

    /// Adds an interactive force starting now and lasting `duration` s.
    pub fn apply_force(
        &mut self,
        target: ForceTarget,
        magnitude: f64,
        direction: Vector3<f64>,
        duration: f64,
    ) -> Result<(), SimError> {
        let t = self.time();
        let event = ForceEvent {
            t_start: t,
            t_end: t + duration.max(0.0),
            target,
            magnitude,
            direction,
            frame: ForceFrame::World,
        };
        let mut probe = Scenario::new("push", self.controller);
        probe.events.push(event);
        let cfg = SimConfig { duration: event.t_end.max(self.config.dt), ..self.config };
        probe.validate(&cfg, &self.plant.layout)?;
        self.pushes.push(event);
        Ok(())
    }

    fn anchor_references(&mut self) {
        let t = self.time();
        let pose = forward_kinematics(&self.plant.model, &self.state);
        self.desired_origin = Pose { position: pose.position - self.scenario.trajectory_offset(t), ..pose };
        self.desired_local = ArmKinematics::new(&self.plant.model, &self.state.arm).ee_pose();
    }

    fn desired_world(&self, t: f64) -> Pose {
        Pose {
            position: self.desired_origin.position + self.scenario.trajectory_offset(t),
            rotation: self.desired_origin.rotation,
        }
    }

    fn true_taxel_forces(&self, t: f64) -> [f64; TAXEL_COUNT] {
        let layout = &self.plant.layout;
        let mut forces = [0.0; TAXEL_COUNT];
        for e in self.scenario.events.iter().chain(self.pushes.iter()).filter(|e| e.active(t)) {
            if let ForceTarget::Taxel(k) = e.target {
                if let Some(slot) = layout.slot(k) {
                    forces[slot] += e.magnitude;
                }
            }
        }
        for c in contacts(&self.plant.model, &self.state, &self.scenario.obstacles, layout, t) {
            if let Some(slot) = layout.slot(c.taxel) {
                forces[slot] += c.force;
            }
        }
        forces
    }

    fn ee_force(&self, t: f64) -> Vector3<f64> {
        self.scenario
            .events
            .iter()
            .chain(self.pushes.iter())
            .filter(|e| e.active(t) && e.target == ForceTarget::EndEffector)
            .map(|e| e.world_force(self.state.base.z))
            .sum()
    }

    /// Advances one control period.
    pub fn step(&mut self) -> Result<StepRecord, SimError> {
        let dt = self.config.dt;
        let t = self.time();
        let model = &self.plant.model;
        let layout = &self.plant.layout;

        let truth = self.true_taxel_forces(t);
        let readings: Vec<TaxelReading> = layout
            .taxels()
            .iter()
            .enumerate()
            .map(|(slot, tx)| self.encoder.encode(tx.index, truth[slot], &mut self.rng))
            .collect();
        let mut taxel_forces = [0.0; TAXEL_COUNT];
        let mut applied_forces = [0.0; TAXEL_COUNT];
        for (slot, r) in readings.iter().enumerate().take(TAXEL_COUNT) {
            taxel_forces[slot] = r.force;
            applied_forces[slot] = truth[slot];
        }

        let f_world = self.ee_force(t);
        let ee_wrench = Wrench::new(f_world.x, f_world.y, f_world.z, 0.0, 0.0, 0.0);
        let r_wa = mount_rotation(model, self.state.base.z);
        let kin = ArmKinematics::new(model, &self.state.arm);
        let arm_jac = kin.ee_jacobian();
        let tau_arm_ext = arm_jac.transpose() * block_rotate(&r_wa.transpose(), &ee_wrench);
        let dyn_terms = arm_dynamics_from(model, &kin, &self.state.arm_vel);
        let ctl_err = |source| SimError::Control { t, source };

        let desired = self.desired_world(t);
        let desired_vel = self.scenario.trajectory_velocity(t);
        let desired_twist = Vector6::new(desired_vel.x, desired_vel.y, desired_vel.z, 0.0, 0.0, 0.0);
        let posture = nullspace_posture_torque(&self.gains, &self.state.arm, &self.state.arm_vel);

        let (tau_base, tau_arm, command, base_wrench, base_total);
        match (self.controller, self.scenario.base_mode) {
            (ControllerKind::Impedance, BaseMode::Admittance) => {
                let taxel_wrench = crate::taxels::base_external_wrench(&readings, layout)
                    .map_err(|e| ctl_err(ControlError::Taxel(e)))?;
                let ctx = WholeBodyContext::new(model, &self.state, &self.plant.base);
                let ops = ctx.operators(&self.gains).map_err(ctl_err)?;
                let damping = self.gains.damping_for(&ops.task_inertia);
                let f = cartesian_impedance_force(
                    &self.gains.stiffness,
                    &damping,
                    &desired,
                    &desired_twist,
                    &ctx.ee_pose,
                    &ctx.ee_twist,
                );
                let ext_world = base_wrench_to_world(&taxel_wrench, self.state.base.z);
                let out = wb_impedance_torques_with(&ops, &self.state, &self.gains, &f, &ext_world).map_err(ctl_err)?;
                tau_base = out.tau_base;
                tau_arm = out.tau_arm;
                command = f;
                base_wrench = taxel_wrench;
                // the measured base torque already reaches the base through
                // the null-space term of tau_v
                base_total = Some(out.tau_base);
            }
            (ControllerKind::FollowMe, mode) => {
                let total = follow_me_virtual_torque(&readings, layout, model, &self.state.arm, &tau_arm_ext)
                    .map_err(ctl_err)?;
                let ops = ArmTaskOperators::new(arm_jac, &dyn_terms.mass).map_err(ctl_err)?;
                let damping = self.gains.damping_for(&ops.task_inertia);
                let current = kin.ee_pose();
                let twist = arm_jac * self.state.arm_vel;
                let f = cartesian_impedance_force(
                    &self.gains.stiffness,
                    &damping,
                    &self.desired_local,
                    &Vector6::zeros(),
                    &current,
                    &twist,
                );
                tau_arm = ops.torques(&f, &posture);
                tau_base = Vector3::zeros();
                command = block_rotate(&r_wa, &f);
                base_wrench = total;
                base_total = match mode {
                    BaseMode::Admittance => Some(base_wrench_to_world(&total, self.state.base.z)),
                    BaseMode::Rigid => None,
                };
            }
            (ControllerKind::Impedance, BaseMode::Rigid) => {
                let taxel_wrench = crate::taxels::base_external_wrench(&readings, layout)
                    .map_err(|e| ctl_err(ControlError::Taxel(e)))?;
                let ops = ArmTaskOperators::new(arm_jac, &dyn_terms.mass).map_err(ctl_err)?;
                let rot = block_rotation(&r_wa);
                let damping = rot * self.gains.damping_for(&ops.task_inertia) * rot.transpose();
                let current = forward_kinematics(model, &self.state);
                let twist = crate::model::whole_body_jacobian_from(model, &self.state, &kin) * self.state.velocity();
                let f = cartesian_impedance_force(
                    &self.gains.stiffness,
                    &damping,
                    &desired,
                    &desired_twist,
                    &current,
                    &twist,
                );
                tau_arm = ops.torques(&block_rotate(&r_wa.transpose(), &f), &posture);
                tau_base = Vector3::zeros();
                command = f;
                base_wrench = taxel_wrench;
                base_total = None;
            }
        }

        // arm: M qdd = tau_c + g + C dq (compensation) + tau_ext - C dq - g
        let arm_acc = dyn_terms
            .mass
            .cholesky()
            .ok_or(ctl_err(ControlError::Singular("arm mass matrix")))?
            .solve(&(tau_arm + tau_arm_ext));
        let mut next = self.state;
        next.arm_vel += arm_acc * dt;
        next.arm += next.arm_vel * dt;

        next.base_vel = match base_total {
            Some(total) => base_admittance_step(&self.plant.base, &self.state.base_vel, &total, dt).map_err(ctl_err)?.0,
            None => Vector3::new(desired_vel.x, desired_vel.y, 0.0),
        };
        next.base += next.base_vel * dt;
        next.normalize(model.limits());

        let t_next = (self.step_index + 1) as f64 * dt;
        if !next.is_finite() || next.arm_vel.amax() > DIVERGENCE_SPEED || next.base_vel.amax() > DIVERGENCE_SPEED {
            return Err(SimError::Diverged { t: t_next });
        }
        self.state = next;
        self.step_index += 1;
        self.pushes.retain(|e| e.t_end > t_next);

        let pose = forward_kinematics(model, &self.state);
        let record = StepRecord {
            t: t_next,
            state: self.state,
            ee_pose: pose.to_vector(),
            ee_desired: self.desired_world(t_next).to_vector(),
            taxel_forces,
            applied_forces,
            base_wrench,
            ee_wrench,
            tau_base,
            tau_arm,
            command_wrench: command,
        };
        self.last = record;
        Ok(record)
    }

    /// End-effector position error in the world frame.
    pub fn tracking_error(&self) -> f64 {
        let pose = forward_kinematics(&self.plant.model, &self.state);
        pose_error(&self.desired_world(self.time()), &pose).fixed_rows::<3>(0).norm()
    }
}

/// Runs a scenario for `config.duration` and returns the full log.
pub fn run_scenario(
    config: &SimConfig,
    scenario: &Scenario,
    plant: &Plant,
    gains: &ImpedanceGains,
) -> Result<SimLog, SimError> {
    let mut sim = Simulator::new(plant.clone(), *gains, *config, scenario.clone())?;
    let steps = config.steps();
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        records.push(sim.step()?);
    }
    Ok(SimLog { dt: config.dt, records })
}
