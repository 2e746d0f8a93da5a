//! Kinematics and dynamics of the floating-base system.
//!
//! The base is an ideal planar joint `(x, y, yaw)` expressed in the world
//! frame. The arm is a serial chain of seven revolute joints described with
//! modified Denavit-Hartenberg parameters, mounted on the base at a fixed
//! pose `F_A`. The floating-base dynamics are block diagonal: a virtual
//! base inertia (see [`crate::control::BaseAdmittanceParams`]) and the arm
//! terms `M_A`, `C_A`, `g_A`.

use core::fmt;

use nalgebra::{Matrix3, Rotation3, SMatrix, Vector3, Vector6};

use crate::control::BaseAdmittanceParams;
use crate::math::{self, skew, ArmJacobian, ArmMatrix, ArmVector, Jacobian, WbMatrix};
use crate::ARM_DOF;

type LinkJacobian = SMatrix<f64, 3, 7>;

/// One arm link: the joint that drives it plus its rigid-body parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Modified DH link length `a_{i-1}` (m).
    pub a: f64,
    /// Modified DH link twist `alpha_{i-1}` (rad).
    pub alpha: f64,
    /// Modified DH joint offset `d_i` (m).
    pub d: f64,
    /// Constant added to the joint angle (rad).
    pub theta_offset: f64,
    pub mass: f64,
    /// Center of mass in the link frame (m).
    pub com: Vector3<f64>,
    /// Rotational inertia about the center of mass, link frame (kg m^2).
    pub inertia: Matrix3<f64>,
    /// Reflected rotor inertia added to the joint diagonal (kg m^2).
    pub armature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lower: ArmVector,
    pub upper: ArmVector,
    pub velocity: ArmVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    /// Extent along the base x-axis (m).
    pub length: f64,
    /// Extent along the base y-axis (m).
    pub width: f64,
}

impl Footprint {
    pub fn half_diagonal(&self) -> f64 {
        0.5 * libm::hypot(self.length, self.width)
    }
}

/// Pose of the arm base frame `F_A` in the base frame `F_B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

/// Tool transform from the last link frame to the end-effector frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolFrame {
    pub translation: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    NonPositiveMass { link: usize },
    InertiaNotSpd { link: usize },
    InvalidLimits { joint: usize },
    InvalidFootprint,
    NonFinite(&'static str),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NonPositiveMass { link } => write!(f, "link {} has non-positive mass", link + 1),
            ModelError::InertiaNotSpd { link } => {
                write!(f, "link {} inertia is not symmetric positive definite", link + 1)
            }
            ModelError::InvalidLimits { joint } => write!(f, "joint {} has inconsistent limits", joint + 1),
            ModelError::InvalidFootprint => f.write_str("base footprint must have positive length and width"),
            ModelError::NonFinite(what) => write!(f, "non-finite value in {what}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Kinematic and dynamic description of the base plus the 7-DoF arm.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    footprint: Footprint,
    mount: MountPose,
    links: [LinkParams; ARM_DOF],
    tool: ToolFrame,
    limits: JointLimits,
    gravity: f64,
}

impl RobotModel {
    pub fn new(
        footprint: Footprint,
        mount: MountPose,
        links: [LinkParams; ARM_DOF],
        tool: ToolFrame,
        limits: JointLimits,
        gravity: f64,
    ) -> Result<Self, ModelError> {
        if !(footprint.length > 0.0 && footprint.width > 0.0) {
            return Err(ModelError::InvalidFootprint);
        }
        for (i, link) in links.iter().enumerate() {
            if !(link.mass > 0.0) {
                return Err(ModelError::NonPositiveMass { link: i });
            }
            let inertia = link.inertia;
            let asym = (inertia - inertia.transpose()).abs().max();
            if !(asym <= 1e-12 * inertia.abs().max().max(1.0)) || inertia.cholesky().is_none() {
                return Err(ModelError::InertiaNotSpd { link: i });
            }
            if !(link.armature >= 0.0) {
                return Err(ModelError::NonFinite("armature"));
            }
            if ![link.a, link.alpha, link.d, link.theta_offset].iter().all(|v| v.is_finite())
                || !math::all_finite(&link.com)
            {
                return Err(ModelError::NonFinite("link parameters"));
            }
        }
        for j in 0..ARM_DOF {
            if !(limits.lower[j] < limits.upper[j]) || !(limits.velocity[j] > 0.0) {
                return Err(ModelError::InvalidLimits { joint: j });
            }
        }
        if !gravity.is_finite() {
            return Err(ModelError::NonFinite("gravity"));
        }
        Ok(Self { footprint, mount, links, tool, limits, gravity })
    }

    pub fn footprint(&self) -> Footprint {
        self.footprint
    }
    pub fn mount(&self) -> MountPose {
        self.mount
    }
    pub fn links(&self) -> &[LinkParams; ARM_DOF] {
        &self.links
    }
    pub fn tool(&self) -> ToolFrame {
        self.tool
    }
    pub fn limits(&self) -> &JointLimits {
        &self.limits
    }
    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// Copy of the model with a different gravity magnitude; `0.0` disables
    /// gravity.
    pub fn with_gravity(&self, gravity: f64) -> Self {
        Self { gravity, ..self.clone() }
    }

    pub fn with_mount(&self, mount: MountPose) -> Self {
        Self { mount, ..self.clone() }
    }

    /// Reference arm configuration of the default parameter set.
    pub fn home_configuration() -> ArmVector {
        let pi = math::PI;
        ArmVector::from([0.0, -pi / 4.0, 0.0, -3.0 * pi / 4.0, 0.0, pi / 2.0, pi / 4.0])
    }
}

impl Default for RobotModel {
    /// A 7-DoF parameter set approximating a collaborative torque-controlled
    /// arm on a 0.98 m x 0.80 m base. Geometry follows the publicly documented
    /// kinematics of that arm class; masses and inertias are rounded
    /// approximations, not identified values.
    fn default() -> Self {
        let pi = math::PI;
        let link =
            |a: f64, alpha: f64, d: f64, mass: f64, com: [f64; 3], inertia: [f64; 3], armature: f64| LinkParams {
                a,
                alpha,
                d,
                theta_offset: 0.0,
                mass,
                com: Vector3::from(com),
                inertia: Matrix3::from_diagonal(&Vector3::from(inertia)),
                armature,
            };
        let links = [
            link(0.0, 0.0, 0.333, 4.97, [0.0039, 0.0021, -0.0476], [0.025, 0.025, 0.009], 0.2),
            link(0.0, -pi / 2.0, 0.0, 0.65, [-0.0031, -0.0287, 0.0035], [0.008, 0.003, 0.008], 0.2),
            link(0.0, pi / 2.0, 0.316, 3.23, [0.0275, 0.0393, -0.0666], [0.037, 0.036, 0.010], 0.2),
            link(0.0825, pi / 2.0, 0.0, 3.59, [-0.0532, 0.1045, 0.0274], [0.025, 0.010, 0.028], 0.2),
            link(-0.0825, -pi / 2.0, 0.384, 1.23, [-0.0119, 0.0417, -0.1055], [0.035, 0.029, 0.008], 0.1),
            link(0.0, pi / 2.0, 0.0, 1.67, [0.0601, -0.0141, -0.0105], [0.002, 0.004, 0.005], 0.1),
            link(0.088, pi / 2.0, 0.0, 1.20, [0.0105, -0.0043, 0.0617], [0.010, 0.010, 0.005], 0.1),
        ];
        let tool = ToolFrame {
            translation: Vector3::new(0.0, 0.0, 0.2104),
            rotation: Rotation3::from_euler_angles(0.0, 0.0, -pi / 4.0),
        };
        let limits = JointLimits {
            lower: ArmVector::from([-2.8973, -1.7628, -2.8973, -3.0718, -2.8973, -0.0175, -2.8973]),
            upper: ArmVector::from([2.8973, 1.7628, 2.8973, -0.0698, 2.8973, 3.7525, 2.8973]),
            velocity: ArmVector::from([2.175, 2.175, 2.175, 2.175, 2.61, 2.61, 2.61]),
        };
        Self::new(
            Footprint { length: 0.98, width: 0.80 },
            MountPose { x: -0.25, y: 0.0, z: 0.60, yaw: 0.0 },
            links,
            tool,
            limits,
            9.81,
        )
        .expect("default robot parameters are valid")
    }
}

/// Whole-body joint positions and velocities.
///
/// `base` is `(x, y, yaw)` of `F_B` in the world frame and `base_vel` its
/// time derivative, both world-frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub base: Vector3<f64>,
    pub base_vel: Vector3<f64>,
    pub arm: ArmVector,
    pub arm_vel: ArmVector,
}

impl JointState {
    pub fn at_rest(base: Vector3<f64>, arm: ArmVector) -> Self {
        Self { base, base_vel: Vector3::zeros(), arm, arm_vel: ArmVector::zeros() }
    }

    /// Stacked whole-body velocity `(dq_B, dq_A)`.
    pub fn velocity(&self) -> crate::math::WbVector {
        let mut v = crate::math::WbVector::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.base_vel);
        v.fixed_rows_mut::<7>(3).copy_from(&self.arm_vel);
        v
    }

    /// Wraps yaw into `(-pi, pi]` and clamps arm joints to their limits,
    /// zeroing velocity components that push further into a limit.
    pub fn normalize(&mut self, limits: &JointLimits) {
        self.base.z = math::wrap_angle(self.base.z);
        for j in 0..ARM_DOF {
            let v_max = limits.velocity[j];
            self.arm_vel[j] = self.arm_vel[j].clamp(-v_max, v_max);
            if self.arm[j] < limits.lower[j] {
                self.arm[j] = limits.lower[j];
                self.arm_vel[j] = self.arm_vel[j].max(0.0);
            } else if self.arm[j] > limits.upper[j] {
                self.arm[j] = limits.upper[j];
                self.arm_vel[j] = self.arm_vel[j].min(0.0);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        math::all_finite(&self.base)
            && math::all_finite(&self.base_vel)
            && math::all_finite(&self.arm)
            && math::all_finite(&self.arm_vel)
    }
}

/// A rigid pose: position plus rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl Pose {
    /// 6-vector `(position, rotation vector)`.
    pub fn to_vector(&self) -> Vector6<f64> {
        let r = math::rotation_log(self.rotation.matrix());
        Vector6::new(self.position.x, self.position.y, self.position.z, r.x, r.y, r.z)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            position: Vector3::new(v[0], v[1], v[2]),
            rotation: Rotation3::from_scaled_axis(Vector3::new(v[3], v[4], v[5])),
        }
    }
}

/// `M_A`, `C_A` and `g_A` of the arm at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmDynamicsTerms {
    pub mass: ArmMatrix,
    pub coriolis: ArmMatrix,
    pub gravity: ArmVector,
}

/// Frames of the arm chain at one configuration, expressed in `F_A`.
#[derive(Debug, Clone)]
pub struct ArmKinematics {
    rot: [Matrix3<f64>; ARM_DOF],
    origin: [Vector3<f64>; ARM_DOF],
    com: [Vector3<f64>; ARM_DOF],
    ee_rot: Matrix3<f64>,
    ee_pos: Vector3<f64>,
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(a), libm::cos(a));
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(a), libm::cos(a));
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

impl ArmKinematics {
    pub fn new(model: &RobotModel, q: &ArmVector) -> Self {
        let mut rot = [Matrix3::identity(); ARM_DOF];
        let mut origin = [Vector3::zeros(); ARM_DOF];
        let mut com = [Vector3::zeros(); ARM_DOF];
        let mut r = Matrix3::identity();
        let mut p = Vector3::zeros();
        for (i, link) in model.links.iter().enumerate() {
            // RotX(alpha) TransX(a) RotZ(theta) TransZ(d)
            let rx = rot_x(link.alpha);
            p += r * Vector3::new(link.a, 0.0, 0.0);
            r *= rx;
            r *= rot_z(q[i] + link.theta_offset);
            p += r * Vector3::new(0.0, 0.0, link.d);
            rot[i] = r;
            origin[i] = p;
            com[i] = p + r * link.com;
        }
        let ee_pos = p + r * model.tool.translation;
        let ee_rot = r * model.tool.rotation.matrix();
        Self { rot, origin, com, ee_rot, ee_pos }
    }

    /// Joint axis `z_j` in `F_A`.
    pub fn axis(&self, j: usize) -> Vector3<f64> {
        self.rot[j].column(2).into_owned()
    }

    pub fn origin(&self, j: usize) -> Vector3<f64> {
        self.origin[j]
    }

    pub fn ee_pose(&self) -> Pose {
        Pose { position: self.ee_pos, rotation: Rotation3::from_matrix_unchecked(self.ee_rot) }
    }

    /// Geometric Jacobian of the end-effector point, `F_A` coordinates.
    pub fn ee_jacobian(&self) -> ArmJacobian {
        let mut jac = ArmJacobian::zeros();
        for j in 0..ARM_DOF {
            let z = self.axis(j);
            let lin = z.cross(&(self.ee_pos - self.origin[j]));
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, j).copy_from(&z);
        }
        jac
    }

    fn link_jacobians(&self, i: usize) -> (LinkJacobian, LinkJacobian) {
        let mut jv = LinkJacobian::zeros();
        let mut jw = LinkJacobian::zeros();
        for j in 0..=i {
            let z = self.axis(j);
            jv.set_column(j, &z.cross(&(self.com[i] - self.origin[j])));
            jw.set_column(j, &z);
        }
        (jv, jw)
    }

    fn world_inertia(&self, model: &RobotModel, i: usize) -> Matrix3<f64> {
        self.rot[i] * model.links[i].inertia * self.rot[i].transpose()
    }

    pub fn mass_matrix(&self, model: &RobotModel) -> ArmMatrix {
        let mut m = ArmMatrix::zeros();
        for i in 0..ARM_DOF {
            let (jv, jw) = self.link_jacobians(i);
            let inertia = self.world_inertia(model, i);
            m += jv.transpose() * jv * model.links[i].mass + jw.transpose() * inertia * jw;
        }
        for j in 0..ARM_DOF {
            m[(j, j)] += model.links[j].armature;
        }
        (m + m.transpose()) * 0.5
    }

    /// Analytic partial derivatives `dM_A/dq_k`, `k = 0..7`.
    pub fn mass_matrix_partials(&self, model: &RobotModel) -> [ArmMatrix; ARM_DOF] {
        let mut out = [ArmMatrix::zeros(); ARM_DOF];
        for i in 0..ARM_DOF {
            let (jv, jw) = self.link_jacobians(i);
            let inertia = self.world_inertia(model, i);
            let mass = model.links[i].mass;
            for (k, dm) in out.iter_mut().enumerate().take(i + 1) {
                let zk = self.axis(k);
                let ck = self.com[i] - self.origin[k];
                let mut djv = LinkJacobian::zeros();
                let mut djw = LinkJacobian::zeros();
                for j in 0..=i {
                    let zj = self.axis(j);
                    let r = self.com[i] - self.origin[j];
                    let (dz, dr) = if k < j {
                        let dz = zk.cross(&zj);
                        let dr = zk.cross(&ck) - zk.cross(&(self.origin[j] - self.origin[k]));
                        (dz, dr)
                    } else {
                        (Vector3::zeros(), zk.cross(&ck))
                    };
                    djv.set_column(j, &(dz.cross(&r) + zj.cross(&dr)));
                    djw.set_column(j, &dz);
                }
                let sk = skew(&zk);
                let dinertia = sk * inertia - inertia * sk;
                let lin = djv.transpose() * jv;
                let ang = djw.transpose() * inertia * jw;
                *dm += (lin + lin.transpose()) * mass + ang + ang.transpose() + jw.transpose() * dinertia * jw;
            }
        }
        out
    }

    pub fn gravity_vector(&self, model: &RobotModel) -> ArmVector {
        let g = Vector3::new(0.0, 0.0, model.gravity);
        let mut tau = ArmVector::zeros();
        for i in 0..ARM_DOF {
            let (jv, _) = self.link_jacobians(i);
            tau += jv.transpose() * g * model.links[i].mass;
        }
        tau
    }

    /// Gravitational potential energy `sum m_i g z_i` (zero at the mount).
    pub fn potential_energy(&self, model: &RobotModel) -> f64 {
        (0..ARM_DOF).map(|i| model.links[i].mass * model.gravity * self.com[i].z).sum()
    }
}

/// Coriolis matrix from Christoffel symbols of the first kind.
pub fn coriolis_from_partials(partials: &[ArmMatrix; ARM_DOF], dq: &ArmVector) -> ArmMatrix {
    let mut c = ArmMatrix::zeros();
    for i in 0..ARM_DOF {
        for j in 0..ARM_DOF {
            let mut acc = 0.0;
            for k in 0..ARM_DOF {
                let gamma = partials[k][(i, j)] + partials[j][(i, k)] - partials[i][(j, k)];
                acc += 0.5 * gamma * dq[k];
            }
            c[(i, j)] = acc;
        }
    }
    c
}

/// Rotation of `F_A` in the world frame for a given base yaw.
pub fn mount_rotation(model: &RobotModel, yaw: f64) -> Matrix3<f64> {
    rot_z(yaw + model.mount.yaw)
}

/// Origin of `F_A` in the world frame.
pub fn mount_position(model: &RobotModel, base: &Vector3<f64>) -> Vector3<f64> {
    let m = model.mount;
    let r = rot_z(base.z);
    Vector3::new(base.x, base.y, 0.0) + r * Vector3::new(m.x, m.y, m.z)
}

/// End-effector pose of the arm alone, in `F_A`.
pub fn arm_forward_kinematics(model: &RobotModel, q: &ArmVector) -> Pose {
    ArmKinematics::new(model, q).ee_pose()
}

/// End-effector pose in the world frame.
pub fn forward_kinematics(model: &RobotModel, state: &JointState) -> Pose {
    let local = arm_forward_kinematics(model, &state.arm);
    let r = mount_rotation(model, state.base.z);
    Pose {
        position: mount_position(model, &state.base) + r * local.position,
        rotation: Rotation3::from_matrix_unchecked(r * local.rotation.matrix()),
    }
}

/// Geometric end-effector Jacobian of the arm in `F_A`.
pub fn arm_jacobian(model: &RobotModel, q: &ArmVector) -> ArmJacobian {
    ArmKinematics::new(model, q).ee_jacobian()
}

/// Whole-body geometric Jacobian in the world frame. Columns are
/// `(x, y, yaw, q_1..q_7)`; rows are linear then angular velocity of the
/// end-effector.
pub fn whole_body_jacobian(model: &RobotModel, state: &JointState) -> Jacobian {
    let kin = ArmKinematics::new(model, &state.arm);
    whole_body_jacobian_from(model, state, &kin)
}

pub(crate) fn whole_body_jacobian_from(model: &RobotModel, state: &JointState, kin: &ArmKinematics) -> Jacobian {
    let r = mount_rotation(model, state.base.z);
    let p_mount = mount_position(model, &state.base);
    let p_ee = p_mount + r * kin.ee_pos;
    let mut jac = Jacobian::zeros();
    jac[(0, 0)] = 1.0;
    jac[(1, 1)] = 1.0;
    // yaw: z x (p_ee - p_base)
    jac[(0, 2)] = -(p_ee.y - state.base.y);
    jac[(1, 2)] = p_ee.x - state.base.x;
    jac[(5, 2)] = 1.0;
    let local = kin.ee_jacobian();
    for j in 0..ARM_DOF {
        let lin = r * local.fixed_view::<3, 1>(0, j);
        let ang = r * local.fixed_view::<3, 1>(3, j);
        jac.fixed_view_mut::<3, 1>(0, 3 + j).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, 3 + j).copy_from(&ang);
    }
    jac
}

/// `M_A`, `C_A` (Christoffel factorization) and `g_A`.
pub fn arm_dynamics(model: &RobotModel, q: &ArmVector, dq: &ArmVector) -> ArmDynamicsTerms {
    let kin = ArmKinematics::new(model, q);
    arm_dynamics_from(model, &kin, dq)
}

pub(crate) fn arm_dynamics_from(model: &RobotModel, kin: &ArmKinematics, dq: &ArmVector) -> ArmDynamicsTerms {
    let partials = kin.mass_matrix_partials(model);
    ArmDynamicsTerms {
        mass: kin.mass_matrix(model),
        coriolis: coriolis_from_partials(&partials, dq),
        gravity: kin.gravity_vector(model),
    }
}

/// Block-diagonal whole-body inertia `diag(M_v, M_A(q_A))`.
pub fn whole_body_mass(model: &RobotModel, q: &ArmVector, params: &BaseAdmittanceParams) -> WbMatrix {
    let arm = ArmKinematics::new(model, q).mass_matrix(model);
    assemble_whole_body_mass(&arm, params)
}

pub(crate) fn assemble_whole_body_mass(arm: &ArmMatrix, params: &BaseAdmittanceParams) -> WbMatrix {
    let mut m = WbMatrix::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&params.mass_matrix());
    m.fixed_view_mut::<7, 7>(3, 3).copy_from(arm);
    m
}
