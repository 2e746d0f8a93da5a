//! Base admittance, the weighted whole-body Cartesian impedance law and the
//! follow-me admittance controller.
//!
//! Whole-body quantities use the world-frame base coordinates of
//! [`crate::model::JointState`]. Follow-me arm quantities live in the arm
//! base frame `F_A`.

use core::fmt;

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3, Vector6};

use crate::math::{
    self, guarded_spd_inverse, rot2, spd_sqrt, ArmJacobian, ArmMatrix, ArmVector, Jacobian, PlanarWrench, WbMatrix,
    WbVector, Wrench, SINGULAR_DAMPING,
};
use crate::model::{
    arm_dynamics_from, assemble_whole_body_mass, whole_body_jacobian_from, ArmDynamicsTerms, ArmKinematics, JointState,
    MountPose, Pose, RobotModel,
};
use crate::taxels::{base_external_wrench, TaxelError, TaxelLayout, TaxelReading};

#[derive(Debug, Clone, PartialEq)]
pub enum ControlError {
    NonFinite(&'static str),
    Singular(&'static str),
    InvalidGains(&'static str),
    Taxel(TaxelError),
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlError::NonFinite(what) => write!(f, "non-finite {what}"),
            ControlError::Singular(what) => write!(f, "singular {what}"),
            ControlError::InvalidGains(what) => write!(f, "invalid gains: {what}"),
            ControlError::Taxel(e) => write!(f, "taxel error: {e}"),
        }
    }
}

impl core::error::Error for ControlError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            ControlError::Taxel(e) => Some(e),
            _ => None,
        }
    }
}

impl From<TaxelError> for ControlError {
    fn from(e: TaxelError) -> Self {
        ControlError::Taxel(e)
    }
}

/// Diagonal virtual mass and damping of the velocity-controlled base, per
/// axis `(x, y, yaw)`. The x and y entries are kept equal by the defaults so
/// the law reads the same in world and base coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseAdmittanceParams {
    pub mass: Vector3<f64>,
    pub damping: Vector3<f64>,
}

impl Default for BaseAdmittanceParams {
    fn default() -> Self {
        Self { mass: Vector3::new(40.0, 40.0, 8.0), damping: Vector3::new(60.0, 60.0, 12.0) }
    }
}

impl BaseAdmittanceParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.mass.iter().chain(self.damping.iter()).all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(ControlError::InvalidGains("virtual mass and damping must be positive"))
        }
    }

    pub fn mass_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.mass)
    }

    pub fn damping_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.damping)
    }
}

/// One step of `M_v ddq_B + D_v dq_B = tau`. Returns the next base velocity
/// command and the acceleration used to reach it.
pub fn base_admittance_step(
    params: &BaseAdmittanceParams,
    dq_base: &Vector3<f64>,
    tau_total: &Vector3<f64>,
    dt: f64,
) -> Result<(Vector3<f64>, Vector3<f64>), ControlError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ControlError::NonFinite("time step"));
    }
    if !math::all_finite(dq_base) || !math::all_finite(tau_total) {
        return Err(ControlError::NonFinite("base admittance input"));
    }
    let acc = (tau_total - params.damping.component_mul(dq_base)).component_div(&params.mass);
    Ok((dq_base + acc * dt, acc))
}

/// How the Cartesian damping matrix is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CartesianDamping {
    Fixed(Matrix6<f64>),
    /// `ratio * (sqrt(Lambda) sqrt(K) + sqrt(K) sqrt(Lambda))`, recomputed
    /// from the task inertia at every control step. `ratio = 1` is critical.
    Critical {
        ratio: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceGains {
    pub stiffness: Matrix6<f64>,
    pub damping: CartesianDamping,
    pub nullspace_stiffness: ArmMatrix,
    pub nullspace_damping: ArmMatrix,
    pub eta_arm: f64,
    pub eta_base: f64,
    pub q_ref: ArmVector,
}

impl Default for ImpedanceGains {
    fn default() -> Self {
        let k = Vector6::new(500.0, 500.0, 500.0, 50.0, 50.0, 50.0);
        Self {
            stiffness: Matrix6::from_diagonal(&k),
            damping: CartesianDamping::Critical { ratio: 1.0 },
            nullspace_stiffness: ArmMatrix::identity() * 30.0,
            nullspace_damping: ArmMatrix::identity() * 5.0,
            eta_arm: 1.0,
            eta_base: 1.0,
            q_ref: RobotModel::home_configuration(),
        }
    }
}

impl ImpedanceGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let sym = |m: &Matrix6<f64>| (m - m.transpose()).abs().max() <= 1e-9 * m.abs().max().max(1.0);
        let psd = |m: &Matrix6<f64>| nalgebra::SymmetricEigen::new(*m).eigenvalues.iter().all(|v| *v >= -1e-9);
        if !sym(&self.stiffness) || !psd(&self.stiffness) {
            return Err(ControlError::InvalidGains("Cartesian stiffness must be symmetric positive semidefinite"));
        }
        match self.damping {
            CartesianDamping::Fixed(d) if !sym(&d) || !psd(&d) => {
                return Err(ControlError::InvalidGains("Cartesian damping must be symmetric positive semidefinite"))
            }
            CartesianDamping::Critical { ratio } if !(ratio >= 0.0 && ratio.is_finite()) => {
                return Err(ControlError::InvalidGains("damping ratio must be non-negative"))
            }
            _ => {}
        }
        let pd = |m: &ArmMatrix| ((m + m.transpose()) * 0.5).cholesky().is_some();
        if !pd(&self.nullspace_stiffness) || !pd(&self.nullspace_damping) {
            return Err(ControlError::InvalidGains("null-space stiffness and damping must be positive definite"));
        }
        if !(self.eta_arm > 0.0 && self.eta_base > 0.0) {
            return Err(ControlError::InvalidGains("loco-manipulation gains must be positive"));
        }
        if !math::all_finite(&self.q_ref) {
            return Err(ControlError::InvalidGains("q_ref must be finite"));
        }
        Ok(())
    }

    /// Damping matrix for a given task inertia.
    pub fn damping_for(&self, task_inertia: &Matrix6<f64>) -> Matrix6<f64> {
        match self.damping {
            CartesianDamping::Fixed(d) => d,
            CartesianDamping::Critical { ratio } => critical_damping(task_inertia, &self.stiffness, ratio),
        }
    }
}

/// Factorized damping `ratio * (A K1 + K1 A)` with `A = sqrt(Lambda)` and
/// `K1 = sqrt(K)`; the scalar case reduces to `2 ratio sqrt(m k)`.
pub fn critical_damping(task_inertia: &Matrix6<f64>, stiffness: &Matrix6<f64>, ratio: f64) -> Matrix6<f64> {
    let a = spd_sqrt(task_inertia);
    let k1 = spd_sqrt(stiffness);
    (a * k1 + k1 * a) * ratio
}

/// Torques produced by a controller at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Virtual base torques `tau_v` (world-frame base coordinates).
    pub tau_base: Vector3<f64>,
    /// Arm torques, excluding gravity and Coriolis compensation.
    pub tau_arm: ArmVector,
    /// Commanded Cartesian wrench.
    pub wrench: Wrench,
}

impl ControlOutput {
    pub fn stacked(&self) -> WbVector {
        let mut v = WbVector::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.tau_base);
        v.fixed_rows_mut::<7>(3).copy_from(&self.tau_arm);
        v
    }

    pub fn is_finite(&self) -> bool {
        math::all_finite(&self.tau_base) && math::all_finite(&self.tau_arm) && math::all_finite(&self.wrench)
    }
}

/// Pose error `x_d - x`: position difference and the rotation vector of
/// `R_d R^T`, both in the frame the poses are expressed in.
pub fn pose_error(desired: &Pose, current: &Pose) -> Vector6<f64> {
    let dp = desired.position - current.position;
    let dr = math::rotation_log(&(desired.rotation.matrix() * current.rotation.matrix().transpose()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// `F = D_d (dx_d - dx) + K_d (x_d - x)`.
pub fn cartesian_impedance_force(
    stiffness: &Matrix6<f64>,
    damping: &Matrix6<f64>,
    desired: &Pose,
    desired_twist: &Vector6<f64>,
    current: &Pose,
    twist: &Vector6<f64>,
) -> Wrench {
    damping * (desired_twist - twist) + stiffness * pose_error(desired, current)
}

/// `H = diag(eta_B I_3, eta_A I_7)` and `W = H^T M^-1 H`.
pub fn weighting_matrices(eta_arm: f64, eta_base: f64, mass: &WbMatrix) -> Result<(WbMatrix, WbMatrix), ControlError> {
    let mut h = WbMatrix::zeros();
    for i in 0..10 {
        h[(i, i)] = if i < 3 { eta_base } else { eta_arm };
    }
    let m_inv = mass.cholesky().ok_or(ControlError::Singular("whole-body mass matrix"))?.inverse();
    let w = h.transpose() * m_inv * h;
    if !math::all_finite(&w) {
        return Err(ControlError::NonFinite("weighting matrix"));
    }
    Ok((h, (w + w.transpose()) * 0.5))
}

/// Operators of the weighted impedance law at one configuration.
#[derive(Debug, Clone, Copy)]
pub struct WeightedTaskOperators {
    /// `Lambda = (J M^-1 J^T)^-1`.
    pub task_inertia: Matrix6<f64>,
    /// `Lambda^-1` consistent with `task_inertia` (includes damping if used).
    pub task_inertia_inv: Matrix6<f64>,
    /// `Lambda_W = (J M^-1 W^-1 M^-1 J^T)^-1`.
    pub weighted_inertia: Matrix6<f64>,
    /// `W^-1 M^-1 J^T`.
    pub weighted_map: nalgebra::SMatrix<f64, 10, 6>,
    /// `J M^-1`.
    pub jm_inv: Jacobian,
    pub damped: bool,
}

impl WeightedTaskOperators {
    pub fn new(mass: &WbMatrix, jacobian: &Jacobian, weight: &WbMatrix) -> Result<Self, ControlError> {
        let m_inv = mass.cholesky().ok_or(ControlError::Singular("whole-body mass matrix"))?.inverse();
        let w_inv = weight.cholesky().ok_or(ControlError::Singular("weighting matrix"))?.inverse();
        let jm_inv = jacobian * m_inv;
        let a = jm_inv * jacobian.transpose();
        let lam = guarded_spd_inverse(&a).ok_or(ControlError::Singular("task inertia"))?;
        let weighted_map = w_inv * m_inv * jacobian.transpose();
        let b = jm_inv * weighted_map;
        let lam_w = guarded_spd_inverse(&b).ok_or(ControlError::Singular("weighted task inertia"))?;
        let task_inertia_inv =
            if lam.damped { a + Matrix6::identity() * (SINGULAR_DAMPING * SINGULAR_DAMPING) } else { a };
        Ok(Self {
            task_inertia: lam.inverse,
            task_inertia_inv,
            weighted_inertia: lam_w.inverse,
            weighted_map,
            jm_inv,
            damped: lam.damped || lam_w.damped,
        })
    }

    /// `I - W^-1 M^-1 J^T Lambda_W J M^-1`.
    pub fn nullspace_projector(&self) -> WbMatrix {
        WbMatrix::identity() - self.weighted_map * self.weighted_inertia * self.jm_inv
    }

    /// The impedance law: task term plus projected null-space torque.
    pub fn torques(&self, wrench: &Wrench, tau0: &WbVector) -> WbVector {
        let task = self.weighted_map * (self.weighted_inertia * (self.task_inertia_inv * wrench));
        task + self.nullspace_projector() * tau0
    }

    /// Cartesian force realized by `tau`: `Lambda J M^-1 tau`.
    pub fn realized_wrench(&self, tau: &WbVector) -> Wrench {
        self.task_inertia * (self.jm_inv * tau)
    }
}

/// Posture torque `-D_0 dq_A + K_0 (q_ref - q_A)`.
pub fn nullspace_posture_torque(gains: &ImpedanceGains, q: &ArmVector, dq: &ArmVector) -> ArmVector {
    -gains.nullspace_damping * dq + gains.nullspace_stiffness * (gains.q_ref - q)
}

/// Everything the whole-body controllers need at one state, computed once.
#[derive(Debug, Clone)]
pub struct WholeBodyContext {
    pub kinematics: ArmKinematics,
    pub arm: ArmDynamicsTerms,
    pub mass: WbMatrix,
    pub jacobian: Jacobian,
    /// World-frame end-effector pose.
    pub ee_pose: Pose,
    /// World-frame end-effector twist `J dq`.
    pub ee_twist: Vector6<f64>,
}

impl WholeBodyContext {
    pub fn new(model: &RobotModel, state: &JointState, base: &BaseAdmittanceParams) -> Self {
        let kinematics = ArmKinematics::new(model, &state.arm);
        let arm = arm_dynamics_from(model, &kinematics, &state.arm_vel);
        let mass = assemble_whole_body_mass(&arm.mass, base);
        let jacobian = whole_body_jacobian_from(model, state, &kinematics);
        let ee_pose = crate::model::forward_kinematics(model, state);
        let ee_twist = jacobian * state.velocity();
        Self { kinematics, arm, mass, jacobian, ee_pose, ee_twist }
    }

    pub fn operators(&self, gains: &ImpedanceGains) -> Result<WeightedTaskOperators, ControlError> {
        let (_, w) = weighting_matrices(gains.eta_arm, gains.eta_base, &self.mass)?;
        WeightedTaskOperators::new(&self.mass, &self.jacobian, &w)
    }
}

fn finite_output(out: ControlOutput) -> Result<ControlOutput, ControlError> {
    if out.is_finite() {
        Ok(out)
    } else {
        Err(ControlError::NonFinite("controller output"))
    }
}

/// Weighted whole-body impedance torques for a given Cartesian wrench and
/// sensed virtual base external torques `tau_v_ext` (world frame).
pub fn wb_impedance_torques(
    model: &RobotModel,
    state: &JointState,
    gains: &ImpedanceGains,
    base: &BaseAdmittanceParams,
    wrench: &Wrench,
    tau_v_ext: &PlanarWrench,
) -> Result<ControlOutput, ControlError> {
    let ctx = WholeBodyContext::new(model, state, base);
    let ops = ctx.operators(gains)?;
    wb_impedance_torques_with(&ops, state, gains, wrench, tau_v_ext)
}

pub fn wb_impedance_torques_with(
    ops: &WeightedTaskOperators,
    state: &JointState,
    gains: &ImpedanceGains,
    wrench: &Wrench,
    tau_v_ext: &PlanarWrench,
) -> Result<ControlOutput, ControlError> {
    let mut tau0 = WbVector::zeros();
    tau0.fixed_rows_mut::<3>(0).copy_from(tau_v_ext);
    tau0.fixed_rows_mut::<7>(3).copy_from(&nullspace_posture_torque(gains, &state.arm, &state.arm_vel));
    let tau = ops.torques(wrench, &tau0);
    finite_output(ControlOutput {
        tau_base: tau.fixed_rows::<3>(0).into_owned(),
        tau_arm: tau.fixed_rows::<7>(3).into_owned(),
        wrench: *wrench,
    })
}

/// Arm-only task operators in `F_A`.
#[derive(Debug, Clone, Copy)]
pub struct ArmTaskOperators {
    pub jacobian: ArmJacobian,
    pub mass_inv: ArmMatrix,
    /// `Lambda_A = (J_A M_A^-1 J_A^T)^-1`.
    pub task_inertia: Matrix6<f64>,
    pub damped: bool,
}

impl ArmTaskOperators {
    pub fn new(jacobian: ArmJacobian, mass: &ArmMatrix) -> Result<Self, ControlError> {
        let mass_inv = mass.cholesky().ok_or(ControlError::Singular("arm mass matrix"))?.inverse();
        let a = jacobian * mass_inv * jacobian.transpose();
        let lam = guarded_spd_inverse(&a).ok_or(ControlError::Singular("arm task inertia"))?;
        Ok(Self { jacobian, mass_inv, task_inertia: lam.inverse, damped: lam.damped })
    }

    pub fn from_model(model: &RobotModel, q: &ArmVector) -> Result<Self, ControlError> {
        let kin = ArmKinematics::new(model, q);
        Self::new(kin.ee_jacobian(), &kin.mass_matrix(model))
    }

    /// `I - J_A^T Lambda_A J_A M_A^-1`.
    pub fn nullspace_projector(&self) -> ArmMatrix {
        ArmMatrix::identity() - self.jacobian.transpose() * self.task_inertia * self.jacobian * self.mass_inv
    }

    /// Two-level priority law `J_A^T F + N tau_0`.
    pub fn torques(&self, wrench: &Wrench, tau0: &ArmVector) -> ArmVector {
        self.jacobian.transpose() * wrench + self.nullspace_projector() * tau0
    }

    /// External end-effector wrench consistent with external joint torques:
    /// `Lambda_A J_A M_A^-1 tau_ext` (force, moment about the end-effector).
    pub fn estimate_wrench(&self, tau_ext: &ArmVector) -> Wrench {
        self.task_inertia * (self.jacobian * (self.mass_inv * tau_ext))
    }
}

/// Follow-me arm torques `J_A^T F + (I - J_A^T Lambda_A J_A M_A^-1) tau_0`.
pub fn follow_me_torques(
    model: &RobotModel,
    q: &ArmVector,
    wrench: &Wrench,
    tau0: &ArmVector,
) -> Result<ArmVector, ControlError> {
    let ops = ArmTaskOperators::from_model(model, q)?;
    let tau = ops.torques(wrench, tau0);
    if math::all_finite(&tau) {
        Ok(tau)
    } else {
        Err(ControlError::NonFinite("follow-me torques"))
    }
}

/// `^B T_A`: maps a planar wrench `(F_x, F_y, M_z)` about the arm base
/// origin in `F_A` to the same wrench about the base origin in `F_B`.
pub fn arm_to_base_wrench_transform(mount: &MountPose) -> Matrix3<f64> {
    let r = rot2(mount.yaw);
    let moment_row = nalgebra::RowVector2::new(-mount.y, mount.x) * r;
    Matrix3::new(r[(0, 0)], r[(0, 1)], 0.0, r[(1, 0)], r[(1, 1)], 0.0, moment_row[0], moment_row[1], 1.0)
}

/// Planar part of an end-effector wrench (force, moment about the
/// end-effector point `ee_position`, all in `F_A`) taken about the `F_A`
/// origin.
pub fn planar_wrench_about_arm_base(wrench: &Wrench, ee_position: &Vector3<f64>) -> PlanarWrench {
    let force = Vector3::new(wrench[0], wrench[1], wrench[2]);
    let moment = Vector3::new(wrench[3], wrench[4], wrench[5]) + ee_position.cross(&force);
    PlanarWrench::new(force.x, force.y, moment.z)
}

/// Virtual base external torques of the follow-me controller: the taxel
/// wrench plus the end-effector wrench reconstructed from external arm
/// torques and carried into `F_B`. Result in `F_B`.
pub fn follow_me_virtual_torque(
    readings: &[TaxelReading],
    layout: &TaxelLayout,
    model: &RobotModel,
    q: &ArmVector,
    tau_arm_ext: &ArmVector,
) -> Result<PlanarWrench, ControlError> {
    let taxel = base_external_wrench(readings, layout)?;
    if !math::all_finite(tau_arm_ext) {
        return Err(ControlError::NonFinite("external arm torques"));
    }
    if tau_arm_ext.iter().all(|v| *v == 0.0) {
        return Ok(taxel);
    }
    let kin = ArmKinematics::new(model, q);
    let ops = ArmTaskOperators::new(kin.ee_jacobian(), &kin.mass_matrix(model))?;
    let estimate = ops.estimate_wrench(tau_arm_ext);
    let planar = planar_wrench_about_arm_base(&estimate, &kin.ee_pose().position);
    let total = taxel + arm_to_base_wrench_transform(&model.mount()) * planar;
    if math::all_finite(&total) {
        Ok(total)
    } else {
        Err(ControlError::NonFinite("end-effector wrench estimate"))
    }
}

/// Rotates a planar wrench from `F_B` into world-frame base coordinates.
pub fn base_wrench_to_world(wrench: &PlanarWrench, yaw: f64) -> PlanarWrench {
    let f = rot2(yaw) * Vector2::new(wrench.x, wrench.y);
    PlanarWrench::new(f.x, f.y, wrench.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn admittance_decays_at_rate_d_over_m() {
        let p = BaseAdmittanceParams::default();
        let dt = 1e-3;
        let mut v = Vector3::new(0.5, -0.2, 0.3);
        let v0 = v;
        for _ in 0..1000 {
            v = base_admittance_step(&p, &v, &Vector3::zeros(), dt).unwrap().0;
        }
        for i in 0..3 {
            let rate = p.damping[i] / p.mass[i];
            let expected = v0[i] * (1.0 - rate * dt).powi(1000);
            assert!((v[i] - expected).abs() < 1e-12);
            assert!((v[i] - v0[i] * (-rate).exp()).abs() < 2e-3 * v0[i].abs());
        }
    }

    #[test]
    fn admittance_steady_state() {
        let p = BaseAdmittanceParams { mass: Vector3::new(40.0, 40.0, 8.0), damping: Vector3::new(50.0, 50.0, 50.0) };
        let mut v = Vector3::zeros();
        for _ in 0..20_000 {
            v = base_admittance_step(&p, &v, &Vector3::new(10.0, 0.0, 0.0), 1e-3).unwrap().0;
        }
        assert!((v.x - 0.2).abs() < 1e-9);
        assert_eq!(v.y, 0.0);
        let (v, a) = base_admittance_step(&p, &Vector3::zeros(), &Vector3::zeros(), 1e-3).unwrap();
        assert_eq!((v, a), (Vector3::zeros(), Vector3::zeros()));
    }

    #[test]
    fn admittance_rejects_non_finite() {
        let p = BaseAdmittanceParams::default();
        let bad = Vector3::new(f64::NAN, 0.0, 0.0);
        assert!(base_admittance_step(&p, &bad, &Vector3::zeros(), 1e-3).is_err());
        assert!(base_admittance_step(&p, &Vector3::zeros(), &bad, 1e-3).is_err());
        assert!(base_admittance_step(&p, &Vector3::zeros(), &Vector3::zeros(), 0.0).is_err());
    }

    fn pose(p: [f64; 3], r: [f64; 3]) -> Pose {
        Pose { position: Vector3::from(p), rotation: Rotation3::from_scaled_axis(Vector3::from(r)) }
    }

    #[test]
    fn impedance_zero_at_target() {
        let g = ImpedanceGains::default();
        let x = pose([0.4, 0.1, 0.9], [0.1, 3.0, -0.2]);
        let t = Vector6::new(0.1, 0.0, 0.2, 0.0, 0.3, 0.0);
        let d = Matrix6::identity() * 20.0;
        let f = cartesian_impedance_force(&g.stiffness, &d, &x, &t, &x, &t);
        assert!(f.norm() < 1e-12);
    }

    #[test]
    fn impedance_linear_position_error() {
        let k = Matrix6::from_diagonal(&Vector6::new(500.0, 500.0, 500.0, 50.0, 50.0, 50.0));
        let d = Matrix6::zeros();
        let xd = pose([0.6, 0.0, 0.8], [0.0, 0.0, 0.0]);
        let x = pose([0.5, 0.0, 0.8], [0.0, 0.0, 0.0]);
        let f = cartesian_impedance_force(&k, &d, &xd, &Vector6::zeros(), &x, &Vector6::zeros());
        assert!((f[0] - 50.0).abs() < 1e-9);
        assert!(f.rows(1, 5).norm() < 1e-9);
    }

    #[test]
    fn impedance_combined_case_matches_direct_evaluation() {
        let k = Matrix6::from_diagonal(&Vector6::new(400.0, 300.0, 200.0, 30.0, 20.0, 10.0));
        let d = Matrix6::from_diagonal(&Vector6::new(40.0, 30.0, 20.0, 3.0, 2.0, 1.0));
        let xd = pose([0.6, 0.1, 0.8], [0.0, 0.0, 0.2]);
        let x = pose([0.5, 0.0, 0.75], [0.0, 0.0, 0.05]);
        let td = Vector6::new(0.2, 0.0, 0.0, 0.0, 0.0, 0.1);
        let t = Vector6::new(0.0, 0.1, 0.0, 0.0, 0.0, 0.0);
        let f = cartesian_impedance_force(&k, &d, &xd, &td, &x, &t);
        // rotations share the z-axis so the error is the angle difference
        let expected = [40.0 * 0.2 + 400.0 * 0.1, 30.0 * -0.1 + 300.0 * 0.1, 200.0 * 0.05, 0.0, 0.0, 0.1 + 10.0 * 0.15];
        for i in 0..6 {
            assert!((f[i] - expected[i]).abs() < 1e-9, "row {i}: {} vs {}", f[i], expected[i]);
        }
    }

    #[test]
    fn gains_validation() {
        assert!(ImpedanceGains::default().validate().is_ok());
        let mut g = ImpedanceGains::default();
        g.eta_base = 0.0;
        assert!(g.validate().is_err());
        let mut g = ImpedanceGains::default();
        g.nullspace_stiffness[(2, 2)] = -1.0;
        assert!(g.validate().is_err());
        let mut g = ImpedanceGains::default();
        g.stiffness[(0, 1)] = 10.0;
        assert!(g.validate().is_err());
        assert!(BaseAdmittanceParams { mass: Vector3::new(1.0, 0.0, 1.0), damping: Vector3::repeat(1.0) }
            .validate()
            .is_err());
    }

    #[test]
    fn critical_damping_scalar_case() {
        let lam = Matrix6::identity() * 4.0;
        let k = Matrix6::identity() * 100.0;
        let d = critical_damping(&lam, &k, 1.0);
        assert!((d - Matrix6::identity() * 40.0).norm() < 1e-9);
    }

    #[test]
    fn wrench_transform_matches_cross_product() {
        let mount = MountPose { x: -0.25, y: 0.1, z: 0.6, yaw: 0.4 };
        let t = arm_to_base_wrench_transform(&mount);
        let w = PlanarWrench::new(3.0, -2.0, 0.5);
        let out = t * w;
        let f = rot2(mount.yaw) * Vector2::new(w.x, w.y);
        let r = Vector2::new(mount.x, mount.y);
        assert!((out.x - f.x).abs() < 1e-12 && (out.y - f.y).abs() < 1e-12);
        assert!((out.z - (w.z + math::cross2(&r, &f))).abs() < 1e-12);
    }
}
