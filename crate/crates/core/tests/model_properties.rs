use nalgebra::{Matrix3, Vector3};
use taxelwbc_core::math::{rotation_log, ArmMatrix, ArmVector};
use taxelwbc_core::model::*;
use taxelwbc_core::ARM_DOF;

mod common;
use common::Sampler;

#[test]
fn home_pose_matches_independent_chain() {
    // 4x4 homogeneous product of the modified DH chain, evaluated offline
    let model = RobotModel::default();
    let pose = forward_kinematics(&model, &JointState::at_rest(Vector3::zeros(), RobotModel::home_configuration()));
    let expected = Vector3::new(0.056890566592941186, 0.0, 1.0868820523028393);
    assert!((pose.position - expected).norm() < 1e-12, "{:?}", pose.position);
    let down = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    assert!((pose.rotation.matrix() - down).amax() < 1e-12);
}

#[test]
fn jacobian_matches_finite_differences() {
    let model = RobotModel::default();
    let mut rng = Sampler::new(11);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let state = rng.state(&model);
        let jac = whole_body_jacobian(&model, &state);
        for i in 0..10 {
            let shifted = |h: f64| {
                let mut s = state;
                if i < 3 {
                    s.base[i] += h;
                } else {
                    s.arm[i - 3] += h;
                }
                forward_kinematics(&model, &s)
            };
            let (plus, minus) = (shifted(eps), shifted(-eps));
            let lin = (plus.position - minus.position) / (2.0 * eps);
            let rel = plus.rotation.matrix() * minus.rotation.matrix().transpose();
            let ang = rotation_log(&rel) / (2.0 * eps);
            let col = jac.column(i);
            let err = (lin - col.fixed_rows::<3>(0)).amax().max((ang - col.fixed_rows::<3>(3)).amax());
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-5, "worst column error {worst:e}");
}

#[test]
fn arm_mass_matrix_is_spd() {
    let model = RobotModel::default();
    let mut rng = Sampler::new(12);
    for _ in 0..1000 {
        let q = rng.arm(model.limits());
        let m = arm_dynamics(&model, &q, &ArmVector::zeros()).mass;
        assert!((m - m.transpose()).amax() < 1e-12);
        let eig = m.symmetric_eigen().eigenvalues;
        assert!(eig.min() > 0.0, "min eigenvalue {}", eig.min());
    }
}

#[test]
fn mass_derivative_minus_twice_coriolis_is_skew() {
    let model = RobotModel::default();
    let mut rng = Sampler::new(13);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q = rng.arm(model.limits());
        let dq = rng.arm_vel(1.5);
        let m_at = |q: &ArmVector| arm_dynamics(&model, q, &ArmVector::zeros()).mass;
        // dM/dt along dq by central differences, independent of the analytic partials
        let m_dot = (m_at(&(q + dq * eps)) - m_at(&(q - dq * eps))) / (2.0 * eps);
        let c = arm_dynamics(&model, &q, &dq).coriolis;
        let n: ArmMatrix = m_dot - c * 2.0;
        worst = worst.max((n + n.transpose()).amax());
    }
    assert!(worst < 1e-8, "max |N + N^T| = {worst:e}");
}

#[test]
fn analytic_mass_partials_match_finite_differences() {
    let model = RobotModel::default();
    let mut rng = Sampler::new(14);
    let eps = 1e-6;
    for _ in 0..100 {
        let q = rng.arm(model.limits());
        let partials = ArmKinematics::new(&model, &q).mass_matrix_partials(&model);
        for (k, analytic) in partials.iter().enumerate() {
            let mut e = ArmVector::zeros();
            e[k] = eps;
            let m_at = |q: ArmVector| arm_dynamics(&model, &q, &ArmVector::zeros()).mass;
            let fd = (m_at(q + e) - m_at(q - e)) / (2.0 * eps);
            assert!((fd - analytic).amax() < 1e-7, "joint {k}");
        }
    }
}

#[test]
fn gravity_is_gradient_of_potential() {
    let model = RobotModel::default();
    let mut rng = Sampler::new(15);
    let eps = 1e-6;
    let mut configs = vec![RobotModel::home_configuration()];
    configs.extend((0..100).map(|_| rng.arm(model.limits())));
    for q in configs {
        let g = arm_dynamics(&model, &q, &ArmVector::zeros()).gravity;
        let u = |q: ArmVector| ArmKinematics::new(&model, &q).potential_energy(&model);
        for k in 0..ARM_DOF {
            let mut e = ArmVector::zeros();
            e[k] = eps;
            let grad = (u(q + e) - u(q - e)) / (2.0 * eps);
            assert!((g[k] - grad).abs() < 1e-5, "joint {k}: {} vs {grad}", g[k]);
        }
    }
}

#[test]
fn kinetic_energy_change_equals_work_without_gravity() {
    let model = RobotModel::default().with_gravity(0.0);
    let mut rng = Sampler::new(16);
    let tau = ArmVector::from_fn(|_, _| rng.uniform(-2.0, 2.0));
    let mut q = RobotModel::home_configuration();
    let mut dq = rng.arm_vel(0.5);

    let energy = |q: &ArmVector, dq: &ArmVector| 0.5 * (dq.transpose() * arm_dynamics(&model, q, dq).mass * dq)[(0, 0)];
    let accel = |q: &ArmVector, dq: &ArmVector| {
        let d = arm_dynamics(&model, q, dq);
        d.mass.cholesky().unwrap().solve(&(tau - d.coriolis * dq))
    };
    let e0 = energy(&q, &dq);
    let mut work = 0.0;
    let h = 1e-3;
    // RK4 on (q, dq, W) with W' = dq . tau
    for _ in 0..500 {
        let k1 = (dq, accel(&q, &dq), dq.dot(&tau));
        let (q2, v2) = (q + k1.0 * (h / 2.0), dq + k1.1 * (h / 2.0));
        let k2 = (v2, accel(&q2, &v2), v2.dot(&tau));
        let (q3, v3) = (q + k2.0 * (h / 2.0), dq + k2.1 * (h / 2.0));
        let k3 = (v3, accel(&q3, &v3), v3.dot(&tau));
        let (q4, v4) = (q + k3.0 * h, dq + k3.1 * h);
        let k4 = (v4, accel(&q4, &v4), v4.dot(&tau));
        q += (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0);
        dq += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0);
        work += (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2) * (h / 6.0);
    }
    let e1 = energy(&q, &dq);
    assert!(work.abs() > 1e-3, "trajectory should exchange energy");
    assert!(((e1 - e0) - work).abs() < 1e-8 * (1.0 + work.abs()), "dE = {}, W = {work}", e1 - e0);
}

#[test]
fn whole_body_mass_is_block_diagonal() {
    let model = RobotModel::default();
    let params = taxelwbc_core::control::BaseAdmittanceParams::default();
    let mut rng = Sampler::new(17);
    for _ in 0..50 {
        let q = rng.arm(model.limits());
        let m = whole_body_mass(&model, &q, &params);
        assert_eq!(m.fixed_view::<3, 7>(0, 3).amax(), 0.0);
        assert_eq!(m.fixed_view::<7, 3>(3, 0).amax(), 0.0);
        assert_eq!(m.fixed_view::<3, 3>(0, 0).into_owned(), params.mass_matrix());
        assert_eq!(m.fixed_view::<7, 7>(3, 3).into_owned(), arm_dynamics(&model, &q, &ArmVector::zeros()).mass);
    }
}
