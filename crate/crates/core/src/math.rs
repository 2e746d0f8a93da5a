//! Small numeric helpers shared by the model and the controllers.

use nalgebra::{Matrix2, Matrix3, Matrix6, SMatrix, SymmetricEigen, Vector2, Vector3};

pub type ArmVector = nalgebra::SVector<f64, 7>;
pub type ArmMatrix = SMatrix<f64, 7, 7>;
pub type WbVector = nalgebra::SVector<f64, 10>;
pub type WbMatrix = SMatrix<f64, 10, 10>;
pub type Jacobian = SMatrix<f64, 6, 10>;
pub type ArmJacobian = SMatrix<f64, 6, 7>;
pub type Wrench = nalgebra::Vector6<f64>;
/// Planar wrench `(F_x, F_y, M_z)` or planar generalized force on the base.
pub type PlanarWrench = Vector3<f64>;

pub const PI: f64 = core::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = libm::fmod(angle, two_pi);
    if a <= -PI {
        a += two_pi;
    } else if a > PI {
        a -= two_pi;
    }
    a
}

/// Signed difference `a - b` of two angles, wrapped into `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

pub fn rot2(angle: f64) -> Matrix2<f64> {
    let (s, c) = (libm::sin(angle), libm::cos(angle));
    Matrix2::new(c, -s, s, c)
}

/// Scalar z-component of the planar cross product `a x b`.
pub fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation vector (axis times angle, angle in `[0, pi]`) of a rotation
/// matrix. Stable near the identity and near half turns, and tolerant of
/// small departures from orthonormality.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let s = v.norm();
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = libm::atan2(s, c);
    if s < 1e-12 && c > 0.0 {
        return v;
    }
    if angle < PI - 1e-6 {
        return v * (angle / s);
    }
    // near a half turn: axis from the dominant column of (R + I) / 2
    let b = (r + Matrix3::identity()) * 0.5;
    let k = (0..3).fold(0, |best, i| if b[(i, i)] > b[(best, best)] { i } else { best });
    let mut axis = b.column(k) / libm::sqrt(b[(k, k)].max(1e-300));
    axis /= axis.norm();
    if axis.dot(&v) < 0.0 {
        axis = -axis;
    }
    axis * angle
}

/// Result of a guarded inversion of a symmetric positive (semi)definite
/// task-space matrix.
#[derive(Debug, Clone, Copy)]
pub struct GuardedInverse {
    pub inverse: Matrix6<f64>,
    /// True when the damped fallback was used.
    pub damped: bool,
    pub min_eigenvalue: f64,
}

/// Smallest singular value below which [`guarded_spd_inverse`] damps.
pub const SINGULAR_THRESHOLD: f64 = 1e-4;
/// Damping factor used by the fallback, in task-space units.
pub const SINGULAR_DAMPING: f64 = 0.05;

/// Inverts a symmetric positive semidefinite matrix, switching to
/// `(A + lambda^2 I)^-1` when its smallest singular value drops below
/// [`SINGULAR_THRESHOLD`]. Returns `None` if the result is not finite.
pub fn guarded_spd_inverse(a: &Matrix6<f64>) -> Option<GuardedInverse> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min_eigenvalue =
        eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| if libm::fabs(v) < m { libm::fabs(v) } else { m });
    let damped = !(min_eigenvalue >= SINGULAR_THRESHOLD);
    let target = if damped { sym + Matrix6::identity() * (SINGULAR_DAMPING * SINGULAR_DAMPING) } else { sym };
    let inverse = target.cholesky()?.inverse();
    if inverse.iter().all(|v| v.is_finite()) {
        Some(GuardedInverse { inverse, damped, min_eigenvalue })
    } else {
        None
    }
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn spd_sqrt(a: &Matrix6<f64>) -> Matrix6<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut d = Matrix6::zeros();
    for i in 0..6 {
        d[(i, i)] = libm::sqrt(eig.eigenvalues[i].max(0.0));
    }
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn all_finite<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> bool {
    m.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_lands_in_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5 + 4.0 * PI) - 0.5).abs() < 1e-12);
        assert!((angle_diff(-3.0, 3.0) - (2.0 * PI - 6.0)).abs() < 1e-12);
    }

    #[test]
    fn guarded_inverse_damps_singular_input() {
        let a = Matrix6::from_diagonal(&nalgebra::Vector6::new(1.0, 2.0, 3.0, 1.0, 1.0, 0.0));
        let g = guarded_spd_inverse(&a).unwrap();
        assert!(g.damped);
        assert!((g.inverse[(5, 5)] - 1.0 / 0.0025).abs() < 1e-9);
        let mut b = Matrix6::identity() * 2.0;
        b[(0, 1)] = 0.5;
        b[(1, 0)] = 0.5;
        let g = guarded_spd_inverse(&b).unwrap();
        assert!(!g.damped);
        assert!(((g.inverse * b) - Matrix6::identity()).norm() < 1e-12);
    }

    #[test]
    fn rotation_log_round_trips() {
        use nalgebra::Rotation3;
        for v in [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1e-9, -2e-9, 0.0),
            Vector3::new(0.3, -0.2, 0.9),
            Vector3::new(0.0, 0.0, PI - 1e-9),
            Vector3::new(PI / 3.0_f64.sqrt(), PI / 3.0_f64.sqrt(), -PI / 3.0_f64.sqrt()) * (1.0 - 1e-8),
        ] {
            let r = Rotation3::from_scaled_axis(v);
            let back = rotation_log(r.matrix());
            assert!((back - v).norm() < 1e-7, "{v:?} -> {back:?}");
        }
        let mut skewed = *Rotation3::from_scaled_axis(Vector3::new(2e-9, 0.0, 0.0)).matrix();
        skewed[(0, 0)] += 1e-15;
        assert!(rotation_log(&skewed).iter().all(|x| x.is_finite()));
    }

    #[test]
    fn spd_sqrt_squares_back() {
        let mut a = Matrix6::identity() * 3.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(4, 5)] = 0.5;
        a[(5, 4)] = 0.5;
        let s = spd_sqrt(&a);
        assert!((s * s - a).norm() < 1e-12);
    }
}
