//! Seeded sampling of robot states for the property tests.
#![allow(dead_code)]

use nalgebra::{SVector, Vector3};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use taxelwbc_core::math::ArmVector;
use taxelwbc_core::model::{JointLimits, JointState, RobotModel};

pub struct Sampler(ChaCha8Rng);

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }

    pub fn arm(&mut self, limits: &JointLimits) -> ArmVector {
        // stay a little inside the limits so finite differences never clamp
        ArmVector::from_fn(|i, _| {
            let pad = 0.05 * (limits.upper[i] - limits.lower[i]);
            self.uniform(limits.lower[i] + pad, limits.upper[i] - pad)
        })
    }

    pub fn arm_vel(&mut self, scale: f64) -> ArmVector {
        ArmVector::from_fn(|_, _| self.uniform(-scale, scale))
    }

    pub fn state(&mut self, model: &RobotModel) -> JointState {
        let base = Vector3::new(self.uniform(-2.0, 2.0), self.uniform(-2.0, 2.0), self.uniform(-3.0, 3.0));
        JointState::at_rest(base, self.arm(model.limits()))
    }

    pub fn vector<const N: usize>(&mut self, scale: f64) -> SVector<f64, N> {
        SVector::from_fn(|_, _| self.uniform(-scale, scale))
    }

    /// Random state with random velocities.
    pub fn moving_state(&mut self, model: &RobotModel) -> JointState {
        let mut s = self.state(model);
        s.base_vel = self.vector(0.5);
        s.arm_vel = self.arm_vel(1.0);
        s
    }
}
