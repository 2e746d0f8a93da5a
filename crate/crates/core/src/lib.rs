//! Whole-body control for a velocity-controlled planar base carrying a
//! 7-DoF torque-controlled arm, with a ring of capacitive taxels on the
//! base perimeter.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that is
//! pure computation:
//!
//! - [`model`]: kinematics and arm dynamics of the floating-base system.
//! - [`taxels`]: taxel capacitance, calibration maps, the 11-taxel ring and
//!   the aggregation of taxel forces into a planar base wrench.
//! - [`control`]: base admittance, the weighted whole-body Cartesian
//!   impedance law and the follow-me admittance controller.
//! - [`sim`]: a deterministic fixed-step closed-loop simulator.
//! - [`calib`]: linear characterization/calibration fits and material
//!   reports for candidate dielectric foams.
//!
//! File formats, the command-line tool and the live session endpoint live
//! in the `taxelwbc` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod calib;
pub mod control;
pub mod math;
pub mod model;
pub mod sim;
pub mod taxels;

pub use model::{JointState, Pose, RobotModel};

/// Number of planar base degrees of freedom (x, y, yaw).
pub const BASE_DOF: usize = 3;
/// Number of arm joints.
pub const ARM_DOF: usize = 7;
/// Whole-body degrees of freedom.
pub const WB_DOF: usize = BASE_DOF + ARM_DOF;
/// Number of taxels on the base cover.
pub const TAXEL_COUNT: usize = 11;
