//! Whole-body model-predictive control for a high-redundancy legged
//! manipulator.
//!
//! The crate is organized around the planning-and-execution pipeline:
//!
//! - [`robot`]: kinematic tree, Jacobians, centroidal momentum, RNEA.
//! - [`model`]: centroidal-dynamics optimal control ingredients (flow,
//!   costs, constraints, linearization).
//! - [`gait`]: contact schedules and swing references.
//! - [`solver`]: constrained SLQ with equality projection and augmented
//!   Lagrangian inequalities.
//! - [`runtime`]: receding-horizon real-time iteration and policy sampling.
//! - [`lowlevel`]: inverse-dynamics reference generation and joint
//!   impedance.
//! - [`sim`]: same-model rollouts, scenarios, logs and reports.

pub mod gait;
pub mod lowlevel;
pub mod math;
pub mod model;
pub mod robot;
pub mod runtime;
pub mod sim;
pub mod solver;
pub mod verify;

/// Robot description shipped with the crate: a 37-joint dual-arm quadruped
/// (4 x 6-joint wheeled legs, 2 x 6-joint arms, torso yaw) massing 118 kg.
pub const DEFAULT_ROBOT_TOML: &str = include_str!("../assets/robot_quadruped_dual_arm.toml");

/// Default OCP / solver / scenario configuration.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../assets/default_config.toml");

/// Parse the shipped robot description.
pub fn default_robot() -> robot::RobotDescription {
    robot::parse::parse_robot_description(DEFAULT_ROBOT_TOML)
        .expect("shipped robot description is valid")
}
