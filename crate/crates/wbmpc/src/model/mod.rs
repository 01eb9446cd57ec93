//! Optimal-control ingredients on top of the robot model: centroidal
//! dynamics flow (full and single-rigid-body variants), stage/terminal
//! costs, the contact-driven constraint set, and their linearizations.
//!
//! State layout (dimension `12 + n_a`):
//!   `[h_lin(3), h_ang(3), base xyz(3), base yaw-pitch-roll(3), q_j(n_a)]`.
//! Input layout (dimension `3 n_c + n_a`):
//!   `[f_c per end effector (3 each), joint rates(n_a)]`.

mod collision;
mod constraints;
mod cost;
mod flow;
mod linearize;
pub mod reference;

pub use collision::{pair_distance, relaxed_barrier, PairDistance};
pub use linearize::{CostQuadratic, Linearization};
pub use reference::{ArmTarget, ReferencePlan};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::gait::ContactSchedule;
use crate::robot::{EeKind, ModelError, RobotDescription};

#[derive(Debug, Error)]
pub enum OcpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("base momentum block A_b is singular (condition estimate {cond:.3e})")]
    SingularBaseBlock { cond: f64 },
    #[error("{what} must be a unit quaternion (norm {norm})")]
    NonUnitQuaternion { what: String, norm: f64 },
    #[error("schedule does not cover time {0}")]
    ScheduleGap(f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("configuration: {0}")]
    Config(String),
}

/// Which dynamics the OCP (and the same-model rollout) integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelFidelity {
    #[default]
    Centroidal,
    Srbd,
}

impl ModelFidelity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "centroidal" => Some(Self::Centroidal),
            "srbd" => Some(Self::Srbd),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Centroidal => "centroidal",
            Self::Srbd => "srbd",
        }
    }
}

/// How arm end-effector position references are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackingMode {
    /// Quadratic cost terms on position/orientation error.
    #[default]
    Cost,
    /// Per-axis state-input equality constraints on position error decay.
    Constraint,
}

impl TrackingMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cost" => Some(Self::Cost),
            "constraint" => Some(Self::Constraint),
            _ => None,
        }
    }
}

/// Centroidal OCP state: momentum, base pose, joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidalState {
    pub data: DVector<f64>,
}

impl CentroidalState {
    pub fn zeros(n_a: usize) -> Self {
        Self {
            data: DVector::zeros(12 + n_a),
        }
    }

    pub fn from_vector(data: DVector<f64>) -> Self {
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn momentum_linear(&self) -> Vector3<f64> {
        Vector3::new(self.data[0], self.data[1], self.data[2])
    }

    pub fn momentum_angular(&self) -> Vector3<f64> {
        Vector3::new(self.data[3], self.data[4], self.data[5])
    }

    /// Generalized coordinates (base pose + joints), i.e. the kinematic part
    /// of the state.
    pub fn coordinates(&self) -> crate::robot::GeneralizedCoordinates {
        crate::robot::GeneralizedCoordinates::from_vector(
            self.data.rows(6, self.data.len() - 6).clone_owned(),
        )
    }
}

/// Control input: one 3-D contact force per end effector plus joint rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    pub data: DVector<f64>,
}

impl ControlInput {
    pub fn zeros(n_c: usize, n_a: usize) -> Self {
        Self {
            data: DVector::zeros(3 * n_c + n_a),
        }
    }

    pub fn from_vector(data: DVector<f64>) -> Self {
        Self { data }
    }

    pub fn force(&self, ee: usize) -> Vector3<f64> {
        Vector3::new(self.data[3 * ee], self.data[3 * ee + 1], self.data[3 * ee + 2])
    }

    pub fn set_force(&mut self, ee: usize, f: Vector3<f64>) {
        for r in 0..3 {
            self.data[3 * ee + r] = f[r];
        }
    }
}

/// Relaxed log-barrier parameters for the self-collision cost.
#[derive(Debug, Clone, Copy)]
pub struct BarrierParams {
    /// Minimum admissible pair distance [m].
    pub d_min: f64,
    /// Relaxation threshold below which the quadratic extension applies.
    pub delta: f64,
    /// Barrier scale.
    pub mu: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            d_min: 0.05,
            delta: 0.01,
            mu: 0.1,
        }
    }
}

/// OCP definition: horizon, weights and constraint parameters.
#[derive(Debug, Clone)]
pub struct OcpDefinition {
    /// Time horizon [s].
    pub horizon: f64,
    /// Number of nodes on the uniform grid (intervals = nodes - 1).
    pub nodes: usize,
    /// State regularization weight (diagonal), dim n_x.
    pub q_diag: DVector<f64>,
    /// Input regularization weight (diagonal), dim n_u.
    pub r_diag: DVector<f64>,
    /// Cartesian leg end-effector velocity weight (3 per leg EE).
    pub r_leg_ee_diag: DVector<f64>,
    /// Arm EE position tracking weight.
    pub q_ee_pos: Matrix3<f64>,
    /// Arm EE orientation tracking weight.
    pub q_ee_ori: Matrix3<f64>,
    /// Terminal tracking terms scale relative to stage weights.
    pub terminal_scale: f64,
    /// Swing/tracking position-error gain [1/s].
    pub alpha_p: f64,
    /// Friction coefficient.
    pub friction_mu: f64,
    /// Normal-force lower bound [N].
    pub f_min: f64,
    /// Friction-cone tangential regularization [N].
    pub cone_epsilon: f64,
    pub barrier: BarrierParams,
    /// Disable the self-collision cost (benchmark variant).
    pub self_collision: bool,
    /// Disable the arm joint-limit inequalities (benchmark variant).
    pub joint_limits: bool,
    pub fidelity: ModelFidelity,
    pub tracking: TrackingMode,
}

impl OcpDefinition {
    /// Defaults for a given robot: momentum weight 10, base pose 100, joint
    /// positions 1; force regularization 1e-3, joint-rate regularization 1.
    pub fn default_for(desc: &RobotDescription) -> Self {
        let n_a = desc.n_actuated();
        let n_c = desc.n_ee();
        let n_leg = desc.n_leg_ee();
        let mut q_diag = DVector::zeros(12 + n_a);
        for i in 0..6 {
            q_diag[i] = 10.0;
        }
        for i in 6..12 {
            q_diag[i] = 100.0;
        }
        for i in 12..12 + n_a {
            q_diag[i] = 1.0;
        }
        let mut r_diag = DVector::zeros(3 * n_c + n_a);
        for i in 0..3 * n_c {
            r_diag[i] = 1e-3;
        }
        for i in 3 * n_c..3 * n_c + n_a {
            r_diag[i] = 1.0;
        }
        Self {
            horizon: 1.0,
            nodes: 21,
            q_diag,
            r_diag,
            r_leg_ee_diag: DVector::from_element(3 * n_leg, 2.0),
            q_ee_pos: Matrix3::identity() * 50.0,
            q_ee_ori: Matrix3::identity() * 25.0,
            terminal_scale: 10.0,
            alpha_p: 5.0,
            friction_mu: 0.7,
            f_min: 10.0,
            cone_epsilon: 1.0,
            barrier: BarrierParams::default(),
            self_collision: true,
            joint_limits: true,
            fidelity: ModelFidelity::Centroidal,
            tracking: TrackingMode::Cost,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / (self.nodes - 1) as f64
    }
}

/// Data frozen at the reference configuration for the SRBD variant and the
/// task-space input weight.
#[derive(Debug, Clone)]
struct FrozenReference {
    /// CMM at the reference configuration.
    a_ref: DMatrix<f64>,
    a_b_inv_ref: nalgebra::Matrix6<f64>,
    /// End-effector lever arms about the reference CoM.
    lever_arms: Vec<Vector3<f64>>,
}

/// Immutable evaluation object bundling a robot description, an OCP
/// definition and the reference-frozen data. Cheap to clone via `Arc`.
#[derive(Debug, Clone)]
pub struct CentroidalModel {
    desc: Arc<RobotDescription>,
    ocp: OcpDefinition,
    /// Reference state used for freezing (SRBD, R_ts): the nominal stance.
    x_ref: DVector<f64>,
    /// Task-space input weight R_ts (n_u x n_u).
    r_ts: DMatrix<f64>,
    frozen: FrozenReference,
    /// Arm joint indices (into q_j) with their position limits.
    arm_limits: Vec<(usize, f64, f64)>,
}

impl CentroidalModel {
    /// Build the model around a nominal reference state. Asserts the state
    /// and input dimensions implied by the description.
    pub fn new(
        desc: Arc<RobotDescription>,
        ocp: OcpDefinition,
        x_ref: DVector<f64>,
    ) -> Result<Self, OcpError> {
        let n_a = desc.n_actuated();
        let n_c = desc.n_ee();
        let n_x = 12 + n_a;
        let n_u = 3 * n_c + n_a;
        if x_ref.len() != n_x {
            return Err(OcpError::Config(format!(
                "reference state dimension {} does not match n_x = {n_x}",
                x_ref.len()
            )));
        }
        if ocp.q_diag.len() != n_x || ocp.r_diag.len() != n_u {
            return Err(OcpError::Config(format!(
                "weight dimensions (Q: {}, R: {}) do not match n_x = {n_x}, n_u = {n_u}",
                ocp.q_diag.len(),
                ocp.r_diag.len()
            )));
        }
        if ocp.horizon <= 0.0 || ocp.nodes < 2 {
            return Err(OcpError::Config("horizon must be positive with >= 2 nodes".into()));
        }
        if ocp.q_diag.iter().any(|v| *v < 0.0)
            || ocp.r_leg_ee_diag.iter().any(|v| *v < 0.0)
        {
            return Err(OcpError::Config("weights must be nonnegative".into()));
        }

        let q_ref = CentroidalState::from_vector(x_ref.clone()).coordinates();
        let r_ts = cost::build_task_space_weight(&desc, &q_ref, &ocp.r_leg_ee_diag, n_u)?;

        // R_j + R_ts must stay positive definite at the reference.
        let mut r_total = r_ts.clone();
        for i in 0..n_u {
            r_total[(i, i)] += ocp.r_diag[i];
        }
        if nalgebra::Cholesky::new(r_total).is_none() {
            return Err(OcpError::Config(
                "R_j + R_ts is not positive definite at the reference configuration".into(),
            ));
        }

        let a_ref = crate::robot::centroidal_momentum_matrix(&desc, &q_ref)?;
        let a_b = a_ref.fixed_view::<6, 6>(0, 0).into_owned();
        let a_b_inv_ref = a_b
            .try_inverse()
            .ok_or(OcpError::SingularBaseBlock { cond: f64::INFINITY })?;
        let poses = crate::robot::forward_kinematics(&desc, &q_ref)?;
        let com = poses.center_of_mass(&desc);
        let lever_arms = (0..n_c)
            .map(|e| poses.ee_position(&desc, e) - com)
            .collect();

        let arm_limits = desc
            .arm_joint_indices()
            .into_iter()
            .filter_map(|j| desc.joints[j].limits.map(|(lo, hi)| (j, lo, hi)))
            .collect();

        Ok(Self {
            desc,
            ocp,
            x_ref,
            r_ts,
            frozen: FrozenReference {
                a_ref,
                a_b_inv_ref,
                lever_arms,
            },
            arm_limits,
        })
    }

    pub fn description(&self) -> &RobotDescription {
        &self.desc
    }

    pub fn description_arc(&self) -> Arc<RobotDescription> {
        self.desc.clone()
    }

    pub fn ocp(&self) -> &OcpDefinition {
        &self.ocp
    }

    /// Replace the OCP definition (benchmark variants); the reference state
    /// and frozen data are kept.
    pub fn with_ocp(&self, ocp: OcpDefinition) -> Result<Self, OcpError> {
        Self::new(self.desc.clone(), ocp, self.x_ref.clone())
    }

    pub fn n_x(&self) -> usize {
        12 + self.desc.n_actuated()
    }

    pub fn n_u(&self) -> usize {
        3 * self.desc.n_ee() + self.desc.n_actuated()
    }

    pub fn n_a(&self) -> usize {
        self.desc.n_actuated()
    }

    pub fn n_c(&self) -> usize {
        self.desc.n_ee()
    }

    /// Nominal reference state the model was built around.
    pub fn reference_state(&self) -> &DVector<f64> {
        &self.x_ref
    }

    pub fn task_space_weight(&self) -> &DMatrix<f64> {
        &self.r_ts
    }

    pub(crate) fn frozen_lever_arm(&self, ee: usize) -> Vector3<f64> {
        self.frozen.lever_arms[ee]
    }

    pub(crate) fn frozen_base_inverse(&self) -> &nalgebra::Matrix6<f64> {
        &self.frozen.a_b_inv_ref
    }

    pub(crate) fn frozen_cmm(&self) -> &DMatrix<f64> {
        &self.frozen.a_ref
    }

    pub(crate) fn arm_limit_rows(&self) -> &[(usize, f64, f64)] {
        &self.arm_limits
    }

    /// Arm end-effector indices (into the EE list).
    pub fn arm_ee_indices(&self) -> Vec<usize> {
        self.desc
            .end_effectors
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EeKind::Arm)
            .map(|(i, _)| i)
            .collect()
    }
}
