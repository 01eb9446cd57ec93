//! Robot description: kinematic tree, inertial parameters, end-effector
//! frames, and collision primitives, plus the algorithms built on top of
//! them (forward kinematics, Jacobians, centroidal momentum, RNEA).
//!
//! A description is immutable after validation; all queries are pure
//! functions over `&RobotDescription`, safe for concurrent read-only use.

mod dynamics;
mod kinematics;
pub(crate) mod parse;

pub use dynamics::{
    centroidal_momentum_matrix, inverse_dynamics_rnea, link_motions, mass_matrix, LinkMotion,
};
pub use kinematics::{forward_kinematics, frame_jacobian, point_jacobian, LinkPoses};
pub use parse::{load_robot_description, parse_robot_description};

use nalgebra::{DVector, Isometry3, Matrix3, Unit, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::math::rotation_zyx;

/// Reserved parent name for the floating-base joint.
pub const WORLD: &str = "world";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to read '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("joint '{joint}' references undeclared link '{link}'")]
    UnknownLink { joint: String, link: String },
    #[error("kinematic tree is not a connected acyclic tree rooted at the floating base: {0}")]
    BadTree(String),
    #[error("link '{link}': {what} must be positive (got {value})")]
    NonPositive {
        link: String,
        what: String,
        value: f64,
    },
    #[error("link '{link}': rotational inertia is not positive definite")]
    IndefiniteInertia { link: String },
    #[error("expected exactly one floating-base joint at the root, found {0}")]
    FloatingBaseCount(usize),
    #[error("collision pair ({a}, {b}): {message}")]
    BadCollisionPair { a: String, b: String, message: String },
    #[error("end effector '{0}': {1}")]
    BadEndEffector(String, String),
    #[error("dimension mismatch: expected {expected}, got {got} for {what}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown frame '{0}'")]
    UnknownFrame(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    /// Continuous wheel joint: no position limits, velocity-mode actuator.
    Wheel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActuatorClass {
    Small,
    Medium,
    Large,
    Wheel,
}

impl ActuatorClass {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "small" => Some(Self::Small),
            "medium" => Some(Self::Medium),
            "large" => Some(Self::Large),
            "wheel" => Some(Self::Wheel),
            _ => None,
        }
    }
}

/// Rigid link: mass, center of mass offset and rotational inertia about the
/// CoM, both expressed in the link frame.
#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub mass: f64,
    pub com: Vector3<f64>,
    pub inertia: Matrix3<f64>,
}

/// One actuated joint. The child link frame coincides with the joint frame:
/// `pose(child) = pose(parent) * origin * motion(q)`.
#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    pub origin: Isometry3<f64>,
    /// Rotation axis in the joint frame.
    pub axis: Unit<Vector3<f64>>,
    /// Position limits [rad]; `None` for continuous joints.
    pub limits: Option<(f64, f64)>,
    pub actuator: ActuatorClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EeKind {
    Leg,
    Arm,
}

/// End-effector frame: a named point rigidly attached to a link.
#[derive(Debug, Clone)]
pub struct EndEffector {
    pub name: String,
    pub kind: EeKind,
    pub link: usize,
    /// Frame offset in the link frame (orientation equals the link's).
    pub offset: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub enum CollisionShape {
    Sphere { center: Vector3<f64>, radius: f64 },
    Capsule { a: Vector3<f64>, b: Vector3<f64>, radius: f64 },
}

#[derive(Debug, Clone)]
pub struct CollisionPrimitive {
    pub link: usize,
    pub shape: CollisionShape,
}

/// A frame the kinematics can answer queries about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameId {
    Link(usize),
    EndEffector(usize),
}

/// Validated robot description. Joint order in `joints` defines the actuated
/// coordinate order `q_j`; the floating base contributes the leading six
/// generalized coordinates (x, y, z, yaw, pitch, roll).
#[derive(Debug, Clone)]
pub struct RobotDescription {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    /// Link the floating-base joint attaches to (tree root).
    pub base_link: usize,
    /// Leg end effectors first, then arm end effectors.
    pub end_effectors: Vec<EndEffector>,
    pub collision_primitives: Vec<CollisionPrimitive>,
    /// Pairs of link indices checked by the self-collision cost.
    pub collision_pairs: Vec<(usize, usize)>,
    /// Nominal base pose (x, y, z, yaw, pitch, roll) and joint positions.
    pub nominal_base: [f64; 6],
    pub nominal_joints: DVector<f64>,
    pub total_mass: f64,

    // Derived tree bookkeeping.
    pub(crate) parent_joint: Vec<Option<usize>>,
    pub(crate) joint_order: Vec<usize>,
    pub(crate) primitive_of_link: Vec<Option<usize>>,
}

impl RobotDescription {
    /// Number of actuated joints.
    pub fn n_actuated(&self) -> usize {
        self.joints.len()
    }

    /// Number of generalized coordinates (6 base + actuated).
    pub fn n_dof(&self) -> usize {
        6 + self.joints.len()
    }

    /// Number of end effectors.
    pub fn n_ee(&self) -> usize {
        self.end_effectors.len()
    }

    pub fn n_leg_ee(&self) -> usize {
        self.end_effectors
            .iter()
            .filter(|e| e.kind == EeKind::Leg)
            .count()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn ee_index(&self, name: &str) -> Option<usize> {
        self.end_effectors.iter().position(|e| e.name == name)
    }

    /// Indices (into `q_j`) of joints belonging to the chain that ends at
    /// the given link, in root-to-leaf order.
    pub fn chain_joints(&self, link: usize) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut cur = link;
        while let Some(j) = self.parent_joint[cur] {
            chain.push(j);
            cur = self.joints[j].parent;
        }
        chain.reverse();
        chain
    }

    /// Arm joint indices: joints on chains ending at arm end effectors.
    pub fn arm_joint_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = Vec::new();
        for ee in self.end_effectors.iter().filter(|e| e.kind == EeKind::Arm) {
            for j in self.chain_joints(ee.link) {
                if !idx.contains(&j) {
                    idx.push(j);
                }
            }
        }
        idx.sort_unstable();
        idx
    }

    /// Leg joint indices grouped per leg end effector, root-to-leaf.
    pub fn leg_chains(&self) -> Vec<Vec<usize>> {
        self.end_effectors
            .iter()
            .filter(|e| e.kind == EeKind::Leg)
            .map(|e| self.chain_joints(e.link))
            .collect()
    }

    pub fn frame_by_name(&self, name: &str) -> Option<FrameId> {
        if let Some(i) = self.ee_index(name) {
            return Some(FrameId::EndEffector(i));
        }
        self.link_index(name).map(FrameId::Link)
    }

    /// Nominal generalized coordinates from the description file.
    pub fn nominal_coordinates(&self) -> GeneralizedCoordinates {
        let mut q = GeneralizedCoordinates::zeros(self.n_actuated());
        for i in 0..6 {
            q.data[i] = self.nominal_base[i];
        }
        q.data.rows_mut(6, self.n_actuated()).copy_from(&self.nominal_joints);
        q
    }

    /// Validate all structural invariants. Called by the loader; also the
    /// backing check for the `check` CLI subcommand.
    pub fn validate(&self) -> Result<(), ModelError> {
        for link in &self.links {
            if link.mass <= 0.0 {
                return Err(ModelError::NonPositive {
                    link: link.name.clone(),
                    what: "mass".into(),
                    value: link.mass,
                });
            }
            // Symmetric PD check via leading principal minors.
            let m = &link.inertia;
            let d1 = m[(0, 0)];
            let d2 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let d3 = m.determinant();
            if d1 <= 0.0 || d2 <= 0.0 || d3 <= 0.0 {
                return Err(ModelError::IndefiniteInertia {
                    link: link.name.clone(),
                });
            }
        }
        // Tree: every link except the base has exactly one parent joint and
        // the base is an ancestor of everything.
        let mut seen = vec![false; self.links.len()];
        seen[self.base_link] = true;
        for &j in &self.joint_order {
            let joint = &self.joints[j];
            if !seen[joint.parent] {
                return Err(ModelError::BadTree(format!(
                    "joint '{}' is ordered before its parent link '{}'",
                    joint.name, self.links[joint.parent].name
                )));
            }
            if seen[joint.child] {
                return Err(ModelError::BadTree(format!(
                    "link '{}' has more than one parent joint",
                    self.links[joint.child].name
                )));
            }
            seen[joint.child] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(ModelError::BadTree(format!(
                "link '{}' is not reachable from the base",
                self.links[i].name
            )));
        }
        for ee in &self.end_effectors {
            if ee.link >= self.links.len() {
                return Err(ModelError::BadEndEffector(
                    ee.name.clone(),
                    "references an unknown link".into(),
                ));
            }
        }
        for &(a, b) in &self.collision_pairs {
            if a >= self.links.len() || b >= self.links.len() {
                return Err(ModelError::BadCollisionPair {
                    a: format!("{a}"),
                    b: format!("{b}"),
                    message: "link index out of range".into(),
                });
            }
            for idx in [a, b] {
                if self.primitive_of_link[idx].is_none() {
                    return Err(ModelError::BadCollisionPair {
                        a: self.links[a].name.clone(),
                        b: self.links[b].name.clone(),
                        message: format!(
                            "link '{}' has no collision primitive",
                            self.links[idx].name
                        ),
                    });
                }
            }
        }
        if self.nominal_joints.len() != self.n_actuated() {
            return Err(ModelError::Dimension {
                what: "nominal joint vector".into(),
                expected: self.n_actuated(),
                got: self.nominal_joints.len(),
            });
        }
        Ok(())
    }
}

/// Generalized position coordinates: base pose (x, y, z, yaw, pitch, roll,
/// ZYX Euler) followed by actuated joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedCoordinates {
    pub data: DVector<f64>,
}

impl GeneralizedCoordinates {
    pub fn zeros(n_actuated: usize) -> Self {
        Self {
            data: DVector::zeros(6 + n_actuated),
        }
    }

    pub fn from_vector(data: DVector<f64>) -> Self {
        Self { data }
    }

    pub fn n_actuated(&self) -> usize {
        self.data.len() - 6
    }

    pub fn base_position(&self) -> Vector3<f64> {
        Vector3::new(self.data[0], self.data[1], self.data[2])
    }

    /// (yaw, pitch, roll).
    pub fn base_euler(&self) -> Vector3<f64> {
        Vector3::new(self.data[3], self.data[4], self.data[5])
    }

    pub fn base_pose(&self) -> Isometry3<f64> {
        let rot = rotation_zyx(self.data[3], self.data[4], self.data[5]);
        Isometry3::from_parts(
            self.base_position().into(),
            UnitQuaternion::from_rotation_matrix(&rot),
        )
    }

    pub fn joint(&self, j: usize) -> f64 {
        self.data[6 + j]
    }

    pub fn joints(&self) -> DVector<f64> {
        DVector::from(self.data.rows(6, self.n_actuated()).clone_owned())
    }
}
