//! Forward kinematics and world-aligned frame Jacobians.
//!
//! Generalized velocities are coordinate rates: base linear velocity in
//! world, ZYX Euler angle rates (yaw, pitch, roll), then joint rates. Frame
//! Jacobians map these rates to a world-frame twist (linear; angular), so
//! the Euler columns carry the rate-to-angular-velocity map implicitly.

use nalgebra::{DMatrix, Isometry3, Rotation3, Translation3, UnitQuaternion, Vector3};

use super::{FrameId, GeneralizedCoordinates, JointKind, ModelError, RobotDescription};

/// World poses of every link for one configuration.
#[derive(Debug, Clone)]
pub struct LinkPoses {
    pub poses: Vec<Isometry3<f64>>,
    base_position: Vector3<f64>,
    /// (yaw, pitch, roll) of the base, kept for Euler-rate axis columns.
    base_euler: Vector3<f64>,
}

impl LinkPoses {
    pub fn link_pose(&self, link: usize) -> &Isometry3<f64> {
        &self.poses[link]
    }

    pub fn frame_pose(&self, desc: &RobotDescription, frame: FrameId) -> Isometry3<f64> {
        match frame {
            FrameId::Link(l) => self.poses[l],
            FrameId::EndEffector(e) => {
                let ee = &desc.end_effectors[e];
                self.poses[ee.link] * Translation3::from(ee.offset)
            }
        }
    }

    /// World position of an end-effector frame origin.
    pub fn ee_position(&self, desc: &RobotDescription, ee: usize) -> Vector3<f64> {
        self.frame_pose(desc, FrameId::EndEffector(ee))
            .translation
            .vector
    }

    /// Whole-robot center of mass in world coordinates.
    pub fn center_of_mass(&self, desc: &RobotDescription) -> Vector3<f64> {
        let mut weighted = Vector3::zeros();
        for (link, pose) in desc.links.iter().zip(&self.poses) {
            let com_world = pose * nalgebra::Point3::from(link.com);
            weighted += link.mass * com_world.coords;
        }
        weighted / desc.total_mass
    }
}

/// Compute world poses for all links.
pub fn forward_kinematics(
    desc: &RobotDescription,
    q: &GeneralizedCoordinates,
) -> Result<LinkPoses, ModelError> {
    if q.data.len() != desc.n_dof() {
        return Err(ModelError::Dimension {
            what: "generalized coordinates".into(),
            expected: desc.n_dof(),
            got: q.data.len(),
        });
    }
    let mut poses = vec![Isometry3::identity(); desc.links.len()];
    poses[desc.base_link] = q.base_pose();
    for &ji in &desc.joint_order {
        let joint = &desc.joints[ji];
        let angle = q.joint(ji);
        let motion = UnitQuaternion::from_axis_angle(&joint.axis, angle);
        poses[joint.child] = poses[joint.parent] * joint.origin * motion;
    }
    Ok(LinkPoses {
        poses,
        base_position: q.base_position(),
        base_euler: q.base_euler(),
    })
}

/// Visit the Jacobian columns of a world point `p` rigidly attached to
/// `link`: calls `visit(dof, linear, angular)` for each generalized
/// coordinate that moves the point. Columns not visited are zero.
pub(crate) fn visit_point_jacobian(
    desc: &RobotDescription,
    poses: &LinkPoses,
    link: usize,
    p: &Vector3<f64>,
    mut visit: impl FnMut(usize, Vector3<f64>, Vector3<f64>),
) {
    // Base translation: moves every point one-to-one.
    visit(0, Vector3::x(), Vector3::zeros());
    visit(1, Vector3::y(), Vector3::zeros());
    visit(2, Vector3::z(), Vector3::zeros());

    // ZYX Euler rate axes, all passing through the base origin.
    let (yaw, pitch) = (poses.base_euler[0], poses.base_euler[1]);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
    let axis_yaw = Vector3::z();
    let axis_pitch = rz * Vector3::y();
    let axis_roll = rz * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch) * Vector3::x();
    let lever = p - poses.base_position;
    visit(3, axis_yaw.cross(&lever), axis_yaw);
    visit(4, axis_pitch.cross(&lever), axis_pitch);
    visit(5, axis_roll.cross(&lever), axis_roll);

    // Joints on the chain from the base to the link.
    let mut cur = link;
    while let Some(ji) = desc.parent_joint[cur] {
        let joint = &desc.joints[ji];
        let child_pose = &poses.poses[joint.child];
        let axis_w = child_pose.rotation * joint.axis.into_inner();
        let origin_w = child_pose.translation.vector;
        visit(6 + ji, axis_w.cross(&(p - origin_w)), axis_w);
        cur = joint.parent;
    }
}

/// 6 x n_dof Jacobian (linear rows first, then angular) of a world point
/// attached to a link.
pub fn point_jacobian(
    desc: &RobotDescription,
    poses: &LinkPoses,
    link: usize,
    p: &Vector3<f64>,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(6, desc.n_dof());
    visit_point_jacobian(desc, poses, link, p, |dof, lin, ang| {
        for r in 0..3 {
            jac[(r, dof)] = lin[r];
            jac[(3 + r, dof)] = ang[r];
        }
    });
    jac
}

/// Frame Jacobian at the frame origin (world-aligned linear + angular rows).
pub fn frame_jacobian(
    desc: &RobotDescription,
    q: &GeneralizedCoordinates,
    frame: FrameId,
) -> Result<DMatrix<f64>, ModelError> {
    let poses = forward_kinematics(desc, q)?;
    let (link, point) = match frame {
        FrameId::Link(l) => {
            if l >= desc.links.len() {
                return Err(ModelError::UnknownFrame(format!("link #{l}")));
            }
            (l, poses.poses[l].translation.vector)
        }
        FrameId::EndEffector(e) => {
            if e >= desc.end_effectors.len() {
                return Err(ModelError::UnknownFrame(format!("end effector #{e}")));
            }
            (desc.end_effectors[e].link, poses.ee_position(desc, e))
        }
    };
    Ok(point_jacobian(desc, &poses, link, &point))
}

/// True if the given actuated joint lies on the chain from the base to the
/// link carrying the frame.
pub fn joint_on_frame_path(desc: &RobotDescription, frame: FrameId, joint: usize) -> bool {
    let link = match frame {
        FrameId::Link(l) => l,
        FrameId::EndEffector(e) => desc.end_effectors[e].link,
    };
    desc.chain_joints(link).contains(&joint)
}

/// True for joints of wheel kind; their columns are excluded from contact
/// constraints because the contact frame rides on the wheel's parent link.
pub fn is_wheel_joint(desc: &RobotDescription, joint: usize) -> bool {
    desc.joints[joint].kind == JointKind::Wheel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::parse::parse_robot_description;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn two_link_planar() -> RobotDescription {
        parse_robot_description(
            r#"
name = "two-link"

[[links]]
name = "base"
mass = 1.0
inertia = [0.01, 0.01, 0.01, 0.0, 0.0, 0.0]

[[links]]
name = "upper"
mass = 1.0
com = [0.5, 0.0, 0.0]
inertia = [0.001, 0.08, 0.08, 0.0, 0.0, 0.0]

[[links]]
name = "lower"
mass = 1.0
com = [0.5, 0.0, 0.0]
inertia = [0.001, 0.08, 0.08, 0.0, 0.0, 0.0]

[[joints]]
name = "float"
type = "floating-base"
parent = "world"
child = "base"

[[joints]]
name = "shoulder"
type = "revolute"
parent = "base"
child = "upper"
axis = [0.0, 0.0, 1.0]

[[joints]]
name = "elbow"
type = "revolute"
parent = "upper"
child = "lower"
origin = [1.0, 0.0, 0.0]
axis = [0.0, 0.0, 1.0]

[[end_effectors]]
name = "tip"
kind = "arm"
link = "lower"
offset = [1.0, 0.0, 0.0]
"#,
        )
        .unwrap()
    }

    #[test]
    fn zero_configuration_base_is_identity() {
        let desc = two_link_planar();
        let q = GeneralizedCoordinates::zeros(desc.n_actuated());
        let poses = forward_kinematics(&desc, &q).unwrap();
        let base = poses.link_pose(desc.base_link);
        assert_relative_eq!(base.translation.vector, Vector3::zeros(), epsilon = 1e-15);
        assert!(base.rotation.angle() < 1e-15);
    }

    #[test]
    fn base_translation_shifts_every_frame() {
        let desc = two_link_planar();
        let mut q = GeneralizedCoordinates::zeros(desc.n_actuated());
        q.data[6] = 0.7;
        q.data[7] = -0.3;
        let p0 = forward_kinematics(&desc, &q).unwrap();
        q.data[0] = 1.0;
        let p1 = forward_kinematics(&desc, &q).unwrap();
        for (a, b) in p0.poses.iter().zip(&p1.poses) {
            let shift = b.translation.vector - a.translation.vector;
            assert_relative_eq!(shift, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn planar_chain_tip_position() {
        // Joint angles (pi/2, 0) on unit links put the tip at (0, 2) in the
        // x-y plane.
        let desc = two_link_planar();
        let mut q = GeneralizedCoordinates::zeros(desc.n_actuated());
        q.data[6] = std::f64::consts::FRAC_PI_2;
        let poses = forward_kinematics(&desc, &q).unwrap();
        let tip = poses.ee_position(&desc, 0);
        assert_relative_eq!(tip, Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn jacobian_base_translation_block_is_identity() {
        let desc = two_link_planar();
        let mut q = GeneralizedCoordinates::zeros(desc.n_actuated());
        q.data[3] = 0.4;
        q.data[4] = -0.2;
        q.data[5] = 0.1;
        q.data[6] = 0.3;
        let jac = frame_jacobian(&desc, &q, FrameId::EndEffector(0)).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_relative_eq!(jac[(r, c)], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let desc = two_link_planar();
        let mut q = GeneralizedCoordinates::zeros(desc.n_actuated());
        for (i, v) in [0.3, -0.1, 0.2, 0.5, -0.3, 0.25, 0.7, -1.1].iter().enumerate() {
            q.data[i] = *v;
        }
        let jac = frame_jacobian(&desc, &q, FrameId::EndEffector(0)).unwrap();
        let h = 1e-6;
        for dof in 0..desc.n_dof() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp.data[dof] += h;
            qm.data[dof] -= h;
            let pp = forward_kinematics(&desc, &qp).unwrap().ee_position(&desc, 0);
            let pm = forward_kinematics(&desc, &qm).unwrap().ee_position(&desc, 0);
            let fd = (pp - pm) / (2.0 * h);
            for r in 0..3 {
                assert_relative_eq!(jac[(r, dof)], fd[r], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let desc = two_link_planar();
        let q = GeneralizedCoordinates::from_vector(DVector::zeros(3));
        assert!(matches!(
            forward_kinematics(&desc, &q),
            Err(ModelError::Dimension { .. })
        ));
    }
}
