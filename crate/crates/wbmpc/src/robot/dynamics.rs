//! Centroidal momentum matrix and recursive Newton-Euler inverse dynamics.
//!
//! Both operate in world-frame vectors over the expanded floating-base tree
//! (three prismatic + three Euler-rate revolute coordinates ahead of the
//! actuated joints), so all results are conjugate to coordinate rates.

use nalgebra::{DMatrix, DVector, Matrix3, Point3, Rotation3, Vector3};

use super::kinematics::{forward_kinematics, visit_point_jacobian, LinkPoses};
use super::{GeneralizedCoordinates, ModelError, RobotDescription};
use crate::math::GRAVITY;

/// Centroidal momentum matrix A(q) with h_com = A(q) * (base rates, joint
/// rates). Rows 0..3 are linear momentum, rows 3..6 angular momentum about
/// the CoM-attached, world-aligned frame. Assembled by direct summation of
/// per-link spatial inertias through their CoM Jacobians.
pub fn centroidal_momentum_matrix(
    desc: &RobotDescription,
    q: &GeneralizedCoordinates,
) -> Result<DMatrix<f64>, ModelError> {
    let poses = forward_kinematics(desc, q)?;
    Ok(cmm_from_poses(desc, &poses))
}

pub(crate) fn cmm_from_poses(desc: &RobotDescription, poses: &LinkPoses) -> DMatrix<f64> {
    let com = poses.center_of_mass(desc);
    let mut a = DMatrix::zeros(6, desc.n_dof());
    for (li, link) in desc.links.iter().enumerate() {
        let pose = &poses.poses[li];
        let rot: Rotation3<f64> = pose.rotation.to_rotation_matrix();
        let inertia_w: Matrix3<f64> = rot * link.inertia * rot.transpose();
        let com_world = (pose * Point3::from(link.com)).coords;
        let lever = com_world - com;
        visit_point_jacobian(desc, poses, li, &com_world, |dof, lin, ang| {
            let lin_m = link.mass * lin;
            let ang_m = inertia_w * ang + lever.cross(&lin_m);
            for r in 0..3 {
                a[(r, dof)] += lin_m[r];
                a[(3 + r, dof)] += ang_m[r];
            }
        });
    }
    a
}

/// Per-link rigid-body motion from the velocity recursion. Used both inside
/// RNEA and by the momentum-summation checks.
#[derive(Debug, Clone)]
pub struct LinkMotion {
    pub omega: Vector3<f64>,
    /// Velocity of the link frame origin.
    pub v_origin: Vector3<f64>,
    /// Velocity of the link center of mass.
    pub v_com: Vector3<f64>,
    pub com_world: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

/// Propagate link angular velocities and CoM velocities down the tree for
/// generalized velocity `v` (coordinate rates).
pub fn link_motions(
    desc: &RobotDescription,
    q: &GeneralizedCoordinates,
    v: &DVector<f64>,
) -> Result<Vec<LinkMotion>, ModelError> {
    let poses = forward_kinematics(desc, q)?;
    if v.len() != desc.n_dof() {
        return Err(ModelError::Dimension {
            what: "generalized velocity".into(),
            expected: desc.n_dof(),
            got: v.len(),
        });
    }
    let (motions, _) = propagate(desc, &poses, q, v, &DVector::zeros(v.len()));
    Ok(motions)
}

struct LinkAccel {
    alpha: Vector3<f64>,
    /// Acceleration of the link frame origin (includes the gravity offset).
    a_origin: Vector3<f64>,
}

/// Euler-rate axes of the base (yaw, pitch, roll), all through the base
/// origin.
fn base_euler_axes(q: &GeneralizedCoordinates) -> [Vector3<f64>; 3] {
    let yaw = q.data[3];
    let pitch = q.data[4];
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
    let axis_yaw = Vector3::z();
    let axis_pitch = rz * Vector3::y();
    let axis_roll = rz * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch) * Vector3::x();
    [axis_yaw, axis_pitch, axis_roll]
}

fn propagate(
    desc: &RobotDescription,
    poses: &LinkPoses,
    q: &GeneralizedCoordinates,
    v: &DVector<f64>,
    acc: &DVector<f64>,
) -> (Vec<LinkMotion>, Vec<LinkAccel>) {
    let n = desc.links.len();
    let mut motions: Vec<LinkMotion> = Vec::with_capacity(n);
    for li in 0..n {
        let pose = &poses.poses[li];
        motions.push(LinkMotion {
            omega: Vector3::zeros(),
            v_origin: Vector3::zeros(),
            v_com: Vector3::zeros(),
            com_world: (pose * Point3::from(desc.links[li].com)).coords,
            rotation: pose.rotation.to_rotation_matrix(),
        });
    }
    let mut accels: Vec<LinkAccel> = (0..n)
        .map(|_| LinkAccel {
            alpha: Vector3::zeros(),
            a_origin: Vector3::zeros(),
        })
        .collect();

    // Base link: compose the six virtual coordinates. Rotation axes pass
    // through the base origin so the origin's linear motion is purely the
    // translational coordinates. The pitch and roll axes rotate with the
    // preceding Euler stages, which contributes the omega x axis terms to
    // the angular acceleration.
    let axes = base_euler_axes(q);
    let base = desc.base_link;
    let omega_after_yaw = axes[0] * v[3];
    let omega_after_pitch = omega_after_yaw + axes[1] * v[4];
    let omega_base = omega_after_pitch + axes[2] * v[5];
    let alpha_base = axes[0] * acc[3]
        + axes[1] * acc[4]
        + axes[2] * acc[5]
        + omega_after_yaw.cross(&(axes[1] * v[4]))
        + omega_after_pitch.cross(&(axes[2] * v[5]));
    motions[base].omega = omega_base;
    motions[base].v_origin = Vector3::new(v[0], v[1], v[2]);
    accels[base].alpha = alpha_base;
    accels[base].a_origin = Vector3::new(acc[0], acc[1], acc[2] + GRAVITY);

    let x_base = motions[base].com_world - poses.poses[base].translation.vector;
    motions[base].v_com = motions[base].v_origin + omega_base.cross(&x_base);

    for &ji in &desc.joint_order {
        let joint = &desc.joints[ji];
        let (p, c) = (joint.parent, joint.child);
        let axis_w = poses.poses[c].rotation * joint.axis.into_inner();
        let r = poses.poses[c].translation.vector - poses.poses[p].translation.vector;
        let qd = v[6 + ji];
        let qdd = acc[6 + ji];

        let omega_p = motions[p].omega;
        let omega_c = omega_p + axis_w * qd;
        let v_c = motions[p].v_origin + omega_p.cross(&r);
        let alpha_c = accels[p].alpha + axis_w * qdd + omega_p.cross(&(axis_w * qd));
        let a_c = accels[p].a_origin
            + accels[p].alpha.cross(&r)
            + omega_p.cross(&omega_p.cross(&r));

        motions[c].omega = omega_c;
        motions[c].v_origin = v_c;
        let x = motions[c].com_world - poses.poses[c].translation.vector;
        motions[c].v_com = v_c + omega_c.cross(&x);
        accels[c].alpha = alpha_c;
        accels[c].a_origin = a_c;
    }
    (motions, accels)
}

/// Inverse dynamics via the recursive Newton-Euler algorithm: generalized
/// forces M(q)a + h(q, v) - J_c^T f for external forces applied at
/// end-effector frame origins (world frame). The trailing `n_a` entries are
/// the actuated torques; the leading six are the floating-base residual.
pub fn inverse_dynamics_rnea(
    desc: &RobotDescription,
    q: &GeneralizedCoordinates,
    v: &DVector<f64>,
    a: &DVector<f64>,
    ext_forces: &[(usize, Vector3<f64>)],
) -> Result<DVector<f64>, ModelError> {
    let n = desc.n_dof();
    for (what, vec) in [("generalized velocity", v), ("generalized acceleration", a)] {
        if vec.len() != n {
            return Err(ModelError::Dimension {
                what: what.into(),
                expected: n,
                got: vec.len(),
            });
        }
    }
    for &(ee, _) in ext_forces {
        if ee >= desc.end_effectors.len() {
            return Err(ModelError::UnknownFrame(format!("end effector #{ee}")));
        }
    }
    let poses = forward_kinematics(desc, q)?;
    let (motions, accels) = propagate(desc, &poses, q, v, a);

    // Net force and torque (about each link's own CoM) required by its
    // rigid-body motion.
    let nl = desc.links.len();
    let mut force = vec![Vector3::zeros(); nl];
    let mut torque = vec![Vector3::zeros(); nl];
    for li in 0..nl {
        let link = &desc.links[li];
        let m = &motions[li];
        let acc = &accels[li];
        let x = m.com_world - poses.poses[li].translation.vector;
        let a_com = acc.a_origin + acc.alpha.cross(&x) + m.omega.cross(&m.omega.cross(&x));
        let inertia_w = m.rotation * link.inertia * m.rotation.transpose();
        force[li] = link.mass * a_com;
        torque[li] = inertia_w * acc.alpha + m.omega.cross(&(inertia_w * m.omega));
    }

    // Backward pass: accumulate child wrenches onto parents; wrenches are
    // carried as (force, torque about the link frame origin).
    let mut f_acc = vec![Vector3::zeros(); nl];
    let mut n_acc = vec![Vector3::zeros(); nl];
    for li in 0..nl {
        let x = motions[li].com_world - poses.poses[li].translation.vector;
        f_acc[li] = force[li];
        n_acc[li] = torque[li] + x.cross(&force[li]);
    }
    let mut tau = DVector::zeros(n);
    for &ji in desc.joint_order.iter().rev() {
        let joint = &desc.joints[ji];
        let (p, c) = (joint.parent, joint.child);
        let axis_w = poses.poses[c].rotation * joint.axis.into_inner();
        tau[6 + ji] = axis_w.dot(&n_acc[c]);
        let r = poses.poses[c].translation.vector - poses.poses[p].translation.vector;
        let child_force = f_acc[c];
        let child_torque = n_acc[c];
        f_acc[p] += child_force;
        n_acc[p] += child_torque + r.cross(&child_force);
    }
    let base = desc.base_link;
    let axes = base_euler_axes(q);
    for i in 0..3 {
        tau[i] = f_acc[base][i];
        tau[3 + i] = axes[i].dot(&n_acc[base]);
    }

    // External forces enter as -J^T f at the end-effector frame origins.
    for &(ee, f) in ext_forces {
        let link = desc.end_effectors[ee].link;
        let p = poses.ee_position(desc, ee);
        visit_point_jacobian(desc, &poses, link, &p, |dof, lin, _ang| {
            tau[dof] -= lin.dot(&f);
        });
    }
    Ok(tau)
}

/// Joint-space mass matrix extracted column-by-column from RNEA:
/// M e_i = rnea(q, 0, e_i) - rnea(q, 0, 0).
pub fn mass_matrix(
    desc: &RobotDescription,
    q: &GeneralizedCoordinates,
) -> Result<DMatrix<f64>, ModelError> {
    let n = desc.n_dof();
    let zero = DVector::zeros(n);
    let bias = inverse_dynamics_rnea(desc, q, &zero, &zero, &[])?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let col = inverse_dynamics_rnea(desc, q, &zero, &e, &[])? - &bias;
        m.set_column(i, &col);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::parse::parse_robot_description;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn three_link() -> RobotDescription {
        parse_robot_description(
            r#"
name = "three-link"

[[links]]
name = "base"
mass = 2.0
com = [0.05, 0.0, 0.1]
inertia = [0.02, 0.03, 0.04, 0.001, 0.0, 0.0]

[[links]]
name = "mid"
mass = 1.5
com = [0.2, 0.0, 0.0]
inertia = [0.002, 0.03, 0.03, 0.0, 0.0, 0.0]

[[links]]
name = "tip"
mass = 0.8
com = [0.15, 0.05, 0.0]
inertia = [0.001, 0.01, 0.01, 0.0, 0.0, 0.0]

[[joints]]
name = "float"
type = "floating-base"
parent = "world"
child = "base"

[[joints]]
name = "j1"
type = "revolute"
parent = "base"
child = "mid"
origin = [0.1, 0.0, 0.0]
axis = [0.0, 0.0, 1.0]

[[joints]]
name = "j2"
type = "revolute"
parent = "mid"
child = "tip"
origin = [0.4, 0.0, 0.0]
rpy = [0.2, 0.0, 0.0]
axis = [0.0, 1.0, 0.0]

[[end_effectors]]
name = "hand"
kind = "arm"
link = "tip"
offset = [0.3, 0.0, 0.0]
"#,
        )
        .unwrap()
    }

    fn random_q(desc: &RobotDescription, rng: &mut StdRng) -> GeneralizedCoordinates {
        let mut q = GeneralizedCoordinates::zeros(desc.n_actuated());
        for i in 0..desc.n_dof() {
            q.data[i] = rng.gen_range(-0.8..0.8);
        }
        // Stay clear of the pitch singularity.
        q.data[4] = q.data[4].clamp(-1.0, 1.0);
        q
    }

    #[test]
    fn cmm_zero_velocity_zero_momentum() {
        let desc = three_link();
        let q = GeneralizedCoordinates::zeros(desc.n_actuated());
        let a = centroidal_momentum_matrix(&desc, &q).unwrap();
        let h = a * DVector::zeros(desc.n_dof());
        assert!(h.norm() < 1e-15);
    }

    #[test]
    fn cmm_pure_base_translation_gives_linear_momentum() {
        let desc = three_link();
        let mut rng = StdRng::seed_from_u64(7);
        let q = random_q(&desc, &mut rng);
        let a = centroidal_momentum_matrix(&desc, &q).unwrap();
        let mut v = DVector::zeros(desc.n_dof());
        v[0] = 0.3;
        v[1] = -0.2;
        v[2] = 0.9;
        let h = a * v;
        let m = desc.total_mass;
        assert_relative_eq!(h[0], 0.3 * m, epsilon = 1e-12);
        assert_relative_eq!(h[1], -0.2 * m, epsilon = 1e-12);
        assert_relative_eq!(h[2], 0.9 * m, epsilon = 1e-12);
        // No angular momentum about the CoM from a rigid translation.
        assert!(h.rows(3, 3).norm() < 1e-12);
    }

    #[test]
    fn cmm_matches_per_link_momentum_sum() {
        let desc = three_link();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let q = random_q(&desc, &mut rng);
            let v = DVector::from_fn(desc.n_dof(), |_, _| rng.gen_range(-1.0..1.0));
            let a = centroidal_momentum_matrix(&desc, &q).unwrap();
            let h = &a * &v;

            let poses = forward_kinematics(&desc, &q).unwrap();
            let com = poses.center_of_mass(&desc);
            let motions = link_motions(&desc, &q, &v).unwrap();
            let mut lin = Vector3::zeros();
            let mut ang = Vector3::zeros();
            for (li, m) in motions.iter().enumerate() {
                let link = &desc.links[li];
                let inertia_w = m.rotation * link.inertia * m.rotation.transpose();
                lin += link.mass * m.v_com;
                ang += inertia_w * m.omega + (m.com_world - com).cross(&(link.mass * m.v_com));
            }
            let expect = DVector::from_iterator(6, lin.iter().chain(ang.iter()).copied());
            assert!(
                (h.clone() - &expect).norm() <= 1e-8 * expect.norm().max(1.0),
                "CMM vs momentum sum mismatch: {h} vs {expect}"
            );
        }
    }

    #[test]
    fn rnea_gravity_only_base_residual() {
        let desc = three_link();
        let mut rng = StdRng::seed_from_u64(3);
        let q = random_q(&desc, &mut rng);
        let zero = DVector::zeros(desc.n_dof());
        let tau = inverse_dynamics_rnea(&desc, &q, &zero, &zero, &[]).unwrap();
        // Pure gravity: the base linear residual is -m g (upward support).
        assert_relative_eq!(tau[0], 0.0, epsilon = 1e-10);
        assert_relative_eq!(tau[1], 0.0, epsilon = 1e-10);
        assert_relative_eq!(tau[2], desc.total_mass * GRAVITY, epsilon = 1e-9);
    }

    #[test]
    fn rnea_linearity_in_acceleration() {
        let desc = three_link();
        let mut rng = StdRng::seed_from_u64(5);
        let q = random_q(&desc, &mut rng);
        let v = DVector::from_fn(desc.n_dof(), |_, _| rng.gen_range(-1.0..1.0));
        let a1 = DVector::from_fn(desc.n_dof(), |_, _| rng.gen_range(-1.0..1.0));
        let a2 = DVector::from_fn(desc.n_dof(), |_, _| rng.gen_range(-1.0..1.0));
        let zero = DVector::zeros(desc.n_dof());
        let t0 = inverse_dynamics_rnea(&desc, &q, &v, &zero, &[]).unwrap();
        let t1 = inverse_dynamics_rnea(&desc, &q, &v, &a1, &[]).unwrap();
        let t2 = inverse_dynamics_rnea(&desc, &q, &v, &a2, &[]).unwrap();
        let t12 =
            inverse_dynamics_rnea(&desc, &q, &v, &(a1.clone() + a2.clone()), &[]).unwrap();
        let lhs = &t12 - &t0;
        let rhs = (&t1 - &t0) + (&t2 - &t0);
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        let desc = three_link();
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..5 {
            let q = random_q(&desc, &mut rng);
            let m = mass_matrix(&desc, &q).unwrap();
            let asym = (&m - m.transpose()).norm();
            assert!(asym < 1e-8, "asymmetry {asym}");
            let chol = nalgebra::Cholesky::new(m.clone());
            assert!(chol.is_some(), "mass matrix not positive definite");
        }
    }

    #[test]
    fn external_force_enters_with_jacobian_transpose() {
        let desc = three_link();
        let mut rng = StdRng::seed_from_u64(13);
        let q = random_q(&desc, &mut rng);
        let zero = DVector::zeros(desc.n_dof());
        let f = Vector3::new(3.0, -1.0, 2.0);
        let with = inverse_dynamics_rnea(&desc, &q, &zero, &zero, &[(0, f)]).unwrap();
        let without = inverse_dynamics_rnea(&desc, &q, &zero, &zero, &[]).unwrap();
        let jac =
            crate::robot::frame_jacobian(&desc, &q, crate::robot::FrameId::EndEffector(0)).unwrap();
        let expect = -(jac.rows(0, 3).transpose() * f);
        assert!(((with - without) - expect).norm() < 1e-10);
    }
}
