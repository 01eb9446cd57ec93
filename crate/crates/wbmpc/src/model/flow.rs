//! Centroidal dynamics flow and its single-rigid-body variant.
//!
//! Momentum rate: gravity plus contact forces (linear) and lever-arm
//! cross products about the CoM (angular). Base pose rate comes from
//! inverting the leading 6x6 block of the centroidal momentum matrix; joint
//! rates are copied from the input.

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};

use super::{CentroidalModel, ModelFidelity, OcpError};
use crate::math::{gravity_vector, GRAVITY};
use crate::robot::GeneralizedCoordinates;

impl CentroidalModel {
    /// Full centroidal flow.
    pub fn flow(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, OcpError> {
        self.flow_with_forces(x, u, &[])
    }

    /// Centroidal flow with additional external forces applied at
    /// end-effector frames (used by rollouts for unmodeled disturbances).
    pub fn flow_with_forces(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        extra: &[(usize, Vector3<f64>)],
    ) -> Result<DVector<f64>, OcpError> {
        let n_a = self.n_a();
        let n_c = self.n_c();
        let desc = self.description();
        let q = GeneralizedCoordinates::from_vector(x.rows(6, 6 + n_a).clone_owned());
        let poses = crate::robot::forward_kinematics(desc, &q)?;
        let com = poses.center_of_mass(desc);

        let mut dh_lin = desc.total_mass * gravity_vector();
        let mut dh_ang = Vector3::zeros();
        for ee in 0..n_c {
            let f = Vector3::new(u[3 * ee], u[3 * ee + 1], u[3 * ee + 2]);
            let lever = poses.ee_position(desc, ee) - com;
            dh_lin += f;
            dh_ang += lever.cross(&f);
        }
        for &(ee, f) in extra {
            let lever = poses.ee_position(desc, ee) - com;
            dh_lin += f;
            dh_ang += lever.cross(&f);
        }

        let a = crate::robot::cmm_from_poses(desc, &poses);
        let h = Vector6::from_row_slice(x.rows(0, 6).as_slice());
        let qdot_j = u.rows(3 * n_c, n_a).clone_owned();
        let qdot_b = solve_base_rates(&a, &h, &qdot_j)?;

        Ok(assemble_xdot(&dh_lin, &dh_ang, &qdot_b, &qdot_j))
    }

    /// Single-rigid-body flow: CMM and end-effector lever arms frozen at the
    /// reference configuration, joint-rate momentum coupling dropped.
    pub fn srbd_flow(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, OcpError> {
        self.srbd_flow_with_forces(x, u, &[])
    }

    pub fn srbd_flow_with_forces(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        extra: &[(usize, Vector3<f64>)],
    ) -> Result<DVector<f64>, OcpError> {
        let n_a = self.n_a();
        let n_c = self.n_c();
        let mass = self.description().total_mass;
        let mut dh_lin = mass * gravity_vector();
        let mut dh_ang = Vector3::zeros();
        for ee in 0..n_c {
            let f = Vector3::new(u[3 * ee], u[3 * ee + 1], u[3 * ee + 2]);
            dh_lin += f;
            dh_ang += self.frozen_lever_arm(ee).cross(&f);
        }
        for &(ee, f) in extra {
            dh_lin += f;
            dh_ang += self.frozen_lever_arm(ee).cross(&f);
        }
        let h = Vector6::from_row_slice(x.rows(0, 6).as_slice());
        let qdot_b = self.frozen_base_inverse() * h;
        let qdot_j = u.rows(3 * n_c, n_a).clone_owned();
        Ok(assemble_xdot(&dh_lin, &dh_ang, &qdot_b, &qdot_j))
    }

    /// Flow selected by the OCP's model fidelity.
    pub fn dynamics_flow(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        extra: &[(usize, Vector3<f64>)],
    ) -> Result<DVector<f64>, OcpError> {
        match self.ocp().fidelity {
            ModelFidelity::Centroidal => self.flow_with_forces(x, u, extra),
            ModelFidelity::Srbd => self.srbd_flow_with_forces(x, u, extra),
        }
    }

    /// One RK4 step of the selected dynamics.
    pub fn integrate_rk4(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        dt: f64,
        extra: &[(usize, Vector3<f64>)],
    ) -> Result<DVector<f64>, OcpError> {
        let k1 = self.dynamics_flow(x, u, extra)?;
        let k2 = self.dynamics_flow(&(x + 0.5 * dt * &k1), u, extra)?;
        let k3 = self.dynamics_flow(&(x + 0.5 * dt * &k2), u, extra)?;
        let k4 = self.dynamics_flow(&(x + dt * &k3), u, extra)?;
        Ok(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    }

    /// Static-equilibrium input for the given state: stance legs share the
    /// weight equally along +z, everything else zero.
    pub fn equilibrium_input(&self, flags: &[bool]) -> DVector<f64> {
        let n_legs = self.description().n_leg_ee();
        let stance_legs = flags.iter().take(n_legs).filter(|f| **f).count();
        let mut u = DVector::zeros(self.n_u());
        if stance_legs > 0 {
            let fz = self.description().total_mass * GRAVITY / stance_legs as f64;
            for (leg, closed) in flags.iter().take(n_legs).enumerate() {
                if *closed {
                    u[3 * leg + 2] = fz;
                }
            }
        }
        u
    }
}

fn assemble_xdot(
    dh_lin: &Vector3<f64>,
    dh_ang: &Vector3<f64>,
    qdot_b: &Vector6<f64>,
    qdot_j: &DVector<f64>,
) -> DVector<f64> {
    let n = 12 + qdot_j.len();
    let mut xdot = DVector::zeros(n);
    for i in 0..3 {
        xdot[i] = dh_lin[i];
        xdot[3 + i] = dh_ang[i];
    }
    for i in 0..6 {
        xdot[6 + i] = qdot_b[i];
    }
    xdot.rows_mut(12, qdot_j.len()).copy_from(qdot_j);
    xdot
}

/// Solve A_b qdot_b = h - A_j qdot_j, reporting a condition estimate when
/// the base block is (near-)singular.
pub(crate) fn solve_base_rates(
    a: &DMatrix<f64>,
    h: &Vector6<f64>,
    qdot_j: &DVector<f64>,
) -> Result<Vector6<f64>, OcpError> {
    let a_b: Matrix6<f64> = a.fixed_view::<6, 6>(0, 0).into_owned();
    let a_j = a.view((0, 6), (6, qdot_j.len()));
    let rhs = h - a_j * qdot_j;
    let lu = a_b.lu();
    match lu.solve(&rhs) {
        Some(sol) => {
            let residual = (a_b * sol - rhs).norm();
            if residual.is_finite() && residual <= 1e-6 * (rhs.norm() + 1.0) {
                Ok(sol)
            } else {
                Err(OcpError::SingularBaseBlock {
                    cond: condition_estimate(&a_b),
                })
            }
        }
        None => Err(OcpError::SingularBaseBlock {
            cond: condition_estimate(&a_b),
        }),
    }
}

fn condition_estimate(m: &Matrix6<f64>) -> f64 {
    let svd = m.svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::{default_model, mini_model};
    use crate::math::GRAVITY;

    #[test]
    fn balanced_stance_is_an_equilibrium() {
        let model = default_model();
        let x = model.reference_state().clone();
        let u = model.equilibrium_input(&[true, true, true, true, false, false]);
        let xdot = model.flow(&x, &u).unwrap();
        // Linear momentum rate: gravity exactly cancelled by the four legs.
        assert!(xdot.rows(0, 3).norm() < 1e-9, "dh_lin = {}", xdot.rows(0, 3));
        // Symmetric feet: no net moment about the CoM.
        assert!(xdot.rows(3, 3).norm() < 1e-6, "dh_ang = {}", xdot.rows(3, 3));
        // Zero momentum, zero joint rates: base does not move.
        assert!(xdot.rows(6, xdot.len() - 6).norm() < 1e-12);
    }

    #[test]
    fn zero_forces_free_fall() {
        let model = default_model();
        let x = model.reference_state().clone();
        let u = DVector::zeros(model.n_u());
        let xdot = model.flow(&x, &u).unwrap();
        let m = model.description().total_mass;
        assert!((xdot[2] + m * GRAVITY).abs() < 1e-12);
        assert!(xdot.rows(3, 3).norm() < 1e-12);
    }

    #[test]
    fn single_force_lever_arm_torque() {
        // A pure force at a known lever arm produces the cross-product
        // angular momentum rate.
        let model = mini_model();
        let x = model.reference_state().clone();
        let u = DVector::zeros(model.n_u());
        let xdot0 = model.flow(&x, &u).unwrap();
        let f = Vector3::new(0.0, 0.0, 100.0);
        let xdot1 = model.flow_with_forces(&x, &u, &[(1, f)]).unwrap();

        let q = crate::model::CentroidalState::from_vector(x.clone()).coordinates();
        let poses = crate::robot::forward_kinematics(model.description(), &q).unwrap();
        let com = poses.center_of_mass(model.description());
        let lever = poses.ee_position(model.description(), 1) - com;
        let expect = lever.cross(&f);
        for i in 0..3 {
            assert!((xdot1[3 + i] - xdot0[3 + i] - expect[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn srbd_equals_flow_at_reference_with_zero_joint_rates() {
        let model = default_model();
        let x = model.reference_state().clone();
        let mut u = DVector::zeros(model.n_u());
        // Arbitrary forces, zero joint rates.
        u[2] = 120.0;
        u[3] = -30.0;
        u[14] = 80.0;
        let full = model.flow(&x, &u).unwrap();
        let srbd = model.srbd_flow(&x, &u).unwrap();
        assert!((full - srbd).norm() < 1e-9);
    }

    #[test]
    fn srbd_differs_away_from_reference() {
        let model = default_model();
        let mut x = model.reference_state().clone();
        // Displace an arm joint well away from the reference.
        x[12 + 26] += 0.8;
        let mut u = DVector::zeros(model.n_u());
        u.rows_mut(18, model.n_a()).fill(0.2);
        let full = model.flow(&x, &u).unwrap();
        let srbd = model.srbd_flow(&x, &u).unwrap();
        let base_diff = (full.rows(6, 6) - srbd.rows(6, 6)).norm();
        assert!(base_diff > 1e-4, "base-rate blocks unexpectedly equal");
    }

    #[test]
    fn srbd_momentum_rows_match_flow_under_frozen_kinematics() {
        // Evaluated at the reference configuration the lever arms coincide,
        // so the momentum-rate block is identical for any forces.
        let model = default_model();
        let x = model.reference_state().clone();
        let mut u = DVector::zeros(model.n_u());
        for (i, v) in [(0, 31.0), (4, -12.0), (8, 55.0), (11, 9.0), (16, -40.0)] {
            u[i] = v;
        }
        let full = model.flow(&x, &u).unwrap();
        let srbd = model.srbd_flow(&x, &u).unwrap();
        assert!((full.rows(0, 6) - srbd.rows(0, 6)).norm() < 1e-10);
    }
}
