//! Small math helpers shared across the crate: skew matrices, ZYX Euler
//! rotations, and quaternion utilities.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

/// Standard gravity magnitude [m/s^2].
pub const GRAVITY: f64 = 9.81;

/// World gravity acceleration vector [m/s^2].
pub fn gravity_vector() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -GRAVITY)
}

/// Skew-symmetric matrix S(v) with S(v)·w = v × w.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix from ZYX Euler angles (yaw about z, then pitch about the
/// rotated y, then roll about the twice-rotated x): R = Rz(yaw)·Ry(pitch)·Rx(roll).
pub fn rotation_zyx(yaw: f64, pitch: f64, roll: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), roll)
}

/// ZYX Euler angles (yaw, pitch, roll) recovered from a rotation matrix.
/// Pitch is returned in [-pi/2, pi/2]; callers keep trajectories away from
/// the +-pi/2 representation singularity.
pub fn euler_zyx_from_rotation(rot: &Rotation3<f64>) -> (f64, f64, f64) {
    let m = rot.matrix();
    let pitch = (-m[(2, 0)]).asin();
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    (yaw, pitch, roll)
}

/// Normalized linear interpolation parameter of `t` in `[t0, t1]`, clamped to [0, 1].
pub fn interp_fraction(t: f64, t0: f64, t1: f64) -> f64 {
    if t1 <= t0 {
        return 0.0;
    }
    ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)
}

/// Spherical linear interpolation that falls back to nlerp for nearly
/// antipodal inputs.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    a.try_slerp(b, s, 1e-9)
        .unwrap_or_else(|| a.nlerp(b, s))
}
