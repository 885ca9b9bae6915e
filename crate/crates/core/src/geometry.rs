//! Frames, rotations about the vertical axis and relative poses.
//!
//! A pose is a position in ℝ³ plus a heading about the world z axis. Relative
//! poses are expressed in the observer's body frame.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Position and heading of one agent, or of one agent relative to another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub p: Vec3,
    pub psi: f64,
}

impl Pose {
    pub fn new(p: Vec3, psi: f64) -> Self {
        Self { p, psi }
    }

    pub fn from_xyz(x: f64, y: f64, z: f64, psi: f64) -> Self {
        Self {
            p: Vec3::new(x, y, z),
            psi,
        }
    }
}

/// Maps an angle to (−π, π]. Angles already in range are returned unchanged.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Rotation by `psi` about the z axis.
pub fn rotz(psi: f64) -> Mat3 {
    let (s, c) = psi.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Generator of rotations about z: `d/dψ rotz(ψ) = rotz(ψ) · skew_z()`.
pub fn skew_z() -> Mat3 {
    Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
}

/// Projection onto the horizontal plane.
pub fn horizontal() -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0))
}

/// Pose of `qj` as seen from `qi`: position in i's body frame, heading
/// difference wrapped.
pub fn relative_pose(qi: &Pose, qj: &Pose) -> Pose {
    Pose {
        p: rotz(qi.psi).transpose() * (qj.p - qi.p),
        psi: wrap_angle(qj.psi - qi.psi),
    }
}

/// Azimuth of the horizontal projection of `v`.
pub fn azimuth(v: &Vec3) -> f64 {
    v.y.atan2(v.x)
}

/// Sign with `sign(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
