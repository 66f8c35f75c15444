//! SNAME body/NED frames and the Euler-angle velocity transformation.
//!
//! Positions and attitude live in the world-fixed NED frame, velocities and
//! accelerations in the vehicle-fixed BODY frame. The attitude sequence is
//! ZYX (yaw, pitch, roll).

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pitch angles with `|cos(theta)|` below this are rejected as singular.
pub const SINGULARITY_COS_TOL: f64 = 1e-6;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Shortest signed angular difference `a - b`, in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerAngles {
    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn yaw(psi: f64) -> Self {
        Self::new(0.0, 0.0, psi)
    }
}

/// Vehicle position (NED, metres) and attitude (radians), `η`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose6 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl Pose6 {
    /// Builds a pose, wrapping yaw into `[0, 2π)`.
    pub fn new(x: f64, y: f64, z: f64, phi: f64, theta: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            z,
            phi,
            theta,
            psi: wrap_angle(psi),
        }
    }

    pub fn planar(x: f64, y: f64, z: f64, psi: f64) -> Self {
        Self::new(x, y, z, 0.0, 0.0, psi)
    }

    pub fn attitude(&self) -> EulerAngles {
        EulerAngles::new(self.phi, self.theta, self.psi)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.x, self.y, self.z, self.phi, self.theta, self.psi)
    }

    /// Inverse of [`Pose6::to_vector`]; yaw is wrapped.
    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

/// Body-frame velocity `ν = (u, v, w, p, q, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVel6 {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl BodyVel6 {
    pub fn new(u: f64, v: f64, w: f64, p: f64, q: f64, r: f64) -> Self {
        Self { u, v, w, p, q, r }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.u, self.v, self.w, self.p, self.q, self.r)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

/// Body-frame acceleration `ν̇`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyAcc6 {
    pub du: f64,
    pub dv: f64,
    pub dw: f64,
    pub dp: f64,
    pub dq: f64,
    pub dr: f64,
}

impl BodyAcc6 {
    pub fn new(du: f64, dv: f64, dw: f64, dp: f64, dq: f64, dr: f64) -> Self {
        Self {
            du,
            dv,
            dw,
            dp,
            dq,
            dr,
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.du, self.dv, self.dw, self.dp, self.dq, self.dr)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }
}

/// Linear-velocity rotation `R(Θ)`, ZYX convention.
pub fn rotation_matrix(att: EulerAngles) -> Matrix3<f64> {
    let (sphi, cphi) = att.phi.sin_cos();
    let (sth, cth) = att.theta.sin_cos();
    let (spsi, cpsi) = att.psi.sin_cos();
    Matrix3::new(
        cpsi * cth,
        -spsi * cphi + cpsi * sth * sphi,
        spsi * sphi + cpsi * cphi * sth,
        spsi * cth,
        cpsi * cphi + sphi * sth * spsi,
        -cpsi * sphi + sth * spsi * cphi,
        -sth,
        cth * sphi,
        cth * cphi,
    )
}

/// Angular-rate transformation `T(Θ)`. Fails when pitch is at ±90°.
pub fn rate_matrix(att: EulerAngles) -> Result<Matrix3<f64>> {
    let (sphi, cphi) = att.phi.sin_cos();
    let (sth, cth) = att.theta.sin_cos();
    if cth.abs() < SINGULARITY_COS_TOL {
        return Err(Error::SingularAttitude { theta: att.theta });
    }
    let tth = sth / cth;
    Ok(Matrix3::new(
        1.0,
        sphi * tth,
        cphi * tth,
        0.0,
        cphi,
        -sphi,
        0.0,
        sphi / cth,
        cphi / cth,
    ))
}

/// The block-diagonal 6×6 `J(Θ) = diag(R, T)`.
pub fn build_transform(att: EulerAngles) -> Result<Matrix6<f64>> {
    let t = rate_matrix(att)?;
    let mut j = Matrix6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation_matrix(att));
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&t);
    Ok(j)
}

/// NED pose rate `η̇ = J(Θ)ν`.
pub fn body_to_ned(att: EulerAngles, vel: &BodyVel6) -> Result<Vector6<f64>> {
    Ok(build_transform(att)? * vel.to_vector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_attitude_is_identity() {
        let j = build_transform(EulerAngles::default()).unwrap();
        assert_eq!(j, Matrix6::identity());
    }

    #[test]
    fn quarter_turn_maps_surge_east() {
        let eta = body_to_ned(
            EulerAngles::yaw(FRAC_PI_2),
            &BodyVel6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(eta, Vector6::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn transform_matches_symbolic_evaluation() {
        // sympy evaluation of the ZYX matrices at (0.1, 0.2, 0.3)
        let r_expected = Matrix3::new(
            0.9362933635841992,
            -0.27509584731824377,
            0.21835066314633444,
            0.28962947762551555,
            0.9564250858492325,
            -0.036957013524625076,
            -0.19866933079506122,
            0.09784339500725571,
            0.9751703272018158,
        );
        let t_expected = Matrix3::new(
            1.0,
            0.02023723543343063,
            0.20169732967478562,
            0.0,
            0.9950041652780258,
            -0.09983341664682815,
            0.0,
            0.10186391302795747,
            1.0152414007114563,
        );
        let att = EulerAngles::new(0.1, 0.2, 0.3);
        let j = build_transform(att).unwrap();
        let r = j.fixed_view::<3, 3>(0, 0).into_owned();
        assert_abs_diff_eq!(r, r_expected, epsilon = 1e-14);
        assert_abs_diff_eq!(j.fixed_view::<3, 3>(3, 3).into_owned(), t_expected, epsilon = 1e-14);
        assert_abs_diff_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        assert!(j.fixed_view::<3, 3>(0, 3).iter().all(|&c| c == 0.0));
    }

    #[test]
    fn body_to_ned_examples() {
        let level = EulerAngles::default();
        let heave = body_to_ned(level, &BodyVel6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(heave[2], 1.0);
        let yaw = body_to_ned(level, &BodyVel6::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.5)).unwrap();
        assert_eq!(yaw[5], 0.5);
        let diag = body_to_ned(
            EulerAngles::yaw(std::f64::consts::FRAC_PI_4),
            &BodyVel6::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(diag[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(diag[1], 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn singular_pitch_rejected() {
        let err = build_transform(EulerAngles::new(0.0, FRAC_PI_2, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularAttitude { .. }));
        assert!(build_transform(EulerAngles::new(0.0, 3.0 * FRAC_PI_2, 0.0)).is_err());
        assert!(build_transform(EulerAngles::new(0.0, FRAC_PI_2 - 1e-3, 0.0)).is_ok());
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_abs_diff_eq!(wrap_angle(-FRAC_PI_2), 3.0 * FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(7.5), 1.2168146928204138, epsilon = 1e-12);
        assert_eq!(wrap_angle(-1e-300), 0.0);
        assert_eq!(Pose6::planar(0.0, 0.0, 0.0, -FRAC_PI_2).psi, wrap_angle(-FRAC_PI_2));
    }

    #[test]
    fn shortest_difference() {
        assert_abs_diff_eq!(angle_diff(0.1, TAU - 0.1), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(angle_diff(TAU - 0.1, 0.1), -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(angle_diff(PI, 0.0), PI, epsilon = 1e-12);
    }
}
