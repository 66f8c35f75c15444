//! Force decomposition and acceleration models.
//!
//! The full 6-DoF model drives the ground-truth simulator; the reduced
//! surge/sway/heave/yaw model is what the dynamic filter backend evaluates.
//!
//! Added-mass coefficients are stored as positive magnitudes. Relative to the
//! usual hydrodynamic-derivative convention (`X_u̇ < 0`) every added-mass term
//! therefore flips sign: effective masses become `m + X_u̇`, and the
//! added-mass Coriolis forces enter the balance as `+coriolis_added(ν)`.

use nalgebra::{Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::frames::{BodyAcc6, BodyVel6, Pose6};

/// Added-mass magnitudes (kg, kg·m²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AddedMass {
    pub xdu: f64,
    pub ydv: f64,
    pub zdw: f64,
    pub kdp: f64,
    pub mdq: f64,
    pub ndr: f64,
}

impl Default for AddedMass {
    fn default() -> Self {
        Self {
            xdu: 779.79,
            ydv: 1222.0,
            zdw: 3659.9,
            kdp: 534.9,
            mdq: 842.69,
            ndr: 224.32,
        }
    }
}

impl AddedMass {
    pub fn to_array(&self) -> [f64; 6] {
        [self.xdu, self.ydv, self.zdw, self.kdp, self.mdq, self.ndr]
    }
}

/// Linear damping coefficients (non-positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearDamping {
    pub xu: f64,
    pub yv: f64,
    pub zw: f64,
    pub kp: f64,
    pub mq: f64,
    pub nr: f64,
}

impl Default for LinearDamping {
    fn default() -> Self {
        Self {
            xu: -74.82,
            yv: -69.48,
            zw: -782.4,
            kp: -268.8,
            mq: -309.77,
            nr: -105.0,
        }
    }
}

impl LinearDamping {
    pub fn to_array(&self) -> [f64; 6] {
        [self.xu, self.yv, self.zw, self.kp, self.mq, self.nr]
    }
}

/// Quadratic damping coefficients (non-positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticDamping {
    pub xuu: f64,
    pub yvv: f64,
    pub zww: f64,
    pub kpp: f64,
    pub mqq: f64,
    pub nrr: f64,
}

impl Default for QuadraticDamping {
    fn default() -> Self {
        Self {
            xuu: -748.22,
            yvv: -992.53,
            zww: -1821.01,
            kpp: -672.0,
            mqq: -774.44,
            nrr: -523.27,
        }
    }
}

impl QuadraticDamping {
    pub fn to_array(&self) -> [f64; 6] {
        [self.xuu, self.yvv, self.zww, self.kpp, self.mqq, self.nrr]
    }
}

/// RexROV mass, inertia, hydrostatic and hydrodynamic coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// m³, informational: buoyancy is taken from `buoyancy` directly
    pub volume: f64,
    /// N
    pub buoyancy: f64,
    /// m/s²
    pub gravity: f64,
    /// kg/m³
    pub rho: f64,
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    /// body-frame z of the centre of buoyancy relative to the CG, m (z
    /// down, so negative places CB above CG and gives a restoring moment)
    pub z_b: f64,
    pub added_mass: AddedMass,
    pub linear_damping: LinearDamping,
    pub quadratic_damping: QuadraticDamping,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1863.0,
            volume: 1.838,
            buoyancy: 18393.9972,
            gravity: 9.81,
            rho: 1000.0,
            ixx: 691.23,
            iyy: 691.23,
            izz: 691.23,
            z_b: -0.05,
            added_mass: AddedMass::default(),
            linear_damping: LinearDamping::default(),
            quadratic_damping: QuadraticDamping::default(),
        }
    }
}

impl VehicleParams {
    /// `W = m·g`
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Diagonal of `M_RB + M_A`.
    pub fn effective_inertia(&self) -> Vector6<f64> {
        let a = self.added_mass;
        Vector6::new(
            self.mass + a.xdu,
            self.mass + a.ydv,
            self.mass + a.zdw,
            self.ixx + a.kdp,
            self.iyy + a.mdq,
            self.izz + a.ndr,
        )
    }

    /// Every violated invariant, as `field: reason` strings.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, why: &str| {
            if !ok {
                out.push(format!("vehicle.{field}: {why}"));
            }
        };
        check(self.mass > 0.0, "mass", "must be > 0");
        check(self.gravity > 0.0, "gravity", "must be > 0");
        check(self.buoyancy >= 0.0, "buoyancy", "must be >= 0");
        check(self.rho > 0.0, "rho", "must be > 0");
        check(self.volume >= 0.0, "volume", "must be >= 0");
        let inertia = self.effective_inertia();
        let names = ["mass+xdu", "mass+ydv", "mass+zdw", "ixx+kdp", "iyy+mdq", "izz+ndr"];
        for (val, name) in inertia.iter().zip(names) {
            check(*val > 0.0, &format!("added_mass ({name})"), "effective inertia must be > 0");
        }
        let lin = ["xu", "yv", "zw", "kp", "mq", "nr"];
        for (val, name) in self.linear_damping.to_array().iter().zip(lin) {
            check(*val <= 0.0, &format!("linear_damping.{name}"), "must be <= 0");
        }
        let quad = ["xuu", "yvv", "zww", "kpp", "mqq", "nrr"];
        for (val, name) in self.quadratic_damping.to_array().iter().zip(quad) {
            check(*val <= 0.0, &format!("quadratic_damping.{name}"), "must be <= 0");
        }
        let all = [
            self.mass,
            self.volume,
            self.buoyancy,
            self.gravity,
            self.rho,
            self.ixx,
            self.iyy,
            self.izz,
            self.z_b,
        ];
        check(all.iter().all(|v| v.is_finite()), "*", "all parameters must be finite");
        out
    }
}

/// Generalized force `τ` in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench6 {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub tphi: f64,
    pub ttheta: f64,
    pub tpsi: f64,
}

impl Wrench6 {
    pub fn new(tx: f64, ty: f64, tz: f64, tphi: f64, ttheta: f64, tpsi: f64) -> Self {
        Self {
            tx,
            ty,
            tz,
            tphi,
            ttheta,
            tpsi,
        }
    }

    /// Wrench with only the four controlled axes populated.
    pub fn planar(tx: f64, ty: f64, tz: f64, tpsi: f64) -> Self {
        Self::new(tx, ty, tz, 0.0, 0.0, tpsi)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.tx, self.ty, self.tz, self.tphi, self.ttheta, self.tpsi)
    }
}

/// Rigid-body Coriolis forces `C_RB(ν)ν` (CG at the body origin).
pub fn coriolis_rb(vel: &BodyVel6, params: &VehicleParams) -> Vector6<f64> {
    let BodyVel6 { u, v, w, p, q, r } = *vel;
    let m = params.mass;
    Vector6::new(
        m * (q * w - r * v),
        m * (r * u - p * w),
        m * (p * v - q * u),
        q * r * (params.izz - params.iyy),
        r * p * (params.ixx - params.izz),
        q * p * (params.iyy - params.ixx),
    )
}

/// Added-mass Coriolis-centripetal vector, evaluated with the magnitude
/// coefficients.
pub fn coriolis_added(vel: &BodyVel6, params: &VehicleParams) -> Vector6<f64> {
    let BodyVel6 { u, v, w, p, q, r } = *vel;
    let AddedMass {
        xdu,
        ydv,
        zdw,
        kdp,
        mdq,
        ndr,
    } = params.added_mass;
    Vector6::new(
        ydv * v * r - zdw * w * q,
        zdw * w * p - xdu * u * r,
        xdu * u * q - ydv * v * p,
        (ydv - zdw) * v * w + (mdq - ndr) * q * r,
        (zdw - xdu) * u * w + (ndr - kdp) * p * r,
        (xdu - ydv) * u * v + (kdp - mdq) * p * q,
    )
}

/// Drag `(lin_i + quad_i·|ν_i|)·ν_i` per axis; opposes motion.
pub fn damping(vel: &BodyVel6, params: &VehicleParams) -> Vector6<f64> {
    let nu = vel.to_vector();
    let lin = params.linear_damping.to_array();
    let quad = params.quadratic_damping.to_array();
    Vector6::from_fn(|i, _| (lin[i] + quad[i] * nu[i].abs()) * nu[i])
}

/// Restoring forces `g(η)` from weight and buoyancy.
pub fn hydrostatics(pose: &Pose6, params: &VehicleParams) -> Vector6<f64> {
    let (sphi, cphi) = pose.phi.sin_cos();
    let (sth, cth) = pose.theta.sin_cos();
    let wb = params.weight() - params.buoyancy;
    let zb_b = params.z_b * params.buoyancy;
    Vector6::new(
        wb * sth,
        -wb * cth * sphi,
        -wb * cth * cphi,
        -zb_b * cth * sphi,
        -zb_b * sth,
        0.0,
    )
}

/// Full 6-DoF body accelerations.
pub fn accel_full(vel: &BodyVel6, pose: &Pose6, tau: &Wrench6, params: &VehicleParams) -> BodyAcc6 {
    let net = tau.to_vector() - coriolis_rb(vel, params) + coriolis_added(vel, params)
        + damping(vel, params)
        - hydrostatics(pose, params);
    BodyAcc6::from_vector(&net.component_div(&params.effective_inertia()))
}

/// Reduced model accelerations `(u̇, v̇, ẇ, ṙ)` assuming zero roll and pitch.
pub fn accel_reduced(vel: &BodyVel6, tau: &Wrench6, params: &VehicleParams) -> Vector4<f64> {
    let BodyVel6 { u, v, w, r, .. } = *vel;
    let m = params.mass;
    let a = params.added_mass;
    let lin = params.linear_damping;
    let quad = params.quadratic_damping;
    let b_minus_w = params.buoyancy - params.weight();

    let du = ((lin.xu + quad.xuu * u.abs()) * u + m * r * v + a.ydv * r * v + tau.tx)
        / (m + a.xdu);
    let dv = ((lin.yv + quad.yvv * v.abs()) * v - m * r * u - a.xdu * r * u + tau.ty)
        / (m + a.ydv);
    let dw = ((lin.zw + quad.zww * w.abs()) * w - b_minus_w + tau.tz) / (m + a.zdw);
    let dr = ((lin.nr + quad.nrr * r.abs()) * r + (a.xdu - a.ydv) * u * v + tau.tpsi)
        / (params.izz + a.ndr);
    Vector4::new(du, dv, dw, dr)
}

/// Kinetic energy `½ νᵀ(M_RB + M_A)ν`.
pub fn kinetic_energy(vel: &BodyVel6, params: &VehicleParams) -> f64 {
    let nu = vel.to_vector();
    0.5 * nu.component_mul(&nu).dot(&params.effective_inertia())
}
