//! Four-state `[x, y, z, ψ]` extended Kalman filter.
//!
//! Prediction integrates DVL velocities and a backend-specific acceleration:
//! the reduced dynamic model (dynamic backend) or the IMU readings
//! (kinematic backend). The update fuses GPS `(x, y)`, pressure depth and
//! compass heading through an identity measurement Jacobian.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{accel_reduced, VehicleParams};
use crate::error::{Error, Result};
use crate::frames::{angle_diff, wrap_angle, BodyVel6};
use crate::sensors::{SensorConfig, SensorFrame};
use crate::thrusters::{ThrusterLayout, Thrusts};

/// Filter mean and covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    /// `[x, y, z, ψ]` in m, m, m, rad
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

impl EstimatorState {
    pub fn new(x: Vector4<f64>, p: Matrix4<f64>) -> Self {
        let mut x = x;
        x[3] = wrap_angle(x[3]);
        Self { x, p }
    }

    pub fn psi(&self) -> f64 {
        self.x[3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterNoise {
    /// process covariance
    pub q: Matrix4<f64>,
    /// measurement covariance
    pub r: Matrix4<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictInputs {
    /// `(u, v, w, r)`
    pub vel: Vector4<f64>,
    /// `(u̇, v̇, ẇ, ṙ)`
    pub acc: Vector4<f64>,
    /// previous step's acceleration, for `Δv̇`
    pub acc_prev: Vector4<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Dynamic,
    Kinematic,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Dynamic, Backend::Kinematic];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Dynamic => "dynamic",
            Backend::Kinematic => "kinematic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dynamic" => Some(Backend::Dynamic),
            "kinematic" => Some(Backend::Kinematic),
            _ => None,
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Covariance update form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceUpdate {
    /// `(I − K)P̂`, then symmetrized
    #[default]
    Simple,
    /// `(I − K)P̂(I − K)ᵀ + K R Kᵀ`
    Joseph,
}

/// Tunables; `r_diag = None` derives `R` from the sensor variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub q_diag: [f64; 4],
    pub p0_diag: [f64; 4],
    pub r_diag: Option<[f64; 4]>,
    /// `|v_i|` below this leaves the Jacobian entry at 1
    pub velocity_guard: f64,
    /// R entry used for a channel absent on the current tick
    pub missing_variance: f64,
    pub covariance_update: CovarianceUpdate,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            q_diag: [1e-4; 4],
            p0_diag: [1.0; 4],
            r_diag: None,
            velocity_guard: 0.01,
            missing_variance: 1e9,
            covariance_update: CovarianceUpdate::Simple,
        }
    }
}

impl FilterConfig {
    pub fn noise(&self, sensors: &SensorConfig) -> FilterNoise {
        let r = self.r_diag.unwrap_or([
            sensors.gps_var,
            sensors.gps_var,
            sensors.depth_var,
            sensors.heading_var,
        ]);
        FilterNoise {
            q: Matrix4::from_diagonal(&Vector4::from(self.q_diag)),
            r: Matrix4::from_diagonal(&Vector4::from(r)),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let nonneg = |v: &[f64; 4]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !nonneg(&self.q_diag) {
            out.push("filter.q_diag: entries must be finite and >= 0".to_string());
        }
        if !nonneg(&self.p0_diag) {
            out.push("filter.p0_diag: entries must be finite and >= 0".to_string());
        }
        if let Some(r) = &self.r_diag {
            if !nonneg(r) {
                out.push("filter.r_diag: entries must be finite and >= 0".to_string());
            }
        }
        if !(self.velocity_guard.is_finite() && self.velocity_guard >= 0.0) {
            out.push("filter.velocity_guard: must be >= 0".to_string());
        }
        if !(self.missing_variance.is_finite() && self.missing_variance > 0.0) {
            out.push("filter.missing_variance: must be > 0".to_string());
        }
        out
    }
}

/// `x̂ = x + v·dt + v̇·dt²/2`, with body `(u, v)` and `(u̇, v̇)` rotated into
/// NED by `psi`.
pub fn predict_state(s: &EstimatorState, inp: &PredictInputs, psi: f64) -> Vector4<f64> {
    let (sp, cp) = psi.sin_cos();
    let dt = inp.dt;
    let half_dt2 = 0.5 * dt * dt;
    let rot = |a: f64, b: f64| (cp * a - sp * b, sp * a + cp * b);
    let (vn, ve) = rot(inp.vel[0], inp.vel[1]);
    let (an, ae) = rot(inp.acc[0], inp.acc[1]);
    Vector4::new(
        s.x[0] + vn * dt + an * half_dt2,
        s.x[1] + ve * dt + ae * half_dt2,
        s.x[2] + inp.vel[2] * dt + inp.acc[2] * half_dt2,
        wrap_angle(s.x[3] + inp.vel[3] * dt + inp.acc[3] * half_dt2),
    )
}

/// Diagonal state-transition Jacobian, `1 + (v̇/v)dt + Δv̇·dt/(2v)` per axis.
pub fn transition_jacobian(inp: &PredictInputs, velocity_guard: f64) -> Matrix4<f64> {
    let diag = Vector4::from_fn(|i, _| {
        let v = inp.vel[i];
        if v.abs() < velocity_guard {
            1.0
        } else {
            let d_acc = inp.acc[i] - inp.acc_prev[i];
            1.0 + inp.acc[i] / v * inp.dt + d_acc * inp.dt / (2.0 * v)
        }
    });
    Matrix4::from_diagonal(&diag)
}

/// Measurement vector and per-tick covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub z: Vector4<f64>,
    pub r: Matrix4<f64>,
}

impl Measurement {
    /// Builds `z = (x_m, y_m, z_m, ψ_m)`. Absent channels take the predicted
    /// value and an inflated variance so `H` stays `I₄`.
    pub fn from_frame(
        frame: &SensorFrame,
        predicted: &Vector4<f64>,
        r: &Matrix4<f64>,
        missing_variance: f64,
    ) -> Self {
        let mut z = *predicted;
        let mut r = *r;
        let inflate = |i: usize, r: &mut Matrix4<f64>| {
            for j in 0..4 {
                r[(i, j)] = 0.0;
                r[(j, i)] = 0.0;
            }
            r[(i, i)] = missing_variance;
        };
        match frame.gps {
            Some([gx, gy]) => {
                z[0] = gx;
                z[1] = gy;
            }
            None => {
                inflate(0, &mut r);
                inflate(1, &mut r);
            }
        }
        match frame.depth {
            Some(d) => z[2] = d,
            None => inflate(2, &mut r),
        }
        z[3] = frame.heading;
        Self { z, r }
    }
}

/// Intermediate and final quantities of one filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub predicted: EstimatorState,
    pub posterior: EstimatorState,
    pub innovation: Vector4<f64>,
    pub jacobian: Matrix4<f64>,
}

fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Kalman update with `H = I₄`; the heading innovation is angle-aware.
pub fn update(
    predicted: &EstimatorState,
    meas: &Measurement,
    form: CovarianceUpdate,
) -> Result<(EstimatorState, Vector4<f64>)> {
    let xh = predicted.x;
    let ph = predicted.p;
    let mut y = meas.z - xh;
    y[3] = angle_diff(meas.z[3], xh[3]);

    let s = ph + meas.r;
    if !s.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| s.try_inverse())
        .ok_or(Error::SingularInnovation)?;
    if !s_inv.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let k = ph * s_inv;
    let mut x = xh + k * y;
    x[3] = wrap_angle(x[3]);

    let i_k = Matrix4::identity() - k;
    let p = match form {
        CovarianceUpdate::Simple => i_k * ph,
        CovarianceUpdate::Joseph => i_k * ph * i_k.transpose() + k * meas.r * k.transpose(),
    };
    Ok((EstimatorState { x, p: symmetrize(&p) }, y))
}

/// One predict + update cycle.
pub fn ekf_step(
    s: &EstimatorState,
    inp: &PredictInputs,
    frame: &SensorFrame,
    noise: &FilterNoise,
    cfg: &FilterConfig,
) -> Result<StepOutput> {
    let x_pred = predict_state(s, inp, s.psi());
    let f = transition_jacobian(inp, cfg.velocity_guard);
    let p_pred = symmetrize(&(f * s.p * f.transpose() + noise.q));
    let predicted = EstimatorState { x: x_pred, p: p_pred };
    let meas = Measurement::from_frame(frame, &x_pred, &noise.r, cfg.missing_variance);
    let (posterior, innovation) = update(&predicted, &meas, cfg.covariance_update)?;
    Ok(StepOutput {
        predicted,
        posterior,
        innovation,
        jacobian: f,
    })
}

/// Body velocity the reduced model sees: DVL linear rates and gyro yaw rate.
pub fn measured_velocity(frame: &SensorFrame) -> BodyVel6 {
    BodyVel6::new(frame.dvl[0], frame.dvl[1], frame.dvl[2], 0.0, 0.0, frame.imu_gyro[2])
}

/// Reduced-model accelerations from DVL, gyro and the applied thrusts (N).
pub fn dynamic_acceleration(
    frame: &SensorFrame,
    thrusts: &Thrusts,
    layout: &ThrusterLayout,
    params: &VehicleParams,
) -> Vector4<f64> {
    let tau = layout.wrench_from_thrusts(thrusts);
    accel_reduced(&measured_velocity(frame), &tau, params)
}

/// IMU accelerations; `ṙ` is the finite difference of consecutive gyro yaw
/// rates (zero when there is no previous reading).
pub fn kinematic_acceleration(frame: &SensorFrame, prev_gyro_r: Option<f64>, dt: f64) -> Vector4<f64> {
    let dr = match prev_gyro_r {
        Some(prev) if dt > 0.0 => (frame.imu_gyro[2] - prev) / dt,
        _ => 0.0,
    };
    Vector4::new(frame.imu_accel[0], frame.imu_accel[1], frame.imu_accel[2], dr)
}

/// Model context needed by the dynamic backend.
#[derive(Debug, Clone, Copy)]
pub struct ModelContext<'a> {
    pub params: &'a VehicleParams,
    pub layout: &'a ThrusterLayout,
    /// thrusts applied over the last interval, N
    pub thrusts: &'a Thrusts,
}

/// A filter instance with backend-specific memory.
#[derive(Debug, Clone)]
pub struct Estimator {
    backend: Backend,
    state: EstimatorState,
    noise: FilterNoise,
    cfg: FilterConfig,
    prev_acc: Option<Vector4<f64>>,
    prev_gyro_r: Option<f64>,
}

impl Estimator {
    pub fn new(backend: Backend, initial: Vector4<f64>, noise: FilterNoise, cfg: FilterConfig) -> Self {
        let p0 = Matrix4::from_diagonal(&Vector4::from(cfg.p0_diag));
        Self {
            backend,
            state: EstimatorState::new(initial, p0),
            noise,
            cfg,
            prev_acc: None,
            prev_gyro_r: None,
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn state(&self) -> &EstimatorState {
        &self.state
    }

    /// Seeds the gyro history so the first kinematic `ṙ` is a true difference.
    pub fn prime(&mut self, frame: &SensorFrame) {
        self.prev_gyro_r = Some(frame.imu_gyro[2]);
    }

    /// Backend acceleration for this frame.
    pub fn acceleration(&self, frame: &SensorFrame, dt: f64, ctx: &ModelContext<'_>) -> Vector4<f64> {
        match self.backend {
            Backend::Dynamic => dynamic_acceleration(frame, ctx.thrusts, ctx.layout, ctx.params),
            Backend::Kinematic => kinematic_acceleration(frame, self.prev_gyro_r, dt),
        }
    }

    /// Runs predict and update against `frame`; returns the step details and
    /// the acceleration used.
    pub fn step(
        &mut self,
        frame: &SensorFrame,
        dt: f64,
        ctx: &ModelContext<'_>,
    ) -> Result<(StepOutput, Vector4<f64>)> {
        let acc = self.acceleration(frame, dt, ctx);
        let m = measured_velocity(frame);
        let inputs = PredictInputs {
            vel: Vector4::new(m.u, m.v, m.w, m.r),
            acc,
            acc_prev: self.prev_acc.unwrap_or(acc),
            dt,
        };
        let out = ekf_step(&self.state, &inputs, frame, &self.noise, &self.cfg)?;
        self.state = out.posterior;
        self.prev_acc = Some(acc);
        self.prev_gyro_r = Some(frame.imu_gyro[2]);
        Ok((out, acc))
    }
}
