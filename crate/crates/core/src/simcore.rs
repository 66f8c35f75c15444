//! Ground-truth propagation and the closed-loop run scheduler.
//!
//! Physics runs at `dt_physics`; every filter tick the scheduler samples the
//! sensors, steps the estimator(s), runs the pure pursuit controller on the
//! estimated pose and re-allocates thrust. Thrust is held constant between
//! ticks.

use std::collections::BTreeMap;

use nalgebra::{Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, PurePursuit};
use crate::dynamics::{accel_full, VehicleParams, Wrench6};
use crate::error::{Error, Result};
use crate::estimation::{Backend, Estimator, FilterConfig, ModelContext};
use crate::evaluation::{error_report, Course, ErrorReport};
use crate::frames::{build_transform, wrap_angle, BodyAcc6, BodyVel6, Pose6};
use crate::sensors::{SensorConfig, SensorFrame, SensorSuite, TruthSample};
use crate::thrusters::{Allocator, HeaveFormula, ThrustLookup, ThrusterLayout, Thrusts};

/// Any state component beyond this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TruthState {
    pub t: f64,
    pub pose: Pose6,
    pub vel: BodyVel6,
}

impl TruthState {
    fn check(&self) -> Result<()> {
        let bad = |v: f64| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT;
        if self.pose.to_vector().iter().chain(self.vel.to_vector().iter()).any(|v| bad(*v)) {
            return Err(Error::Divergence {
                t: self.t,
                limit: DIVERGENCE_LIMIT,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// velocity first, then pose with the updated velocity
    #[default]
    SemiImplicitEuler,
    Rk4,
}

fn derivative(pose: &Pose6, vel: &BodyVel6, tau: &Wrench6, params: &VehicleParams) -> Result<(Vector6<f64>, Vector6<f64>)> {
    let eta_dot = build_transform(pose.attitude())? * vel.to_vector();
    let nu_dot = accel_full(vel, pose, tau, params).to_vector();
    Ok((eta_dot, nu_dot))
}

/// Advances the truth state by `dt` under a constant wrench.
pub fn integrate_step(
    s: &TruthState,
    tau: &Wrench6,
    params: &VehicleParams,
    dt: f64,
    integrator: Integrator,
) -> Result<TruthState> {
    let eta = s.pose.to_vector();
    let nu = s.vel.to_vector();
    let (eta, nu) = match integrator {
        Integrator::SemiImplicitEuler => {
            let acc = accel_full(&s.vel, &s.pose, tau, params).to_vector();
            let nu = nu + acc * dt;
            let eta = eta + build_transform(s.pose.attitude())? * nu * dt;
            (eta, nu)
        }
        Integrator::Rk4 => {
            let f = |e: &Vector6<f64>, n: &Vector6<f64>| {
                derivative(&Pose6::from_vector(e), &BodyVel6::from_vector(n), tau, params)
            };
            let (k1e, k1n) = f(&eta, &nu)?;
            let (k2e, k2n) = f(&(eta + k1e * (dt / 2.0)), &(nu + k1n * (dt / 2.0)))?;
            let (k3e, k3n) = f(&(eta + k2e * (dt / 2.0)), &(nu + k2n * (dt / 2.0)))?;
            let (k4e, k4n) = f(&(eta + k3e * dt), &(nu + k3n * dt))?;
            (
                eta + (k1e + k2e * 2.0 + k3e * 2.0 + k4e) * (dt / 6.0),
                nu + (k1n + k2n * 2.0 + k3n * 2.0 + k4n) * (dt / 6.0),
            )
        }
    };
    let mut pose = Pose6::from_vector(&eta);
    pose.psi = wrap_angle(pose.psi);
    let next = TruthState {
        t: s.t + dt,
        pose,
        vel: BodyVel6::from_vector(&nu),
    };
    next.check()?;
    Ok(next)
}

/// Velocity and depth loops between the guidance commands and allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerLoopConfig {
    /// surge-speed loop bandwidth, 1/s
    pub surge_gain: f64,
    /// sway loop bandwidth (sway setpoint is zero), 1/s
    pub sway_gain: f64,
    /// yaw-rate loop bandwidth, 1/s
    pub yaw_rate_gain: f64,
    /// depth proportional gain, 1/s²
    pub depth_kp: f64,
    /// heave-velocity damping gain, 1/s
    pub depth_kd: f64,
    /// depth errors smaller than this get feedforward only, m
    pub depth_deadband: f64,
}

impl Default for InnerLoopConfig {
    fn default() -> Self {
        Self {
            surge_gain: 1.0,
            sway_gain: 1.0,
            yaw_rate_gain: 1.0,
            depth_kp: 0.05,
            depth_kd: 0.5,
            depth_deadband: 0.5,
        }
    }
}

impl InnerLoopConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = [
            ("surge_gain", self.surge_gain),
            ("sway_gain", self.sway_gain),
            ("yaw_rate_gain", self.yaw_rate_gain),
            ("depth_kp", self.depth_kp),
            ("depth_kd", self.depth_kd),
            ("depth_deadband", self.depth_deadband),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("inner_loop.{name}: must be finite and >= 0"));
            }
        }
        out
    }

    /// Desired body wrench for `(u_c, r_c)` setpoints and a depth target.
    pub fn wrench(
        &self,
        params: &VehicleParams,
        surge_cmd: f64,
        yaw_rate_cmd: f64,
        depth_target: f64,
        depth_est: f64,
        frame: &SensorFrame,
    ) -> Wrench6 {
        let lin = params.linear_damping;
        let quad = params.quadratic_damping;
        let inertia = params.effective_inertia();
        let tx = -(lin.xu + quad.xuu * surge_cmd.abs()) * surge_cmd
            + self.surge_gain * inertia[0] * (surge_cmd - frame.dvl[0]);
        // cancel the centripetal coupling, then damp residual sideslip
        let (u, v, r) = (frame.dvl[0], frame.dvl[1], frame.imu_gyro[2]);
        let ty = (params.mass + params.added_mass.xdu) * r * u - self.sway_gain * inertia[1] * v;
        let tpsi = -(lin.nr + quad.nrr * yaw_rate_cmd.abs()) * yaw_rate_cmd
            + self.yaw_rate_gain * inertia[5] * (yaw_rate_cmd - frame.imu_gyro[2]);
        let mut tz = params.buoyancy - params.weight();
        let dz = depth_target - depth_est;
        if dz.abs() > self.depth_deadband {
            tz += inertia[2] * (self.depth_kp * dz - self.depth_kd * frame.dvl[2]);
        }
        Wrench6::planar(tx, ty, tz, tpsi)
    }
}

/// Which pose the controller steers from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlSource {
    #[default]
    Estimate,
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThrusterConfig {
    pub heave_formula: HeaveFormula,
    /// per-thruster |thrust| limit, N
    pub clamp: Option<f64>,
}

impl Default for ThrusterConfig {
    fn default() -> Self {
        Self {
            heave_formula: HeaveFormula::Corrected,
            clamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dt_physics: f64,
    pub filter_rate: f64,
    pub timeout: f64,
    pub integrator: Integrator,
    pub course: Course,
    pub params: VehicleParams,
    pub sensors: SensorConfig,
    pub controller: ControllerConfig,
    pub inner_loop: InnerLoopConfig,
    pub filter: FilterConfig,
    pub thrusters: ThrusterConfig,
    pub lookup: ThrustLookup,
    pub control_source: ControlSource,
    /// active filters; the first one present in `[Dynamic, Kinematic]` order
    /// drives the controller
    pub backends: Vec<Backend>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(course: Course) -> Self {
        Self {
            dt_physics: 0.01,
            filter_rate: 10.0,
            timeout: 900.0,
            integrator: Integrator::SemiImplicitEuler,
            course,
            params: VehicleParams::default(),
            sensors: SensorConfig::default(),
            controller: ControllerConfig::default(),
            inner_loop: InnerLoopConfig::default(),
            filter: FilterConfig::default(),
            thrusters: ThrusterConfig::default(),
            lookup: ThrustLookup::identity(),
            control_source: ControlSource::Estimate,
            backends: vec![Backend::Dynamic],
            seed: 0,
        }
    }

    /// Physics steps per filter tick.
    pub fn substeps(&self) -> usize {
        (1.0 / (self.filter_rate * self.dt_physics)).round() as usize
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt_physics.is_finite() && self.dt_physics > 0.0) {
            out.push("sim.dt_physics: must be > 0".to_string());
        }
        if !(self.filter_rate.is_finite() && self.filter_rate > 0.0) {
            out.push("sim.filter_rate: must be > 0".to_string());
        }
        if out.is_empty() {
            let ratio = 1.0 / (self.filter_rate * self.dt_physics);
            if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 {
                out.push(format!(
                    "sim.filter_rate: filter period must be a whole number of physics steps (got {ratio})"
                ));
            }
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            out.push("sim.timeout: must be > 0".to_string());
        }
        if self.backends.is_empty() {
            out.push("backends: at least one backend is required".to_string());
        }
        if let Some(c) = self.thrusters.clamp {
            if !(c.is_finite() && c > 0.0) {
                out.push("thrusters.clamp: must be > 0".to_string());
            }
        }
        out.extend(self.params.violations());
        out.extend(self.sensors.violations(self.filter_rate));
        out.extend(self.controller.violations());
        out.extend(self.inner_loop.violations());
        out.extend(self.filter.violations());
        out
    }

    fn controlling_backend(&self) -> Option<Backend> {
        Backend::ALL.into_iter().find(|b| self.backends.contains(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TruthRecord {
    pub t: f64,
    pub pose: Pose6,
    pub vel: BodyVel6,
    pub acc: BodyAcc6,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub t: f64,
    pub predicted: Vector4<f64>,
    pub posterior: Vector4<f64>,
    /// posterior covariance diagonal
    pub p_diag: Vector4<f64>,
    pub innovation: Vector4<f64>,
    /// backend acceleration `(u̇, v̇, ẇ, ṙ)`
    pub acc: Vector4<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CommandRecord {
    pub t: f64,
    pub waypoint: usize,
    pub delta: f64,
    pub surge_cmd: f64,
    pub yaw_rate_cmd: f64,
    /// desired wrench handed to allocation
    pub tau: Wrench6,
    pub commands: Thrusts,
}

pub type XyPath = Vec<(f64, f64)>;

/// Everything recorded during one run, one row per filter tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub truth: Vec<TruthRecord>,
    pub sensors: Vec<SensorFrame>,
    pub estimates: BTreeMap<Backend, Vec<EstimateRecord>>,
    pub commands: Vec<CommandRecord>,
    /// largest |φ| and |θ| seen over every physics step
    pub max_abs_roll: f64,
    pub max_abs_pitch: f64,
    pub completed: bool,
}

impl RunLog {
    /// Truth xy at the ticks where `backend` produced an estimate.
    pub fn aligned_xy(&self, backend: Backend) -> Option<(XyPath, XyPath)> {
        let est = self.estimates.get(&backend)?;
        let mut truth = Vec::with_capacity(est.len());
        let mut j = 0;
        for e in est {
            while j < self.truth.len() && self.truth[j].t < e.t - 1e-9 {
                j += 1;
            }
            let r = self.truth.get(j)?;
            truth.push((r.pose.x, r.pose.y));
        }
        let xy = est.iter().map(|e| (e.posterior[0], e.posterior[1])).collect();
        Some((truth, xy))
    }

    pub fn truth_xy(&self) -> Vec<(f64, f64)> {
        self.truth.iter().map(|r| (r.pose.x, r.pose.y)).collect()
    }

    /// Metrics for one backend; `None` if it did not run or logged nothing.
    pub fn report(&self, backend: Backend, reference: &[(f64, f64)]) -> Option<Result<ErrorReport>> {
        let (truth, est) = self.aligned_xy(backend)?;
        if est.is_empty() {
            return None;
        }
        let mut rep = error_report(&truth, &est, reference);
        if let Ok(r) = rep.as_mut() {
            r.total = match crate::evaluation::total_error(&self.truth_xy(), reference) {
                Ok(v) => v,
                Err(e) => return Some(Err(e)),
            };
        }
        Some(rep)
    }
}

/// A run that stopped early; the log covers everything up to the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub log: Box<RunLog>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunFailure {}

/// Runs one closed-loop episode from the first waypoint to the last.
pub fn run_episode(cfg: &RunConfig) -> std::result::Result<RunLog, RunFailure> {
    let mut log = RunLog::default();
    match run_inner(cfg, &mut log) {
        Ok(()) => Ok(log),
        Err(error) => Err(RunFailure {
            error,
            log: Box::new(log),
        }),
    }
}

fn run_inner(cfg: &RunConfig, log: &mut RunLog) -> Result<()> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems.join("; ")));
    }
    let layout = ThrusterLayout::default().with_heave_formula(cfg.thrusters.heave_formula);
    let allocator = Allocator::new(&layout)?.with_clamp(cfg.thrusters.clamp);
    let mut pursuit = PurePursuit::new(cfg.course.waypoints.clone(), cfg.controller)?;
    let mut suite = SensorSuite::new(cfg.sensors, cfg.filter_rate, cfg.seed);

    let start = cfg.course.waypoints[0];
    let mut truth = TruthState {
        t: 0.0,
        pose: Pose6::planar(start.x, start.y, start.z, cfg.course.initial_heading()),
        vel: BodyVel6::default(),
    };
    let initial = Vector4::new(truth.pose.x, truth.pose.y, truth.pose.z, truth.pose.psi);
    let noise = cfg.filter.noise(&cfg.sensors);
    let mut estimators: Vec<Estimator> = Backend::ALL
        .into_iter()
        .filter(|b| cfg.backends.contains(b))
        .map(|b| Estimator::new(b, initial, noise, cfg.filter))
        .collect();
    for b in &estimators {
        log.estimates.insert(b.backend(), Vec::new());
    }
    let controlling = cfg.controlling_backend();

    let dt_filter = 1.0 / cfg.filter_rate;
    let substeps = cfg.substeps();
    let mut tau_applied = Wrench6::default();
    let mut thrusts: Thrusts = [0.0; 8];
    let mut tick: u64 = 0;

    loop {
        let t = tick as f64 * dt_filter;
        truth.t = t;
        let acc = accel_full(&truth.vel, &truth.pose, &tau_applied, &cfg.params);
        log.truth.push(TruthRecord {
            t,
            pose: truth.pose,
            vel: truth.vel,
            acc,
        });
        let sample = TruthSample {
            pose: truth.pose,
            vel: truth.vel,
            acc,
        };
        let frame = suite.sample(&sample, t, tick);
        log.sensors.push(frame);

        let ctx = ModelContext {
            params: &cfg.params,
            layout: &layout,
            thrusts: &thrusts,
        };
        for est in estimators.iter_mut() {
            if tick == 0 {
                est.prime(&frame);
                continue;
            }
            let (out, acc) = est.step(&frame, dt_filter, &ctx)?;
            log.estimates.get_mut(&est.backend()).expect("registered").push(EstimateRecord {
                t,
                predicted: out.predicted.x,
                posterior: out.posterior.x,
                p_diag: out.posterior.p.diagonal(),
                innovation: out.innovation,
                acc,
            });
        }

        let nav_pose = match (cfg.control_source, controlling) {
            (ControlSource::Estimate, Some(b)) => {
                let x = estimators.iter().find(|e| e.backend() == b).expect("active").state().x;
                Pose6::planar(x[0], x[1], x[2], x[3])
            }
            _ => truth.pose,
        };
        let ctl = pursuit.update(&nav_pose)?;
        if ctl.done {
            log.completed = true;
            return Ok(());
        }
        let desired = cfg
            .inner_loop
            .wrench(&cfg.params, ctl.surge, ctl.yaw_rate, ctl.depth, nav_pose.z, &frame);
        let commands = cfg.lookup.commands(&allocator.allocate(&desired));
        thrusts = cfg.lookup.thrusts(&commands);
        tau_applied = layout.wrench_from_thrusts(&thrusts);
        log.commands.push(CommandRecord {
            t,
            waypoint: ctl.target,
            delta: ctl.delta,
            surge_cmd: ctl.surge,
            yaw_rate_cmd: ctl.yaw_rate,
            tau: desired,
            commands,
        });

        if t + dt_filter > cfg.timeout + 1e-9 {
            return Err(Error::Timeout { limit: cfg.timeout });
        }
        for _ in 0..substeps {
            truth = integrate_step(&truth, &tau_applied, &cfg.params, cfg.dt_physics, cfg.integrator)?;
            log.max_abs_roll = log.max_abs_roll.max(truth.pose.phi.abs());
            log.max_abs_pitch = log.max_abs_pitch.max(truth.pose.theta.abs());
        }
        tick += 1;
    }
}
