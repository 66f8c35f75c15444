//! Pure pursuit waypoint following.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{angle_diff, Pose6};

/// NED waypoint, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn xy_distance(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// How the pursuit angle α is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteeringMode {
    /// bearing to a point `L_d` ahead of the pose's projection on the segment
    #[default]
    LookAhead,
    /// slope of the previous→target segment only
    SegmentSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// `L_d`, m
    pub look_ahead: f64,
    /// `L`, m
    pub vehicle_length: f64,
    pub gain: f64,
    pub vicinity_radius: f64,
    /// m/s
    pub cruise_speed: f64,
    pub steering_mode: SteeringMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            look_ahead: 1.0,
            vehicle_length: 1.0,
            gain: 0.3,
            vicinity_radius: 0.5,
            cruise_speed: 0.3,
            steering_mode: SteeringMode::LookAhead,
        }
    }
}

impl ControllerConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.look_ahead) {
            out.push("controller.look_ahead: must be > 0".to_string());
        }
        if !positive(self.vehicle_length) {
            out.push("controller.vehicle_length: must be > 0".to_string());
        }
        if !self.gain.is_finite() {
            out.push("controller.gain: must be finite".to_string());
        }
        if !positive(self.vicinity_radius) {
            out.push("controller.vicinity_radius: must be > 0".to_string());
        }
        if !(positive(self.cruise_speed) && self.cruise_speed <= 0.3) {
            out.push("controller.cruise_speed: must be in (0, 0.3]".to_string());
        }
        out
    }
}

/// `δ = atan(2·sin(α)·L / L_d)`.
pub fn steering_from_alpha(alpha: f64, cfg: &ControllerConfig) -> f64 {
    let k = 2.0 * alpha.sin() / cfg.look_ahead;
    (k * cfg.vehicle_length).atan()
}

/// Point `L_d` past the pose's projection onto `prev → target`, clamped to
/// `target`.
pub fn look_ahead_point(pose: &Pose6, target: &Waypoint, prev: &Waypoint, look_ahead: f64) -> Result<(f64, f64)> {
    let (dx, dy) = (target.x - prev.x, target.y - prev.y);
    let len = dx.hypot(dy);
    if len < 1e-9 {
        return Err(Error::DegenerateSegment);
    }
    let (ex, ey) = (dx / len, dy / len);
    let along = (pose.x - prev.x) * ex + (pose.y - prev.y) * ey;
    let s = (along + look_ahead).min(len);
    Ok((prev.x + s * ex, prev.y + s * ey))
}

/// Pursuit angle α in (−π, π].
pub fn pursuit_angle(pose: &Pose6, target: &Waypoint, prev: &Waypoint, cfg: &ControllerConfig) -> Result<f64> {
    let bearing = match cfg.steering_mode {
        SteeringMode::SegmentSlope => {
            if target.xy_distance(prev.x, prev.y) < 1e-9 {
                return Err(Error::DegenerateSegment);
            }
            (target.y - prev.y).atan2(target.x - prev.x)
        }
        SteeringMode::LookAhead => {
            let (lx, ly) = look_ahead_point(pose, target, prev, cfg.look_ahead)?;
            (ly - pose.y).atan2(lx - pose.x)
        }
    };
    Ok(angle_diff(bearing, pose.psi))
}

/// Steering angle δ in rad.
pub fn steering(pose: &Pose6, target: &Waypoint, prev: &Waypoint, cfg: &ControllerConfig) -> Result<f64> {
    Ok(steering_from_alpha(pursuit_angle(pose, target, prev, cfg)?, cfg))
}

/// Returns the new target index and whether the final waypoint is reached.
pub fn advance_waypoint(
    pose: &Pose6,
    waypoints: &[Waypoint],
    current: usize,
    cfg: &ControllerConfig,
) -> Result<(usize, bool)> {
    if waypoints.is_empty() {
        return Err(Error::EmptyWaypoints);
    }
    let last = waypoints.len() - 1;
    let mut i = current.min(last);
    loop {
        if waypoints[i].xy_distance(pose.x, pose.y) >= cfg.vicinity_radius {
            return Ok((i, false));
        }
        if i == last {
            return Ok((i, true));
        }
        i += 1;
    }
}

/// `(surge speed, yaw rate)` setpoints.
pub fn command(delta: f64, cfg: &ControllerConfig) -> (f64, f64) {
    (cfg.cruise_speed, cfg.gain * delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    pub target: usize,
    pub delta: f64,
    pub surge: f64,
    pub yaw_rate: f64,
    pub depth: f64,
    pub done: bool,
}

/// Waypoint-tracking state machine around the free functions above.
#[derive(Debug, Clone)]
pub struct PurePursuit {
    cfg: ControllerConfig,
    waypoints: Vec<Waypoint>,
    target: usize,
    done: bool,
}

impl PurePursuit {
    /// The vehicle is assumed to start near the first waypoint, so the first
    /// target is index 1.
    pub fn new(waypoints: Vec<Waypoint>, cfg: ControllerConfig) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::EmptyWaypoints);
        }
        if waypoints.len() < 2 {
            return Err(Error::InvalidCourse("need at least two waypoints".into()));
        }
        Ok(Self {
            cfg,
            waypoints,
            target: 1,
            done: false,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn update(&mut self, pose: &Pose6) -> Result<ControlOutput> {
        if !self.done {
            let (i, done) = advance_waypoint(pose, &self.waypoints, self.target, &self.cfg)?;
            self.target = i.max(1);
            self.done = done;
        }
        let target = self.waypoints[self.target];
        let delta = if self.done {
            0.0
        } else {
            steering(pose, &target, &self.waypoints[self.target - 1], &self.cfg)?
        };
        let (surge, yaw_rate) = command(delta, &self.cfg);
        Ok(ControlOutput {
            target: self.target,
            delta,
            surge,
            yaw_rate,
            depth: target.z,
            done: self.done,
        })
    }
}
