//! Simulated IMU, DVL, GPS and pressure-depth sensors.
//!
//! Every noise channel draws from its own ChaCha8 stream: all channels share
//! the run seed and differ only in the ChaCha stream id (see [`Channel`]).
//! Adding a channel or skipping draws on one channel therefore never shifts
//! the random sequence seen by any other channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::frames::{wrap_angle, BodyAcc6, BodyVel6, Pose6};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// IMU accelerometer white-noise variance, (m/s²)² per axis
    pub imu_accel_var: f64,
    /// gyro white-noise variance, (rad/s)²
    pub imu_gyro_var: f64,
    /// accelerometer bias random-walk increment variance per IMU sample
    pub imu_bias_walk_var: f64,
    /// DVL velocity variance, (m/s)²
    pub dvl_var: f64,
    /// GPS horizontal variance, m²
    pub gps_var: f64,
    /// pressure-depth variance, m²
    pub depth_var: f64,
    /// compass heading variance, rad²
    pub heading_var: f64,
    pub imu_rate: f64,
    pub dvl_rate: f64,
    pub gps_rate: f64,
    pub depth_rate: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            imu_accel_var: 0.004,
            imu_gyro_var: 1e-5,
            imu_bias_walk_var: 1e-6,
            dvl_var: 1e-4,
            gps_var: 0.25,
            depth_var: 0.01,
            heading_var: 1e-4,
            imu_rate: 10.0,
            dvl_rate: 10.0,
            gps_rate: 10.0,
            depth_rate: 10.0,
        }
    }
}

impl SensorConfig {
    /// All variances zero, default rates.
    pub fn noiseless() -> Self {
        Self {
            imu_accel_var: 0.0,
            imu_gyro_var: 0.0,
            imu_bias_walk_var: 0.0,
            dvl_var: 0.0,
            gps_var: 0.0,
            depth_var: 0.0,
            heading_var: 0.0,
            ..Self::default()
        }
    }

    pub fn violations(&self, filter_rate: f64) -> Vec<String> {
        let mut out = Vec::new();
        let vars = [
            ("imu_accel_var", self.imu_accel_var),
            ("imu_gyro_var", self.imu_gyro_var),
            ("imu_bias_walk_var", self.imu_bias_walk_var),
            ("dvl_var", self.dvl_var),
            ("gps_var", self.gps_var),
            ("depth_var", self.depth_var),
            ("heading_var", self.heading_var),
        ];
        for (name, v) in vars {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("sensors.{name}: variance must be finite and >= 0 (got {v})"));
            }
        }
        let rates = [
            ("imu_rate", self.imu_rate),
            ("dvl_rate", self.dvl_rate),
            ("gps_rate", self.gps_rate),
            ("depth_rate", self.depth_rate),
        ];
        for (name, r) in rates {
            if !(r.is_finite() && r > 0.0) {
                out.push(format!("sensors.{name}: rate must be > 0 (got {r})"));
            }
        }
        for (name, r) in [("imu_rate", self.imu_rate), ("dvl_rate", self.dvl_rate)] {
            if r > 0.0 && (r - filter_rate).abs() > 1e-9 {
                out.push(format!(
                    "sensors.{name}: must equal the filter rate ({filter_rate} Hz), got {r}"
                ));
            }
        }
        for (name, r) in [("gps_rate", self.gps_rate), ("depth_rate", self.depth_rate)] {
            if r > 0.0 && filter_rate > 0.0 {
                let ratio = filter_rate / r;
                if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 {
                    out.push(format!(
                        "sensors.{name}: must divide the filter rate ({filter_rate} Hz), got {r}"
                    ));
                }
            }
        }
        out
    }
}

/// Noise channels, numbered by their ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Channel {
    ImuAccel = 0,
    Gyro = 1,
    Heading = 2,
    Dvl = 3,
    Gps = 4,
    Depth = 5,
    BiasWalk = 6,
}

const CHANNELS: usize = 7;

/// Per-channel seeded generators.
#[derive(Debug, Clone)]
pub struct SensorRng {
    streams: [ChaCha8Rng; CHANNELS],
}

impl SensorRng {
    pub fn new(seed: u64) -> Self {
        let streams = std::array::from_fn(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            rng
        });
        Self { streams }
    }

    /// Zero-mean Gaussian draw with the given variance.
    pub fn gaussian(&mut self, ch: Channel, variance: f64) -> f64 {
        let z: f64 = self.streams[ch as usize].sample(StandardNormal);
        z * variance.sqrt()
    }
}

/// Accelerometer bias.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasState {
    pub accel_bias: [f64; 3],
}

/// One random-walk increment of the accelerometer bias.
pub fn advance_bias(b: &BiasState, cfg: &SensorConfig, rng: &mut SensorRng) -> BiasState {
    let mut next = *b;
    for axis in next.accel_bias.iter_mut() {
        *axis += rng.gaussian(Channel::BiasWalk, cfg.imu_bias_walk_var);
    }
    next
}

/// True vehicle state at a sampling instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TruthSample {
    pub pose: Pose6,
    pub vel: BodyVel6,
    pub acc: BodyAcc6,
}

/// Readings available at one filter tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t: f64,
    /// body-frame acceleration, m/s²
    pub imu_accel: [f64; 3],
    /// body rates (p, q, r), rad/s
    pub imu_gyro: [f64; 3],
    /// compass heading in [0, 2π)
    pub heading: f64,
    /// body velocity (u, v, w), m/s
    pub dvl: [f64; 3],
    /// NED (x, y) fix, m
    pub gps: Option<[f64; 2]>,
    /// NED z, m
    pub depth: Option<f64>,
}

/// Which optional channels report on a given tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Availability {
    pub gps: bool,
    pub depth: bool,
}

impl Availability {
    pub const ALL: Self = Self {
        gps: true,
        depth: true,
    };

    pub fn at_tick(cfg: &SensorConfig, filter_rate: f64, tick: u64) -> Self {
        let every = |rate: f64| ((filter_rate / rate).round() as u64).max(1);
        Self {
            gps: tick.is_multiple_of(every(cfg.gps_rate)),
            depth: tick.is_multiple_of(every(cfg.depth_rate)),
        }
    }
}

/// Samples every channel: truth + bias (accelerometer only) + white noise.
pub fn sample_sensors(
    truth: &TruthSample,
    bias: &BiasState,
    cfg: &SensorConfig,
    rng: &mut SensorRng,
    t: f64,
    avail: Availability,
) -> SensorFrame {
    let acc = [truth.acc.du, truth.acc.dv, truth.acc.dw];
    let gyro = [truth.vel.p, truth.vel.q, truth.vel.r];
    let dvl = [truth.vel.u, truth.vel.v, truth.vel.w];

    let imu_accel: [f64; 3] = std::array::from_fn(|i| {
        acc[i] + bias.accel_bias[i] + rng.gaussian(Channel::ImuAccel, cfg.imu_accel_var)
    });
    let imu_gyro: [f64; 3] =
        std::array::from_fn(|i| gyro[i] + rng.gaussian(Channel::Gyro, cfg.imu_gyro_var));
    let heading = wrap_angle(truth.pose.psi + rng.gaussian(Channel::Heading, cfg.heading_var));
    let dvl: [f64; 3] = std::array::from_fn(|i| dvl[i] + rng.gaussian(Channel::Dvl, cfg.dvl_var));
    let gps = avail.gps.then(|| {
        [
            truth.pose.x + rng.gaussian(Channel::Gps, cfg.gps_var),
            truth.pose.y + rng.gaussian(Channel::Gps, cfg.gps_var),
        ]
    });
    let depth = avail
        .depth
        .then(|| truth.pose.z + rng.gaussian(Channel::Depth, cfg.depth_var));

    SensorFrame {
        t,
        imu_accel,
        imu_gyro,
        heading,
        dvl,
        gps,
        depth,
    }
}

/// Bias state, generators and schedule for one simulated timeline.
#[derive(Debug, Clone)]
pub struct SensorSuite {
    cfg: SensorConfig,
    filter_rate: f64,
    rng: SensorRng,
    bias: BiasState,
}

impl SensorSuite {
    pub fn new(cfg: SensorConfig, filter_rate: f64, seed: u64) -> Self {
        Self {
            cfg,
            filter_rate,
            rng: SensorRng::new(seed),
            bias: BiasState::default(),
        }
    }

    pub fn bias(&self) -> &BiasState {
        &self.bias
    }

    /// Advances the bias walk and samples all channels due on `tick`.
    pub fn sample(&mut self, truth: &TruthSample, t: f64, tick: u64) -> SensorFrame {
        self.bias = advance_bias(&self.bias, &self.cfg, &mut self.rng);
        let avail = Availability::at_tick(&self.cfg, self.filter_rate, tick);
        sample_sensors(truth, &self.bias, &self.cfg, &mut self.rng, t, avail)
    }
}
