//! Simulation and localization toolkit for a RexROV-class underwater vehicle.
//!
//! Truth dynamics, thruster allocation, noisy sensors, a four-state EKF with
//! dynamic and kinematic prediction backends, pure-pursuit guidance and
//! trajectory metrics.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod frames;
pub mod sensors;
pub mod simcore;
pub mod thrusters;

pub use error::{Error, Result};
