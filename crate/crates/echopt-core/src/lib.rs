//! Workbench for predictive processing on 2D in-air imaging sonar.
//!
//! The crate simulates a differential-drive robot observing a world of
//! point reflectors through a polar energyscape sensor, and implements
//! three next-frame predictors over those energyscapes: a naive polar
//! shift, an acoustic-flow warp, and EchoPT, a small transformer trained
//! from scratch on simulated sequences. On top of the predictors sit a
//! wheel-slip detector and a corridor-following experiment that swaps
//! auto-regressive predictions in for noise-corrupted measurements.
//!
//! Batch entry points fan out over rayon when the `parallel` feature
//! (default) is enabled and fall back to plain iteration otherwise; both
//! paths produce identical bytes because outputs are collected in input
//! order and all per-item randomness is derived from `(seed, index)`.

pub mod dataset;
pub mod error;
pub mod flow;
pub mod metrics;
pub mod net;
pub mod parallel;
pub mod predict;
pub mod sim;
pub mod tensor;

pub use error::{CoreError, Result};
pub use sim::kinematics::{Pose2D, SlipState, VelocityCommand};
pub use sim::sensor::{Energyscape, SensorConfig};
pub use sim::world::ReflectorMap;
