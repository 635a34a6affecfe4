//! World, robot, and sensor simulation: differential-drive kinematics
//! with wheel slip, polar energyscape rendering, and SNR-scheduled noise.

pub mod kinematics;
pub mod noise;
pub mod render;
pub mod sensor;
pub mod world;

pub use kinematics::{step_kinematics, Pose2D, SlipState, VelocityCommand};
pub use noise::{inject_noise, BurstSchedule, SNR_CLEAN};
pub use render::render_energyscape;
pub use sensor::{Energyscape, SensorConfig};
pub use world::{Reflector, ReflectorMap};
