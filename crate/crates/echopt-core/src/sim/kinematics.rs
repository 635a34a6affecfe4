//! Differential-drive robot state and exact-arc motion integration.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Robot pose in the world frame. `heading` is kept wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && heading.is_finite()) {
            return Err(CoreError::NonFinite("pose coordinates"));
        }
        Ok(Self {
            x,
            y,
            heading: wrap_angle(heading),
        })
    }

    pub const fn origin() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        }
    }
}

/// Commanded body velocities: linear (m/s) and rotational (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v_lin: f64,
    pub omega_r: f64,
}

impl VelocityCommand {
    pub const ZERO: Self = Self {
        v_lin: 0.0,
        omega_r: 0.0,
    };

    pub fn new(v_lin: f64, omega_r: f64) -> Self {
        Self { v_lin, omega_r }
    }

    pub fn reversed(self) -> Self {
        Self {
            v_lin: -self.v_lin,
            omega_r: -self.omega_r,
        }
    }

    pub fn is_finite(self) -> bool {
        self.v_lin.is_finite() && self.omega_r.is_finite()
    }
}

/// Per-wheel slip fractions in [0, 1]: 0 grips, 1 spins freely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipState {
    pub left_slip: f64,
    pub right_slip: f64,
}

impl SlipState {
    pub const NONE: Self = Self {
        left_slip: 0.0,
        right_slip: 0.0,
    };

    pub fn new(left_slip: f64, right_slip: f64) -> Result<Self> {
        for s in [left_slip, right_slip] {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(CoreError::InvalidArgument(format!(
                    "slip fraction {s} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            left_slip,
            right_slip,
        })
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Integrates one control step of the differential drive.
///
/// The commanded (v, omega) pair is converted to wheel speeds, each wheel
/// is attenuated by (1 - slip), and the attenuated pair is converted back
/// and integrated along the exact circular arc. With zero slip the
/// executed motion equals the commanded motion, and two steps of `dt`
/// compose exactly into one step of `2 dt`.
pub fn step_kinematics(
    pose: Pose2D,
    cmd: VelocityCommand,
    dt: f64,
    slip: SlipState,
    wheel_base: f64,
) -> Result<Pose2D> {
    if !cmd.is_finite() || !dt.is_finite() || !wheel_base.is_finite() {
        return Err(CoreError::NonFinite("kinematics inputs"));
    }
    if dt <= 0.0 {
        return Err(CoreError::InvalidArgument(format!("dt {dt} must be > 0")));
    }
    if wheel_base <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "wheel_base {wheel_base} must be > 0"
        )));
    }

    let half = 0.5 * wheel_base;
    let v_left = (cmd.v_lin - cmd.omega_r * half) * (1.0 - slip.left_slip);
    let v_right = (cmd.v_lin + cmd.omega_r * half) * (1.0 - slip.right_slip);
    let v = 0.5 * (v_left + v_right);
    let omega = (v_right - v_left) / wheel_base;

    let h = pose.heading;
    let (x, y) = if omega.abs() < 1e-12 {
        (pose.x + v * dt * h.cos(), pose.y + v * dt * h.sin())
    } else {
        // Exact arc of radius v/omega.
        let radius = v / omega;
        let h1 = h + omega * dt;
        (
            pose.x + radius * (h1.sin() - h.sin()),
            pose.y - radius * (h1.cos() - h.cos()),
        )
    };

    Pose2D::new(x, y, h + omega * dt)
}

/// Executed body velocities after slip attenuation, without integrating.
pub fn executed_command(cmd: VelocityCommand, slip: SlipState, wheel_base: f64) -> VelocityCommand {
    let half = 0.5 * wheel_base;
    let v_left = (cmd.v_lin - cmd.omega_r * half) * (1.0 - slip.left_slip);
    let v_right = (cmd.v_lin + cmd.omega_r * half) * (1.0 - slip.right_slip);
    VelocityCommand {
        v_lin: 0.5 * (v_left + v_right),
        omega_r: (v_right - v_left) / wheel_base,
    }
}
