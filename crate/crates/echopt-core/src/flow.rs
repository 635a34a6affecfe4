//! Analytic next-frame predictors: naive polar shift and acoustic-flow
//! warping, built on the exact rigid-motion map of polar coordinates.
//!
//! Sign convention: theta > 0 is to the robot's left, and a positive
//! rotational command (counter-clockwise) moves scene content toward
//! negative theta. Under pure linear motion every point slides along a
//! flow line of constant `r * sin(theta)`.

use crate::error::{CoreError, Result};
use crate::sim::kinematics::VelocityCommand;
use crate::sim::sensor::Energyscape;

/// A point in the sensor's polar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r.is_finite() && theta.is_finite()) {
            return Err(CoreError::NonFinite("polar point"));
        }
        if r <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "polar range {r} must be > 0"
            )));
        }
        Ok(Self { r, theta })
    }

    pub fn in_fov(&self, fov: f64) -> bool {
        self.theta.abs() <= 0.5 * fov
    }
}

/// The constant a flow line intercepts: `R_c = r * sin(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConstant(pub f64);

/// Flow-line constant of the line passing through `p`.
pub fn flow_line_constant(p: PolarPoint) -> FlowConstant {
    FlowConstant(p.r * p.theta.sin())
}

/// Maps a scene point observed at `p` to its polar coordinates after the
/// robot executes `cmd` for `dt` seconds (exact-arc motion). Returns
/// `None` when the transformed point collapses onto the sensor origin.
pub fn polar_rigid_transform(
    p: PolarPoint,
    cmd: VelocityCommand,
    dt: f64,
) -> Option<PolarPoint> {
    // Zero motion is an exact identity; the Cartesian round-trip below
    // would perturb the coordinates by an ulp.
    if cmd.v_lin == 0.0 && cmd.omega_r == 0.0 {
        return Some(p);
    }
    // Sensor frame: x forward, y lateral-left.
    let x = p.r * p.theta.cos();
    let y = p.r * p.theta.sin();

    // Robot displacement over the exact arc, in the old frame.
    let phi = cmd.omega_r * dt;
    let (dx, dy) = if cmd.omega_r.abs() < 1e-12 {
        (cmd.v_lin * dt, 0.0)
    } else {
        let radius = cmd.v_lin / cmd.omega_r;
        (radius * phi.sin(), radius * (1.0 - phi.cos()))
    };

    // New-frame coordinates: un-translate, then un-rotate.
    let rx = x - dx;
    let ry = y - dy;
    let (sin_p, cos_p) = phi.sin_cos();
    let nx = cos_p * rx + sin_p * ry;
    let ny = -sin_p * rx + cos_p * ry;

    let r = nx.hypot(ny);
    if r < 1e-9 {
        return None;
    }
    Some(PolarPoint {
        r,
        theta: ny.atan2(nx),
    })
}

/// Naive predictor: translate the whole grid by `-v dt` along range and
/// `-omega dt` along azimuth, with bilinear interpolation. Content
/// shifted in from outside the grid is filled with the input's median
/// cell value as a noise-floor proxy.
pub fn naive_shift(scape: &Energyscape, cmd: VelocityCommand, dt: f64) -> Result<Energyscape> {
    scape.validate()?;
    if !cmd.is_finite() || !dt.is_finite() {
        return Err(CoreError::NonFinite("naive_shift inputs"));
    }
    let fill = scape.median();
    let dk = cmd.v_lin * dt / scape.range_bin_width();
    let dj = cmd.omega_r * dt / scape.azimuth_bin_width();
    let mut out = scape.clone();
    for k in 0..scape.num_ranges {
        for j in 0..scape.num_azimuths {
            let v = scape
                .sample_bilinear(k as f64 + dk, j as f64 + dj)
                .unwrap_or(fill);
            out.set_cell(k, j, v);
        }
    }
    Ok(out)
}

/// Acoustic-flow predictor: inverse warping under the exact rigid-motion
/// map. Each output cell pulls from the source coordinate obtained by
/// transforming it with the time-reversed command; sources outside the
/// grid (or at the origin) are filled with the median cell value.
pub fn flow_warp(scape: &Energyscape, cmd: VelocityCommand, dt: f64) -> Result<Energyscape> {
    scape.validate()?;
    if !cmd.is_finite() || !dt.is_finite() {
        return Err(CoreError::NonFinite("flow_warp inputs"));
    }
    let fill = scape.median();
    let reversed = cmd.reversed();
    let mut out = scape.clone();
    for k in 0..scape.num_ranges {
        let r = scape.range_bin_center(k);
        for j in 0..scape.num_azimuths {
            let theta = scape.azimuth_bin_center(j);
            let v = polar_rigid_transform(PolarPoint { r, theta }, reversed, dt)
                .and_then(|src| {
                    if src.r == r && src.theta == theta {
                        // Identity source: read the cell directly rather
                        // than converting coordinates back to bins.
                        Some(scape.cell(k, j))
                    } else {
                        let (kf, jf) = scape.bin_coords(src.r, src.theta);
                        scape.sample_bilinear(kf, jf)
                    }
                })
                .unwrap_or(fill);
            out.set_cell(k, j, v);
        }
    }
    Ok(out)
}
