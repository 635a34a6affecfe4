//! Energyscape rendering: deposits one point-spread blob per reflector.
//!
//! Each reflector visible from the sensor contributes
//! `reflectivity * D(theta) / max(r, R_MIN)^2` of energy, spread by a
//! separable PSF: a Gaussian of width `range_sigma` along range and a
//! squared sinc with first null at `beam_null_spacing` along azimuth.
//! `D` is a Gaussian directivity of width `directivity_sigma`. After all
//! deposits, a constant noise floor `base_snr_db` below the strongest
//! deposit is added, so an empty world renders as all zeros.

use crate::error::Result;
use crate::sim::kinematics::Pose2D;
use crate::sim::sensor::{Energyscape, SensorConfig};
use crate::sim::world::ReflectorMap;

/// Clamp that keeps the 1/r^2 spreading factor finite near the sensor.
pub const R_MIN: f64 = 0.1;

/// Gaussian directivity; `sigma = INFINITY` returns 1 everywhere.
#[inline]
pub fn directivity(theta: f64, sigma: f64) -> f64 {
    if sigma.is_infinite() {
        1.0
    } else {
        (-0.5 * (theta / sigma).powi(2)).exp()
    }
}

/// Squared-sinc azimuth PSF with its first null at `null_spacing`.
#[inline]
pub fn azimuth_psf(dtheta: f64, null_spacing: f64) -> f64 {
    let u = std::f64::consts::PI * dtheta / null_spacing;
    if u.abs() < 1e-9 {
        1.0
    } else {
        let s = u.sin() / u;
        s * s
    }
}

/// Gaussian range PSF (pulse envelope).
#[inline]
pub fn range_psf(dr: f64, sigma: f64) -> f64 {
    (-0.5 * (dr / sigma).powi(2)).exp()
}

/// Polar coordinates of a world point in the sensor frame: range and
/// bearing, with theta > 0 to the robot's left.
pub fn to_sensor_frame(pose: Pose2D, x: f64, y: f64) -> (f64, f64) {
    let dx = x - pose.x;
    let dy = y - pose.y;
    let (sin_h, cos_h) = pose.heading.sin_cos();
    let forward = cos_h * dx + sin_h * dy;
    let lateral = -sin_h * dx + cos_h * dy;
    (forward.hypot(lateral), lateral.atan2(forward))
}

/// Renders the energyscape seen from `pose`. Pure: identical inputs give
/// identical grids, so frames for distinct poses can render in parallel.
pub fn render_energyscape(
    world: &ReflectorMap,
    pose: Pose2D,
    sensor: &SensorConfig,
) -> Result<Energyscape> {
    sensor.validate()?;
    if !(pose.x.is_finite() && pose.y.is_finite() && pose.heading.is_finite()) {
        return Err(crate::error::CoreError::NonFinite("render pose"));
    }

    let mut grid = vec![0.0f64; sensor.num_ranges * sensor.num_azimuths];
    let dr = sensor.range_bin_width();

    for refl in &world.reflectors {
        let (r, theta) = to_sensor_frame(pose, refl.x, refl.y);
        let amp = refl.reflectivity * directivity(theta, sensor.directivity_sigma)
            / r.max(R_MIN).powi(2);
        if amp <= 0.0 {
            continue;
        }

        // The range PSF is negligible past 6 sigma; restrict to that window.
        let k_lo = ((r - 6.0 * sensor.range_sigma) / dr - 0.5).floor().max(0.0) as usize;
        let k_hi = (((r + 6.0 * sensor.range_sigma) / dr - 0.5).ceil() as usize)
            .min(sensor.num_ranges.saturating_sub(1));
        if k_lo > k_hi {
            continue;
        }

        for k in k_lo..=k_hi {
            let g_r = range_psf(sensor.range_bin_center(k) - r, sensor.range_sigma);
            let row = &mut grid[k * sensor.num_azimuths..(k + 1) * sensor.num_azimuths];
            for (j, cell) in row.iter_mut().enumerate() {
                let dtheta = sensor.azimuth_bin_center(j) - theta;
                *cell += amp * g_r * azimuth_psf(dtheta, sensor.beam_null_spacing);
            }
        }
    }

    // Constant floor `base_snr_db` below the strongest deposit.
    let peak = grid.iter().copied().fold(0.0f64, f64::max);
    let floor = peak * 10f64.powf(-sensor.base_snr_db / 10.0);
    let mut scape = Energyscape::zeros(sensor);
    for (dst, src) in scape.data.iter_mut().zip(grid.iter()) {
        *dst = (src + floor) as f32;
    }
    Ok(scape)
}
