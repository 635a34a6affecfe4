//! Sensor geometry and the energyscape grid type.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Imaging-sonar parameters. The point-spread function is separable:
/// a Gaussian pulse envelope of width `range_sigma` along range and a
/// squared-sinc main lobe with first null at `beam_null_spacing` along
/// azimuth. `directivity_sigma` is the Gaussian transmit/receive
/// directivity width; `f64::INFINITY` disables directivity weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub num_ranges: usize,
    pub num_azimuths: usize,
    pub r_max: f64,
    pub fov: f64,
    pub range_sigma: f64,
    pub beam_null_spacing: f64,
    pub directivity_sigma: f64,
    pub base_snr_db: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            num_ranges: 128,
            num_azimuths: 64,
            r_max: 5.0,
            fov: 120.0_f64.to_radians(),
            range_sigma: 0.06,
            beam_null_spacing: 0.10,
            directivity_sigma: 0.60,
            base_snr_db: 40.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_ranges == 0 || self.num_azimuths == 0 {
            return Err(CoreError::InvalidConfig("zero grid dimension".into()));
        }
        let positives = [
            ("r_max", self.r_max),
            ("fov", self.fov),
            ("range_sigma", self.range_sigma),
            ("beam_null_spacing", self.beam_null_spacing),
            ("directivity_sigma", self.directivity_sigma),
            ("base_snr_db", self.base_snr_db),
        ];
        for (name, v) in positives {
            if !(v > 0.0) {
                return Err(CoreError::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        if self.fov > std::f64::consts::PI {
            return Err(CoreError::InvalidConfig("fov exceeds pi".into()));
        }
        Ok(())
    }

    pub fn range_bin_width(&self) -> f64 {
        self.r_max / self.num_ranges as f64
    }

    pub fn azimuth_bin_width(&self) -> f64 {
        self.fov / self.num_azimuths as f64
    }

    /// Center range of bin `k`: (k + 0.5) * r_max / num_ranges.
    pub fn range_bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.range_bin_width()
    }

    /// Center azimuth of bin `j`, uniform across [-fov/2, fov/2].
    pub fn azimuth_bin_center(&self, j: usize) -> f64 {
        -0.5 * self.fov + (j as f64 + 0.5) * self.azimuth_bin_width()
    }
}

/// A 2D polar grid (range x azimuth) of non-negative echo energy.
/// Cells are stored range-major: `data[k * num_azimuths + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Energyscape {
    pub data: Vec<f32>,
    pub num_ranges: usize,
    pub num_azimuths: usize,
    pub r_max: f64,
    pub fov: f64,
    pub timestamp: f64,
}

impl Energyscape {
    pub fn zeros(sensor: &SensorConfig) -> Self {
        Self {
            data: vec![0.0; sensor.num_ranges * sensor.num_azimuths],
            num_ranges: sensor.num_ranges,
            num_azimuths: sensor.num_azimuths,
            r_max: sensor.r_max,
            fov: sensor.fov,
            timestamp: 0.0,
        }
    }

    pub fn with_timestamp(mut self, t: f64) -> Self {
        self.timestamp = t;
        self
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.num_ranges == other.num_ranges
            && self.num_azimuths == other.num_azimuths
            && self.r_max == other.r_max
            && self.fov == other.fov
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.num_ranges, self.num_azimuths]
    }

    #[inline]
    pub fn cell(&self, k: usize, j: usize) -> f64 {
        self.data[k * self.num_azimuths + j] as f64
    }

    #[inline]
    pub fn set_cell(&mut self, k: usize, j: usize, v: f64) {
        self.data[k * self.num_azimuths + j] = v as f32;
    }

    pub fn range_bin_width(&self) -> f64 {
        self.r_max / self.num_ranges as f64
    }

    pub fn azimuth_bin_width(&self) -> f64 {
        self.fov / self.num_azimuths as f64
    }

    pub fn range_bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.range_bin_width()
    }

    pub fn azimuth_bin_center(&self, j: usize) -> f64 {
        -0.5 * self.fov + (j as f64 + 0.5) * self.azimuth_bin_width()
    }

    /// Fractional bin coordinates of a polar point, such that integer
    /// values land exactly on bin centers.
    pub fn bin_coords(&self, r: f64, theta: f64) -> (f64, f64) {
        (
            r / self.range_bin_width() - 0.5,
            (theta + 0.5 * self.fov) / self.azimuth_bin_width() - 0.5,
        )
    }

    /// Bilinear sample at fractional bin coordinates. Returns `None` when
    /// any contributing bin falls outside the grid.
    pub fn sample_bilinear(&self, kf: f64, jf: f64) -> Option<f64> {
        if !(kf.is_finite() && jf.is_finite()) {
            return None;
        }
        if kf < 0.0 || jf < 0.0 {
            return None;
        }
        let k0 = kf.floor();
        let j0 = jf.floor();
        let fk = kf - k0;
        let fj = jf - j0;
        let k0 = k0 as usize;
        let j0 = j0 as usize;
        // When the fraction is exactly zero the upper neighbor is unused,
        // which keeps integer-coordinate sampling exact at the last bin.
        let k1 = if fk == 0.0 { k0 } else { k0 + 1 };
        let j1 = if fj == 0.0 { j0 } else { j0 + 1 };
        if k1 >= self.num_ranges || j1 >= self.num_azimuths {
            return None;
        }
        let v00 = self.cell(k0, j0);
        let v01 = self.cell(k0, j1);
        let v10 = self.cell(k1, j0);
        let v11 = self.cell(k1, j1);
        Some(
            (1.0 - fk) * ((1.0 - fj) * v00 + fj * v01) + fk * ((1.0 - fj) * v10 + fj * v11),
        )
    }

    /// Index of the maximum cell as (range bin, azimuth bin).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        let mut best_v = f32::NEG_INFINITY;
        for (i, &v) in self.data.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        (best / self.num_azimuths, best % self.num_azimuths)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64
    }

    /// Median cell value, used as the noise-floor estimate when warping
    /// shifts unobserved content into view.
    pub fn median(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let mut sorted = self.data.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            0.5 * (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64)
        }
    }

    /// Sub-bin peak location (r, theta) from a separable 3-point parabolic
    /// refinement around the argmax cell.
    pub fn refined_peak(&self) -> (f64, f64) {
        let (k, j) = self.argmax();
        let dk = if k == 0 || k + 1 == self.num_ranges {
            0.0
        } else {
            parabolic_offset(self.cell(k - 1, j), self.cell(k, j), self.cell(k + 1, j))
        };
        let dj = if j == 0 || j + 1 == self.num_azimuths {
            0.0
        } else {
            parabolic_offset(self.cell(k, j - 1), self.cell(k, j), self.cell(k, j + 1))
        };
        (
            (k as f64 + 0.5 + dk) * self.range_bin_width(),
            -0.5 * self.fov + (j as f64 + 0.5 + dj) * self.azimuth_bin_width(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.num_ranges * self.num_azimuths {
            return Err(CoreError::ShapeMismatch {
                op: "energyscape",
                lhs: vec![self.data.len()],
                rhs: vec![self.num_ranges, self.num_azimuths],
            });
        }
        if self.data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::NonFinite("energyscape cells"));
        }
        Ok(())
    }
}

fn parabolic_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom.abs() < 1e-30 {
        return 0.0;
    }
    let d = 0.5 * (left - right) / denom;
    d.clamp(-0.5, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_centers_match_spec_mapping() {
        let s = SensorConfig::default();
        // range bin k maps to (k + 0.5) * r_max / num_ranges
        assert!((s.range_bin_center(0) - 0.5 * 5.0 / 128.0).abs() < 1e-15);
        assert!((s.range_bin_center(127) - 127.5 * 5.0 / 128.0).abs() < 1e-15);
        // azimuth bins uniform across [-fov/2, fov/2]
        assert!((s.azimuth_bin_center(0) + 0.5 * s.fov - 0.5 * s.azimuth_bin_width()).abs() < 1e-15);
        let last = s.azimuth_bin_center(63);
        assert!((last - (0.5 * s.fov - 0.5 * s.azimuth_bin_width())).abs() < 1e-12);
    }

    #[test]
    fn bilinear_exact_at_integer_coords() {
        let s = SensorConfig {
            num_ranges: 4,
            num_azimuths: 3,
            ..SensorConfig::default()
        };
        let mut e = Energyscape::zeros(&s);
        for k in 0..4 {
            for j in 0..3 {
                e.set_cell(k, j, (k * 10 + j) as f64);
            }
        }
        assert_eq!(e.sample_bilinear(2.0, 1.0), Some(21.0));
        assert_eq!(e.sample_bilinear(3.0, 2.0), Some(32.0));
        assert_eq!(e.sample_bilinear(3.5, 0.0), None);
        let mid = e.sample_bilinear(0.5, 0.5).unwrap();
        assert!((mid - 0.25 * (0.0 + 1.0 + 10.0 + 11.0)).abs() < 1e-12);
    }

    #[test]
    fn median_of_small_grid() {
        let s = SensorConfig {
            num_ranges: 2,
            num_azimuths: 2,
            ..SensorConfig::default()
        };
        let mut e = Energyscape::zeros(&s);
        e.data = vec![1.0, 3.0, 2.0, 100.0];
        assert!((e.median() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_fov_rejected() {
        let s = SensorConfig {
            fov: 4.0,
            ..SensorConfig::default()
        };
        assert!(s.validate().is_err());
    }
}
