//! SNR burst schedules and noise injection.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::sensor::Energyscape;

/// Sentinel SNR for "no injected noise".
pub const SNR_CLEAN: f64 = f64::INFINITY;

/// Scheduled intervals of overwhelming noise. Outside a burst the SNR is
/// `base_snr_db` (default +5 dB); inside it drops to `burst_snr_db`
/// (default -80 dB). Bursts last `burst_len` seconds (default 1.2 s) and
/// the generator targets a 30% duty cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSchedule {
    pub starts: Vec<f64>,
    pub burst_len: f64,
    pub burst_snr_db: f64,
    pub base_snr_db: f64,
}

impl Default for BurstSchedule {
    fn default() -> Self {
        Self {
            starts: Vec::new(),
            burst_len: 1.2,
            burst_snr_db: -80.0,
            base_snr_db: 5.0,
        }
    }
}

impl BurstSchedule {
    /// Empty schedule: base SNR everywhere.
    pub fn none() -> Self {
        Self::default()
    }

    /// Generates burst starts covering `[0, duration)`, snapped to the
    /// frame grid so each burst covers exactly `burst_len / frame_period`
    /// frames. Gaps are jittered around the value that yields a 30% duty.
    pub fn generate(duration: f64, frame_period: f64, seed: u64) -> Self {
        let mut schedule = Self::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6275_7273_7473);
        let duty = 0.30;
        let mean_gap = schedule.burst_len * (1.0 - duty) / duty;
        let snap = |t: f64| (t / frame_period).round() * frame_period;
        // Lead-in before the first burst so predictors can warm up.
        let mut cursor = snap(rng.random_range(1.6..2.4));
        while cursor + schedule.burst_len <= duration {
            schedule.starts.push(cursor);
            let gap = rng.random_range(mean_gap - 0.6..mean_gap + 0.6);
            cursor = snap(cursor + schedule.burst_len + gap);
        }
        schedule
    }

    /// True when `t` lies inside a burst. Intervals are half-open with a
    /// nanosecond-scale epsilon so frame timestamps landing exactly on a
    /// burst edge resolve consistently despite float rounding.
    pub fn in_burst(&self, t: f64) -> bool {
        const EPS: f64 = 1e-9;
        self.starts
            .iter()
            .any(|&s| t - s >= -EPS && t - s < self.burst_len - EPS)
    }

    /// SNR in dB at time `t`.
    pub fn snr_at(&self, t: f64) -> f64 {
        if self.in_burst(t) {
            self.burst_snr_db
        } else {
            self.base_snr_db
        }
    }
}

/// Adds rectified Gaussian noise scaled so that mean squared clean signal
/// over mean squared noise equals `10^(snr_db / 10)`.
///
/// Rectification takes the absolute value of the Gaussian draw, which
/// keeps cells non-negative and leaves the second moment at `sigma^2`,
/// so the SNR scaling is exact in expectation. `SNR_CLEAN` (infinity)
/// returns the input unchanged. An all-zero input with finite SNR gets
/// unit-variance rectified noise. Deterministic for a fixed seed.
pub fn inject_noise(scape: &Energyscape, snr_db: f64, seed: u64) -> Result<Energyscape> {
    scape.validate()?;
    if snr_db == SNR_CLEAN {
        return Ok(scape.clone());
    }
    let n = scape.data.len() as f64;
    let signal_power = scape.data.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / n;
    let sigma = if signal_power > 0.0 {
        (signal_power * 10f64.powf(-snr_db / 10.0)).sqrt()
    } else {
        1.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scape.clone();
    for cell in out.data.iter_mut() {
        let draw: f64 = StandardNormal.sample(&mut rng);
        let noisy = *cell as f64 + sigma * draw.abs();
        *cell = noisy.max(0.0) as f32;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cross_corr_coeff;
    use crate::sim::kinematics::Pose2D;
    use crate::sim::render::render_energyscape;
    use crate::sim::sensor::SensorConfig;
    use crate::sim::world::ReflectorMap;

    fn test_scape() -> Energyscape {
        let world = ReflectorMap::corridor(8.0, 1.2, 1.0);
        render_energyscape(
            &world,
            Pose2D::new(1.0, 0.0, 0.0).unwrap(),
            &SensorConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn schedule_levels_match_defaults() {
        let s = BurstSchedule {
            starts: vec![2.0, 6.0],
            ..BurstSchedule::default()
        };
        assert_eq!(s.snr_at(2.0), -80.0);
        assert_eq!(s.snr_at(3.1), -80.0);
        assert_eq!(s.snr_at(3.2000001), 5.0);
        assert_eq!(s.snr_at(0.0), 5.0);
        assert_eq!(BurstSchedule::none().snr_at(123.4), 5.0);
    }

    #[test]
    fn generated_schedule_duty_and_length() {
        let period = 0.2;
        let duration = 60.0;
        let s = BurstSchedule::generate(duration, period, 7);
        // Burst length is exactly 6 frames on the 5 Hz grid.
        let frames_per_burst = (s.burst_len / period).round() as usize;
        assert_eq!(frames_per_burst, 6);
        let steps = (duration / period) as usize;
        let flagged = (0..steps)
            .filter(|&i| s.in_burst(i as f64 * period))
            .count();
        for &start in &s.starts {
            let single = BurstSchedule {
                starts: vec![start],
                ..s.clone()
            };
            let covered = (0..steps)
                .filter(|&i| single.in_burst(i as f64 * period))
                .count();
            assert_eq!(covered, 6, "burst at {start} covers {covered} frames");
        }
        let duty = flagged as f64 / steps as f64;
        assert!((duty - 0.30).abs() < 0.05, "duty {duty}");
    }

    #[test]
    fn clean_sentinel_is_identity() {
        let scape = test_scape();
        let out = inject_noise(&scape, SNR_CLEAN, 1).unwrap();
        assert_eq!(scape.data, out.data);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let scape = test_scape();
        let a = inject_noise(&scape, 5.0, 42).unwrap();
        let b = inject_noise(&scape, 5.0, 42).unwrap();
        assert_eq!(a.data, b.data);
        let c = inject_noise(&scape, 5.0, 43).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn minus_80_db_destroys_correlation() {
        let scape = test_scape();
        for seed in 0..120u64 {
            let noisy = inject_noise(&scape, -80.0, seed).unwrap();
            let cc = cross_corr_coeff(&scape, &noisy).unwrap();
            assert!(cc.abs() < 0.1, "seed {seed}: cc {cc}");
        }
    }

    #[test]
    fn all_zero_input_gets_unit_variance_noise() {
        let mut scape = test_scape();
        scape.data.iter_mut().for_each(|v| *v = 0.0);
        let noisy = inject_noise(&scape, 5.0, 3).unwrap();
        let n = noisy.data.len() as f64;
        let second_moment =
            noisy.data.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / n;
        assert!((second_moment - 1.0).abs() < 0.1, "E[x^2] {second_moment}");
    }

    #[test]
    fn snr_scaling_is_exact_in_expectation() {
        let scape = test_scape();
        let snr_db = 5.0;
        let noisy = inject_noise(&scape, snr_db, 11).unwrap();
        let n = scape.data.len() as f64;
        let sp = scape.data.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / n;
        let np = noisy
            .data
            .iter()
            .zip(scape.data.iter())
            .map(|(&a, &b)| ((a - b) as f64).powi(2))
            .sum::<f64>()
            / n;
        let measured = 10.0 * (sp / np).log10();
        assert!((measured - snr_db).abs() < 0.5, "measured snr {measured}");
    }
}
