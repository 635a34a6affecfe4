//! Wheel-slip detection from prediction error.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::FrameStack;
use crate::error::{CoreError, Result};
use crate::metrics::cross_corr_coeff;
use crate::parallel::par_map_range;
use crate::sim::kinematics::{step_kinematics, Pose2D, SlipState, VelocityCommand};
use crate::sim::render::render_energyscape;
use crate::sim::sensor::{Energyscape, SensorConfig};
use crate::sim::world::ReflectorMap;

use super::{predict_ar, Predictor};

/// Ceiling substituted when the correlation between prediction and
/// measurement is numerically zero.
pub const EPSILON_CEILING: f64 = 1e9;

/// Prediction-error signal: root sum of squared differences divided by
/// the square root of the absolute 2D correlation coefficient.
pub fn slip_error_signal(pred: &Energyscape, meas: &Energyscape) -> Result<f64> {
    let cc = cross_corr_coeff(pred, meas)?;
    let mut ss = 0.0f64;
    for (&p, &m) in pred.data.iter().zip(meas.data.iter()) {
        let d = p as f64 - m as f64;
        ss += d * d;
    }
    if cc.abs() < 1e-6 {
        return Ok(EPSILON_CEILING);
    }
    Ok(ss.sqrt() / cc.abs().sqrt())
}

/// One interval of injected wheel slip.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlipWindow {
    pub start: f64,
    pub len: f64,
    pub left_slip: f64,
    pub right_slip: f64,
}

/// The slip experiment: the robot cruises down the corridor under a
/// constant command while two slip windows corrupt the executed motion;
/// predictors keep seeing the commanded stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlipExperimentConfig {
    pub duration: f64,
    pub frame_period: f64,
    pub cruise: VelocityCommand,
    pub windows: Vec<SlipWindow>,
    pub horizons: Vec<usize>,
    pub n_frames: usize,
    pub wheel_base: f64,
    pub start_pose: (f64, f64, f64),
    pub seed: u64,
}

impl Default for SlipExperimentConfig {
    fn default() -> Self {
        Self {
            duration: 45.0,
            frame_period: 0.2,
            cruise: VelocityCommand::new(0.25, 0.0),
            windows: vec![
                SlipWindow {
                    start: 10.0,
                    len: 6.0,
                    left_slip: 0.8,
                    right_slip: 0.8,
                },
                SlipWindow {
                    start: 30.0,
                    len: 6.0,
                    left_slip: 0.6,
                    right_slip: 0.0,
                },
            ],
            horizons: vec![1, 3, 5],
            n_frames: 3,
            wheel_base: 0.3,
            start_pose: (0.3, 0.0, 0.0),
            seed: 0,
        }
    }
}

impl SlipExperimentConfig {
    pub fn slip_at(&self, t: f64) -> SlipState {
        for w in &self.windows {
            if t >= w.start && t < w.start + w.len {
                return SlipState {
                    left_slip: w.left_slip,
                    right_slip: w.right_slip,
                };
            }
        }
        SlipState::NONE
    }
}

/// Error series for one predictor at one horizon.
#[derive(Debug, Clone)]
pub struct SlipSignal {
    pub predictor: String,
    pub horizon: usize,
    /// (time, epsilon) per evaluated step.
    pub series: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SlipResult {
    pub config: SlipExperimentConfig,
    pub signals: Vec<SlipSignal>,
}

impl SlipResult {
    /// CSV rows: `t,predictor,horizon,epsilon`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,predictor,horizon,epsilon\n");
        for sig in &self.signals {
            for &(t, eps) in &sig.series {
                let _ = writeln!(out, "{t:.3},{},{},{eps:.6}", sig.predictor, sig.horizon);
            }
        }
        out
    }

    pub fn signal(&self, predictor: &str, horizon: usize) -> Option<&SlipSignal> {
        self.signals
            .iter()
            .find(|s| s.predictor == predictor && s.horizon == horizon)
    }
}

/// Runs the slip experiment. Slip only corrupts the executed kinematics;
/// frames render at the true (slipped) poses while every predictor sees
/// the commanded velocities. For horizon `k`, the error at step `t`
/// compares the k-step rollout from measured history ending at `t - k`
/// against the measured frame at `t`.
pub fn run_slip_experiment(
    cfg: &SlipExperimentConfig,
    world: &ReflectorMap,
    sensor: &SensorConfig,
    predictors: &[Predictor],
) -> Result<SlipResult> {
    if cfg.duration <= 0.0 || cfg.frame_period <= 0.0 {
        return Err(CoreError::InvalidArgument("bad slip experiment timing".into()));
    }
    let steps = (cfg.duration / cfg.frame_period).round() as usize;
    let dt = cfg.frame_period;

    // Executed trajectory with slip.
    let mut pose = Pose2D::new(cfg.start_pose.0, cfg.start_pose.1, cfg.start_pose.2)?;
    let mut poses = Vec::with_capacity(steps);
    for i in 0..steps {
        poses.push(pose);
        let t = i as f64 * dt;
        pose = step_kinematics(pose, cfg.cruise, dt, cfg.slip_at(t), cfg.wheel_base)?;
    }

    // Measured frames at the true poses.
    let frames: Vec<Arc<Energyscape>> = {
        let rendered = par_map_range(steps, |i| {
            render_energyscape(world, poses[i], sensor)
                .map(|s| Arc::new(s.with_timestamp(i as f64 * dt)))
        });
        let mut out = Vec::with_capacity(steps);
        for r in rendered {
            out.push(r?);
        }
        out
    };

    let n = cfg.n_frames;
    let commanded = vec![cfg.cruise; steps];
    let mut signals = Vec::new();
    for predictor in predictors {
        for &k in &cfg.horizons {
            let first_t = n + k; // need n history frames plus one lookback command
            let series: Vec<Result<(f64, f64)>> = par_map_range(steps - first_t, |off| {
                let t = first_t + off;
                let hist_end = t - k; // newest measured frame index
                let stack = FrameStack {
                    frames: frames[hist_end + 1 - n..=hist_end].to_vec(),
                    commands: commanded[hist_end - n..=hist_end].to_vec(),
                    target: None,
                };
                let future = &commanded[hist_end..t];
                let preds = predict_ar(predictor, &stack, future, k, dt)?;
                let eps = slip_error_signal(&preds[k - 1], &frames[t])?;
                Ok((t as f64 * dt, eps))
            });
            let mut collected = Vec::with_capacity(series.len());
            for s in series {
                collected.push(s?);
            }
            signals.push(SlipSignal {
                predictor: predictor.name().to_string(),
                horizon: k,
                series: collected,
            });
        }
    }
    Ok(SlipResult {
        config: cfg.clone(),
        signals,
    })
}

/// Median of a sample (empty slices return 0).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    }
}

/// p-th percentile (0..100) by nearest-rank.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * (v.len() as f64 - 1.0)).round() as usize;
    v[rank.min(v.len() - 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::kinematics::Pose2D;
    use crate::sim::render::render_energyscape;

    fn rendered_pair() -> (Energyscape, Energyscape) {
        let world = ReflectorMap::corridor(8.0, 1.25, 1.0);
        let sensor = SensorConfig::default();
        let a = render_energyscape(&world, Pose2D::new(1.0, 0.0, 0.0).unwrap(), &sensor).unwrap();
        let b = render_energyscape(&world, Pose2D::new(1.3, 0.1, 0.1).unwrap(), &sensor).unwrap();
        (a, b)
    }

    #[test]
    fn identical_frames_give_zero_epsilon() {
        let (a, _) = rendered_pair();
        assert_eq!(slip_error_signal(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn epsilon_matches_direct_evaluation_for_perturbation() {
        // pred = meas + delta on n cells: eps = delta * sqrt(n) / sqrt(cc)
        let (a, _) = rendered_pair();
        let mut pred = a.clone();
        let delta = 0.5f64 * a.max_value();
        let n_cells = 40;
        for i in 0..n_cells {
            let idx = i * 97 % pred.data.len();
            pred.data[idx] += delta as f32;
        }
        let cc = cross_corr_coeff(&pred, &a).unwrap();
        let eps = slip_error_signal(&pred, &a).unwrap();
        let direct: f64 = pred
            .data
            .iter()
            .zip(&a.data)
            .map(|(&p, &m)| (p as f64 - m as f64).powi(2))
            .sum::<f64>()
            .sqrt()
            / cc.abs().sqrt();
        assert!((eps - direct).abs() / direct < 1e-9);
        let expected = delta * (n_cells as f64).sqrt() / cc.abs().sqrt();
        assert!((eps - expected).abs() / expected < 0.01, "{eps} vs {expected}");
    }

    #[test]
    fn anticorrelated_and_correlated_weigh_equally() {
        let (a, _) = rendered_pair();
        // b = -a + const has cc = -1 and the same |cc| as cc = +1.
        let max = a.max_value() as f32;
        let mut neg = a.clone();
        neg.data.iter_mut().for_each(|v| *v = max - *v);
        let cc = cross_corr_coeff(&neg, &a).unwrap();
        assert!((cc + 1.0).abs() < 1e-5);
        let eps_neg = slip_error_signal(&neg, &a).unwrap();
        let rms: f64 = neg
            .data
            .iter()
            .zip(&a.data)
            .map(|(&p, &m)| ((p - m) as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((eps_neg - rms).abs() / rms < 1e-6);
    }

    #[test]
    fn near_zero_correlation_clamps_to_ceiling() {
        let (a, _) = rendered_pair();
        let flat = Energyscape {
            data: vec![1.0; a.data.len()],
            ..a.clone()
        };
        assert_eq!(slip_error_signal(&flat, &a).unwrap(), EPSILON_CEILING);
    }

    #[test]
    fn slip_schedule_windows() {
        let cfg = SlipExperimentConfig::default();
        assert_eq!(cfg.slip_at(5.0), SlipState::NONE);
        assert_eq!(
            cfg.slip_at(12.0),
            SlipState {
                left_slip: 0.8,
                right_slip: 0.8
            }
        );
        assert_eq!(cfg.slip_at(16.5), SlipState::NONE);
        assert_eq!(
            cfg.slip_at(30.0),
            SlipState {
                left_slip: 0.6,
                right_slip: 0.0
            }
        );
    }

    #[test]
    fn slip_affects_executed_poses_only() {
        // The commanded stream the predictors see never changes; only
        // the executed trajectory diverges inside a slip window.
        let world = ReflectorMap::corridor(16.0, 1.25, 1.0);
        let cfg = SlipExperimentConfig {
            duration: 14.0,
            windows: vec![SlipWindow {
                start: 6.0,
                len: 4.0,
                left_slip: 0.8,
                right_slip: 0.8,
            }],
            ..SlipExperimentConfig::default()
        };
        let no_slip = SlipExperimentConfig {
            windows: Vec::new(),
            ..cfg.clone()
        };
        let dt = cfg.frame_period;
        let steps = (cfg.duration / dt) as usize;
        let mut with_pose = Pose2D::new(0.3, 0.0, 0.0).unwrap();
        let mut without_pose = with_pose;
        let mut diverged = false;
        for i in 0..steps {
            let t = i as f64 * dt;
            // Commanded velocity is the constant cruise in both runs.
            assert_eq!(cfg.cruise, no_slip.cruise);
            with_pose = step_kinematics(
                with_pose,
                cfg.cruise,
                dt,
                cfg.slip_at(t),
                cfg.wheel_base,
            )
            .unwrap();
            without_pose = step_kinematics(
                without_pose,
                no_slip.cruise,
                dt,
                no_slip.slip_at(t),
                no_slip.wheel_base,
            )
            .unwrap();
            if t > 6.5 && (with_pose.x - without_pose.x).abs() > 0.05 {
                diverged = true;
            }
        }
        assert!(diverged, "slip window did not change the executed path");
        let _ = world;
    }

    #[test]
    fn analytic_predictors_spike_on_two_wheel_slip() {
        // Even the naive predictor sees the first (both-wheel) window.
        let world = ReflectorMap::corridor(16.0, 1.25, 1.0);
        let sensor = SensorConfig::default();
        let cfg = SlipExperimentConfig {
            duration: 24.0,
            ..SlipExperimentConfig::default()
        };
        let result =
            run_slip_experiment(&cfg, &world, &sensor, &[Predictor::Flow]).unwrap();
        let sig = result.signal("flow", 5).unwrap();
        let inside: Vec<f64> = sig
            .series
            .iter()
            .filter(|(t, _)| *t >= 11.0 && *t < 16.0)
            .map(|(_, e)| *e)
            .collect();
        let outside: Vec<f64> = sig
            .series
            .iter()
            .filter(|(t, _)| *t < 10.0 || *t >= 18.0)
            .map(|(_, e)| *e)
            .collect();
        assert!(!inside.is_empty() && !outside.is_empty());
        assert!(
            median(&inside) > 2.0 * median(&outside),
            "inside {} outside {}",
            median(&inside),
            median(&outside)
        );
    }
}
