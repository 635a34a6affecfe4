//! Corridor following under noise bursts, with optional auto-regressive
//! prediction in-filling.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FrameStack;
use crate::error::{CoreError, Result};
use crate::net::ModelParams;
use crate::parallel::par_map_range;
use crate::sim::kinematics::{step_kinematics, Pose2D, SlipState, VelocityCommand};
use crate::sim::noise::{inject_noise, BurstSchedule};
use crate::sim::render::render_energyscape;
use crate::sim::sensor::{Energyscape, SensorConfig};
use crate::sim::world::ReflectorMap;

use super::Predictor;

/// Default validity threshold for the peak-to-median energy ratio.
/// Calibrated on rendered corridor frames: clean frames at 5 dB SNR
/// measure 16.3-19.4 dB, -80 dB burst frames 7.0-8.9 dB.
pub const GATE_THRESHOLD_DB: f64 = 12.5;

/// Valid iff the peak-to-median energy ratio exceeds the threshold.
/// A frame swamped by broadband noise has no dominant echo, so its
/// ratio collapses; an all-zero frame is invalid.
pub fn data_validity_gate(scape: &Energyscape, threshold_db: f64) -> bool {
    let peak = scape.max_value();
    if peak <= 0.0 {
        return false;
    }
    let med = scape.median();
    if med <= 0.0 {
        // All energy in a few cells and none in the typical cell: a
        // degenerate but clearly structured frame.
        return true;
    }
    10.0 * (peak / med).log10() > threshold_db
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControllerGains {
    pub forward_speed: f64,
    /// Steering per unit of normalized left/right energy imbalance.
    pub k_balance: f64,
    /// Steering per radian of waypoint bearing error.
    pub k_waypoint: f64,
    /// Only echoes closer than this range influence the balance term.
    pub range_window: f64,
    /// Low-pass factor on the steering command, 0 = no smoothing.
    pub smooth: f64,
    pub gate_threshold_db: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            forward_speed: 0.3,
            k_balance: 2.0,
            k_waypoint: 0.8,
            range_window: 3.5,
            smooth: 0.5,
            gate_threshold_db: GATE_THRESHOLD_DB,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ControllerState {
    pub prev_omega: f64,
}

/// Energy-balance corridor controller with a waypoint bearing term.
///
/// Steering pushes away from the half of the field of view carrying more
/// range-windowed energy and toward the waypoint bearing; forward speed
/// is constant. When the validity gate rejects the frame the command is
/// (0, 0): the robot stops rather than steering on noise.
pub fn corridor_controller(
    scape: &Energyscape,
    pose_estimate: Pose2D,
    waypoint: (f64, f64),
    state: &mut ControllerState,
    gains: &ControllerGains,
) -> VelocityCommand {
    if !data_validity_gate(scape, gains.gate_threshold_db) {
        return VelocityCommand::ZERO;
    }

    let mut left = 0.0f64;
    let mut right = 0.0f64;
    for k in 0..scape.num_ranges {
        if scape.range_bin_center(k) > gains.range_window {
            break;
        }
        for j in 0..scape.num_azimuths {
            let e = scape.cell(k, j);
            if scape.azimuth_bin_center(j) > 0.0 {
                left += e;
            } else {
                right += e;
            }
        }
    }
    let total = left + right;
    let balance = if total > 0.0 {
        (right - left) / total
    } else {
        0.0
    };

    let bearing = (waypoint.1 - pose_estimate.y).atan2(waypoint.0 - pose_estimate.x);
    let heading_err = crate::sim::kinematics::wrap_angle(bearing - pose_estimate.heading);

    let omega_raw = gains.k_balance * balance + gains.k_waypoint * heading_err;
    let omega = (gains.smooth * state.prev_omega + (1.0 - gains.smooth) * omega_raw)
        .clamp(-1.0, 1.0);
    state.prev_omega = omega;
    VelocityCommand::new(gains.forward_speed, omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Clean,
    Noisy,
    NoisyPredict,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::Clean => "clean",
            Condition::Noisy => "noisy",
            Condition::NoisyPredict => "noisy-predict",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorridorConfig {
    pub frame_period: f64,
    pub base_snr_db: f64,
    pub runs: usize,
    pub timeout: f64,
    pub gains: ControllerGains,
    pub wheel_base: f64,
    pub n_frames: usize,
    pub seed: u64,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        Self {
            frame_period: 0.2,
            base_snr_db: 5.0,
            runs: 50,
            timeout: 120.0,
            gains: ControllerGains::default(),
            wheel_base: 0.3,
            n_frames: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorridorRun {
    pub run_id: usize,
    pub condition: Condition,
    pub trajectory: Vec<(f64, Pose2D)>,
    pub travel_time: f64,
    pub arrived: bool,
    pub midline_deviations: Vec<f64>,
    pub gate_stops: usize,
}

impl CorridorRun {
    pub fn median_abs_deviation(&self) -> f64 {
        super::slip::median(&self.midline_deviations)
    }
}

/// Summary CSV: one row per run.
pub fn runs_to_csv(runs: &[CorridorRun]) -> String {
    let mut out =
        String::from("run_id,condition,travel_time,arrived,median_abs_midline_dev,gate_stops,steps\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{:.3},{},{:.6},{},{}",
            r.run_id,
            r.condition.name(),
            r.travel_time,
            r.arrived as u8,
            r.median_abs_deviation(),
            r.gate_stops,
            r.trajectory.len()
        );
    }
    out
}

/// Per-step pose CSV across runs.
pub fn poses_to_csv(runs: &[CorridorRun]) -> String {
    let mut out = String::from("run_id,condition,t,x,y,heading\n");
    for r in runs {
        for &(t, p) in &r.trajectory {
            let _ = writeln!(
                out,
                "{},{},{t:.3},{:.6},{:.6},{:.6}",
                r.run_id,
                r.condition.name(),
                p.x,
                p.y,
                p.heading
            );
        }
    }
    out
}

/// Runs `cfg.runs` corridor traversals under one condition. Spawn poses
/// are drawn per run from the world's spawn boxes; runs share spawn
/// seeds across conditions so comparisons are paired. Clean runs see
/// every frame at the base SNR; noisy runs overlay the burst schedule;
/// the predict condition feeds EchoPT rollouts to the controller during
/// bursts, appending each prediction to the model's own history.
pub fn run_corridor_experiment(
    cfg: &CorridorConfig,
    world: &ReflectorMap,
    sensor: &SensorConfig,
    condition: Condition,
    echopt: Option<&ModelParams>,
) -> Result<Vec<CorridorRun>> {
    let waypoint = world
        .waypoint
        .ok_or_else(|| CoreError::InvalidConfig("corridor world needs a waypoint".into()))?;
    if world.spawn_boxes.is_empty() {
        return Err(CoreError::InvalidConfig(
            "corridor world needs spawn boxes".into(),
        ));
    }
    if condition == Condition::NoisyPredict && echopt.is_none() {
        return Err(CoreError::InvalidArgument(
            "noisy-predict condition needs a trained model".into(),
        ));
    }

    let results = par_map_range(cfg.runs, |run_id| {
        run_single(cfg, world, sensor, condition, echopt, run_id, waypoint)
    });
    let mut runs = Vec::with_capacity(cfg.runs);
    for r in results {
        runs.push(r?);
    }
    Ok(runs)
}

#[allow(clippy::too_many_arguments)]
fn run_single(
    cfg: &CorridorConfig,
    world: &ReflectorMap,
    sensor: &SensorConfig,
    condition: Condition,
    echopt: Option<&ModelParams>,
    run_id: usize,
    waypoint: crate::sim::world::Waypoint,
) -> Result<CorridorRun> {
    // Spawn seed depends on run only, so conditions are paired.
    let mut spawn_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (run_id as u64).wrapping_mul(0x9e3779b97f4a7c15));
    let boxes = &world.spawn_boxes;
    let sb = boxes[spawn_rng.random_range(0..boxes.len())];
    let mut pose = Pose2D::new(
        spawn_rng.random_range(sb.rect.min_x..=sb.rect.max_x),
        spawn_rng.random_range(sb.rect.min_y..=sb.rect.max_y),
        spawn_rng.random_range(sb.heading_min..=sb.heading_max),
    )?;

    let schedule = match condition {
        Condition::Clean => BurstSchedule::none(),
        _ => BurstSchedule::generate(cfg.timeout, cfg.frame_period, cfg.seed ^ run_id as u64),
    };

    let n = cfg.n_frames;
    let dt = cfg.frame_period;
    let steps = (cfg.timeout / dt).round() as usize;
    let mut state = ControllerState::default();
    let mut history_frames: Vec<Arc<Energyscape>> = Vec::new();
    let mut history_cmds: Vec<VelocityCommand> = vec![VelocityCommand::ZERO];
    let mut trajectory = Vec::with_capacity(steps);
    let mut deviations = Vec::new();
    let mut gate_stops = 0usize;
    let mut travel_time = cfg.timeout;
    let mut arrived = false;

    for step in 0..steps {
        let t = step as f64 * dt;
        trajectory.push((t, pose));

        if (pose.x - waypoint.x).hypot(pose.y - waypoint.y) <= waypoint.radius {
            arrived = true;
            travel_time = t;
            break;
        }

        let clean = render_energyscape(world, pose, sensor)?.with_timestamp(t);
        let snr = schedule.snr_at(t).min(cfg.base_snr_db);
        let noise_seed = cfg.seed ^ ((run_id as u64) << 32) ^ step as u64;
        let measured = inject_noise(&clean, snr, noise_seed)?;

        let frame_valid = data_validity_gate(&measured, cfg.gains.gate_threshold_db);
        let controller_input: Arc<Energyscape> = if frame_valid {
            Arc::new(measured)
        } else if condition == Condition::NoisyPredict && history_frames.len() >= n {
            // Roll the model one step forward on its own history; the
            // command that led into this frame is already recorded.
            let params = echopt.expect("checked above");
            let stack = FrameStack {
                frames: history_frames[history_frames.len() - n..].to_vec(),
                commands: history_cmds[history_cmds.len() - n - 1..].to_vec(),
                target: None,
            };
            let predictor = PredictorRef(params);
            Arc::new(predictor.predict(&stack, dt)?)
        } else {
            Arc::new(measured)
        };

        // The model's history absorbs whatever the controller consumed:
        // measurements when valid, its own predictions during bursts.
        history_frames.push(Arc::clone(&controller_input));
        if history_frames.len() > n + 1 {
            history_frames.remove(0);
        }

        let cmd = corridor_controller(
            &controller_input,
            pose,
            (waypoint.x, waypoint.y),
            &mut state,
            &cfg.gains,
        );
        if cmd == VelocityCommand::ZERO {
            gate_stops += 1;
        }
        history_cmds.push(cmd);
        if history_cmds.len() > n + 2 {
            history_cmds.remove(0);
        }

        if pose.x >= 0.0 && pose.x <= waypoint.x {
            deviations.push(pose.y.abs());
        }

        pose = step_kinematics(pose, cmd, dt, SlipState::NONE, cfg.wheel_base)?;
    }

    Ok(CorridorRun {
        run_id,
        condition,
        trajectory,
        travel_time,
        arrived,
        midline_deviations: deviations,
        gate_stops,
    })
}

/// Thin adapter so a borrowed model can drive one-step prediction
/// without cloning the parameters into a [`Predictor`].
struct PredictorRef<'a>(&'a ModelParams);

impl PredictorRef<'_> {
    fn predict(&self, stack: &FrameStack, _dt: f64) -> Result<Energyscape> {
        crate::net::predict_next(self.0, stack)
    }
}

/// A predictor wrapper for external callers that own the model.
pub fn echopt_predictor(params: ModelParams) -> Predictor {
    Predictor::EchoPt(Box::new(params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor_world() -> ReflectorMap {
        ReflectorMap::corridor(12.0, 1.25, 1.0)
    }

    #[test]
    fn gate_separates_clean_from_burst_noise() {
        let world = corridor_world();
        let sensor = SensorConfig::default();
        let mut clean_ratios: Vec<f64> = Vec::new();
        let mut burst_ratios: Vec<f64> = Vec::new();
        for i in 0..24u64 {
            let pose = Pose2D::new(0.5 + 0.4 * i as f64 % 9.0, -0.3 + 0.03 * i as f64, 0.05)
                .unwrap();
            let clean = render_energyscape(&world, pose, &sensor).unwrap();
            let at5 = inject_noise(&clean, 5.0, 100 + i).unwrap();
            let at_burst = inject_noise(&clean, -80.0, 200 + i).unwrap();
            let ratio = |s: &Energyscape| 10.0 * (s.max_value() / s.median()).log10();
            clean_ratios.push(ratio(&at5));
            burst_ratios.push(ratio(&at_burst));
            assert!(
                data_validity_gate(&at5, GATE_THRESHOLD_DB),
                "clean frame {i} rejected (ratio {:.1} dB)",
                ratio(&at5)
            );
            assert!(
                !data_validity_gate(&at_burst, GATE_THRESHOLD_DB),
                "burst frame {i} accepted (ratio {:.1} dB)",
                ratio(&at_burst)
            );
        }
        let min_clean = clean_ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_burst = burst_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            min_clean - max_burst > 3.0,
            "separation margin too thin: clean >= {min_clean:.1}, burst <= {max_burst:.1}"
        );
    }

    #[test]
    fn gate_rejects_all_zero() {
        let sensor = SensorConfig::default();
        let zero = Energyscape::zeros(&sensor);
        assert!(!data_validity_gate(&zero, GATE_THRESHOLD_DB));
    }

    #[test]
    fn controller_is_straight_on_midline() {
        let world = corridor_world();
        let sensor = SensorConfig::default();
        let pose = Pose2D::new(2.5, 0.0, 0.0).unwrap();
        let scape = render_energyscape(&world, pose, &sensor).unwrap();
        let mut state = ControllerState::default();
        let gains = ControllerGains {
            smooth: 0.0,
            ..ControllerGains::default()
        };
        let cmd = corridor_controller(&scape, pose, (11.0, 0.0), &mut state, &gains);
        assert!(cmd.v_lin > 0.0);
        assert!(cmd.omega_r.abs() < 0.05, "omega {}", cmd.omega_r);
    }

    #[test]
    fn controller_steers_back_toward_midline() {
        let world = corridor_world();
        let sensor = SensorConfig::default();
        // Displaced left of the midline: the left wall is closer, so the
        // controller must steer right (negative omega).
        let pose = Pose2D::new(2.5, 0.6, 0.0).unwrap();
        let scape = render_energyscape(&world, pose, &sensor).unwrap();
        let mut state = ControllerState::default();
        let gains = ControllerGains {
            smooth: 0.0,
            k_waypoint: 0.0,
            ..ControllerGains::default()
        };
        let cmd = corridor_controller(&scape, pose, (11.0, 0.0), &mut state, &gains);
        assert!(cmd.omega_r < -0.02, "omega {}", cmd.omega_r);
    }

    #[test]
    fn controller_stops_on_invalid_frame() {
        let world = corridor_world();
        let sensor = SensorConfig::default();
        let pose = Pose2D::new(2.5, 0.0, 0.0).unwrap();
        let clean = render_energyscape(&world, pose, &sensor).unwrap();
        let burst = inject_noise(&clean, -80.0, 7).unwrap();
        let mut state = ControllerState::default();
        let cmd = corridor_controller(
            &burst,
            pose,
            (11.0, 0.0),
            &mut state,
            &ControllerGains::default(),
        );
        assert_eq!(cmd, VelocityCommand::ZERO);
    }

    #[test]
    fn clean_runs_reach_the_waypoint() {
        let world = corridor_world();
        let sensor = SensorConfig::default();
        let cfg = CorridorConfig {
            runs: 6,
            seed: 3,
            ..CorridorConfig::default()
        };
        let runs =
            run_corridor_experiment(&cfg, &world, &sensor, Condition::Clean, None).unwrap();
        let arrivals = runs.iter().filter(|r| r.arrived).count();
        assert!(arrivals >= 5, "{arrivals}/6 arrived");
        for r in &runs {
            assert!(r.travel_time < cfg.timeout);
            assert!(r.median_abs_deviation() < 0.6,
                "median deviation {}", r.median_abs_deviation());
        }
    }

    #[test]
    fn noisy_runs_stop_and_take_longer() {
        let world = corridor_world();
        let sensor = SensorConfig::default();
        let cfg = CorridorConfig {
            runs: 4,
            seed: 5,
            ..CorridorConfig::default()
        };
        let clean =
            run_corridor_experiment(&cfg, &world, &sensor, Condition::Clean, None).unwrap();
        let noisy =
            run_corridor_experiment(&cfg, &world, &sensor, Condition::Noisy, None).unwrap();
        let med = |runs: &[CorridorRun]| {
            super::super::slip::median(
                &runs.iter().map(|r| r.travel_time).collect::<Vec<_>>(),
            )
        };
        assert!(med(&noisy) > med(&clean), "{} vs {}", med(&noisy), med(&clean));
        let avg_stops: f64 =
            noisy.iter().map(|r| r.gate_stops as f64).sum::<f64>() / noisy.len() as f64;
        assert!(avg_stops >= 1.0, "average stops {avg_stops}");
    }

    #[test]
    fn determinism_same_seed_same_csv() {
        let world = corridor_world();
        let sensor = SensorConfig::default();
        let cfg = CorridorConfig {
            runs: 2,
            seed: 11,
            ..CorridorConfig::default()
        };
        let a = run_corridor_experiment(&cfg, &world, &sensor, Condition::Noisy, None).unwrap();
        let b = run_corridor_experiment(&cfg, &world, &sensor, Condition::Noisy, None).unwrap();
        assert_eq!(runs_to_csv(&a), runs_to_csv(&b));
        assert_eq!(poses_to_csv(&a), poses_to_csv(&b));
    }
}
