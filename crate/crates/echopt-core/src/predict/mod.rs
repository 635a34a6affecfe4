//! Prediction harness: the three predictors behind one interface,
//! auto-regressive rollout, and the slip and corridor experiments.

pub mod bench;
pub mod corridor;
pub mod slip;

pub use bench::{run_bench, BenchConfig, BenchResult};
pub use corridor::{
    corridor_controller, data_validity_gate, run_corridor_experiment, Condition, ControllerGains,
    ControllerState, CorridorConfig, CorridorRun, GATE_THRESHOLD_DB,
};
pub use slip::{run_slip_experiment, slip_error_signal, SlipExperimentConfig, SlipResult};

use std::sync::Arc;

use crate::dataset::FrameStack;
use crate::error::{CoreError, Result};
use crate::flow::{flow_warp, naive_shift};
use crate::net::{predict_next, ModelParams};
use crate::sim::kinematics::VelocityCommand;
use crate::sim::sensor::Energyscape;

/// A next-frame predictor. The analytic predictors consume only the
/// newest frame and the command to execute; EchoPT consumes the whole
/// stack.
pub enum Predictor {
    Naive,
    Flow,
    EchoPt(Box<ModelParams>),
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Naive => "naive",
            Predictor::Flow => "flow",
            Predictor::EchoPt(_) => "echopt",
        }
    }

    /// Predicts the next frame from a history stack whose final command
    /// is the one about to be executed. The output grid matches the
    /// input grid and its timestamp advances by `dt`.
    pub fn predict_one(&self, stack: &FrameStack, dt: f64) -> Result<Energyscape> {
        stack.validate()?;
        let newest = stack
            .frames
            .last()
            .ok_or_else(|| CoreError::InvalidArgument("empty history".into()))?;
        let next_cmd = *stack.commands.last().unwrap();
        match self {
            Predictor::Naive => Ok(naive_shift(newest, next_cmd, dt)?
                .with_timestamp(newest.timestamp + dt)),
            Predictor::Flow => {
                Ok(flow_warp(newest, next_cmd, dt)?.with_timestamp(newest.timestamp + dt))
            }
            Predictor::EchoPt(params) => predict_next(params, stack),
        }
    }
}

/// Auto-regressive rollout: predicts `k` frames, feeding each prediction
/// back as the newest history frame, so measured data only backs the
/// first `n_frames` steps and later steps rely purely on previously
/// predicted frames. `future_cmds[i]` drives prediction step `i`;
/// `future_cmds[0]` normally equals the stack's final command, making
/// `k = 1` bit-identical to [`Predictor::predict_one`].
pub fn predict_ar(
    predictor: &Predictor,
    history: &FrameStack,
    future_cmds: &[VelocityCommand],
    k: usize,
    dt: f64,
) -> Result<Vec<Arc<Energyscape>>> {
    if k == 0 {
        return Err(CoreError::InvalidArgument(
            "auto-regressive horizon must be >= 1".into(),
        ));
    }
    if future_cmds.len() < k {
        return Err(CoreError::InvalidArgument(format!(
            "need {k} future commands, got {}",
            future_cmds.len()
        )));
    }
    history.validate()?;
    let n = history.frames.len();
    let mut frames: Vec<Arc<Energyscape>> = history.frames.clone();
    // The command history excludes the stack's own next command; each
    // step appends its executed command instead.
    let mut cmds: Vec<VelocityCommand> = history.commands[..n].to_vec();
    let mut out = Vec::with_capacity(k);
    for &cmd in &future_cmds[..k] {
        let mut window_cmds = cmds[cmds.len() - n..].to_vec();
        window_cmds.push(cmd);
        let stack = FrameStack {
            frames: frames[frames.len() - n..].to_vec(),
            commands: window_cmds,
            target: None,
        };
        let pred = Arc::new(predictor.predict_one(&stack, dt)?);
        frames.push(Arc::clone(&pred));
        cmds.push(cmd);
        out.push(pred);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, make_stacks, GenOptions};
    use crate::metrics::cross_corr_coeff;
    use crate::sim::sensor::SensorConfig;
    use crate::sim::world::ReflectorMap;

    fn stacks_for_test(seed: u64) -> Vec<FrameStack> {
        let sensor = SensorConfig::default();
        let world = ReflectorMap::corridor(8.0, 1.25, 1.0);
        let ds = generate_dataset(&world, &sensor, 8.0, seed, &GenOptions::default()).unwrap();
        make_stacks(&ds, 3)
    }

    #[test]
    fn ar_one_equals_one_shot_bit_identical() {
        let stacks = stacks_for_test(3);
        let stack = &stacks[4];
        let dt = 0.2;
        let next = *stack.commands.last().unwrap();
        for p in [Predictor::Naive, Predictor::Flow] {
            let one = p.predict_one(stack, dt).unwrap();
            let ar = predict_ar(&p, stack, &[next], 1, dt).unwrap();
            assert_eq!(one.data, ar[0].data, "{}", p.name());
        }
    }

    #[test]
    fn zero_horizon_rejected() {
        let stacks = stacks_for_test(5);
        assert!(predict_ar(&Predictor::Naive, &stacks[0], &[], 0, 0.2).is_err());
        assert!(predict_ar(&Predictor::Naive, &stacks[0], &[], 1, 0.2).is_err());
    }

    #[test]
    fn zero_velocity_rollout_is_exact_identity_for_analytic() {
        let stacks = stacks_for_test(7);
        let mut stack = stacks[2].clone();
        stack.commands = vec![VelocityCommand::ZERO; 4];
        let cmds = vec![VelocityCommand::ZERO; 10];
        for p in [Predictor::Naive, Predictor::Flow] {
            let preds = predict_ar(&p, &stack, &cmds, 10, 0.2).unwrap();
            let newest = stack.frames.last().unwrap();
            assert_eq!(preds[9].data, newest.data, "{}", p.name());
        }
    }

    #[test]
    fn ar_degrades_with_horizon_for_flow() {
        // Build a long dataset and measure mean CC at horizons 1 and 5:
        // compounded warps must not beat one-shot prediction.
        let sensor = SensorConfig::default();
        let world = ReflectorMap::corridor(10.0, 1.25, 1.0);
        let ds = generate_dataset(
            &world,
            &sensor,
            40.0,
            11,
            &GenOptions {
                zero_dwell_prob: 0.0,
                ..GenOptions::default()
            },
        )
        .unwrap();
        let stacks = make_stacks(&ds, 3);
        let mut cc1 = Vec::new();
        let mut cc5 = Vec::new();
        for i in (0..stacks.len().saturating_sub(10)).step_by(7) {
            let stack = &stacks[i];
            // future commands starting at the stack's prediction step
            let base = i + 3; // record index of the prediction command
            let cmds: Vec<VelocityCommand> =
                (base..base + 5).map(|j| ds.records[j].commanded).collect();
            let preds = predict_ar(&Predictor::Flow, stack, &cmds, 5, 0.2).unwrap();
            let t1 = &ds.records[base + 1].scape;
            let t5 = &ds.records[base + 5].scape;
            cc1.push(cross_corr_coeff(&preds[0], t1).unwrap());
            cc5.push(cross_corr_coeff(&preds[4], t5).unwrap());
        }
        let m1 = cc1.iter().sum::<f64>() / cc1.len() as f64;
        let m5 = cc5.iter().sum::<f64>() / cc5.len() as f64;
        assert!(m5 <= m1 + 1e-9, "cc1 {m1} cc5 {m5}");
    }
}
