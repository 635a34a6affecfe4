//! Property tests for the simulator and predictor invariants.

use proptest::prelude::*;

use echopt_core::flow::{flow_warp, naive_shift};
use echopt_core::sim::kinematics::{step_kinematics, Pose2D, SlipState, VelocityCommand};
use echopt_core::sim::render::render_energyscape;
use echopt_core::sim::world::{Rect, Reflector, ReflectorMap};
use echopt_core::SensorConfig;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Exact-arc integration composes: two steps of dt equal one of 2 dt.
    #[test]
    fn kinematics_composition(
        x in -5.0..5.0f64,
        y in -5.0..5.0f64,
        heading in -3.0..3.0f64,
        v in -0.3..0.3f64,
        omega in -1.0..1.0f64,
        dt in 0.01..0.5f64,
    ) {
        let pose = Pose2D::new(x, y, heading).unwrap();
        let cmd = VelocityCommand::new(v, omega);
        let two_small = step_kinematics(
            step_kinematics(pose, cmd, dt, SlipState::NONE, 0.3).unwrap(),
            cmd,
            dt,
            SlipState::NONE,
            0.3,
        )
        .unwrap();
        let one_big = step_kinematics(pose, cmd, 2.0 * dt, SlipState::NONE, 0.3).unwrap();
        prop_assert!((two_small.x - one_big.x).abs() < 1e-12);
        prop_assert!((two_small.y - one_big.y).abs() < 1e-12);
        let dh = echopt_core::sim::kinematics::wrap_angle(two_small.heading - one_big.heading);
        prop_assert!(dh.abs() < 1e-12);
    }

    /// Warping never produces negative cells or new maxima (bilinear
    /// interpolation cannot overshoot).
    #[test]
    fn predictors_bounded(
        rx in 1.0..4.0f64,
        ry in -1.0..1.0f64,
        v in -0.3..0.3f64,
        omega in -1.0..1.0f64,
    ) {
        let sensor = SensorConfig {
            num_ranges: 48,
            num_azimuths: 24,
            ..SensorConfig::default()
        };
        let world = ReflectorMap::new(
            Rect { min_x: -10.0, min_y: -10.0, max_x: 10.0, max_y: 10.0 },
            vec![Reflector { x: rx, y: ry, radius: 0.1, reflectivity: 1.0 }],
        )
        .unwrap();
        let scape = render_energyscape(&world, Pose2D::origin(), &sensor).unwrap();
        let max_in = scape.max_value();
        let cmd = VelocityCommand::new(v, omega);
        for out in [
            naive_shift(&scape, cmd, 0.2).unwrap(),
            flow_warp(&scape, cmd, 0.2).unwrap(),
        ] {
            prop_assert!(out.data.iter().all(|&c| c >= 0.0));
            prop_assert!(out.max_value() <= max_in * (1.0 + 1e-6));
        }
    }
}

/// Rotating the world about the sensor origin by a whole number of
/// azimuth bins equals shifting the rendered grid by that many bins
/// (directivity disabled so amplitudes carry no bearing dependence).
#[test]
fn rendering_rotation_equivariance() {
    let sensor = SensorConfig {
        directivity_sigma: f64::INFINITY,
        ..SensorConfig::default()
    };
    let reflectors = vec![
        Reflector {
            x: 2.0,
            y: 0.4,
            radius: 0.1,
            reflectivity: 1.0,
        },
        Reflector {
            x: 3.1,
            y: -0.8,
            radius: 0.1,
            reflectivity: 0.7,
        },
        Reflector {
            x: 1.4,
            y: 0.1,
            radius: 0.1,
            reflectivity: 0.5,
        },
    ];
    let bounds = Rect {
        min_x: -10.0,
        min_y: -10.0,
        max_x: 10.0,
        max_y: 10.0,
    };
    let world = ReflectorMap::new(bounds, reflectors.clone()).unwrap();
    let base = render_energyscape(&world, Pose2D::origin(), &sensor).unwrap();

    for shift_bins in [3i64, -5] {
        let delta = shift_bins as f64 * sensor.azimuth_bin_width();
        let rotated: Vec<Reflector> = reflectors
            .iter()
            .map(|r| Reflector {
                x: r.x * delta.cos() - r.y * delta.sin(),
                y: r.x * delta.sin() + r.y * delta.cos(),
                ..*r
            })
            .collect();
        let world_rot = ReflectorMap::new(bounds, rotated).unwrap();
        let turned = render_energyscape(&world_rot, Pose2D::origin(), &sensor).unwrap();
        // turned[k, j + shift] must equal base[k, j] on the overlap.
        let mut checked = 0usize;
        for k in 0..base.num_ranges {
            for j in 0..base.num_azimuths {
                let jj = j as i64 + shift_bins;
                if jj < 0 || jj >= base.num_azimuths as i64 {
                    continue;
                }
                let a = base.cell(k, j);
                let b = turned.cell(k, jj as usize);
                assert!(
                    (a - b).abs() <= 1e-6 * a.abs().max(1e-12).max(b.abs()),
                    "cell ({k}, {j}) shift {shift_bins}: {a} vs {b}"
                );
                checked += 1;
            }
        }
        assert!(checked > base.len() / 2);
    }
}

/// Naive and flow agree for pure rotation but differ for linear motion
/// off axis by the predicted range-shift factor (1 - cos(theta)) v dt.
#[test]
fn naive_flow_disagreement_factor() {
    let sensor = SensorConfig::default();
    let theta: f64 = 40.0_f64.to_radians();
    let r0 = 3.0;
    let world = ReflectorMap::new(
        Rect {
            min_x: -10.0,
            min_y: -10.0,
            max_x: 10.0,
            max_y: 10.0,
        },
        vec![Reflector {
            x: r0 * theta.cos(),
            y: r0 * theta.sin(),
            radius: 0.1,
            reflectivity: 1.0,
        }],
    )
    .unwrap();
    let scape = render_energyscape(&world, Pose2D::origin(), &sensor).unwrap();
    let cmd = VelocityCommand::new(0.3, 0.0);
    let dt = 0.2;

    let naive = naive_shift(&scape, cmd, dt).unwrap();
    let flow = flow_warp(&scape, cmd, dt).unwrap();
    let (r_naive, _) = naive.refined_peak();
    let (r_flow, _) = flow.refined_peak();
    let (r_in, _) = scape.refined_peak();

    // The naive model shifts the peak by the full v dt along range; the
    // exact flow shifts it by v dt cos(theta) at this bearing.
    let naive_shift_measured = r_in - r_naive;
    let flow_shift_measured = r_in - r_flow;
    let bin = sensor.range_bin_width();
    assert!(
        (naive_shift_measured - 0.06).abs() < bin,
        "naive range shift {naive_shift_measured:.4}"
    );
    assert!(
        (flow_shift_measured - 0.06 * theta.cos()).abs() < bin,
        "flow range shift {flow_shift_measured:.4}"
    );
    let disagreement = naive_shift_measured - flow_shift_measured;
    let predicted = (1.0 - theta.cos()) * 0.06;
    assert!(
        (disagreement - predicted).abs() < bin,
        "disagreement {disagreement:.4} vs predicted {predicted:.4}"
    );
}
