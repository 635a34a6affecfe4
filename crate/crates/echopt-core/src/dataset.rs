//! Dataset records, the on-disk frame format, random-walk generation,
//! and sliding-window stack extraction.
//!
//! File layout: one JSON header line, then length-prefixed binary
//! records. Each record is a u32 little-endian byte count followed by
//! f32 little-endian fields: timestamp, commanded (v, omega), executed
//! (v, omega), pose (x, y, heading), then `num_ranges * num_azimuths`
//! energy cells. Identical seeds produce byte-identical files.

use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::parallel::par_map;
use crate::sim::kinematics::{step_kinematics, Pose2D, SlipState, VelocityCommand};
use crate::sim::noise::{inject_noise, SNR_CLEAN};
use crate::sim::render::render_energyscape;
use crate::sim::sensor::{Energyscape, SensorConfig};
use crate::sim::world::ReflectorMap;

pub const FORMAT_VERSION: u32 = 1;

/// Fixed scalar fields per record, ahead of the energy payload.
const RECORD_SCALARS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub sensor: SensorConfig,
    pub frame_period: f64,
    pub frame_count: usize,
    pub world_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub timestamp: f64,
    pub commanded: VelocityCommand,
    pub executed: VelocityCommand,
    pub pose: Pose2D,
    pub scape: Arc<Energyscape>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<FrameRecord>,
}

/// Predictor input: `n_frames` consecutive energyscapes (oldest first),
/// `n_frames + 1` commanded velocities, and the frame to predict.
///
/// Command layout: `commands[0]` led into the first frame, `commands[i]`
/// (for 0 < i < n) drove the transition between frames `i-1` and `i`,
/// and the final command is the one whose outcome is predicted.
#[derive(Debug, Clone)]
pub struct FrameStack {
    pub frames: Vec<Arc<Energyscape>>,
    pub commands: Vec<VelocityCommand>,
    pub target: Option<Arc<Energyscape>>,
}

impl FrameStack {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.commands.len() != self.frames.len() + 1 {
            return Err(CoreError::InvalidArgument(format!(
                "stack holds {} frames but {} commands",
                self.frames.len(),
                self.commands.len()
            )));
        }
        for w in self.frames.windows(2) {
            if !w[0].same_grid(&w[1]) || w[1].timestamp <= w[0].timestamp {
                return Err(CoreError::InvalidArgument(
                    "stack frames must share a grid and increase in time".into(),
                ));
            }
        }
        Ok(())
    }

    /// Frame period inferred from consecutive timestamps.
    pub fn dt(&self) -> f64 {
        if self.frames.len() >= 2 {
            self.frames[1].timestamp - self.frames[0].timestamp
        } else {
            0.2
        }
    }
}

/// Options for [`generate_dataset`]. Commands follow a random walk:
/// piecewise-constant with dwell times uniform in `dwell` seconds,
/// `v` uniform within `v_range`, `omega` within `omega_range`, and a
/// `zero_dwell_prob` chance of an exact pause. When the robot drifts
/// near the world border the command is overridden to steer back inside.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenOptions {
    pub frame_period: f64,
    pub v_range: (f64, f64),
    pub omega_range: (f64, f64),
    pub dwell: (f64, f64),
    pub zero_dwell_prob: f64,
    /// SNR of per-frame injected noise; `None` writes clean renders.
    pub snr_db: Option<f64>,
    pub wheel_base: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            frame_period: 0.2,
            v_range: (-0.3, 0.3),
            omega_range: (-1.0, 1.0),
            dwell: (1.0, 4.0),
            zero_dwell_prob: 0.15,
            snr_db: None,
            wheel_base: 0.3,
        }
    }
}

/// Simulates `duration` seconds of random-walk driving at 5 Hz (default
/// period 0.2 s) and returns the rendered dataset. Deterministic per
/// seed; frames render in parallel with per-index noise seeds.
pub fn generate_dataset(
    world: &ReflectorMap,
    sensor: &SensorConfig,
    duration: f64,
    seed: u64,
    opts: &GenOptions,
) -> Result<Dataset> {
    if duration <= 0.0 {
        return Err(CoreError::InvalidArgument("duration must be > 0".into()));
    }
    world.validate()?;
    sensor.validate()?;
    let steps = (duration / opts.frame_period).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Command/pose trajectory is sequential; rendering is parallel.
    let mut poses = Vec::with_capacity(steps);
    let mut commands = Vec::with_capacity(steps);
    let (cx, cy) = world.bounds.center();
    let mut pose = Pose2D::new(cx, cy, 0.0)?;
    let mut cmd = VelocityCommand::ZERO;
    let mut dwell_left = 0.0;
    for _ in 0..steps {
        if dwell_left <= 0.0 {
            cmd = if rng.random_range(0.0..1.0) < opts.zero_dwell_prob {
                VelocityCommand::ZERO
            } else {
                VelocityCommand::new(
                    rng.random_range(opts.v_range.0..=opts.v_range.1),
                    rng.random_range(opts.omega_range.0..=opts.omega_range.1),
                )
            };
            dwell_left = rng.random_range(opts.dwell.0..=opts.dwell.1);
        }
        let executed = steer_inside(world, pose, cmd, opts);
        poses.push(pose);
        commands.push((cmd, executed));
        pose = step_kinematics(pose, executed, opts.frame_period, SlipState::NONE, opts.wheel_base)?;
        dwell_left -= opts.frame_period;
    }

    let indexed: Vec<(usize, Pose2D)> = poses.iter().copied().enumerate().collect();
    let scapes: Vec<Result<Energyscape>> = par_map(&indexed, |(i, p)| {
        let clean = render_energyscape(world, *p, sensor)?;
        let clean = clean.with_timestamp(*i as f64 * opts.frame_period);
        match opts.snr_db {
            Some(snr) if snr != SNR_CLEAN => inject_noise(&clean, snr, seed ^ (*i as u64)),
            _ => Ok(clean),
        }
    });

    let mut records = Vec::with_capacity(steps);
    for (i, scape) in scapes.into_iter().enumerate() {
        let (commanded, executed) = commands[i];
        records.push(FrameRecord {
            timestamp: i as f64 * opts.frame_period,
            commanded,
            executed,
            pose: poses[i],
            scape: Arc::new(scape?),
        });
    }

    Ok(Dataset {
        header: DatasetHeader {
            format_version: FORMAT_VERSION,
            sensor: *sensor,
            frame_period: opts.frame_period,
            frame_count: records.len(),
            world_hash: fnv1a_hex(&serde_json::to_vec(world)?),
            seed,
        },
        records,
    })
}

/// Overrides the command with a turn toward the world center when the
/// pose is within half a meter of the bounds, so random walks stay inside.
fn steer_inside(
    world: &ReflectorMap,
    pose: Pose2D,
    cmd: VelocityCommand,
    opts: &GenOptions,
) -> VelocityCommand {
    let margin = 0.5;
    let b = &world.bounds;
    let inside = pose.x > b.min_x + margin
        && pose.x < b.max_x - margin
        && pose.y > b.min_y + margin
        && pose.y < b.max_y - margin;
    if inside {
        return cmd;
    }
    let (cx, cy) = b.center();
    let bearing = (cy - pose.y).atan2(cx - pose.x);
    let err = crate::sim::kinematics::wrap_angle(bearing - pose.heading);
    let omega = (1.5 * err).clamp(opts.omega_range.0, opts.omega_range.1);
    let v = if err.abs() < 0.5 { 0.2 } else { 0.05 };
    VelocityCommand::new(v, omega)
}

/// Sliding-window extraction of predictor stacks with one command of
/// lookback: the window starting at frame `i` (i >= 1) takes frames
/// `i..i+n` as inputs, frame `i+n` as target, and the commanded
/// velocities at `i-1..=i+n-1`. A dataset of `N` frames therefore
/// yields `N - n - 1` stacks.
pub fn make_stacks(dataset: &Dataset, n_frames: usize) -> Vec<FrameStack> {
    let n = n_frames;
    let records = &dataset.records;
    if records.len() < n + 2 {
        return Vec::new();
    }
    (1..=records.len() - n - 1)
        .map(|i| FrameStack {
            frames: (i..i + n).map(|k| Arc::clone(&records[k].scape)).collect(),
            commands: (i - 1..i + n).map(|k| records[k].commanded).collect(),
            target: Some(Arc::clone(&records[i + n].scape)),
        })
        .collect()
}

/// Like [`make_stacks`], but targets come from a second dataset aligned
/// frame-for-frame with the first (same world, seed, and timing journal,
/// typically rendered at a different SNR). Training against clean
/// targets while observing noisy inputs supervises the denoising the
/// prediction task implies, without touching the evaluation data.
pub fn make_stacks_with_targets(
    inputs: &Dataset,
    targets: &Dataset,
    n_frames: usize,
) -> Result<Vec<FrameStack>> {
    let (a, b) = (&inputs.header, &targets.header);
    if a.frame_count != b.frame_count
        || a.frame_period != b.frame_period
        || a.world_hash != b.world_hash
        || a.seed != b.seed
        || a.sensor != b.sensor
    {
        return Err(CoreError::InvalidArgument(
            "target dataset is not frame-aligned with the input dataset".into(),
        ));
    }
    let mut stacks = make_stacks(inputs, n_frames);
    for (i, stack) in stacks.iter_mut().enumerate() {
        stack.target = Some(Arc::clone(&targets.records[i + 1 + n_frames].scape));
    }
    Ok(stacks)
}

// ---- file IO ---------------------------------------------------------

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    let mut header_line = serde_json::to_string(&dataset.header)?;
    header_line.push('\n');
    out.write_all(header_line.as_bytes())?;
    for rec in &dataset.records {
        let cells = rec.scape.data.len();
        let byte_len = 4 * (RECORD_SCALARS + cells) as u32;
        out.write_all(&byte_len.to_le_bytes())?;
        let scalars: [f32; RECORD_SCALARS] = [
            rec.timestamp as f32,
            rec.commanded.v_lin as f32,
            rec.commanded.omega_r as f32,
            rec.executed.v_lin as f32,
            rec.executed.omega_r as f32,
            rec.pose.x as f32,
            rec.pose.y as f32,
            rec.pose.heading as f32,
        ];
        for s in scalars {
            out.write_all(&s.to_le_bytes())?;
        }
        for &c in &rec.scape.data {
            out.write_all(&c.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CoreError::DataFormat("missing header line".into()))?;
    let header: DatasetHeader = serde_json::from_slice(&raw[..newline])?;
    if header.format_version != FORMAT_VERSION {
        return Err(CoreError::DataFormat(format!(
            "dataset format version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    let cells = header.sensor.num_ranges * header.sensor.num_azimuths;
    let expect_len = 4 * (RECORD_SCALARS + cells);

    let mut records = Vec::with_capacity(header.frame_count);
    let mut at = newline + 1;
    while at < raw.len() {
        if at + 4 > raw.len() {
            return Err(CoreError::DataFormat("truncated record prefix".into()));
        }
        let len = u32::from_le_bytes([raw[at], raw[at + 1], raw[at + 2], raw[at + 3]]) as usize;
        at += 4;
        if len != expect_len || at + len > raw.len() {
            return Err(CoreError::DataFormat(format!(
                "record length {len} (expected {expect_len})"
            )));
        }
        let mut f = raw[at..at + len]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        let ts = f.next().unwrap() as f64;
        let commanded = VelocityCommand::new(f.next().unwrap() as f64, f.next().unwrap() as f64);
        let executed = VelocityCommand::new(f.next().unwrap() as f64, f.next().unwrap() as f64);
        let pose = Pose2D::new(
            f.next().unwrap() as f64,
            f.next().unwrap() as f64,
            f.next().unwrap() as f64,
        )?;
        let data: Vec<f32> = f.collect();
        let scape = Energyscape {
            data,
            num_ranges: header.sensor.num_ranges,
            num_azimuths: header.sensor.num_azimuths,
            r_max: header.sensor.r_max,
            fov: header.sensor.fov,
            timestamp: ts,
        };
        records.push(FrameRecord {
            timestamp: ts,
            commanded,
            executed,
            pose,
            scape: Arc::new(scape),
        });
        at += len;
    }
    if records.len() != header.frame_count {
        return Err(CoreError::DataFormat(format!(
            "read {} records, header claims {}",
            records.len(),
            header.frame_count
        )));
    }
    Ok(Dataset { header, records })
}

/// FNV-1a content hash, hex-encoded; identifies world files in headers.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}
