//! Subcommand implementations.

pub mod bench;
pub mod corridor_exp;
pub mod export;
pub mod gen_data;
pub mod predict;
pub mod slip_exp;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::Context;
use echopt_core::{ReflectorMap, SensorConfig};

/// Loads a world from a JSON path, or one of the built-in names
/// `corridor` (the experiment world) and `room` (an open training room).
pub fn load_world(spec: &str) -> anyhow::Result<ReflectorMap> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(ReflectorMap::load(path).with_context(|| format!("loading world {spec}"))?);
    }
    match spec {
        "corridor" => Ok(ReflectorMap::corridor(12.0, 1.25, 1.0)),
        "room" => Ok(room_world()),
        other => anyhow::bail!("world '{other}' is neither a file nor a built-in name"),
    }
}

/// A rectangular room with scattered reflectors for varied training data.
pub fn room_world() -> ReflectorMap {
    use echopt_core::sim::world::{Rect, Reflector};
    let bounds = Rect {
        min_x: -5.0,
        min_y: -4.0,
        max_x: 5.0,
        max_y: 4.0,
    };
    // Deterministic pseudo-grid with jitter taken from a fixed pattern.
    let mut reflectors = Vec::new();
    let mut h = 0x9e37_79b9_u64;
    let mut jitter = || {
        h ^= h << 13;
        h ^= h >> 7;
        h ^= h << 17;
        (h % 1000) as f64 / 1000.0 - 0.5
    };
    for gx in 0..6 {
        for gy in 0..5 {
            let x = -4.2 + 1.7 * gx as f64 + 0.9 * jitter();
            let y = -3.2 + 1.6 * gy as f64 + 0.9 * jitter();
            let reflectivity = 0.5 + 0.5 * (0.5 + jitter()).clamp(0.0, 1.0);
            reflectors.push(Reflector {
                x: x.clamp(bounds.min_x + 0.2, bounds.max_x - 0.2),
                y: y.clamp(bounds.min_y + 0.2, bounds.max_y - 0.2),
                radius: 0.1,
                reflectivity,
            });
        }
    }
    ReflectorMap {
        bounds,
        reflectors,
        spawn_boxes: Vec::new(),
        waypoint: None,
    }
}

pub fn load_sensor(path: &Option<PathBuf>) -> anyhow::Result<SensorConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading sensor config {}", p.display()))?;
            let sensor: SensorConfig = serde_json::from_str(&text)?;
            sensor.validate()?;
            Ok(sensor)
        }
        None => Ok(SensorConfig::default()),
    }
}

pub fn parse_horizons(spec: &str) -> anyhow::Result<Vec<usize>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("bad horizon '{s}'"))
        })
        .collect()
}
