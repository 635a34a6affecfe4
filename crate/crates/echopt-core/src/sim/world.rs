//! Reflector worlds: the simulated environment the sonar observes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A circular reflector. Energy deposited in the energyscape scales with
/// `reflectivity`; `radius` is kept as geometry metadata for plots and
/// world authoring (occlusion and extent are not modeled).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflector {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub reflectivity: f64,
}

/// Axis-aligned rectangle in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }
}

/// Rectangle of admissible spawn positions plus a heading interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpawnBox {
    pub rect: Rect,
    pub heading_min: f64,
    pub heading_max: f64,
}

/// Goal disc for the corridor experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

/// The simulated world: reflectors inside a bounding rectangle, with
/// optional spawn boxes and a waypoint for closed-loop experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectorMap {
    pub bounds: Rect,
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub spawn_boxes: Vec<SpawnBox>,
    #[serde(default)]
    pub waypoint: Option<Waypoint>,
}

impl ReflectorMap {
    pub fn new(bounds: Rect, reflectors: Vec<Reflector>) -> Result<Self> {
        let map = Self {
            bounds,
            reflectors,
            spawn_boxes: Vec::new(),
            waypoint: None,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bounds.min_x < self.bounds.max_x && self.bounds.min_y < self.bounds.max_y) {
            return Err(CoreError::InvalidConfig("degenerate world bounds".into()));
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            if ![r.x, r.y, r.radius, r.reflectivity]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(CoreError::NonFinite("reflector fields"));
            }
            if r.radius < 0.0 {
                return Err(CoreError::InvalidConfig(format!(
                    "reflector {i}: negative radius"
                )));
            }
            if !(r.reflectivity > 0.0 && r.reflectivity <= 1.0) {
                return Err(CoreError::InvalidConfig(format!(
                    "reflector {i}: reflectivity {} outside (0, 1]",
                    r.reflectivity
                )));
            }
            if !self.bounds.contains(r.x, r.y) {
                return Err(CoreError::InvalidConfig(format!(
                    "reflector {i} at ({}, {}) outside bounds",
                    r.x, r.y
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let map: Self = serde_json::from_str(&text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Two facing rows of reflectors along +x, the world of the corridor
    /// and slip experiments.
    pub fn corridor(length: f64, half_width: f64, spacing: f64) -> Self {
        let mut reflectors = Vec::new();
        let n = (length / spacing).floor() as usize;
        for i in 0..=n {
            let x = i as f64 * spacing;
            for y in [half_width, -half_width] {
                reflectors.push(Reflector {
                    x,
                    y,
                    radius: 0.12,
                    reflectivity: 1.0,
                });
            }
        }
        let margin = 2.0;
        Self {
            bounds: Rect {
                min_x: -margin,
                min_y: -half_width - margin,
                max_x: length + margin,
                max_y: half_width + margin,
            },
            reflectors,
            spawn_boxes: vec![SpawnBox {
                rect: Rect {
                    min_x: 0.4,
                    min_y: -0.35,
                    max_x: 1.2,
                    max_y: 0.35,
                },
                heading_min: -0.26,
                heading_max: 0.26,
            }],
            waypoint: Some(Waypoint {
                x: length - 1.0,
                y: 0.0,
                radius: 0.5,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Regenerates the world assets shipped in `worlds/`. Run manually:
    /// `cargo test -p echopt-core regenerate_world_assets -- --ignored`.
    #[test]
    #[ignore]
    fn regenerate_world_assets() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../worlds");
        std::fs::create_dir_all(&dir).unwrap();
        ReflectorMap::corridor(12.0, 1.25, 1.0)
            .save(&dir.join("corridor.json"))
            .unwrap();
    }

    #[test]
    fn corridor_world_validates() {
        let w = ReflectorMap::corridor(12.0, 1.25, 1.0);
        w.validate().unwrap();
        assert_eq!(w.reflectors.len(), 26);
        assert!(w.waypoint.is_some());
    }

    #[test]
    fn rejects_reflector_outside_bounds() {
        let bounds = Rect {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 1.0,
            max_y: 1.0,
        };
        let r = Reflector {
            x: 2.0,
            y: 0.5,
            radius: 0.1,
            reflectivity: 1.0,
        };
        assert!(ReflectorMap::new(bounds, vec![r]).is_err());
    }

    #[test]
    fn rejects_zero_reflectivity() {
        let bounds = Rect {
            min_x: -1.0,
            min_y: -1.0,
            max_x: 1.0,
            max_y: 1.0,
        };
        let r = Reflector {
            x: 0.0,
            y: 0.0,
            radius: 0.1,
            reflectivity: 0.0,
        };
        assert!(ReflectorMap::new(bounds, vec![r]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let w = ReflectorMap::corridor(6.0, 1.0, 1.5);
        let text = serde_json::to_string(&w).unwrap();
        let back: ReflectorMap = serde_json::from_str(&text).unwrap();
        assert_eq!(w, back);
    }
}
