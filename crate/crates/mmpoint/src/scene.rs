//! Ground-truth scene description and sampling.
//!
//! The radar sits at the origin with boresight along +y. Scenes are lists of
//! point scatterers with constant-velocity motion; distributed targets are
//! expanded into deterministic contour points at load time so golden fixtures
//! stay stable.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Target class carried by each scatterer so clustering/classification
/// metrics need no separate annotation channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Car,
    Roadside,
    Bicycle,
    Pedestrian,
    Unlabeled,
}

impl Default for Label {
    fn default() -> Self {
        Label::Unlabeled
    }
}

/// A single point scatterer: position and velocity in meters / m/s,
/// radar cross section in m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub rcs: f64,
    #[serde(default)]
    pub label: Label,
}

impl Scatterer {
    pub fn validate(&self) -> Result<()> {
        if !self.rcs.is_finite() || self.rcs < 0.0 {
            return Err(Error::Validation(format!(
                "scatterer rcs must be finite and >= 0, got {}",
                self.rcs
            )));
        }
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("scatterer position must be finite".into()));
        }
        if self.velocity.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("scatterer velocity must be finite".into()));
        }
        Ok(())
    }

    /// Euclidean range to the radar at the origin.
    pub fn range(&self) -> f64 {
        let [x, y, z] = self.position;
        (x * x + y * y + z * z).sqrt()
    }

    /// Closing speed toward the radar (positive = approaching), so that range
    /// advances as r(t) = r(0) - v_r * t.
    pub fn radial_velocity(&self) -> f64 {
        let r = self.range();
        if r == 0.0 {
            return 0.0;
        }
        let [x, y, z] = self.position;
        let [vx, vy, vz] = self.velocity;
        -(x * vx + y * vy + z * vz) / r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
    pub frame_interval: f64,
    pub n_frames: usize,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 1 {
            return Err(Error::Validation("n_frames must be >= 1".into()));
        }
        if !(self.frame_interval > 0.0) {
            return Err(Error::Validation("frame_interval must be > 0".into()));
        }
        for s in &self.scatterers {
            s.validate()?;
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n_frames as f64 * self.frame_interval
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScattererDoc {
    pos: [f64; 3],
    vel: [f64; 3],
    rcs: f64,
    #[serde(default)]
    label: Label,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DistributedDoc {
    center: [f64; 3],
    extent: [f64; 3],
    n_points: usize,
    rcs_total: f64,
    #[serde(default)]
    label: Label,
    #[serde(default)]
    vel: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneDoc {
    frame_interval_s: f64,
    n_frames: usize,
    #[serde(default)]
    scatterers: Vec<ScattererDoc>,
    #[serde(default)]
    distributed: Vec<DistributedDoc>,
}

/// Parse a scene document (TOML). `distributed` blocks are expanded into
/// contour scatterers at load time.
pub fn load_scene(config_text: &str) -> Result<Scene> {
    let doc: SceneDoc =
        toml::from_str(config_text).map_err(|e| Error::Schema(format!("scene: {e}")))?;
    let mut scatterers = Vec::new();
    for s in &doc.scatterers {
        scatterers.push(Scatterer {
            position: s.pos,
            velocity: s.vel,
            rcs: s.rcs,
            label: s.label,
        });
    }
    for d in &doc.distributed {
        let mut points = make_distributed_target(d.center, d.extent, d.n_points, d.label, d.rcs_total)?;
        for p in &mut points {
            p.velocity = d.vel;
        }
        scatterers.extend(points);
    }
    let scene = Scene {
        scatterers,
        frame_interval: doc.frame_interval_s,
        n_frames: doc.n_frames,
    };
    scene.validate()?;
    Ok(scene)
}

/// Serialize a scene back to the document format (point scatterers only;
/// distributed blocks were already expanded).
pub fn serialize_scene(scene: &Scene) -> String {
    let doc = SceneDoc {
        frame_interval_s: scene.frame_interval,
        n_frames: scene.n_frames,
        scatterers: scene
            .scatterers
            .iter()
            .map(|s| ScattererDoc {
                pos: s.position,
                vel: s.velocity,
                rcs: s.rcs,
                label: s.label,
            })
            .collect(),
        distributed: Vec::new(),
    };
    toml::to_string(&doc).expect("scene serializes")
}

/// Advance every scatterer by constant-velocity motion to time `t` (seconds
/// from scene start). Labels and RCS are unchanged.
pub fn sample_scene(scene: &Scene, t: f64) -> Result<Vec<Scatterer>> {
    if !(0.0..=scene.duration()).contains(&t) {
        return Err(Error::Domain(format!(
            "t = {t} outside [0, {}]",
            scene.duration()
        )));
    }
    Ok(scene
        .scatterers
        .iter()
        .map(|s| Scatterer {
            position: [
                s.position[0] + s.velocity[0] * t,
                s.position[1] + s.velocity[1] * t,
                s.position[2] + s.velocity[2] * t,
            ],
            ..*s
        })
        .collect())
}

/// Place `n_points` scatterers deterministically on the rectangular contour
/// of the target footprint (the perimeter of the extent box in the xy plane,
/// at the center height). RCS is split evenly.
pub fn make_distributed_target(
    center: [f64; 3],
    extent: [f64; 3],
    n_points: usize,
    label: Label,
    rcs_total: f64,
) -> Result<Vec<Scatterer>> {
    if n_points == 0 {
        return Err(Error::Domain("n_points must be >= 1".into()));
    }
    if extent.iter().any(|e| *e < 0.0) {
        return Err(Error::Domain("extent components must be >= 0".into()));
    }
    let rcs = rcs_total / n_points as f64;
    let hx = extent[0] / 2.0;
    let hy = extent[1] / 2.0;
    let perimeter = 4.0 * (hx + hy);
    let mut out = Vec::with_capacity(n_points);
    if n_points == 1 || perimeter == 0.0 {
        for _ in 0..n_points {
            out.push(Scatterer {
                position: center,
                velocity: [0.0; 3],
                rcs,
                label,
            });
        }
        return Ok(out);
    }
    // Walk the closed rectangle perimeter starting at the front-left corner.
    // Equal arc spacing keeps the point set symmetric under 180° rotation for
    // even n, pinning the centroid to the center.
    for i in 0..n_points {
        let s = i as f64 / n_points as f64 * perimeter;
        let (dx, dy) = perimeter_point(s, hx, hy);
        out.push(Scatterer {
            position: [center[0] + dx, center[1] + dy, center[2]],
            velocity: [0.0; 3],
            rcs,
            label,
        });
    }
    Ok(out)
}

/// Point at arc length `s` along the rectangle perimeter with half-extents
/// (hx, hy), starting at (-hx, -hy) and walking counter-clockwise.
fn perimeter_point(s: f64, hx: f64, hy: f64) -> (f64, f64) {
    let w = 2.0 * hx;
    let h = 2.0 * hy;
    let mut s = s;
    if s < w {
        return (-hx + s, -hy);
    }
    s -= w;
    if s < h {
        return (hx, -hy + s);
    }
    s -= h;
    if s < w {
        return (hx - s, hy);
    }
    s -= w;
    (-hx, hy - s)
}
