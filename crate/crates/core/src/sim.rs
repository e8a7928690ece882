//! Deterministic synthetic sensing and planar kinematics.
//!
//! Objects project through an ideal pinhole at the robot pose into normalized
//! image boxes; a detector stand-in then samples detections with per-object
//! probability, box jitter and confidence noise from a seeded generator.
//! Motion is decoupled: a step either translates along the heading or yaws in
//! place, never both.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{ControlCommand, ControlConfig};
use crate::descriptor::{BoundingBox, Detection};
use crate::world::{WorldModel, WorldObject};

/// Boxes thinner than this (normalized units) are treated as not detected;
/// they also would not survive the f32 storage format.
pub const MIN_BOX_EXTENT: f64 = 1e-4;

/// Planar robot pose at fixed altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading, radians in (-pi, pi], CCW positive, 0 along +x.
    pub yaw: f64,
    pub altitude: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_yaw(yaw),
            altitude: 1.5,
        }
    }

    pub fn with_altitude(mut self, altitude: f64) -> Self {
        self.altitude = altitude;
        self
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_yaw(yaw: f64) -> f64 {
    use std::f64::consts::PI;
    let wrapped = (yaw + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI {
        PI
    } else {
        wrapped
    }
}

/// Ideal pinhole camera.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    /// Horizontal field of view, radians.
    pub hfov: f64,
    /// Width over height.
    pub aspect: f64,
    /// Objects farther than this are not detected, meters.
    pub max_range: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            hfov: 1.2,
            aspect: 16.0 / 9.0,
            max_range: 12.0,
        }
    }
}

/// Detector noise parameters. All sampling is driven by a caller-provided
/// seeded generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Std-dev of Gaussian jitter on each box edge, normalized units.
    pub bbox_sigma: f64,
    /// Confidence is uniform in [min, max].
    pub confidence_min: f64,
    pub confidence_max: f64,
    /// Default generator seed.
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            bbox_sigma: 0.01,
            confidence_min: 0.5,
            confidence_max: 1.0,
            seed: 0,
        }
    }
}

fn box_corners(obj: &WorldObject) -> [(f64, f64, f64); 8] {
    let (cx, cy, cz) = obj.center;
    let (hw, hd, hh) = (obj.size.0 / 2.0, obj.size.1 / 2.0, obj.size.2 / 2.0);
    let mut corners = [(0.0, 0.0, 0.0); 8];
    let mut k = 0;
    for &sx in &[-1.0, 1.0] {
        for &sy in &[-1.0, 1.0] {
            for &sz in &[-1.0, 1.0] {
                corners[k] = (cx + sx * hw, cy + sy * hd, cz + sz * hh);
                k += 1;
            }
        }
    }
    corners
}

/// Project one object into a normalized image box, or nothing when the
/// object center is behind the camera, out of range, fully outside the
/// frustum, or its sight line crosses an occluder.
pub fn project_object(
    obj: &WorldObject,
    state: &RobotState,
    cam: &CameraModel,
    world: &WorldModel,
) -> Option<BoundingBox> {
    let (sin_yaw, cos_yaw) = state.yaw.sin_cos();
    // camera axes: forward along the heading, right toward -y at yaw 0
    let cam_pos = (state.x, state.y, state.altitude);
    let to_local = |p: (f64, f64, f64)| {
        let dx = p.0 - cam_pos.0;
        let dy = p.1 - cam_pos.1;
        let dz = p.2 - cam_pos.2;
        let depth = dx * cos_yaw + dy * sin_yaw;
        let lateral = dx * sin_yaw - dy * cos_yaw;
        (depth, lateral, dz)
    };

    let (depth_c, lat_c, up_c) = to_local(obj.center);
    if depth_c <= 0.0 {
        return None;
    }
    let dist = (depth_c * depth_c + lat_c * lat_c + up_c * up_c).sqrt();
    if dist > cam.max_range {
        return None;
    }
    // sight line to the center against every wall
    let eye = (cam_pos.0, cam_pos.1);
    let target = (obj.center.0, obj.center.1);
    if world.occluders.iter().any(|w| w.blocks(eye, target)) {
        return None;
    }

    let tan_half_h = (cam.hfov / 2.0).tan();
    let tan_half_v = tan_half_h / cam.aspect;
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for corner in box_corners(obj) {
        let (depth, lateral, up) = to_local(corner);
        if depth <= 1e-9 {
            return None;
        }
        let x = 0.5 * (lateral / (depth * tan_half_h) + 1.0);
        let y = 0.5 * (-up / (depth * tan_half_v) + 1.0);
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    let x_min = x_min.max(0.0);
    let y_min = y_min.max(0.0);
    let x_max = x_max.min(1.0);
    let y_max = y_max.min(1.0);
    if x_max - x_min < MIN_BOX_EXTENT || y_max - y_min < MIN_BOX_EXTENT {
        return None;
    }
    Some(BoundingBox::new(x_min, y_min, x_max, y_max).expect("clipped box is valid"))
}

/// Sample detections of all visible objects. Each visible object is detected
/// with probability `detect_prob * lighting_factor`; detected boxes get
/// Gaussian edge jitter (re-clipped, degenerate results dropped) and a
/// uniform confidence.
pub fn sense(
    world: &WorldModel,
    state: &RobotState,
    cam: &CameraModel,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    let jitter = if noise.bbox_sigma > 0.0 {
        Some(Normal::new(0.0, noise.bbox_sigma).expect("valid sigma"))
    } else {
        None
    };
    let mut out = Vec::new();
    for obj in &world.objects {
        let Some(bbox) = project_object(obj, state, cam, world) else {
            continue;
        };
        let coin: f64 = rng.gen();
        if coin >= obj.detect_prob * world.lighting_factor {
            continue;
        }
        let bbox = match jitter {
            Some(normal) => {
                let x_min = (bbox.x_min + normal.sample(rng)).clamp(0.0, 1.0);
                let y_min = (bbox.y_min + normal.sample(rng)).clamp(0.0, 1.0);
                let x_max = (bbox.x_max + normal.sample(rng)).clamp(0.0, 1.0);
                let y_max = (bbox.y_max + normal.sample(rng)).clamp(0.0, 1.0);
                if x_max - x_min < MIN_BOX_EXTENT || y_max - y_min < MIN_BOX_EXTENT {
                    continue;
                }
                BoundingBox::new(x_min, y_min, x_max, y_max).expect("jittered box is valid")
            }
            None => bbox,
        };
        let u: f64 = rng.gen();
        let confidence = noise.confidence_min + u * (noise.confidence_max - noise.confidence_min);
        out.push(Detection {
            class: obj.class,
            bbox,
            confidence,
        });
    }
    out
}

/// Advance the robot one step. Advancing translates along the heading with
/// yaw untouched; otherwise the commanded yaw delta is applied, clamped to
/// the per-step limit, with position untouched.
pub fn step_robot(
    state: &RobotState,
    cmd: &ControlCommand,
    dt: f64,
    cfg: &ControlConfig,
) -> RobotState {
    let mut next = *state;
    if cmd.advance {
        next.x += cfg.forward_speed * dt * state.yaw.cos();
        next.y += cfg.forward_speed * dt * state.yaw.sin();
    } else {
        let delta = cmd.yaw_adjust.clamp(-cfg.max_yaw_step, cfg.max_yaw_step);
        next.yaw = normalize_yaw(state.yaw + delta);
    }
    next
}
