//! Funnel-lane motion control from object landmarks.
//!
//! Each matched object contributes three horizontal landmarks (left extent,
//! center, right extent). A landmark responds only when its current image
//! coordinate lies outside the funnel formed with its taught coordinate;
//! responses average up through objects and scenes. Two windows over the
//! memory produce the steering command: the funnel window compares the live
//! view against upcoming keyframes, while the virtual window replays the
//! controller across consecutive stored keyframes to anticipate turns whose
//! objects are not yet in view. The blended response is treated as a yaw-rate
//! command; positive values mean the scene content sits right of where it
//! should and the robot must yaw clockwise.

use serde::{Deserialize, Serialize};

use crate::descriptor::{match_objects, MatchConfig, SceneDescriptor, SceneObject};
use crate::memory::ReferenceMemory;
use crate::reloc::LocalizationEstimate;

/// Horizontal image coordinate of one landmark in the current and desired
/// views, both in [-1, 1] with 0 at the optical center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkCoord {
    pub current: f64,
    pub desired: f64,
}

/// Controller parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    /// Gain scaling landmark responses into a yaw-rate command.
    pub gain: f64,
    /// Keyframes ahead of the match compared against the live view.
    pub funnel_window: usize,
    /// Keyframes replayed from memory for the lookahead response.
    pub virtual_window: usize,
    /// Weight on the live funnel response; the remainder goes to the
    /// lookahead response.
    pub blend: f64,
    /// Rate threshold below which the robot advances instead of yawing.
    pub yaw_threshold: f64,
    /// Forward speed while advancing, m/s.
    pub forward_speed: f64,
    /// Spin rate while searching for localization, rad/s.
    pub search_yaw_rate: f64,
    /// Per-step yaw clamp applied by the kinematics, rad.
    pub max_yaw_step: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            gain: 12.0,
            funnel_window: 30,
            virtual_window: 70,
            blend: 0.7,
            yaw_threshold: 0.1,
            forward_speed: 0.3,
            search_yaw_rate: 0.5,
            max_yaw_step: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Not localized: rotate on the spot.
    Search,
    /// Localized with a large heading error: yaw, no translation.
    Align,
    /// Localized and aligned: move forward at constant speed.
    Advance,
    /// Endpoint reached.
    Done,
}

impl ControlMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlMode::Search => "search",
            ControlMode::Align => "align",
            ControlMode::Advance => "advance",
            ControlMode::Done => "done",
        }
    }
}

/// One step's actuation: a signed per-step yaw delta and a forward gate.
/// Yaw and translation are never applied together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    /// Desired yaw change this step, radians, mathematical sign (CCW > 0).
    pub yaw_adjust: f64,
    pub advance: bool,
    pub mode: ControlMode,
}

/// The steering components behind a command, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FunnelTerms {
    pub funnel: f64,
    pub lookahead: f64,
    pub total: f64,
}

/// Funnel response of a single landmark (Fig. landmark geometry): respond
/// only when the current coordinate lies outside the funnel spanned by the
/// taught coordinate, with phi = (c - d) / sqrt(2).
pub fn landmark_response(lc: LandmarkCoord, gain: f64) -> f64 {
    let c = lc.current;
    let d = lc.desired;
    let phi = (c - d) / std::f64::consts::SQRT_2;
    if c > 0.0 && c > d {
        gain * c.min(phi)
    } else if c < 0.0 && c < d {
        gain * c.max(phi)
    } else {
        0.0
    }
}

fn to_signed(x: f64) -> f64 {
    2.0 * x - 1.0
}

/// Response of one matched object pair: the mean landmark response over the
/// left extent, center and right extent of the horizontal axis.
pub fn object_response(reference: &SceneObject, current: &SceneObject, gain: f64) -> f64 {
    let pairs = [
        (current.bbox.x_min, reference.bbox.x_min),
        (current.bbox.x_center(), reference.bbox.x_center()),
        (current.bbox.x_max, reference.bbox.x_max),
    ];
    let sum: f64 = pairs
        .iter()
        .map(|&(c, d)| {
            landmark_response(
                LandmarkCoord {
                    current: to_signed(c),
                    desired: to_signed(d),
                },
                gain,
            )
        })
        .sum();
    sum / 3.0
}

/// Scene response: mean object response over all matched pairs, 0 when
/// nothing matches.
pub fn scene_response(
    reference: &SceneDescriptor,
    current: &SceneDescriptor,
    match_cfg: &MatchConfig,
    gain: f64,
) -> f64 {
    let pairs = match_objects(reference, current, match_cfg);
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|&(ri, ci)| object_response(&reference.objects[ri], &current.objects[ci], gain))
        .sum();
    sum / pairs.len() as f64
}

/// Live funnel response: mean scene response of the current view against the
/// keyframes just ahead of the match, `[matched+1, min(matched+W_f, M-1)]`.
/// Empty range yields 0.
pub fn funnel_window_response(
    current: &SceneDescriptor,
    mem: &ReferenceMemory,
    matched_index: usize,
    cfg: &ControlConfig,
    match_cfg: &MatchConfig,
) -> f64 {
    let last = (matched_index + cfg.funnel_window).min(mem.len() - 1);
    let first = matched_index + 1;
    if first > last {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in first..=last {
        sum += scene_response(&mem.keyframes[i], current, match_cfg, cfg.gain);
    }
    sum / (last - first + 1) as f64
}

/// Per-pair responses of consecutive stored keyframes, `resp[i]` steering
/// from keyframe i toward keyframe i+1. Precomputed once per memory since it
/// never depends on live observations.
pub fn consecutive_pair_responses(
    mem: &ReferenceMemory,
    cfg: &ControlConfig,
    match_cfg: &MatchConfig,
) -> Vec<f64> {
    (0..mem.len().saturating_sub(1))
        .map(|i| {
            scene_response(
                &mem.keyframes[i + 1],
                &mem.keyframes[i],
                match_cfg,
                cfg.gain,
            )
        })
        .collect()
}

fn lookahead_from_pairs(pairs: &[f64], matched_index: usize, window: usize) -> f64 {
    // pairs has length M-1; replay pairs (i, i+1) for i in
    // [matched, min(matched + W_v, M - 1) - 1]
    let last_excl = (matched_index + window).min(pairs.len());
    if matched_index >= last_excl {
        return 0.0;
    }
    let mut sum = 0.0;
    for &r in &pairs[matched_index..last_excl] {
        sum += r;
    }
    sum / (last_excl - matched_index) as f64
}

/// Lookahead response: the funnel controller replayed over consecutive
/// stored keyframes starting at the match. Depends only on the memory.
pub fn virtual_funnel_response(
    mem: &ReferenceMemory,
    matched_index: usize,
    cfg: &ControlConfig,
    match_cfg: &MatchConfig,
) -> f64 {
    let pairs = consecutive_pair_responses(mem, cfg, match_cfg);
    lookahead_from_pairs(&pairs, matched_index, cfg.virtual_window)
}

/// Blend of the live funnel response and the lookahead response.
pub fn blend(funnel: f64, lookahead: f64, weight: f64) -> f64 {
    weight * funnel + (1.0 - weight) * lookahead
}

/// Full control decision for one step.
///
/// Unlocalized: spin in place at the search rate. Localized: compute the
/// blended response; yaw if it exceeds the threshold, otherwise advance.
/// `at_end` marks the harness's endpoint condition and stops the robot.
/// The response is a yaw-rate command, so the per-step yaw delta is scaled
/// by `dt`; its sign is flipped into the CCW-positive yaw convention.
pub fn control_step(
    loc: &LocalizationEstimate,
    current: &SceneDescriptor,
    mem: &ReferenceMemory,
    pair_responses: &[f64],
    cfg: &ControlConfig,
    match_cfg: &MatchConfig,
    dt: f64,
    at_end: bool,
) -> (ControlCommand, FunnelTerms) {
    if at_end && loc.localized {
        return (
            ControlCommand {
                yaw_adjust: 0.0,
                advance: false,
                mode: ControlMode::Done,
            },
            FunnelTerms::default(),
        );
    }
    if !loc.localized {
        return (
            ControlCommand {
                yaw_adjust: cfg.search_yaw_rate * dt,
                advance: false,
                mode: ControlMode::Search,
            },
            FunnelTerms::default(),
        );
    }
    let funnel = funnel_window_response(current, mem, loc.matched_index, cfg, match_cfg);
    let lookahead = lookahead_from_pairs(pair_responses, loc.matched_index, cfg.virtual_window);
    let total = blend(funnel, lookahead, cfg.blend);
    let terms = FunnelTerms {
        funnel,
        lookahead,
        total,
    };
    // image-right-positive response steers clockwise
    let yaw_adjust = -total * dt;
    if total.abs() >= cfg.yaw_threshold {
        (
            ControlCommand {
                yaw_adjust,
                advance: false,
                mode: ControlMode::Align,
            },
            terms,
        )
    } else {
        (
            ControlCommand {
                yaw_adjust,
                advance: true,
                mode: ControlMode::Advance,
            },
            terms,
        )
    }
}
