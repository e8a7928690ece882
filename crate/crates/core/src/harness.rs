//! Teach and repeat orchestration.
//!
//! Teaching walks a passive camera along a trajectory and stores a keyframe
//! descriptor every few samples. Repeating closes the loop at a fixed step:
//! sense, filter, relocalize, steer, move, until the endpoint rule fires, the
//! step budget runs out, or the robot leaves the arena.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SystemConfig;
use crate::control::{consecutive_pair_responses, control_step, ControlMode};
use crate::descriptor::{filter_detections, scene_similarity, SceneDescriptor};
use crate::memory::{MemoryError, ReferenceMemory};
use crate::reloc::{update_from_table, LocalizationEstimate, SimilarityTable};
use crate::sim::{sense, step_robot, RobotState};
use crate::world::{WorldError, WorldModel};

/// Waypoints farther apart than this are rejected: the taught path must be
/// sampled densely enough that consecutive keyframes overlap in content.
pub const MAX_WAYPOINT_SPACING: f64 = 0.5;

/// A repeat run counts as reaching the goal within this distance, meters.
pub const GOAL_RADIUS: f64 = 0.5;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("trajectory needs at least 2 waypoints, got {0}")]
    TrajectoryTooShort(usize),
    #[error("waypoints {0} and {1} are {2:.3} m apart (limit {MAX_WAYPOINT_SPACING})")]
    WaypointSpacing(usize, usize, f64),
    #[error("waypoint {0} at ({1:.2}, {2:.2}) is outside the arena")]
    WaypointOutsideArena(usize, f64, f64),
    #[error("trajectory line {0}: expected x,y,yaw")]
    TrajectoryParse(usize),
    #[error("memory needs at least 2 keyframes, got {0}")]
    MemoryTooShort(usize),
    #[error("world class {0} does not fit the memory vocabulary of size {1}")]
    VocabularyOverflow(u16, u16),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),
}

/// The taught route: (x, y, yaw) poses at a fixed sample period.
#[derive(Debug, Clone, PartialEq)]
pub struct TaughtTrajectory {
    pub waypoints: Vec<(f64, f64, f64)>,
}

impl TaughtTrajectory {
    pub fn new(waypoints: Vec<(f64, f64, f64)>) -> Result<Self, HarnessError> {
        if waypoints.len() < 2 {
            return Err(HarnessError::TrajectoryTooShort(waypoints.len()));
        }
        for (i, pair) in waypoints.windows(2).enumerate() {
            let d = ((pair[1].0 - pair[0].0).powi(2) + (pair[1].1 - pair[0].1).powi(2)).sqrt();
            if d > MAX_WAYPOINT_SPACING {
                return Err(HarnessError::WaypointSpacing(i, i + 1, d));
            }
        }
        Ok(Self { waypoints })
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn start(&self) -> (f64, f64, f64) {
        self.waypoints[0]
    }

    pub fn goal(&self) -> (f64, f64) {
        let last = self.waypoints[self.waypoints.len() - 1];
        (last.0, last.1)
    }

    /// CSV with an `x,y,yaw` header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,yaw\n");
        for (x, y, yaw) in &self.waypoints {
            out.push_str(&format!("{x:.6},{y:.6},{yaw:.6}\n"));
        }
        out
    }

    /// Parse CSV; a header line and `#` comments are skipped.
    pub fn parse_csv(text: &str) -> Result<Self, HarnessError> {
        let mut waypoints = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(HarnessError::TrajectoryParse(lineno + 1));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| HarnessError::TrajectoryParse(lineno + 1))
            };
            waypoints.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        }
        Self::new(waypoints)
    }
}

/// When a run is considered to have matched the end of the memory.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointRule {
    /// Matched index must reach the last `window` keyframes.
    pub window: usize,
    /// Minimum localization score at the endpoint.
    pub min_score: f64,
}

impl Default for EndpointRule {
    fn default() -> Self {
        Self {
            window: 3,
            min_score: 0.5,
        }
    }
}

/// True when the estimate is localized on one of the last keyframes with a
/// strong enough score. The score floor guards against declaring the endpoint
/// from a weak aliased match.
pub fn end_reached(loc: &LocalizationEstimate, mem: &ReferenceMemory, rule: &EndpointRule) -> bool {
    loc.localized
        && loc.matched_index + rule.window >= mem.len()
        && loc.score >= rule.min_score
}

/// Walk the trajectory with a passive camera and record a keyframe every
/// `keyframe_period` samples. The memory is passed through the wire format so
/// an in-memory teach equals a reloaded file.
pub fn teach(
    world: &WorldModel,
    trajectory: &TaughtTrajectory,
    cfg: &SystemConfig,
    seed: u64,
) -> Result<ReferenceMemory, HarnessError> {
    for (i, &(x, y, _)) in trajectory.waypoints.iter().enumerate() {
        if !world.arena.contains(x, y) {
            return Err(HarnessError::WaypointOutsideArena(i, x, y));
        }
    }
    for obj in &world.objects {
        if obj.class.0 >= cfg.sim.vocab_size {
            return Err(HarnessError::VocabularyOverflow(
                obj.class.0,
                cfg.sim.vocab_size,
            ));
        }
    }
    let period = cfg.sim.keyframe_period.max(1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keyframes: Vec<SceneDescriptor> = trajectory
        .waypoints
        .iter()
        .step_by(period)
        .map(|&(x, y, yaw)| {
            let state = RobotState::new(x, y, yaw);
            let detections = sense(world, &state, &cfg.camera, &cfg.noise, &mut rng);
            filter_detections(&detections, &cfg.matching)
        })
        .collect();
    let mem = ReferenceMemory::new(keyframes, cfg.sim.vocab_size, cfg.sim.keyframe_period);
    Ok(ReferenceMemory::decode(&mem.encode())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// Endpoint rule fired within the goal radius (when a goal is known).
    Completed,
    /// Stopped at the wrong place or left the arena.
    EndpointMiss,
    /// Step budget exhausted.
    Timeout,
}

impl RunOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunOutcome::Completed => "completed",
            RunOutcome::EndpointMiss => "endpoint_miss",
            RunOutcome::Timeout => "timeout",
        }
    }
}

/// One control step's log record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub state: RobotState,
    pub mode: ControlMode,
    pub matched_index: usize,
    pub velocity: f64,
    pub score: f64,
    pub theta_funnel: f64,
    pub theta_virtual: f64,
    pub theta_total: f64,
    pub advance: bool,
}

/// Everything observed during one repeat run.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<StepRecord>,
    /// Filtered scene per step, for similarity-table dumps.
    pub observations: Vec<SceneDescriptor>,
    pub outcome: RunOutcome,
    /// Ground-truth distance from the final pose to the goal; NaN when no
    /// goal was supplied.
    pub final_distance: f64,
    pub elapsed_steps: usize,
}

impl RunLog {
    /// Per-step control log CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "step,time,x,y,yaw,mode,matched_index,velocity,score,theta_funnel,theta_virtual,theta_total,advance\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.3},{:.6},{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
                r.step,
                r.time,
                r.state.x,
                r.state.y,
                r.state.yaw,
                r.mode.as_str(),
                r.matched_index,
                r.velocity,
                r.score,
                r.theta_funnel,
                r.theta_virtual,
                r.theta_total,
                r.advance as u8,
            ));
        }
        out
    }

    /// Observation log CSV: one row per retained detection, grouped by step.
    /// Steps with no rows had empty scenes.
    pub fn observations_to_csv(&self) -> String {
        let mut out = String::from("step,class,x_min,y_min,x_max,y_max\n");
        for (step, scene) in self.observations.iter().enumerate() {
            for obj in &scene.objects {
                out.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6},{:.6}\n",
                    step, obj.class.0, obj.bbox.x_min, obj.bbox.y_min, obj.bbox.x_max, obj.bbox.y_max,
                ));
            }
        }
        out
    }

    /// Mean localization score over localized steps.
    pub fn mean_matched_score(&self) -> f64 {
        let scores: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.mode != ControlMode::Search)
            .map(|r| r.score)
            .collect();
        if scores.is_empty() {
            0.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        }
    }
}

/// Tuning knobs of a single repeat run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RepeatOptions {
    /// Step budget; defaults to 10x the taught trajectory length in steps.
    pub timeout_steps: Option<usize>,
    /// Ground-truth goal used to grade the run.
    pub goal: Option<(f64, f64)>,
}

/// Closed-loop repeat run from `start` until the endpoint rule fires, the
/// budget runs out, or the robot leaves the arena. Failures are outcomes,
/// not errors.
pub fn repeat(
    world: &WorldModel,
    mem: &ReferenceMemory,
    start: RobotState,
    cfg: &SystemConfig,
    seed: u64,
    opts: &RepeatOptions,
) -> Result<RunLog, HarnessError> {
    if mem.len() < 2 {
        return Err(HarnessError::MemoryTooShort(mem.len()));
    }
    let timeout = opts
        .timeout_steps
        .unwrap_or(10 * mem.len() * mem.keyframe_period.max(1) as usize);
    let dt = cfg.sim.dt;
    let pair_responses = consecutive_pair_responses(mem, &cfg.control, &cfg.matching);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = start;
    let mut rows: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.reloc.window + 1);
    let mut estimate: Option<LocalizationEstimate> = None;
    let mut records = Vec::new();
    let mut observations = Vec::new();
    let mut outcome = RunOutcome::Timeout;

    for step in 0..timeout {
        let detections = sense(world, &state, &cfg.camera, &cfg.noise, &mut rng);
        let scene = filter_detections(&detections, &cfg.matching);
        let row: Vec<f64> = mem
            .keyframes
            .iter()
            .map(|kf| scene_similarity(kf, &scene, &cfg.matching))
            .collect();
        rows.push_back(row);
        if rows.len() > cfg.reloc.window {
            rows.pop_front();
        }
        let table = SimilarityTable::new(rows.iter().cloned().collect());
        let next = update_from_table(estimate.as_ref(), &table, &cfg.reloc);
        let at_end = end_reached(&next, mem, &cfg.endpoint);
        let (cmd, terms) = control_step(
            &next,
            &scene,
            mem,
            &pair_responses,
            &cfg.control,
            &cfg.matching,
            dt,
            at_end,
        );
        records.push(StepRecord {
            step,
            time: step as f64 * dt,
            state,
            mode: cmd.mode,
            matched_index: next.matched_index,
            velocity: next.velocity,
            score: next.score,
            theta_funnel: terms.funnel,
            theta_virtual: terms.lookahead,
            theta_total: terms.total,
            advance: cmd.advance,
        });
        observations.push(scene);
        estimate = Some(next);

        if cmd.mode == ControlMode::Done {
            outcome = match opts.goal {
                Some((gx, gy)) => {
                    let d = ((state.x - gx).powi(2) + (state.y - gy).powi(2)).sqrt();
                    if d < GOAL_RADIUS {
                        RunOutcome::Completed
                    } else {
                        RunOutcome::EndpointMiss
                    }
                }
                None => RunOutcome::Completed,
            };
            break;
        }
        state = step_robot(&state, &cmd, dt, &cfg.control);
        if !world.arena.contains(state.x, state.y) {
            outcome = RunOutcome::EndpointMiss;
            break;
        }
    }

    let final_distance = opts
        .goal
        .map(|(gx, gy)| ((state.x - gx).powi(2) + (state.y - gy).powi(2)).sqrt())
        .unwrap_or(f64::NAN);
    let elapsed_steps = records.len();
    Ok(RunLog {
        records,
        observations,
        outcome,
        final_distance,
        elapsed_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::ClassId;
    use crate::world::{ArenaBounds, WorldObject};

    fn simple_world() -> WorldModel {
        let objects = (0..6)
            .map(|i| WorldObject {
                id: i,
                class: ClassId(50 + i as u16),
                center: (6.0 + 0.6 * (i % 3) as f64, 1.0 + 1.5 * (i / 3) as f64, 1.2),
                size: (0.6, 0.6, 1.2),
                detect_prob: 1.0,
            })
            .collect();
        WorldModel::new(objects, vec![], 1.0, ArenaBounds::default()).unwrap()
    }

    fn straight_trajectory(n: usize) -> TaughtTrajectory {
        TaughtTrajectory::new(
            (0..n)
                .map(|i| (0.5 + 0.04 * i as f64, 2.0, 0.0))
                .collect(),
        )
        .unwrap()
    }

    fn quiet_config() -> SystemConfig {
        let mut cfg = SystemConfig::default();
        cfg.noise.bbox_sigma = 0.0;
        cfg.noise.confidence_min = 0.9;
        cfg
    }

    #[test]
    fn trajectory_requires_two_waypoints() {
        assert!(matches!(
            TaughtTrajectory::new(vec![(0.0, 0.0, 0.0)]),
            Err(HarnessError::TrajectoryTooShort(1))
        ));
    }

    #[test]
    fn trajectory_rejects_wide_spacing() {
        assert!(matches!(
            TaughtTrajectory::new(vec![(0.0, 0.0, 0.0), (2.0, 0.0, 0.0)]),
            Err(HarnessError::WaypointSpacing(0, 1, _))
        ));
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let t = straight_trajectory(10);
        let parsed = TaughtTrajectory::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(parsed.len(), t.len());
        for (a, b) in parsed.waypoints.iter().zip(&t.waypoints) {
            assert!((a.0 - b.0).abs() < 1e-6);
        }
    }

    #[test]
    fn teach_records_one_keyframe_per_period() {
        let world = simple_world();
        let cfg = quiet_config();
        let mem = teach(&world, &straight_trajectory(290), &cfg, 1).unwrap();
        assert_eq!(mem.len(), 290);

        let mut cfg2 = cfg.clone();
        cfg2.sim.keyframe_period = 2;
        let mem = teach(&world, &straight_trajectory(290), &cfg2, 1).unwrap();
        assert_eq!(mem.len(), 145);
    }

    #[test]
    fn teach_on_empty_world_gives_empty_keyframes() {
        let world = WorldModel::new(vec![], vec![], 1.0, ArenaBounds::default()).unwrap();
        let mem = teach(&world, &straight_trajectory(20), &quiet_config(), 1).unwrap();
        assert_eq!(mem.len(), 20);
        assert!(mem.keyframes.iter().all(|k| k.is_empty()));
    }

    #[test]
    fn teach_is_deterministic_per_seed() {
        let world = simple_world();
        let cfg = SystemConfig::default();
        let t = straight_trajectory(50);
        let a = teach(&world, &t, &cfg, 9).unwrap().encode();
        let b = teach(&world, &t, &cfg, 9).unwrap().encode();
        assert_eq!(a, b);
        let c = teach(&world, &t, &cfg, 10).unwrap().encode();
        assert_ne!(a, c);
    }

    #[test]
    fn teach_rejects_out_of_arena_trajectory() {
        let world = simple_world();
        let t = TaughtTrajectory::new(vec![(9.9, 2.0, 0.0), (10.2, 2.0, 0.0)]).unwrap();
        assert!(matches!(
            teach(&world, &t, &quiet_config(), 1),
            Err(HarnessError::WaypointOutsideArena(1, _, _))
        ));
    }

    fn dummy_estimate(index: usize, score: f64, localized: bool) -> LocalizationEstimate {
        LocalizationEstimate {
            matched_index: index,
            velocity: 1.0,
            score,
            localized,
            history: vec![index],
        }
    }

    #[test]
    fn end_reached_cases() {
        let mem = ReferenceMemory::new(vec![SceneDescriptor::default(); 100], 80, 1);
        let rule = EndpointRule::default();
        assert!(end_reached(&dummy_estimate(99, 0.9, true), &mem, &rule));
        assert!(end_reached(&dummy_estimate(97, 0.6, true), &mem, &rule));
        assert!(!end_reached(&dummy_estimate(50, 0.9, true), &mem, &rule));
        assert!(!end_reached(&dummy_estimate(99, 0.2, true), &mem, &rule));
        assert!(!end_reached(&dummy_estimate(99, 0.9, false), &mem, &rule));
    }

    #[test]
    fn repeat_rejects_tiny_memory() {
        let world = simple_world();
        let mem = ReferenceMemory::new(vec![SceneDescriptor::default()], 80, 1);
        let err = repeat(
            &world,
            &mem,
            RobotState::new(1.0, 2.0, 0.0),
            &quiet_config(),
            1,
            &RepeatOptions::default(),
        );
        assert!(matches!(err, Err(HarnessError::MemoryTooShort(1))));
    }

    #[test]
    fn repeat_times_out_with_zero_budget() {
        let world = simple_world();
        let cfg = quiet_config();
        let mem = teach(&world, &straight_trajectory(20), &cfg, 1).unwrap();
        let log = repeat(
            &world,
            &mem,
            RobotState::new(0.5, 2.0, 0.0),
            &cfg,
            1,
            &RepeatOptions {
                timeout_steps: Some(0),
                goal: None,
            },
        )
        .unwrap();
        assert_eq!(log.outcome, RunOutcome::Timeout);
        assert_eq!(log.elapsed_steps, 0);
    }

    #[test]
    fn repeat_from_taught_start_completes_straight_course() {
        let world = simple_world();
        let cfg = quiet_config();
        let trajectory = straight_trajectory(80);
        let mem = teach(&world, &trajectory, &cfg, 1).unwrap();
        let (x, y, yaw) = trajectory.start();
        let log = repeat(
            &world,
            &mem,
            RobotState::new(x, y, yaw),
            &cfg,
            2,
            &RepeatOptions {
                timeout_steps: None,
                goal: Some(trajectory.goal()),
            },
        )
        .unwrap();
        assert_eq!(log.outcome, RunOutcome::Completed, "{}", log.to_csv());
        assert!(log.final_distance < GOAL_RADIUS);

        // matched indexes never decrease once localized
        let mut last = 0;
        for r in &log.records {
            if r.mode != ControlMode::Search {
                assert!(r.matched_index >= last);
                last = r.matched_index;
            }
        }
    }

    #[test]
    fn repeat_is_deterministic_per_seed() {
        let world = simple_world();
        let cfg = SystemConfig::default();
        let trajectory = straight_trajectory(60);
        let mem = teach(&world, &trajectory, &cfg, 1).unwrap();
        let run = |seed| {
            repeat(
                &world,
                &mem,
                RobotState::new(0.5, 2.0, 0.0),
                &cfg,
                seed,
                &RepeatOptions {
                    timeout_steps: Some(400),
                    goal: Some(trajectory.goal()),
                },
            )
            .unwrap()
            .to_csv()
        };
        assert_eq!(run(5), run(5));
    }
}
