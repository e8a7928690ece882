//! Built-in demonstration scenarios: worlds plus taught trajectories sized
//! for the default 10 x 6 m arena.
//!
//! `arena_*` is the main course: a four-leg route around an opaque wall with
//! 18 objects, so the second half's landmarks are hidden from the first half.
//! `corner_*` is a sharp 90-degree turn with object clusters arranged so the
//! approach leg cannot see past the corner with a narrow camera. `loop_*`
//! drives the same circle twice, producing a memory with two identical halves.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::descriptor::ClassId;
use crate::harness::TaughtTrajectory;
use crate::world::{ArenaBounds, ObjectMove, Occluder, Perturbation, WorldModel, WorldObject};

/// A piecewise path of lines and circular arcs.
#[derive(Debug, Clone, Copy)]
pub enum PathSegment {
    Line {
        from: (f64, f64),
        to: (f64, f64),
    },
    /// Swept from `start_angle` to `end_angle` (radians); a decreasing sweep
    /// runs clockwise.
    Arc {
        center: (f64, f64),
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
}

impl PathSegment {
    pub fn length(&self) -> f64 {
        match self {
            PathSegment::Line { from, to } => {
                ((to.0 - from.0).powi(2) + (to.1 - from.1).powi(2)).sqrt()
            }
            PathSegment::Arc {
                radius,
                start_angle,
                end_angle,
                ..
            } => radius * (end_angle - start_angle).abs(),
        }
    }

    /// Pose at arclength `s` into the segment: position plus tangent heading.
    pub fn pose_at(&self, s: f64) -> (f64, f64, f64) {
        match self {
            PathSegment::Line { from, to } => {
                let len = self.length();
                let t = if len > 0.0 { s / len } else { 0.0 };
                let yaw = (to.1 - from.1).atan2(to.0 - from.0);
                (
                    from.0 + t * (to.0 - from.0),
                    from.1 + t * (to.1 - from.1),
                    yaw,
                )
            }
            PathSegment::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                let sweep = end_angle - start_angle;
                let angle = start_angle + sweep.signum() * s / radius;
                let x = center.0 + radius * angle.cos();
                let y = center.1 + radius * angle.sin();
                let yaw = if sweep >= 0.0 {
                    angle + FRAC_PI_2
                } else {
                    angle - FRAC_PI_2
                };
                (x, y, yaw)
            }
        }
    }
}

/// Sample a path at `samples` evenly spaced arclength stations.
pub fn sample_path(segments: &[PathSegment], samples: usize) -> TaughtTrajectory {
    assert!(samples >= 2);
    let total: f64 = segments.iter().map(PathSegment::length).sum();
    let mut waypoints = Vec::with_capacity(samples);
    for k in 0..samples {
        let mut s = total * k as f64 / (samples - 1) as f64;
        let mut pose = None;
        for seg in segments {
            let len = seg.length();
            if s <= len || std::ptr::eq(seg, segments.last().unwrap()) {
                pose = Some(seg.pose_at(s.min(len)));
                break;
            }
            s -= len;
        }
        waypoints.push(pose.expect("path has segments"));
    }
    TaughtTrajectory::new(waypoints).expect("sampled path is valid")
}

fn object(
    id: u32,
    class: u16,
    center: (f64, f64, f64),
    size: (f64, f64, f64),
    detect_prob: f64,
) -> WorldObject {
    WorldObject {
        id,
        class: ClassId(class),
        center,
        size,
        detect_prob,
    }
}

// class ids used below (COCO-style order)
const BENCH: u16 = 13;
const BACKPACK: u16 = 24;
const UMBRELLA: u16 = 25;
const SUITCASE: u16 = 28;
const CHAIR: u16 = 56;
const COUCH: u16 = 57;
const POTTED_PLANT: u16 = 58;
const TV: u16 = 62;
const LAPTOP: u16 = 63;
const KEYBOARD: u16 = 66;
const BOOK: u16 = 73;
const CLOCK: u16 = 74;
const VASE: u16 = 75;
const TEDDY_BEAR: u16 = 77;

/// 18 objects around a wall-divided arena.
pub fn arena_world() -> WorldModel {
    let objects = vec![
        object(1, CHAIR, (4.4, 0.7, 0.5), (0.5, 0.5, 1.0), 1.0),
        object(2, TV, (4.95, 1.8, 1.4), (0.15, 1.0, 0.7), 1.0),
        object(3, POTTED_PLANT, (4.5, 2.9, 0.9), (0.4, 0.4, 1.2), 0.95),
        object(4, SUITCASE, (3.2, 0.35, 0.4), (0.45, 0.3, 0.7), 1.0),
        object(5, CLOCK, (0.15, 3.0, 1.8), (0.1, 0.6, 0.6), 1.0),
        object(6, TEDDY_BEAR, (2.2, 2.6, 0.6), (0.35, 0.3, 0.6), 0.9),
        object(7, VASE, (4.3, 5.0, 1.0), (0.3, 0.3, 0.8), 1.0),
        object(8, BENCH, (5.5, 5.7, 0.5), (1.4, 0.5, 0.9), 1.0),
        object(9, BACKPACK, (6.3, 5.35, 0.4), (0.4, 0.3, 0.5), 1.0),
        object(10, UMBRELLA, (7.2, 5.8, 1.3), (1.0, 1.0, 1.8), 1.0),
        object(11, COUCH, (9.3, 4.9, 0.45), (0.8, 1.6, 0.9), 1.0),
        object(12, CHAIR, (9.6, 3.6, 0.5), (0.5, 0.5, 1.0), 1.0),
        object(13, BOOK, (8.4, 5.75, 1.1), (0.5, 0.25, 0.35), 0.85),
        object(14, LAPTOP, (8.3, 0.35, 1.0), (0.45, 0.35, 0.4), 1.0),
        object(15, CHAIR, (7.6, 0.8, 0.5), (0.5, 0.5, 1.0), 1.0),
        object(16, CHAIR, (8.9, 0.8, 0.5), (0.5, 0.5, 1.0), 1.0),
        object(17, KEYBOARD, (9.7, 1.6, 1.2), (0.2, 0.9, 0.25), 1.0),
        object(18, VASE, (6.9, 0.3, 0.9), (0.3, 0.3, 0.8), 0.95),
    ];
    let wall = Occluder::new((5.0, 0.0), (5.0, 3.5)).unwrap();
    WorldModel::new(objects, vec![wall], 1.0, ArenaBounds::default()).unwrap()
}

fn arena_segments() -> Vec<PathSegment> {
    vec![
        PathSegment::Line {
            from: (1.5, 1.0),
            to: (3.6, 1.0),
        },
        PathSegment::Arc {
            center: (3.6, 2.2),
            radius: 1.2,
            start_angle: -FRAC_PI_2,
            end_angle: 0.0,
        },
        PathSegment::Line {
            from: (4.8, 2.2),
            to: (4.8, 3.6),
        },
        PathSegment::Arc {
            center: (5.8, 3.6),
            radius: 1.0,
            start_angle: PI,
            end_angle: FRAC_PI_2,
        },
        PathSegment::Line {
            from: (5.8, 4.6),
            to: (7.0, 4.6),
        },
        PathSegment::Arc {
            center: (7.0, 3.4),
            radius: 1.2,
            start_angle: FRAC_PI_2,
            end_angle: 0.0,
        },
        PathSegment::Line {
            from: (8.2, 3.4),
            to: (8.2, 1.4),
        },
    ]
}

/// Four-leg route around the wall, sampled to 290 keyframes by default.
pub fn arena_trajectory() -> TaughtTrajectory {
    sample_path(&arena_segments(), 290)
}

/// Remove five objects and move eight others; four moves relocate across the
/// arena, four slide objects under a meter to degrade the taught geometry
/// while staying matchable.
pub fn arena_perturbation() -> Perturbation {
    Perturbation {
        remove: vec![4, 5, 9, 12, 17],
        moves: vec![
            ObjectMove {
                id: 3,
                to: (0.7, 5.4),
                quarter_turn: false,
            },
            ObjectMove {
                id: 7,
                to: (9.5, 0.3),
                quarter_turn: false,
            },
            ObjectMove {
                id: 6,
                to: (9.3, 5.7),
                quarter_turn: false,
            },
            ObjectMove {
                id: 18,
                to: (0.6, 0.5),
                quarter_turn: false,
            },
            ObjectMove {
                id: 1,
                to: (4.15, 0.55),
                quarter_turn: false,
            },
            ObjectMove {
                id: 2,
                to: (4.95, 2.15),
                quarter_turn: true,
            },
            ObjectMove {
                id: 8,
                to: (6.0, 5.7),
                quarter_turn: false,
            },
            ObjectMove {
                id: 11,
                to: (9.3, 4.45),
                quarter_turn: false,
            },
        ],
        lighting_factor: None,
    }
}

/// Dim the lights to 80 percent detection probability.
pub fn lighting_perturbation() -> Perturbation {
    Perturbation {
        lighting_factor: Some(0.8),
        ..Default::default()
    }
}

/// Long straight approach, 90-degree left turn, short exit leg. The east
/// cluster is visible on the approach; the north clusters only appear once
/// the turn has begun, so a narrow camera cannot see the corner coming.
pub fn corner_world() -> WorldModel {
    let objects = vec![
        object(1, TV, (9.8, 1.0, 1.4), (0.15, 1.1, 0.7), 1.0),
        object(2, CHAIR, (9.3, 0.45, 0.5), (0.5, 0.5, 1.0), 1.0),
        object(3, VASE, (9.5, 1.75, 1.0), (0.3, 0.3, 0.8), 1.0),
        object(4, LAPTOP, (9.7, 0.3, 1.0), (0.45, 0.35, 0.4), 1.0),
        object(5, POTTED_PLANT, (9.6, 3.8, 0.9), (0.45, 0.45, 1.3), 1.0),
        object(6, CLOCK, (8.6, 5.2, 1.5), (0.35, 0.35, 0.5), 1.0),
        object(7, BENCH, (7.4, 5.8, 0.5), (1.2, 0.4, 0.9), 1.0),
        object(8, BACKPACK, (6.6, 5.4, 0.45), (0.45, 0.35, 0.6), 1.0),
        object(9, VASE, (8.2, 5.5, 1.0), (0.3, 0.3, 0.8), 1.0),
        object(10, TEDDY_BEAR, (6.8, 4.7, 0.6), (0.4, 0.35, 0.7), 1.0),
    ];
    WorldModel::new(objects, vec![], 1.0, ArenaBounds::default()).unwrap()
}

pub fn corner_trajectory() -> TaughtTrajectory {
    let segments = vec![
        PathSegment::Line {
            from: (1.0, 1.0),
            to: (6.6, 1.0),
        },
        PathSegment::Arc {
            center: (6.6, 1.8),
            radius: 0.8,
            start_angle: -FRAC_PI_2,
            end_angle: 0.0,
        },
        PathSegment::Line {
            from: (7.4, 1.8),
            to: (7.4, 2.5),
        },
    ];
    sample_path(&segments, 190)
}

/// Objects ringing a circular course around the arena center.
pub fn loop_world() -> WorldModel {
    let objects = vec![
        object(1, TV, (9.4, 3.0, 1.4), (0.15, 1.1, 0.7), 1.0),
        object(2, POTTED_PLANT, (8.4, 5.0, 0.9), (0.4, 0.4, 1.2), 1.0),
        object(3, BENCH, (5.8, 5.7, 0.5), (1.3, 0.4, 0.9), 1.0),
        object(4, UMBRELLA, (3.1, 5.5, 1.3), (0.9, 0.9, 1.7), 1.0),
        object(5, CLOCK, (0.9, 4.3, 1.6), (0.3, 0.3, 0.5), 1.0),
        object(6, CHAIR, (0.6, 3.0, 0.5), (0.5, 0.5, 1.0), 1.0),
        object(7, SUITCASE, (1.4, 1.2, 0.45), (0.45, 0.3, 0.7), 1.0),
        object(8, COUCH, (4.2, 0.4, 0.45), (1.5, 0.7, 0.9), 1.0),
        object(9, LAPTOP, (6.9, 0.5, 1.0), (0.45, 0.35, 0.4), 1.0),
        object(10, VASE, (8.6, 1.3, 1.0), (0.3, 0.3, 0.8), 1.0),
    ];
    WorldModel::new(objects, vec![], 1.0, ArenaBounds::default()).unwrap()
}

/// The same circle taught twice back to back: the two memory halves describe
/// identical poses.
pub fn loop_trajectory() -> TaughtTrajectory {
    let lap = PathSegment::Arc {
        center: (5.0, 3.0),
        radius: 1.6,
        start_angle: PI,
        end_angle: PI + 2.0 * PI,
    };
    let two_laps = vec![
        lap,
        PathSegment::Arc {
            center: (5.0, 3.0),
            radius: 1.6,
            start_angle: PI,
            end_angle: PI + 2.0 * PI,
        },
    ];
    sample_path(&two_laps, 480)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::perturb_world;

    #[test]
    fn arena_trajectory_shape() {
        let t = arena_trajectory();
        assert_eq!(t.len(), 290);
        let world = arena_world();
        for &(x, y, _) in &t.waypoints {
            assert!(world.arena.contains(x, y), "({x}, {y}) outside arena");
        }
        // starts east, ends south
        assert!((t.waypoints[0].2 - 0.0).abs() < 1e-9);
        assert!((t.waypoints[t.len() - 1].2 + FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn arena_has_18_objects_and_a_wall() {
        let world = arena_world();
        assert_eq!(world.objects.len(), 18);
        assert_eq!(world.occluders.len(), 1);
        assert!(world.validate_vocabulary(80).is_ok());
    }

    #[test]
    fn arena_perturbation_counts() {
        let p = arena_perturbation();
        assert_eq!(p.remove.len(), 5);
        assert_eq!(p.moves.len(), 8);
        let out = perturb_world(&arena_world(), &p).unwrap();
        assert_eq!(out.objects.len(), 13);
    }

    #[test]
    fn path_sampling_is_continuous() {
        for t in [arena_trajectory(), corner_trajectory(), loop_trajectory()] {
            for pair in t.waypoints.windows(2) {
                let d = ((pair[1].0 - pair[0].0).powi(2) + (pair[1].1 - pair[0].1).powi(2)).sqrt();
                assert!(d < 0.1, "gap {d}");
                // heading is continuous up to arc curvature
                let dyaw = crate::sim::normalize_yaw(pair[1].2 - pair[0].2).abs();
                assert!(dyaw < 0.12, "heading jump {dyaw}");
            }
        }
    }

    #[test]
    fn loop_halves_coincide() {
        let t = loop_trajectory();
        let half = t.len() / 2;
        for k in 0..20 {
            let a = t.waypoints[k * 10];
            let b = t.waypoints[half + k * 10];
            assert!((a.0 - b.0).abs() < 0.05, "lap drift at {k}");
            assert!((a.1 - b.1).abs() < 0.05);
        }
    }

    #[test]
    fn corner_approach_cannot_see_north_cluster() {
        // with the narrow camera, nothing north of the corner projects from
        // the approach leg
        let world = corner_world();
        let cam = crate::sim::CameraModel {
            hfov: 0.6,
            ..Default::default()
        };
        for x in [1.0, 3.0, 5.0, 6.4] {
            let state = crate::sim::RobotState::new(x, 1.0, 0.0);
            for id in [7, 8, 9, 10] {
                let obj = world.object(id).unwrap();
                assert!(
                    crate::sim::project_object(obj, &state, &cam, &world).is_none(),
                    "object {id} visible from x = {x}"
                );
            }
        }
    }
}
