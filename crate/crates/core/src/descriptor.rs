//! Scene descriptors and their similarity scoring.
//!
//! A scene is summarized as the list of detected objects (class label plus
//! normalized bounding box). Two objects with the same label are compared by
//! the ratio of their box overlap to their summed areas, scaled by a
//! sensitivity gain and clamped to [0, 1]; two scenes are compared by greedily
//! pairing their objects and averaging the pair scores over the reference
//! object count.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DescriptorError {
    #[error("invalid bounding box [{x_min}, {y_min}, {x_max}, {y_max}]: {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
}

/// Index into a fixed object-class vocabulary (default size 80).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ClassId(pub u16);

impl From<u16> for ClassId {
    fn from(id: u16) -> Self {
        ClassId(id)
    }
}

/// Axis-aligned box in normalized image coordinates, origin top-left.
///
/// Invariants: `x_min < x_max`, `y_min < y_max`, all components in [0, 1].
/// Zero-area boxes are rejected at construction since the overlap score
/// degenerates on them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, DescriptorError> {
        let err = |reason| DescriptorError::InvalidBox {
            x_min,
            y_min,
            x_max,
            y_max,
            reason,
        };
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(err("non-finite coordinate"));
        }
        if coords.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(err("coordinate outside [0, 1]"));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(err("empty extent"));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Area of overlap with another box; 0 when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Horizontal center in normalized image coordinates.
    pub fn x_center(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }
}

/// Raw detector output: class, box and confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class: ClassId,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(class: ClassId, bbox: BoundingBox, confidence: f64) -> Result<Self, DescriptorError> {
        if !(0.0..=1.0).contains(&confidence) || !confidence.is_finite() {
            return Err(DescriptorError::InvalidConfidence(confidence));
        }
        Ok(Self {
            class,
            bbox,
            confidence,
        })
    }
}

/// An object retained in a stored scene: class plus box. Confidence is
/// consumed by the filter and not kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: ClassId,
    pub bbox: BoundingBox,
}

/// One keyframe's worth of retained objects, in detection order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub objects: Vec<SceneObject>,
}

impl SceneDescriptor {
    pub fn new(objects: Vec<SceneObject>) -> Self {
        Self { objects }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Detection filtering and object-matching parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Gain on the overlap ratio before clamping; higher values saturate the
    /// pair score under larger box disagreement.
    pub overlap_gain: f64,
    /// Detections below this confidence are dropped.
    pub confidence_threshold: f64,
    /// Class ids never kept as landmarks (unreliable categories).
    pub blacklist: HashSet<ClassId>,
    /// Cap on retained objects per scene.
    pub max_objects: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        // Default blacklist: person and cat, which move too much to be
        // useful landmarks.
        Self {
            overlap_gain: 4.0,
            confidence_threshold: 0.55,
            blacklist: [ClassId(0), ClassId(15)].into_iter().collect(),
            max_objects: 32,
        }
    }
}

/// Keep detections at or above the confidence threshold whose class is not
/// blacklisted, in input order, capped at `cfg.max_objects`.
pub fn filter_detections(raw: &[Detection], cfg: &MatchConfig) -> SceneDescriptor {
    let objects = raw
        .iter()
        .filter(|d| d.confidence >= cfg.confidence_threshold && !cfg.blacklist.contains(&d.class))
        .map(|d| SceneObject {
            class: d.class,
            bbox: d.bbox,
        })
        .take(cfg.max_objects)
        .collect();
    SceneDescriptor::new(objects)
}

/// Similarity of two same-class objects: overlap area over summed areas,
/// scaled by `overlap_gain` and clamped to [0, 1]. Different classes score 0.
pub fn object_similarity(reference: &SceneObject, current: &SceneObject, cfg: &MatchConfig) -> f64 {
    if reference.class != current.class {
        return 0.0;
    }
    let overlap = reference.bbox.intersection_area(&current.bbox);
    let sum = reference.bbox.area() + current.bbox.area();
    (cfg.overlap_gain * overlap / sum).clamp(0.0, 1.0)
}

/// Greedy one-to-one assignment between the objects of two scenes.
///
/// All same-class pairs are scored, then accepted in descending score order,
/// skipping pairs that reuse an already-assigned object and stopping at score
/// zero. Ties break on lower (reference index, current index). Returned pairs
/// are (reference index, current index) in acceptance order.
pub fn match_objects(
    reference: &SceneDescriptor,
    current: &SceneDescriptor,
    cfg: &MatchConfig,
) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (ri, robj) in reference.objects.iter().enumerate() {
        for (ci, cobj) in current.objects.iter().enumerate() {
            let score = object_similarity(robj, cobj, cfg);
            if score > 0.0 {
                candidates.push((score, ri, ci));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });

    let mut ref_used = vec![false; reference.len()];
    let mut cur_used = vec![false; current.len()];
    let mut pairs = Vec::new();
    for (_, ri, ci) in candidates {
        if !ref_used[ri] && !cur_used[ci] {
            ref_used[ri] = true;
            cur_used[ci] = true;
            pairs.push((ri, ci));
        }
    }
    pairs
}

/// Scene similarity: matched-pair scores summed and divided by the reference
/// object count. Unmatched reference objects contribute 0; an empty reference
/// scene scores 0.
pub fn scene_similarity(
    reference: &SceneDescriptor,
    current: &SceneDescriptor,
    cfg: &MatchConfig,
) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    let sum: f64 = match_objects(reference, current, cfg)
        .iter()
        .map(|&(ri, ci)| object_similarity(&reference.objects[ri], &current.objects[ci], cfg))
        .sum();
    sum / reference.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obj(class: u16, x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> SceneObject {
        SceneObject {
            class: ClassId(class),
            bbox: BoundingBox::new(x_min, y_min, x_max, y_max).unwrap(),
        }
    }

    fn det(class: u16, conf: f64) -> Detection {
        Detection::new(
            ClassId(class),
            BoundingBox::new(0.1, 0.1, 0.4, 0.4).unwrap(),
            conf,
        )
        .unwrap()
    }

    fn random_obj(rng: &mut ChaCha8Rng, classes: u16) -> SceneObject {
        let x0: f64 = rng.gen_range(0.0..0.8);
        let y0: f64 = rng.gen_range(0.0..0.8);
        let w: f64 = rng.gen_range(0.05..0.2);
        let h: f64 = rng.gen_range(0.05..0.2);
        obj(
            rng.gen_range(0..classes),
            x0,
            y0,
            (x0 + w).min(1.0),
            (y0 + h).min(1.0),
        )
    }

    #[test]
    fn box_invariants_enforced() {
        assert!(BoundingBox::new(0.0, 0.0, 0.5, 0.5).is_ok());
        assert!(BoundingBox::new(0.5, 0.0, 0.5, 0.5).is_err()); // zero width
        assert!(BoundingBox::new(0.6, 0.0, 0.5, 0.5).is_err()); // inverted
        assert!(BoundingBox::new(-0.1, 0.0, 0.5, 0.5).is_err()); // out of range
        assert!(BoundingBox::new(0.0, 0.0, 1.1, 0.5).is_err());
        assert!(BoundingBox::new(0.0, f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn filter_drops_below_threshold() {
        let cfg = MatchConfig::default();
        let scene = filter_detections(&[det(5, 0.54)], &cfg);
        assert!(scene.is_empty());
        let scene = filter_detections(&[det(5, 0.55)], &cfg);
        assert_eq!(scene.len(), 1);
    }

    #[test]
    fn filter_drops_blacklisted_classes() {
        let cfg = MatchConfig::default();
        // person (0) and cat (15) are blacklisted by default
        let scene = filter_detections(&[det(0, 0.9), det(15, 0.9), det(56, 0.9)], &cfg);
        assert_eq!(scene.len(), 1);
        assert_eq!(scene.objects[0].class, ClassId(56));
    }

    #[test]
    fn filter_empty_input_gives_empty_scene() {
        let scene = filter_detections(&[], &MatchConfig::default());
        assert!(scene.is_empty());
    }

    #[test]
    fn filter_preserves_order_and_caps_length() {
        let mut cfg = MatchConfig::default();
        cfg.max_objects = 2;
        let raw = vec![det(3, 0.9), det(4, 0.5), det(5, 0.8), det(6, 0.8)];
        let scene = filter_detections(&raw, &cfg);
        assert_eq!(scene.len(), 2);
        assert_eq!(scene.objects[0].class, ClassId(3));
        assert_eq!(scene.objects[1].class, ClassId(5));
    }

    #[test]
    fn object_similarity_identical_boxes_saturates() {
        let cfg = MatchConfig::default();
        let a = obj(7, 0.2, 0.2, 0.6, 0.6);
        // gain 4: 4a / 2a = 2, clamped to 1
        assert_eq!(object_similarity(&a, &a, &cfg), 1.0);
    }

    #[test]
    fn object_similarity_disjoint_boxes_is_zero() {
        let cfg = MatchConfig::default();
        let a = obj(7, 0.0, 0.0, 0.2, 0.2);
        let b = obj(7, 0.5, 0.5, 0.7, 0.7);
        assert_eq!(object_similarity(&a, &b, &cfg), 0.0);
    }

    #[test]
    fn object_similarity_partial_overlap() {
        // intersection 0.1 x 0.5 = 0.05, areas 0.25 + 0.25, gain 4 -> 0.4
        let cfg = MatchConfig::default();
        let a = obj(7, 0.0, 0.0, 0.5, 0.5);
        let b = obj(7, 0.4, 0.0, 0.9, 0.5);
        let got = object_similarity(&a, &b, &cfg);
        assert!((got - 0.4).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn object_similarity_class_mismatch_is_zero() {
        let cfg = MatchConfig::default();
        let a = obj(7, 0.2, 0.2, 0.6, 0.6);
        let b = obj(8, 0.2, 0.2, 0.6, 0.6);
        assert_eq!(object_similarity(&a, &b, &cfg), 0.0);
    }

    #[test]
    fn object_similarity_is_symmetric() {
        let cfg = MatchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_obj(&mut rng, 3);
            let b = random_obj(&mut rng, 3);
            assert_eq!(
                object_similarity(&a, &b, &cfg),
                object_similarity(&b, &a, &cfg)
            );
        }
    }

    #[test]
    fn self_similarity_saturates_for_gain_at_least_two() {
        let mut cfg = MatchConfig::default();
        cfg.overlap_gain = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let a = random_obj(&mut rng, 5);
            assert_eq!(object_similarity(&a, &a, &cfg), 1.0);
        }
    }

    #[test]
    fn match_single_candidate() {
        let cfg = MatchConfig::default();
        let r = SceneDescriptor::new(vec![obj(7, 0.1, 0.1, 0.5, 0.5)]);
        let c = SceneDescriptor::new(vec![obj(7, 0.2, 0.1, 0.6, 0.5)]);
        assert_eq!(match_objects(&r, &c, &cfg), vec![(0, 0)]);
    }

    #[test]
    fn match_duplicate_class_takes_best_pair() {
        let cfg = MatchConfig::default();
        // two reference chairs, one current chair overlapping the second more
        let r = SceneDescriptor::new(vec![
            obj(56, 0.0, 0.0, 0.3, 0.3),
            obj(56, 0.4, 0.4, 0.7, 0.7),
        ]);
        let c = SceneDescriptor::new(vec![obj(56, 0.42, 0.42, 0.72, 0.72)]);
        // enumerate both pairings by hand: s(0,0) = 0 (disjoint), s(1,0) > 0
        let s00 = object_similarity(&r.objects[0], &c.objects[0], &cfg);
        let s10 = object_similarity(&r.objects[1], &c.objects[0], &cfg);
        assert_eq!(s00, 0.0);
        assert!(s10 > 0.0);
        assert_eq!(match_objects(&r, &c, &cfg), vec![(1, 0)]);
    }

    #[test]
    fn match_no_shared_classes_is_empty() {
        let cfg = MatchConfig::default();
        let r = SceneDescriptor::new(vec![obj(1, 0.1, 0.1, 0.5, 0.5)]);
        let c = SceneDescriptor::new(vec![obj(2, 0.1, 0.1, 0.5, 0.5)]);
        assert!(match_objects(&r, &c, &cfg).is_empty());
    }

    #[test]
    fn match_never_reuses_objects() {
        let cfg = MatchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let r = SceneDescriptor::new((0..6).map(|_| random_obj(&mut rng, 2)).collect());
            let c = SceneDescriptor::new((0..6).map(|_| random_obj(&mut rng, 2)).collect());
            let pairs = match_objects(&r, &c, &cfg);
            assert!(pairs.len() <= r.len().min(c.len()));
            let mut ref_seen = HashSet::new();
            let mut cur_seen = HashSet::new();
            for (ri, ci) in pairs {
                assert!(ref_seen.insert(ri));
                assert!(cur_seen.insert(ci));
            }
        }
    }

    #[test]
    fn scene_similarity_single_object() {
        let cfg = MatchConfig::default();
        let r = SceneDescriptor::new(vec![obj(7, 0.0, 0.0, 0.5, 0.5)]);
        let c = SceneDescriptor::new(vec![obj(7, 0.4, 0.0, 0.9, 0.5)]);
        let expected = object_similarity(&r.objects[0], &c.objects[0], &cfg);
        assert!((scene_similarity(&r, &c, &cfg) - expected).abs() < 1e-12);
    }

    #[test]
    fn scene_similarity_averages_over_reference_count() {
        let mut cfg = MatchConfig::default();
        cfg.overlap_gain = 1.0;
        // build two distinct-class pairs with chosen scores, then check mean
        let r = SceneDescriptor::new(vec![obj(1, 0.0, 0.0, 0.5, 0.5), obj(2, 0.5, 0.5, 1.0, 1.0)]);
        let c = SceneDescriptor::new(vec![obj(1, 0.1, 0.0, 0.6, 0.5), obj(2, 0.5, 0.5, 1.0, 1.0)]);
        let s0 = object_similarity(&r.objects[0], &c.objects[0], &cfg);
        let s1 = object_similarity(&r.objects[1], &c.objects[1], &cfg);
        let got = scene_similarity(&r, &c, &cfg);
        assert!((got - 0.5 * (s0 + s1)).abs() < 1e-12);
    }

    #[test]
    fn scene_similarity_penalizes_unmatched_reference_objects() {
        let cfg = MatchConfig::default();
        // two reference objects, only one matchable at score 0.9ish
        let r = SceneDescriptor::new(vec![obj(1, 0.0, 0.0, 0.5, 0.5), obj(2, 0.5, 0.5, 1.0, 1.0)]);
        let c = SceneDescriptor::new(vec![obj(1, 0.0, 0.0, 0.5, 0.5)]);
        let s = object_similarity(&r.objects[0], &c.objects[0], &cfg);
        assert_eq!(s, 1.0);
        assert!((scene_similarity(&r, &c, &cfg) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scene_similarity_empty_reference_is_zero() {
        let cfg = MatchConfig::default();
        let r = SceneDescriptor::default();
        let c = SceneDescriptor::new(vec![obj(1, 0.1, 0.1, 0.5, 0.5)]);
        assert_eq!(scene_similarity(&r, &c, &cfg), 0.0);
    }

    #[test]
    fn scene_self_similarity_is_one_for_distinct_classes() {
        let cfg = MatchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let objects: Vec<SceneObject> = (0..5)
                .map(|k| {
                    let mut o = random_obj(&mut rng, 1);
                    o.class = ClassId(k);
                    o
                })
                .collect();
            let s = SceneDescriptor::new(objects);
            assert_eq!(scene_similarity(&s, &s, &cfg), 1.0);
        }
    }

    #[test]
    fn scene_similarity_stays_in_unit_interval() {
        let cfg = MatchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..300 {
            let r = SceneDescriptor::new((0..4).map(|_| random_obj(&mut rng, 3)).collect());
            let c = SceneDescriptor::new((0..4).map(|_| random_obj(&mut rng, 3)).collect());
            let s = scene_similarity(&r, &c, &cfg);
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn scene_similarity_non_increasing_as_overlap_shrinks() {
        // distinct classes keep the pairing fixed while one box slides away
        let cfg = MatchConfig::default();
        let r = SceneDescriptor::new(vec![obj(1, 0.1, 0.1, 0.4, 0.4), obj(2, 0.6, 0.6, 0.9, 0.9)]);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let shift = k as f64 * 0.02;
            let c = SceneDescriptor::new(vec![
                obj(1, 0.1 + shift, 0.1, (0.4 + shift).min(1.0), 0.4),
                obj(2, 0.6, 0.6, 0.9, 0.9),
            ]);
            let s = scene_similarity(&r, &c, &cfg);
            assert!(s <= prev + 1e-12);
            prev = s;
        }
    }
}
