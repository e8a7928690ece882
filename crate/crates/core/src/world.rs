//! Synthetic world model: labeled 3D objects, occluding walls, lighting and
//! arena bounds, plus the structured-text world file format.
//!
//! World files name object classes by string; names resolve against a
//! vocabulary (an ordered list of class names, default COCO-style 80).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::ClassId;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("unknown class name '{0}'")]
    UnknownClass(String),
    #[error("class id {0} outside vocabulary of size {1}")]
    ClassOutOfVocabulary(u16, usize),
    #[error("unknown object id {0}")]
    UnknownObjectId(u32),
    #[error("duplicate object id {0}")]
    DuplicateObjectId(u32),
    #[error("object {id}: {reason}")]
    InvalidObject { id: u32, reason: &'static str },
    #[error("occluder has zero length")]
    DegenerateOccluder,
    #[error("world file parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Ordered list of class names; the index of a name is its class id.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    names: Vec<String>,
}

/// COCO-style default vocabulary of 80 categories.
const DEFAULT_NAMES: [&str; 80] = [
    "person",
    "bicycle",
    "car",
    "motorcycle",
    "airplane",
    "bus",
    "train",
    "truck",
    "boat",
    "traffic light",
    "fire hydrant",
    "stop sign",
    "parking meter",
    "bench",
    "bird",
    "cat",
    "dog",
    "horse",
    "sheep",
    "cow",
    "elephant",
    "bear",
    "zebra",
    "giraffe",
    "backpack",
    "umbrella",
    "handbag",
    "tie",
    "suitcase",
    "frisbee",
    "skis",
    "snowboard",
    "sports ball",
    "kite",
    "baseball bat",
    "baseball glove",
    "skateboard",
    "surfboard",
    "tennis racket",
    "bottle",
    "wine glass",
    "cup",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "banana",
    "apple",
    "sandwich",
    "orange",
    "broccoli",
    "carrot",
    "hot dog",
    "pizza",
    "donut",
    "cake",
    "chair",
    "couch",
    "potted plant",
    "bed",
    "dining table",
    "toilet",
    "tv",
    "laptop",
    "mouse",
    "remote",
    "keyboard",
    "cell phone",
    "microwave",
    "oven",
    "toaster",
    "sink",
    "refrigerator",
    "book",
    "clock",
    "vase",
    "scissors",
    "teddy bear",
    "hair drier",
    "toothbrush",
];

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            names: DEFAULT_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Vocabulary {
    pub fn new(names: Vec<String>) -> Self {
        Self { names }
    }

    /// One name per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let names = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        Self { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ClassId(i as u16))
    }

    pub fn name_of(&self, id: ClassId) -> Option<&str> {
        self.names.get(id.0 as usize).map(String::as_str)
    }
}

/// A detectable object: an axis-aligned box in world space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldObject {
    pub id: u32,
    pub class: ClassId,
    /// Center position, meters.
    pub center: (f64, f64, f64),
    /// Full extents along x, y, z, meters.
    pub size: (f64, f64, f64),
    /// Base per-frame detection probability.
    pub detect_prob: f64,
}

impl WorldObject {
    fn validate(&self) -> Result<(), WorldError> {
        let (w, d, h) = self.size;
        if !(w > 0.0 && d > 0.0 && h > 0.0) {
            return Err(WorldError::InvalidObject {
                id: self.id,
                reason: "size components must be positive",
            });
        }
        if !(0.0..=1.0).contains(&self.detect_prob) {
            return Err(WorldError::InvalidObject {
                id: self.id,
                reason: "detect_prob outside [0, 1]",
            });
        }
        Ok(())
    }
}

/// Opaque full-height wall segment in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

impl Occluder {
    pub fn new(start: (f64, f64), end: (f64, f64)) -> Result<Self, WorldError> {
        if start == end {
            return Err(WorldError::DegenerateOccluder);
        }
        Ok(Self { start, end })
    }

    /// Whether the 2D segment a-b crosses this wall (touching counts).
    pub fn blocks(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        segments_intersect(a, b, self.start, self.end)
    }
}

fn orient(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
    (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
}

fn on_segment(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> bool {
    r.0 >= p.0.min(q.0) && r.0 <= p.0.max(q.0) && r.1 >= p.1.min(q.1) && r.1 <= p.1.max(q.1)
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Rectangular arena `[0, width] x [0, height]` in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaBounds {
    pub width: f64,
    pub height: f64,
}

impl Default for ArenaBounds {
    fn default() -> Self {
        Self {
            width: 10.0,
            height: 6.0,
        }
    }
}

impl ArenaBounds {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

/// The complete simulated environment.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub objects: Vec<WorldObject>,
    pub occluders: Vec<Occluder>,
    /// Multiplier on every object's detection probability.
    pub lighting_factor: f64,
    pub arena: ArenaBounds,
}

impl WorldModel {
    pub fn new(
        objects: Vec<WorldObject>,
        occluders: Vec<Occluder>,
        lighting_factor: f64,
        arena: ArenaBounds,
    ) -> Result<Self, WorldError> {
        let mut seen = std::collections::HashSet::new();
        for obj in &objects {
            obj.validate()?;
            if !seen.insert(obj.id) {
                return Err(WorldError::DuplicateObjectId(obj.id));
            }
        }
        Ok(Self {
            objects,
            occluders,
            lighting_factor,
            arena,
        })
    }

    pub fn object(&self, id: u32) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn validate_vocabulary(&self, vocab_size: usize) -> Result<(), WorldError> {
        for obj in &self.objects {
            if obj.class.0 as usize >= vocab_size {
                return Err(WorldError::ClassOutOfVocabulary(obj.class.0, vocab_size));
            }
        }
        Ok(())
    }
}

/// Relocation of one object: new ground-plane center, optionally rotating the
/// footprint a quarter turn (swapping the horizontal extents).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectMove {
    pub id: u32,
    pub to: (f64, f64),
    #[serde(default)]
    pub quarter_turn: bool,
}

/// A world change applied between teach and repeat.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    pub remove: Vec<u32>,
    pub moves: Vec<ObjectMove>,
    pub lighting_factor: Option<f64>,
}

impl Perturbation {
    pub fn is_empty(&self) -> bool {
        self.remove.is_empty() && self.moves.is_empty() && self.lighting_factor.is_none()
    }
}

/// Apply a perturbation, returning a new world. The input is unchanged.
pub fn perturb_world(world: &WorldModel, p: &Perturbation) -> Result<WorldModel, WorldError> {
    for id in &p.remove {
        if world.object(*id).is_none() {
            return Err(WorldError::UnknownObjectId(*id));
        }
    }
    let mut out = world.clone();
    out.objects.retain(|o| !p.remove.contains(&o.id));
    for mv in &p.moves {
        let obj = out
            .objects
            .iter_mut()
            .find(|o| o.id == mv.id)
            .ok_or(WorldError::UnknownObjectId(mv.id))?;
        obj.center.0 = mv.to.0;
        obj.center.1 = mv.to.1;
        if mv.quarter_turn {
            std::mem::swap(&mut obj.size.0, &mut obj.size.1);
        }
    }
    if let Some(l) = p.lighting_factor {
        out.lighting_factor = l;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// World file format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct WorldFileObject {
    id: u32,
    class: String,
    center: [f64; 3],
    size: [f64; 3],
    #[serde(default = "default_detect_prob")]
    detect_prob: f64,
}

fn default_detect_prob() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct WorldFileOccluder {
    start: [f64; 2],
    end: [f64; 2],
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct WorldFile {
    lighting_factor: Option<f64>,
    arena: Option<ArenaBounds>,
    objects: Vec<WorldFileObject>,
    occluders: Vec<WorldFileOccluder>,
}

/// Parse a TOML world description, resolving class names via `vocab`.
pub fn parse_world(text: &str, vocab: &Vocabulary) -> Result<WorldModel, WorldError> {
    let file: WorldFile = toml::from_str(text)?;
    let objects = file
        .objects
        .into_iter()
        .map(|o| {
            let class = vocab
                .id_of(&o.class)
                .ok_or_else(|| WorldError::UnknownClass(o.class.clone()))?;
            Ok(WorldObject {
                id: o.id,
                class,
                center: (o.center[0], o.center[1], o.center[2]),
                size: (o.size[0], o.size[1], o.size[2]),
                detect_prob: o.detect_prob,
            })
        })
        .collect::<Result<Vec<_>, WorldError>>()?;
    let occluders = file
        .occluders
        .into_iter()
        .map(|o| Occluder::new((o.start[0], o.start[1]), (o.end[0], o.end[1])))
        .collect::<Result<Vec<_>, WorldError>>()?;
    WorldModel::new(
        objects,
        occluders,
        file.lighting_factor.unwrap_or(1.0),
        file.arena.unwrap_or_default(),
    )
}

/// Render a world back to TOML, naming classes via `vocab`.
pub fn world_to_toml(world: &WorldModel, vocab: &Vocabulary) -> Result<String, WorldError> {
    let file = WorldFile {
        lighting_factor: Some(world.lighting_factor),
        arena: Some(world.arena),
        objects: world
            .objects
            .iter()
            .map(|o| {
                let class = vocab
                    .name_of(o.class)
                    .ok_or(WorldError::ClassOutOfVocabulary(o.class.0, vocab.len()))?
                    .to_string();
                Ok(WorldFileObject {
                    id: o.id,
                    class,
                    center: [o.center.0, o.center.1, o.center.2],
                    size: [o.size.0, o.size.1, o.size.2],
                    detect_prob: o.detect_prob,
                })
            })
            .collect::<Result<Vec<_>, WorldError>>()?,
        occluders: world
            .occluders
            .iter()
            .map(|o| WorldFileOccluder {
                start: [o.start.0, o.start.1],
                end: [o.end.0, o.end.1],
            })
            .collect(),
    };
    Ok(toml::to_string(&file).expect("world serialization cannot fail"))
}
