//! Teach-and-repeat navigation from semantic object landmarks.
//!
//! A taught trajectory is stored as a sequence of compact scene descriptors
//! (object class + bounding box per detection). During a repeat run the robot
//! relocalizes against that memory with sequence matching over a similarity
//! table, then steers with a two-window funnel-lane controller. A deterministic
//! synthetic world closes the loop for experiments: planar kinematics, pinhole
//! projection of labeled 3D objects, occlusion and detection noise.

pub mod config;
pub mod control;
pub mod descriptor;
pub mod experiment;
pub mod harness;
pub mod memory;
pub mod reloc;
pub mod scenario;
pub mod sim;
pub mod world;

pub use config::SystemConfig;
pub use descriptor::{BoundingBox, ClassId, Detection, MatchConfig, SceneDescriptor, SceneObject};
pub use memory::ReferenceMemory;
