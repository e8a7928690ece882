//! Aggregated run configuration, loadable from a TOML file.
//!
//! Every section and field is optional in the file; omitted values take the
//! defaults documented on the individual types.

use serde::{Deserialize, Serialize};

use crate::control::ControlConfig;
use crate::descriptor::MatchConfig;
use crate::harness::EndpointRule;
use crate::reloc::RelocConfig;
use crate::sim::{CameraModel, NoiseModel};

/// Simulation cadence and memory metadata.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Control/physics step, seconds.
    pub dt: f64,
    /// Trajectory samples per stored keyframe at teach time.
    pub keyframe_period: u16,
    /// Class vocabulary size written into memory files.
    pub vocab_size: u16,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 0.1,
            keyframe_period: 1,
            vocab_size: 80,
        }
    }
}

/// All tunables of the teach/repeat pipeline.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub matching: MatchConfig,
    pub reloc: RelocConfig,
    pub control: ControlConfig,
    pub camera: CameraModel,
    pub noise: NoiseModel,
    pub sim: SimOptions,
    pub endpoint: EndpointRule,
}

impl SystemConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }
}
