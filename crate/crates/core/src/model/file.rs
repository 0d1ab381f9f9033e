//! TOML robot-model files.
//!
//! ```toml
//! name = "pulley"
//!
//! [[links]]
//! name = "base"
//!
//! [[links]]
//! name = "arm"
//! parent = "base"
//! joint = "hinge"
//! xyz = [0.0, 0.0, 0.0]
//!
//! [[joints]]
//! name = "hinge"
//! parent = "base"
//! axis = [0.0, 0.0, 1.0]
//! lower = -1.0
//! upper = 1.0
//!
//! [[muscles]]
//! name = "flexor"
//! rest_length = 0.3
//! via_points = [{ link = "base", x = -0.3, y = 0.02, z = 0.0 }, { link = "arm", x = 0.0, y = 0.02, z = 0.0 }]
//!
//! [end_effector]
//! link = "arm"
//! xyz = [0.1, 0.0, 0.0]
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<TransformSpec>,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    pub muscles: Vec<MuscleSpec>,
    pub end_effector: EndEffectorSpec,
}

/// Translation plus roll/pitch/yaw (radians, applied as `Rz(yaw)·Ry(pitch)·Rx(roll)`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub name: String,
    /// Parent link; absent only for the root link.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Revolute joint driving this link; absent for a rigid attachment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<String>,
    /// Origin of this link's frame in the parent frame (the joint frame).
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleSpec {
    pub name: String,
    pub rest_length: f64,
    pub via_points: Vec<ViaPointSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViaPointSpec {
    pub link: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndEffectorSpec {
    pub link: String,
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl ModelFile {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model description always serializes")
    }
}
