//! Scenario files.
//!
//! ```toml
//! name = "antagonist_study"
//! seed = 1
//! model = "planar_arm.model.toml"
//! plan = ["run", "apply-antagonist", "run"]
//!
//! [plant]
//! damping = 0.08
//! via_point_offset = 0.005
//!
//! [motor]
//! stiffness = 1000.0
//! offset = 0.5
//!
//! [motion]
//! waypoints = [{ time = 0.0, theta = [0.0, 0.3] }, { time = 1.0, theta = [0.5, 1.6] }]
//! ```
//!
//! Paths are relative to the scenario file. Every section except `[motion]`
//! has defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::motion::{sample_waypoints, Waypoint};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::model::{JointVector, MuscleVector, RobotModel};
use crate::perception::{CameraRig, ObservationNoise};
use crate::plant::{MotorControllerParams, Perturbation, PlantConfig, DEFAULT_DT};
use crate::refine::{AgonistSettings, AgonistWindow, AntagonistParams, JointMask, DEFAULT_DEADBAND};
use crate::trajectory::{JointTrajectory, MuscleTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Run,
    ApplyAntagonist,
    ApplyAgonist,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Run => "run",
            Step::ApplyAntagonist => "apply-antagonist",
            Step::ApplyAgonist => "apply-agonist",
        }
    }
}

/// A scalar applied to every entry, or one value per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerItem {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerItem {
    fn expand(&self, count: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerItem::Uniform(v) => Ok(vec![*v; count]),
            PerItem::Each(v) if v.len() == count => Ok(v.clone()),
            PerItem::Each(v) => Err(Error::validation(format!(
                "{what} has {} values, expected {count}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_damping")]
    pub damping: PerItem,
    #[serde(default)]
    pub via_point_offset: f64,
    #[serde(default)]
    pub rest_length_error: f64,
    #[serde(default)]
    pub tension_noise: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<Vec<f64>>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_damping() -> PerItem {
    PerItem::Uniform(0.08)
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            damping: default_damping(),
            via_point_offset: 0.0,
            rest_length_error: 0.0,
            tension_noise: 0.0,
            gravity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorSection {
    #[serde(default = "default_stiffness")]
    pub stiffness: PerItem,
    #[serde(default = "default_offset")]
    pub offset: PerItem,
}

fn default_stiffness() -> PerItem {
    PerItem::Uniform(1000.0)
}

fn default_offset() -> PerItem {
    PerItem::Uniform(0.5)
}

impl Default for MotorSection {
    fn default() -> Self {
        Self {
            stiffness: default_stiffness(),
            offset: default_offset(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntagonistSection {
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
    #[serde(default = "default_deadband")]
    pub deadband: f64,
}

fn default_gain() -> f64 {
    AntagonistParams::default().gain
}

fn default_threshold() -> f64 {
    AntagonistParams::default().threshold
}

fn default_window() -> usize {
    AntagonistParams::default().smoothing_window
}

fn default_deadband() -> f64 {
    DEFAULT_DEADBAND
}

impl Default for AntagonistSection {
    fn default() -> Self {
        Self {
            gain: default_gain(),
            threshold: default_threshold(),
            smoothing_window: default_window(),
            deadband: default_deadband(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgonistSection {
    /// Joints the correction may use; all joints when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints: Option<Vec<String>>,
    /// Half width of the window around the closest approach, seconds. The
    /// second half of the trial when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    #[serde(default)]
    pub pixel_sigma: f64,
    #[serde(default)]
    pub dropout_probability: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_fps() -> f64 {
    30.0
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            pixel_sigma: 0.0,
            dropout_probability: 0.0,
            fps: default_fps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_est_damping")]
    pub damping: f64,
}

fn default_iterations() -> usize {
    50
}

fn default_tolerance() -> f64 {
    1e-10
}

fn default_est_damping() -> f64 {
    1e-6
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            max_iterations: default_iterations(),
            tolerance: default_tolerance(),
            damping: default_est_damping(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub shuttle: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    pub waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub model: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_rig: Option<PathBuf>,
    pub plan: Vec<Step>,
    #[serde(default)]
    pub accumulate: bool,
    #[serde(default)]
    pub estimate_joints: bool,
    #[serde(default = "default_hit_radius")]
    pub hit_radius: f64,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub motor: MotorSection,
    #[serde(default)]
    pub antagonist: AntagonistSection,
    #[serde(default)]
    pub agonist: AgonistSection,
    #[serde(default)]
    pub camera: CameraSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSection>,
    pub motion: MotionSection,
}

fn default_hit_radius() -> f64 {
    0.08
}

/// Parse `value` as a TOML value, falling back to a plain string.
fn parse_override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Set a dotted key, e.g. `plant.via_point_offset=0.002` or `seed=4`.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::validation(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::validation(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::validation(format!("override key `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_override_value(value.trim()));
    Ok(())
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &Path, overrides: &[String]) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            message,
        };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| parse_err(e.to_string()))
    }
}

/// Fully resolved scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub plan: Vec<Step>,
    pub accumulate: bool,
    pub estimate_joints: bool,
    pub hit_radius: f64,
    pub model: RobotModel,
    pub plant: PlantConfig,
    pub motor: MotorControllerParams,
    pub antagonist: AntagonistParams,
    pub deadband: f64,
    pub agonist: AgonistSettings,
    pub rig: Option<CameraRig>,
    pub noise: ObservationNoise,
    pub fps: f64,
    pub estimator: EstimatorSection,
    pub shuttle: Option<Point3<f64>>,
    pub joint_reference: JointTrajectory,
    pub reference: MuscleTrajectory,
    pub file: ScenarioFile,
}

/// Independent stream seed derived from the scenario seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Scenario {
    /// Load a scenario file, apply `key=value` overrides and an optional seed.
    pub fn load(path: &Path, seed: Option<u64>, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file = ScenarioFile::parse(&text, path, overrides)?;
        if let Some(s) = seed {
            file.seed = s;
        }
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_file(file, dir)
    }

    /// Resolve `file`, reading the model and rig relative to `dir`.
    pub fn from_file(file: ScenarioFile, dir: &Path) -> Result<Self> {
        let model = RobotModel::load(&dir.join(&file.model))?;
        let rig = match &file.camera_rig {
            Some(p) => Some(CameraRig::load(&dir.join(p))?),
            None => None,
        };
        Self::assemble(file, model, rig)
    }

    /// Resolve `file` against an already loaded model and rig.
    pub fn assemble(file: ScenarioFile, model: RobotModel, rig: Option<CameraRig>) -> Result<Self> {
        if file.plan.is_empty() {
            return Err(Error::validation("scenario plan is empty"));
        }
        if file.plan.iter().any(|s| *s == Step::ApplyAgonist) {
            if rig.is_none() {
                return Err(Error::validation("apply-agonist needs a camera_rig"));
            }
            if file.target.is_none() {
                return Err(Error::validation("apply-agonist needs a [target] section"));
            }
        }
        if !(file.hit_radius > 0.0) {
            return Err(Error::validation("hit_radius must be positive"));
        }
        if !(file.camera.fps > 0.0) {
            return Err(Error::validation("camera fps must be positive"));
        }
        let (n, m) = (model.joint_count(), model.muscle_count());
        let p = &file.plant;
        let joint_reference = sample_waypoints(&model, &file.motion.waypoints, p.dt)?;
        let reference = joint_reference.to_muscle_space(&model)?;

        let mut plant = PlantConfig::new(model.clone(), 1.0, p.dt);
        plant.joint_damping = JointVector::from_slice(&p.damping.expand(n, "plant.damping")?);
        plant.perturbation = Perturbation {
            via_point_offset: p.via_point_offset,
            rest_length_error: p.rest_length_error,
            seed: derive_seed(file.seed, 1),
        };
        plant.tension_noise = p.tension_noise;
        plant.gravity_torque = p.gravity.as_ref().map(|g| JointVector::from_slice(g));
        plant.initial_theta = joint_reference.samples.first().cloned();
        plant.validate()?;

        let motor = MotorControllerParams::new(
            MuscleVector::from_slice(&file.motor.stiffness.expand(m, "motor.stiffness")?),
            MuscleVector::from_slice(&file.motor.offset.expand(m, "motor.offset")?),
        )?;
        let antagonist = AntagonistParams {
            gain: file.antagonist.gain,
            threshold: file.antagonist.threshold,
            smoothing_window: file.antagonist.smoothing_window,
        };
        antagonist.validate()?;
        if !(file.antagonist.deadband >= 0.0) {
            return Err(Error::validation("antagonist.deadband must be nonnegative"));
        }
        let mask = match &file.agonist.joints {
            Some(names) => JointMask::from_names(&model, names)?,
            None => JointMask::all(n),
        };
        if mask.count() == 0 {
            return Err(Error::validation("agonist.joints selects no joint"));
        }
        let window = match file.agonist.half_width {
            Some(h) if h >= 0.0 => AgonistWindow::Centered { half_width: h },
            Some(h) => return Err(Error::validation(format!("agonist.half_width {h} is negative"))),
            None => AgonistWindow::SecondHalf,
        };
        let noise = ObservationNoise {
            pixel_sigma: file.camera.pixel_sigma,
            dropout_probability: file.camera.dropout_probability,
            seed: derive_seed(file.seed, 2),
        };
        noise.validate()?;
        let est = &file.estimator;
        if est.max_iterations == 0 || !(est.tolerance > 0.0) || !(est.damping >= 0.0) {
            return Err(Error::validation(
                "estimator needs max_iterations ≥ 1, tolerance > 0 and damping ≥ 0",
            ));
        }

        Ok(Self {
            name: file.name.clone(),
            seed: file.seed,
            plan: file.plan.clone(),
            accumulate: file.accumulate,
            estimate_joints: file.estimate_joints,
            hit_radius: file.hit_radius,
            plant,
            motor,
            antagonist,
            deadband: file.antagonist.deadband,
            agonist: AgonistSettings { mask, window },
            rig,
            noise,
            fps: file.camera.fps,
            estimator: file.estimator.clone(),
            shuttle: file.target.as_ref().map(|t| Point3::from(t.shuttle)),
            joint_reference,
            reference,
            model,
            file,
        })
    }

    /// Estimator settings warm-started at `theta_init`.
    pub fn estimator_config(&self, theta_init: JointVector) -> EstimatorConfig {
        EstimatorConfig {
            max_iterations: self.estimator.max_iterations,
            tolerance: self.estimator.tolerance,
            damping: self.estimator.damping,
            ..EstimatorConfig::new(theta_init)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_values() {
        let mut t: toml::Table = "seed = 1\n[plant]\ndt = 0.005\n".parse().unwrap();
        apply_override(&mut t, "plant.via_point_offset=0.002").unwrap();
        apply_override(&mut t, "seed=7").unwrap();
        apply_override(&mut t, "name=demo").unwrap();
        apply_override(&mut t, "agonist.joints=[\"elbow\"]").unwrap();
        assert_eq!(t["plant"]["via_point_offset"].as_float(), Some(0.002));
        assert_eq!(t["seed"].as_integer(), Some(7));
        assert_eq!(t["name"].as_str(), Some("demo"));
        assert_eq!(t["agonist"]["joints"][0].as_str(), Some("elbow"));
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "seed.x=1").is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }

    #[test]
    fn per_item_expansion() {
        assert_eq!(PerItem::Uniform(2.0).expand(3, "x").unwrap(), vec![2.0; 3]);
        assert!(PerItem::Each(vec![1.0]).expand(3, "x").is_err());
    }
}
