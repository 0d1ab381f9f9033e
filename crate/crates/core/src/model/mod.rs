//! Kinematic robot model: revolute joint tree, via-point muscle routing and
//! the maps built on it.
//!
//! * `muscle_lengths`: θ → l, polyline length of every muscle,
//! * `joint_muscle_jacobian`: G(θ) = ∂l/∂θ (M×N),
//! * `end_effector_position`: θ → P_ee,
//! * `task_jacobian`: J(θ) = ∂P_ee/∂θ (3×N).
//!
//! Both Jacobians are analytic. A point `p` fixed to a link moved by joint `j`
//! has velocity `ω_j × (p − o_j)` per unit joint rate, where `ω_j` and `o_j`
//! are the joint axis and origin in the world frame. The derivative of a
//! polyline segment length is the unit segment direction dotted with the
//! difference of its endpoint velocities.

pub mod catalog;
mod file;
mod linalg;
mod vectors;

use std::path::Path;

use nalgebra::{DMatrix, Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};

pub use file::{
    EndEffectorSpec, JointSpec, LinkSpec, ModelFile, MuscleSpec, TransformSpec, ViaPointSpec,
};
pub use linalg::{pseudo_inverse, pseudo_inverse_with_cutoff, DEFAULT_RCOND};
pub use vectors::{JointVector, MuscleVector};

use crate::error::{Error, Result};

/// Allowed deviation of a declared rest length from the zero-pose polyline length.
pub const REST_LENGTH_TOLERANCE: f64 = 1e-9;
const AXIS_NORM_TOLERANCE: f64 = 1e-12;
const MIN_SEGMENT_LENGTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Link the joint frame is mounted on.
    pub parent: usize,
    /// Link rotated by this joint.
    pub child: usize,
    pub axis: Unit<Vector3<f64>>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    pub joint: Option<usize>,
    /// Link frame origin in the parent link frame, before joint rotation.
    pub origin: Isometry3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViaPoint {
    pub link: usize,
    pub offset: Point3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuscleRouting {
    pub name: String,
    pub via_points: Vec<ViaPoint>,
    pub rest_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndEffector {
    pub link: usize,
    pub frame: Isometry3<f64>,
}

/// How the loader treats declared rest lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestLengths {
    /// Reject files whose rest lengths disagree with the zero-pose geometry.
    Check,
    /// Overwrite rest lengths with the zero-pose polyline length.
    Recompute,
}

/// Immutable kinematic model. Construct with [`RobotModel::from_file`] or
/// [`RobotModel::load`].
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    name: String,
    base: Isometry3<f64>,
    links: Vec<Link>,
    joints: Vec<Joint>,
    muscles: Vec<MuscleRouting>,
    end_effector: EndEffector,
    /// `moved_by[link][joint]`: the link is the joint's child or a descendant of it.
    moved_by: Vec<Vec<bool>>,
}

/// World-frame link poses plus joint origins and axes at one configuration.
struct Frames {
    links: Vec<Isometry3<f64>>,
    joint_origin: Vec<Point3<f64>>,
    joint_axis: Vec<Vector3<f64>>,
}

pub(crate) fn transform(xyz: [f64; 3], rpy: [f64; 3]) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(xyz[0], xyz[1], xyz[2]),
        UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
    )
}

fn to_xyz_rpy(iso: &Isometry3<f64>) -> ([f64; 3], [f64; 3]) {
    let t = iso.translation.vector;
    let (r, p, y) = iso.rotation.euler_angles();
    // `+ 0.0` folds negative zeros
    ([t.x + 0.0, t.y + 0.0, t.z + 0.0], [r + 0.0, p + 0.0, y + 0.0])
}

impl RobotModel {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(ModelFile::read(path)?, RestLengths::Check)
    }

    pub fn from_toml_str(text: &str, rest: RestLengths) -> Result<Self> {
        Self::from_file(ModelFile::from_toml_str(text, Path::new("<inline>"))?, rest)
    }

    pub fn from_file(file: ModelFile, rest: RestLengths) -> Result<Self> {
        let mut links: Vec<Link> = Vec::with_capacity(file.links.len());
        let link_index = |links: &[Link], name: &str| links.iter().position(|l| l.name == name);

        if file.links.is_empty() {
            return Err(Error::validation("model has no links"));
        }
        for (i, spec) in file.links.iter().enumerate() {
            if link_index(&links, &spec.name).is_some() {
                return Err(Error::validation(format!("duplicate link `{}`", spec.name)));
            }
            let parent = match (&spec.parent, i) {
                (None, 0) => None,
                (None, _) => {
                    return Err(Error::validation(format!(
                        "link `{}` has no parent; only the first link may be the root",
                        spec.name
                    )))
                }
                (Some(_), 0) => {
                    return Err(Error::validation("the first link must be the root"))
                }
                (Some(p), _) => Some(link_index(&links, p).ok_or_else(|| {
                    Error::validation(format!(
                        "link `{}` references unknown or later-declared parent `{p}`",
                        spec.name
                    ))
                })?),
            };
            links.push(Link {
                name: spec.name.clone(),
                parent,
                joint: None,
                origin: transform(spec.xyz, spec.rpy),
            });
        }

        let mut joints = Vec::with_capacity(file.joints.len());
        for spec in &file.joints {
            if joints.iter().any(|j: &Joint| j.name == spec.name) {
                return Err(Error::validation(format!("duplicate joint `{}`", spec.name)));
            }
            let axis = Vector3::from(spec.axis);
            if !axis.iter().all(|v| v.is_finite()) || (axis.norm() - 1.0).abs() > AXIS_NORM_TOLERANCE
            {
                return Err(Error::validation(format!(
                    "joint `{}` axis {:?} is not a unit vector",
                    spec.name, spec.axis
                )));
            }
            if !(spec.lower < spec.upper) {
                return Err(Error::validation(format!(
                    "joint `{}` limits [{}, {}] are not increasing",
                    spec.name, spec.lower, spec.upper
                )));
            }
            let parent = link_index(&links, &spec.parent).ok_or_else(|| {
                Error::validation(format!("joint `{}` has unknown parent `{}`", spec.name, spec.parent))
            })?;
            let driven: Vec<usize> = file
                .links
                .iter()
                .enumerate()
                .filter(|(_, l)| l.joint.as_deref() == Some(spec.name.as_str()))
                .map(|(i, _)| i)
                .collect();
            let child = match driven.as_slice() {
                [c] => *c,
                [] => {
                    return Err(Error::validation(format!(
                        "joint `{}` does not drive any link",
                        spec.name
                    )))
                }
                _ => {
                    return Err(Error::validation(format!(
                        "joint `{}` drives more than one link",
                        spec.name
                    )))
                }
            };
            if links[child].parent != Some(parent) {
                return Err(Error::validation(format!(
                    "joint `{}` parent `{}` differs from the parent of link `{}`",
                    spec.name, spec.parent, links[child].name
                )));
            }
            links[child].joint = Some(joints.len());
            joints.push(Joint {
                name: spec.name.clone(),
                parent,
                child,
                axis: Unit::new_unchecked(axis),
                lower: spec.lower,
                upper: spec.upper,
            });
        }
        for spec in &file.links {
            if let Some(j) = &spec.joint {
                if !joints.iter().any(|jj| &jj.name == j) {
                    return Err(Error::validation(format!(
                        "link `{}` references unknown joint `{j}`",
                        spec.name
                    )));
                }
            }
        }

        let mut muscles = Vec::with_capacity(file.muscles.len());
        for spec in &file.muscles {
            if muscles.iter().any(|m: &MuscleRouting| m.name == spec.name) {
                return Err(Error::validation(format!("duplicate muscle `{}`", spec.name)));
            }
            if spec.via_points.len() < 2 {
                return Err(Error::validation(format!(
                    "muscle `{}` needs at least 2 via-points",
                    spec.name
                )));
            }
            let mut via_points = Vec::with_capacity(spec.via_points.len());
            for vp in &spec.via_points {
                let link = link_index(&links, &vp.link).ok_or_else(|| {
                    Error::validation(format!(
                        "muscle `{}` via-point references unknown link `{}`",
                        spec.name, vp.link
                    ))
                })?;
                let offset = Point3::new(vp.x, vp.y, vp.z);
                if !offset.iter().all(|v| v.is_finite()) {
                    return Err(Error::validation(format!(
                        "muscle `{}` has a non-finite via-point",
                        spec.name
                    )));
                }
                via_points.push(ViaPoint { link, offset });
            }
            muscles.push(MuscleRouting {
                name: spec.name.clone(),
                via_points,
                rest_length: spec.rest_length,
            });
        }

        let ee_link = link_index(&links, &file.end_effector.link).ok_or_else(|| {
            Error::validation(format!(
                "end effector references unknown link `{}`",
                file.end_effector.link
            ))
        })?;

        let mut moved_by = vec![vec![false; joints.len()]; links.len()];
        for l in 0..links.len() {
            if let Some(p) = links[l].parent {
                moved_by[l] = moved_by[p].clone();
            }
            if let Some(j) = links[l].joint {
                moved_by[l][j] = true;
            }
        }

        let base = file
            .base
            .map(|b| transform(b.xyz, b.rpy))
            .unwrap_or_else(Isometry3::identity);

        let mut model = RobotModel {
            name: file.name.clone().unwrap_or_else(|| "robot".to_string()),
            base,
            links,
            joints,
            muscles,
            end_effector: EndEffector {
                link: ee_link,
                frame: transform(file.end_effector.xyz, file.end_effector.rpy),
            },
            moved_by,
        };

        let zero = JointVector::zeros(model.joint_count());
        let lengths = model.lengths_unchecked(&zero)?;
        for (m, muscle) in model.muscles.iter_mut().enumerate() {
            match rest {
                RestLengths::Recompute => muscle.rest_length = lengths[m],
                RestLengths::Check => {
                    if !(muscle.rest_length > 0.0) {
                        return Err(Error::validation(format!(
                            "muscle `{}` rest length must be positive",
                            muscle.name
                        )));
                    }
                    if (muscle.rest_length - lengths[m]).abs() > REST_LENGTH_TOLERANCE {
                        return Err(Error::validation(format!(
                            "muscle `{}` rest length {} disagrees with zero-pose length {}",
                            muscle.name, muscle.rest_length, lengths[m]
                        )));
                    }
                }
            }
        }
        Ok(model)
    }

    /// Inverse of [`RobotModel::from_file`]; rest lengths are written exactly.
    pub fn to_file(&self) -> ModelFile {
        let base = (self.base != Isometry3::identity()).then(|| {
            let (xyz, rpy) = to_xyz_rpy(&self.base);
            TransformSpec { xyz, rpy }
        });
        let links = self
            .links
            .iter()
            .map(|l| {
                let (xyz, rpy) = to_xyz_rpy(&l.origin);
                LinkSpec {
                    name: l.name.clone(),
                    parent: l.parent.map(|p| self.links[p].name.clone()),
                    joint: l.joint.map(|j| self.joints[j].name.clone()),
                    xyz,
                    rpy,
                }
            })
            .collect();
        let joints = self
            .joints
            .iter()
            .map(|j| JointSpec {
                name: j.name.clone(),
                parent: self.links[j.parent].name.clone(),
                axis: [j.axis.x, j.axis.y, j.axis.z],
                lower: j.lower,
                upper: j.upper,
            })
            .collect();
        let muscles = self
            .muscles
            .iter()
            .map(|m| MuscleSpec {
                name: m.name.clone(),
                rest_length: m.rest_length,
                via_points: m
                    .via_points
                    .iter()
                    .map(|v| ViaPointSpec {
                        link: self.links[v.link].name.clone(),
                        x: v.offset.x,
                        y: v.offset.y,
                        z: v.offset.z,
                    })
                    .collect(),
            })
            .collect();
        let (xyz, rpy) = to_xyz_rpy(&self.end_effector.frame);
        ModelFile {
            name: Some(self.name.clone()),
            base,
            links,
            joints,
            muscles,
            end_effector: EndEffectorSpec {
                link: self.links[self.end_effector.link].name.clone(),
                xyz,
                rpy,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn muscle_count(&self) -> usize {
        self.muscles.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn muscles(&self) -> &[MuscleRouting] {
        &self.muscles
    }

    pub fn end_effector(&self) -> &EndEffector {
        &self.end_effector
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn muscle_index(&self, name: &str) -> Option<usize> {
        self.muscles.iter().position(|m| m.name == name)
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }

    pub fn muscle_names(&self) -> Vec<String> {
        self.muscles.iter().map(|m| m.name.clone()).collect()
    }

    /// Declared rest lengths as a muscle vector.
    pub fn rest_lengths(&self) -> MuscleVector {
        MuscleVector::from(self.muscles.iter().map(|m| m.rest_length).collect::<Vec<_>>())
    }

    /// True when joint `joint` moves link `link`.
    pub fn link_moved_by(&self, link: usize, joint: usize) -> bool {
        self.moved_by[link][joint]
    }

    /// Same model with the world-from-base transform replaced.
    pub fn with_base(&self, base: Isometry3<f64>) -> Self {
        RobotModel {
            base,
            ..self.clone()
        }
    }

    pub fn lower_limits(&self) -> JointVector {
        JointVector::from(self.joints.iter().map(|j| j.lower).collect::<Vec<_>>())
    }

    pub fn upper_limits(&self) -> JointVector {
        JointVector::from(self.joints.iter().map(|j| j.upper).collect::<Vec<_>>())
    }

    /// Project `theta` onto the joint-limit box.
    pub fn clamp_to_limits(&self, theta: &mut JointVector) {
        for (v, j) in theta.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.lower, j.upper);
        }
    }

    /// Checks dimension and limits of `theta`.
    pub fn check_joint_vector(&self, theta: &JointVector) -> Result<()> {
        if theta.len() != self.joint_count() {
            return Err(Error::validation(format!(
                "joint vector has {} entries, model `{}` has {} joints",
                theta.len(),
                self.name,
                self.joint_count()
            )));
        }
        for (v, j) in theta.iter().zip(&self.joints) {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("joint `{}` is not finite", j.name)));
            }
            if *v < j.lower || *v > j.upper {
                return Err(Error::JointRange {
                    joint: j.name.clone(),
                    value: *v,
                    lower: j.lower,
                    upper: j.upper,
                });
            }
        }
        Ok(())
    }

    fn frames(&self, theta: &JointVector) -> Frames {
        let mut links: Vec<Isometry3<f64>> = Vec::with_capacity(self.links.len());
        let mut joint_origin = vec![Point3::origin(); self.joints.len()];
        let mut joint_axis = vec![Vector3::zeros(); self.joints.len()];
        for link in &self.links {
            let mounted = match link.parent {
                None => self.base * link.origin,
                Some(p) => links[p] * link.origin,
            };
            let pose = match link.joint {
                None => mounted,
                Some(j) => {
                    let joint = &self.joints[j];
                    joint_origin[j] = Point3::from(mounted.translation.vector);
                    joint_axis[j] = mounted.rotation * joint.axis.into_inner();
                    mounted * UnitQuaternion::from_axis_angle(&joint.axis, theta[j])
                }
            };
            links.push(pose);
        }
        Frames {
            links,
            joint_origin,
            joint_axis,
        }
    }

    fn via_points_world(&self, frames: &Frames, muscle: &MuscleRouting) -> Vec<Point3<f64>> {
        muscle
            .via_points
            .iter()
            .map(|v| frames.links[v.link] * v.offset)
            .collect()
    }

    fn lengths_from_frames(&self, frames: &Frames) -> Result<MuscleVector> {
        let mut out = MuscleVector::zeros(self.muscle_count());
        for (m, muscle) in self.muscles.iter().enumerate() {
            let pts = self.via_points_world(frames, muscle);
            let mut len = 0.0;
            for (s, w) in pts.windows(2).enumerate() {
                let d = (w[1] - w[0]).norm();
                if d < MIN_SEGMENT_LENGTH {
                    return Err(Error::DegenerateRouting {
                        muscle: muscle.name.clone(),
                        segment: s,
                    });
                }
                len += d;
            }
            out[m] = len;
        }
        Ok(out)
    }

    /// Muscle lengths without the joint-limit check.
    pub(crate) fn lengths_unchecked(&self, theta: &JointVector) -> Result<MuscleVector> {
        let frames = self.frames(theta);
        self.lengths_from_frames(&frames)
    }

    /// Polyline length of every muscle at `theta`.
    pub fn muscle_lengths(&self, theta: &JointVector) -> Result<MuscleVector> {
        self.check_joint_vector(theta)?;
        self.lengths_unchecked(theta)
    }

    /// Joint-muscle Jacobian `G = ∂l/∂θ`, rows are muscles, columns joints.
    pub fn joint_muscle_jacobian(&self, theta: &JointVector) -> Result<DMatrix<f64>> {
        self.check_joint_vector(theta)?;
        self.jacobian_unchecked(theta)
    }

    pub(crate) fn jacobian_unchecked(&self, theta: &JointVector) -> Result<DMatrix<f64>> {
        let frames = self.frames(theta);
        let n = self.joint_count();
        let mut g = DMatrix::zeros(self.muscle_count(), n);
        for (m, muscle) in self.muscles.iter().enumerate() {
            let pts = self.via_points_world(&frames, muscle);
            for (s, w) in pts.windows(2).enumerate() {
                let seg = w[1] - w[0];
                let d = seg.norm();
                if d < MIN_SEGMENT_LENGTH {
                    return Err(Error::DegenerateRouting {
                        muscle: muscle.name.clone(),
                        segment: s,
                    });
                }
                let u = seg / d;
                let (la, lb) = (muscle.via_points[s].link, muscle.via_points[s + 1].link);
                for j in 0..n {
                    let (ma, mb) = (self.moved_by[la][j], self.moved_by[lb][j]);
                    // both ends fixed to links rigidly carried by the joint: no length change
                    if ma == mb {
                        continue;
                    }
                    let (o, w_axis) = (frames.joint_origin[j], frames.joint_axis[j]);
                    let mut rel = Vector3::zeros();
                    if mb {
                        rel += w_axis.cross(&(w[1] - o));
                    }
                    if ma {
                        rel -= w_axis.cross(&(w[0] - o));
                    }
                    g[(m, j)] += u.dot(&rel);
                }
            }
        }
        Ok(g)
    }

    /// World position of the end-effector frame origin.
    pub fn end_effector_position(&self, theta: &JointVector) -> Result<Point3<f64>> {
        self.check_joint_vector(theta)?;
        Ok(self.ee_unchecked(theta))
    }

    pub(crate) fn ee_unchecked(&self, theta: &JointVector) -> Point3<f64> {
        let frames = self.frames(theta);
        let pose = frames.links[self.end_effector.link] * self.end_effector.frame;
        Point3::from(pose.translation.vector)
    }

    /// Position Jacobian of the end effector, 3×N.
    pub fn task_jacobian(&self, theta: &JointVector) -> Result<DMatrix<f64>> {
        self.check_joint_vector(theta)?;
        let frames = self.frames(theta);
        let ee_link = self.end_effector.link;
        let pose = frames.links[ee_link] * self.end_effector.frame;
        let p = Point3::from(pose.translation.vector);
        let n = self.joint_count();
        let mut jac = DMatrix::zeros(3, n);
        for j in 0..n {
            if self.moved_by[ee_link][j] {
                let col = frames.joint_axis[j].cross(&(p - frames.joint_origin[j]));
                jac.fixed_view_mut::<3, 1>(0, j).copy_from(&col);
            }
        }
        Ok(jac)
    }
}

#[cfg(test)]
mod tests;
