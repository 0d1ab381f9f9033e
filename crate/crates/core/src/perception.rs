//! Synthetic stereo vision: pinhole projection, midpoint triangulation and a
//! seeded observer producing racket/target observations.
//!
//! Camera frames follow the usual image convention: `+z` along the optical
//! axis, `+x` to the right of the image and `+y` down.

use std::path::Path;

use nalgebra::{Isometry3, Matrix3, Point2, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::TargetObservation;

/// Rays closer to parallel than this (radians) cannot be triangulated.
pub const MIN_RAY_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// World to camera transform.
    pub pose: Isometry3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    InFrame(Point2<f64>),
    /// In front of the camera but outside the image.
    OutOfFrame(Point2<f64>),
    BehindCamera,
}

impl Projection {
    pub fn in_frame(&self) -> Option<Point2<f64>> {
        match self {
            Projection::InFrame(p) => Some(*p),
            _ => None,
        }
    }
}

impl PinholeCamera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        pose: Isometry3<f64>,
    ) -> Result<Self> {
        let c = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            pose,
        };
        c.validate()?;
        Ok(c)
    }

    /// Camera at `position` looking toward `target`, with `up` roughly
    /// opposite to the image `+y`.
    pub fn look_at(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        position: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let z = target - position;
        if z.norm() == 0.0 {
            return Err(Error::validation("camera target coincides with its position"));
        }
        let z = z.normalize();
        let x = (-up).cross(&z);
        if x.norm() < 1e-9 {
            return Err(Error::validation("camera up vector is parallel to the view direction"));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        // columns are the camera axes in world coordinates
        let cam_to_world = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
        let iso = Isometry3::from_parts(
            Translation3::from(position.coords),
            UnitQuaternion::from_rotation_matrix(&cam_to_world),
        );
        Self::new(fx, fy, cx, cy, width, height, iso.inverse())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::validation("focal lengths must be positive"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::validation(format!(
                "principal point cx = {} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::validation(format!(
                "principal point cy = {} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        self.pose.inverse() * Point3::origin()
    }

    pub fn project(&self, point: &Point3<f64>) -> Projection {
        let p = self.pose * point;
        if p.z <= 0.0 {
            return Projection::BehindCamera;
        }
        let px = Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy);
        let inside = px.x >= 0.0
            && px.x < self.width as f64
            && px.y >= 0.0
            && px.y < self.height as f64;
        if inside {
            Projection::InFrame(px)
        } else {
            Projection::OutOfFrame(px)
        }
    }

    /// Unit ray direction in world coordinates through `pixel`.
    pub fn ray(&self, pixel: &Point2<f64>) -> Vector3<f64> {
        let d = Vector3::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy, 1.0);
        (self.pose.rotation.inverse() * d).normalize()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub left: PinholeCamera,
    pub right: PinholeCamera,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: Point3<f64>,
    /// Length of the common perpendicular between the two rays, meters.
    pub ray_gap: f64,
}

impl CameraRig {
    pub fn new(left: PinholeCamera, right: PinholeCamera) -> Result<Self> {
        let rig = Self { left, right };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        if !(self.baseline() > 0.0) {
            return Err(Error::validation("camera baseline must be positive"));
        }
        Ok(())
    }

    pub fn baseline(&self) -> f64 {
        (self.left.center() - self.right.center()).norm()
    }

    /// The same rig with both cameras moved by `t` (applied to world points).
    pub fn transformed(&self, t: &Isometry3<f64>) -> Self {
        let inv = t.inverse();
        let mv = |c: &PinholeCamera| PinholeCamera {
            pose: c.pose * inv,
            ..c.clone()
        };
        Self {
            left: mv(&self.left),
            right: mv(&self.right),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    /// Midpoint of the common perpendicular of the two back-projected rays.
    pub fn triangulate(&self, left: &Point2<f64>, right: &Point2<f64>) -> Result<Triangulation> {
        if !(left.iter().all(|v| v.is_finite()) && right.iter().all(|v| v.is_finite())) {
            return Err(Error::validation("pixel coordinates must be finite"));
        }
        let (o1, d1) = (self.left.center(), self.left.ray(left));
        let (o2, d2) = (self.right.center(), self.right.ray(right));
        let angle = d1.cross(&d2).norm().atan2(d1.dot(&d2));
        if angle < MIN_RAY_ANGLE {
            return Err(Error::DegenerateGeometry(format!(
                "rays are parallel to within {angle:.3e} rad"
            )));
        }
        let w = o1 - o2;
        let b = d1.dot(&d2);
        let (d, e) = (d1.dot(&w), d2.dot(&w));
        let denom = 1.0 - b * b;
        let s = (b * e - d) / denom;
        let t = (e - b * d) / denom;
        let p1 = o1 + s * d1;
        let p2 = o2 + t * d2;
        Ok(Triangulation {
            point: Point3::from(0.5 * (p1.coords + p2.coords)),
            ray_gap: (p1 - p2).norm(),
        })
    }
}

/// Pixel noise and frame loss for the observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationNoise {
    pub pixel_sigma: f64,
    pub dropout_probability: f64,
    pub seed: u64,
}

impl ObservationNoise {
    pub fn none() -> Self {
        Self {
            pixel_sigma: 0.0,
            dropout_probability: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_sigma >= 0.0 && self.pixel_sigma.is_finite()) {
            return Err(Error::validation("pixel_sigma must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.dropout_probability) {
            return Err(Error::validation("dropout_probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One camera frame of the observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationRecord {
    Observed {
        observation: TargetObservation,
        /// Distance from each triangulated point to the left / right camera
        /// ray, the larger of racket and target.
        ray_gap_left: f64,
        ray_gap_right: f64,
    },
    Dropout { time: f64 },
}

impl ObservationRecord {
    pub fn time(&self) -> f64 {
        match self {
            ObservationRecord::Observed { observation, .. } => observation.time,
            ObservationRecord::Dropout { time } => *time,
        }
    }

    pub fn observation(&self) -> Option<&TargetObservation> {
        match self {
            ObservationRecord::Observed { observation, .. } => Some(observation),
            ObservationRecord::Dropout { .. } => None,
        }
    }
}

fn distance_to_ray(p: &Point3<f64>, origin: &Point3<f64>, dir: &Vector3<f64>) -> f64 {
    let v = p - origin;
    (v - dir * v.dot(dir)).norm()
}

/// Observe racket and target at `time`. Frame `index` selects an independent
/// random stream, so any frame can be regenerated on its own.
pub fn observe(
    rig: &CameraRig,
    racket: &Point3<f64>,
    shuttle: &Point3<f64>,
    noise: &ObservationNoise,
    time: f64,
    index: u64,
) -> Result<ObservationRecord> {
    noise.validate()?;
    if !(racket.iter().chain(shuttle.iter()).all(|v| v.is_finite()) && time.is_finite()) {
        return Err(Error::validation("observed points must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(index);
    if noise.dropout_probability > 0.0 && rng.random::<f64>() < noise.dropout_probability {
        return Ok(ObservationRecord::Dropout { time });
    }
    let normal = Normal::new(0.0, noise.pixel_sigma).map_err(|e| Error::validation(e.to_string()))?;
    let mut pixel = |cam: &PinholeCamera, p: &Point3<f64>| -> Option<Point2<f64>> {
        let px = cam.project(p).in_frame()?;
        Some(Point2::new(px.x + normal.sample(&mut rng), px.y + normal.sample(&mut rng)))
    };
    let pix = [
        pixel(&rig.left, racket),
        pixel(&rig.right, racket),
        pixel(&rig.left, shuttle),
        pixel(&rig.right, shuttle),
    ];
    let [Some(rl), Some(rr), Some(sl), Some(sr)] = pix else {
        return Ok(ObservationRecord::Dropout { time });
    };
    let r = rig.triangulate(&rl, &rr)?;
    let s = rig.triangulate(&sl, &sr)?;
    let (ol, or) = (rig.left.center(), rig.right.center());
    let gap_l = distance_to_ray(&r.point, &ol, &rig.left.ray(&rl))
        .max(distance_to_ray(&s.point, &ol, &rig.left.ray(&sl)));
    let gap_r = distance_to_ray(&r.point, &or, &rig.right.ray(&rr))
        .max(distance_to_ray(&s.point, &or, &rig.right.ray(&sr)));
    Ok(ObservationRecord::Observed {
        observation: TargetObservation {
            time,
            shuttle: s.point,
            racket: r.point,
        },
        ray_gap_left: gap_l,
        ray_gap_right: gap_r,
    })
}

/// Standard stereo depth error `z²·σ_d/(f·b)` with disparity noise
/// `σ_d = √2·σ_px` for independent noise in both images.
pub fn stereo_depth_sigma(depth: f64, focal: f64, baseline: f64, pixel_sigma: f64) -> f64 {
    depth * depth * std::f64::consts::SQRT_2 * pixel_sigma / (focal * baseline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
}

/// Camera rig file: a `[left]` and a `[right]` table of [`CameraSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigFile {
    pub left: CameraSpec,
    pub right: CameraSpec,
}

impl CameraSpec {
    pub fn build(&self) -> Result<PinholeCamera> {
        PinholeCamera::look_at(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            Point3::from(self.position),
            Point3::from(self.look_at),
            Vector3::from(self.up),
        )
    }
}

impl RigFile {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn build(&self) -> Result<CameraRig> {
        CameraRig::new(self.left.build()?, self.right.build()?)
    }
}

impl CameraRig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RigFile::from_toml_str(&text, path)?.build()
    }
}
