//! Uniformly sampled time series of joint or muscle vectors.

use crate::error::{Error, Result};
use crate::model::{JointVector, MuscleVector, RobotModel};

/// Muscle-space samples at a fixed period `dt`; sample `k` is at `k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuscleTrajectory {
    pub dt: f64,
    pub samples: Vec<MuscleVector>,
}

/// Joint-space samples at a fixed period `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    pub dt: f64,
    pub samples: Vec<JointVector>,
}

impl MuscleTrajectory {
    pub fn new(dt: f64, samples: Vec<MuscleVector>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::validation(format!("sample period {dt} must be positive")));
        }
        if let Some(first) = samples.first() {
            if samples.iter().any(|s| s.len() != first.len()) {
                return Err(Error::validation("muscle trajectory samples differ in length"));
            }
        }
        Ok(Self { dt, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn muscle_count(&self) -> usize {
        self.samples.first().map_or(0, |s| s.len())
    }

    pub fn time(&self, cycle: usize) -> f64 {
        cycle as f64 * self.dt
    }

    /// Constant trajectory of `cycles` copies of `value`.
    pub fn constant(dt: f64, value: MuscleVector, cycles: usize) -> Result<Self> {
        Self::new(dt, vec![value; cycles])
    }

    /// Time series of a single muscle.
    pub fn muscle_series(&self, muscle: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[muscle]).collect()
    }
}

impl JointTrajectory {
    pub fn new(dt: f64, samples: Vec<JointVector>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::validation(format!("sample period {dt} must be positive")));
        }
        Ok(Self { dt, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Reference muscle lengths through the kinematic model, sample by sample.
    pub fn to_muscle_space(&self, model: &RobotModel) -> Result<MuscleTrajectory> {
        let samples = self
            .samples
            .iter()
            .map(|theta| model.muscle_lengths(theta))
            .collect::<Result<Vec<_>>>()?;
        MuscleTrajectory::new(self.dt, samples)
    }
}
