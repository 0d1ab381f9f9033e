//! Joint-space reference motions from timed waypoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointVector, RobotModel};
use crate::trajectory::JointTrajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub time: f64,
    pub theta: Vec<f64>,
}

/// Minimum-jerk blend `10s³ − 15s⁴ + 6s⁵`: zero velocity and acceleration at
/// both ends.
pub fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Sample the waypoint path every `dt` from the first to the last waypoint
/// time, blending each pair with [`min_jerk`].
pub fn sample_waypoints(model: &RobotModel, waypoints: &[Waypoint], dt: f64) -> Result<JointTrajectory> {
    let n = model.joint_count();
    let first = waypoints
        .first()
        .ok_or_else(|| Error::validation("motion needs at least one waypoint"))?;
    for (k, w) in waypoints.iter().enumerate() {
        if w.theta.len() != n {
            return Err(Error::validation(format!(
                "waypoint {k} has {} angles for {n} joints",
                w.theta.len()
            )));
        }
        model.check_joint_vector(&JointVector::from_slice(&w.theta))?;
        if k > 0 && !(w.time > waypoints[k - 1].time) {
            return Err(Error::validation("waypoint times must increase strictly"));
        }
    }
    if !(first.time == 0.0) {
        return Err(Error::validation("the first waypoint must be at time 0"));
    }
    let end = waypoints.last().unwrap().time;
    let cycles = (end / dt + 1e-9).floor() as usize + 1;
    let mut seg = 0;
    let samples = (0..cycles)
        .map(|c| {
            let t = c as f64 * dt;
            while seg + 2 < waypoints.len() && t > waypoints[seg + 1].time {
                seg += 1;
            }
            if waypoints.len() == 1 {
                return JointVector::from_slice(&first.theta);
            }
            let (a, b) = (&waypoints[seg], &waypoints[seg + 1]);
            let s = min_jerk((t - a.time) / (b.time - a.time));
            JointVector::from_slice(
                &a.theta.iter().zip(&b.theta).map(|(x, y)| x + s * (y - x)).collect::<Vec<_>>(),
            )
        })
        .collect();
    JointTrajectory::new(dt, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog;

    #[test]
    fn blend_endpoints() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert_eq!(min_jerk(0.5), 0.5);
        let h = 1e-6;
        assert!((min_jerk(h) - min_jerk(0.0)) / h < 1e-9);
    }

    #[test]
    fn samples_through_waypoints() {
        let model = catalog::planar_arm();
        let w = vec![
            Waypoint { time: 0.0, theta: vec![0.0, 0.5] },
            Waypoint { time: 0.5, theta: vec![0.2, 1.5] },
            Waypoint { time: 1.0, theta: vec![0.2, 0.5] },
        ];
        let t = sample_waypoints(&model, &w, 0.005).unwrap();
        assert_eq!(t.len(), 201);
        assert_eq!(t.samples[0].as_slice(), &[0.0, 0.5]);
        assert!((t.samples[100][1] - 1.5).abs() < 1e-12);
        assert!((t.samples[200][1] - 0.5).abs() < 1e-12);
        assert!((t.samples[50][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_waypoints() {
        let model = catalog::planar_arm();
        let bad = [
            vec![],
            vec![Waypoint { time: 0.0, theta: vec![0.0] }],
            vec![Waypoint { time: 0.0, theta: vec![0.0, 3.0] }],
            vec![
                Waypoint { time: 0.0, theta: vec![0.0, 0.0] },
                Waypoint { time: 0.0, theta: vec![0.0, 0.1] },
            ],
            vec![Waypoint { time: 0.1, theta: vec![0.0, 0.0] }],
        ];
        for w in bad {
            assert!(sample_waypoints(&model, &w, 0.005).is_err());
        }
    }
}
