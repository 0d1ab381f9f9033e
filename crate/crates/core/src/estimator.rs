//! Joint angles from measured muscle lengths by inverting the kinematic map.
//!
//! Damped Gauss–Newton on `‖l(θ) − l_meas‖²` with `G(θ)` as the Jacobian:
//!
//! ```text
//! (GᵀG + λI)·δ = −Gᵀ·r,   θ ← clamp(θ + α·δ)
//! ```
//!
//! with `α` halved until the residual does not grow.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{JointVector, MuscleVector, RobotModel};

/// Consecutive residual increases treated as divergence.
const DIVERGENCE_RUN: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub max_iterations: usize,
    /// Stop once the residual norm is at or below this, meters.
    pub tolerance: f64,
    pub damping: f64,
    pub theta_init: JointVector,
    /// Step-halving line search; at most `max_halvings` halvings per iteration.
    pub line_search: bool,
    pub max_halvings: usize,
}

impl EstimatorConfig {
    pub fn new(theta_init: JointVector) -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-10,
            damping: 1e-6,
            theta_init,
            line_search: true,
            max_halvings: 10,
        }
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::validation(format!("tolerance {} must be positive", self.tolerance)));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::validation(format!("damping {} must be nonnegative", self.damping)));
        }
        model.check_joint_vector(&self.theta_init)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub theta: JointVector,
    /// Final residual norm, meters.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after every iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

fn residual(model: &RobotModel, theta: &JointVector, measured: &MuscleVector) -> Result<MuscleVector> {
    let mut r = model.muscle_lengths(theta)?;
    r.0 -= &measured.0;
    Ok(r)
}

/// Estimate θ̂ from `measured`. Stops at the tolerance, after
/// `max_iterations`, or when the line search cannot reduce the residual
/// (reported as not converged). Fails when the residual becomes non-finite
/// or grows for 5 consecutive iterations.
pub fn estimate_joint_angles(
    model: &RobotModel,
    measured: &MuscleVector,
    config: &EstimatorConfig,
) -> Result<Estimate> {
    config.validate(model)?;
    if measured.len() != model.muscle_count() {
        return Err(Error::validation(format!(
            "{} measured lengths for {} muscles",
            measured.len(),
            model.muscle_count()
        )));
    }
    if measured.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::validation("measured lengths must be finite and positive"));
    }
    let n = model.joint_count();
    let mut theta = config.theta_init.clone();
    let mut r = residual(model, &theta, measured)?;
    let mut norm = r.norm();
    let mut best = (theta.clone(), norm);
    let mut history = vec![norm];
    let mut growth = 0;
    let mut iterations = 0;

    while norm > config.tolerance && iterations < config.max_iterations {
        iterations += 1;
        let g = model.joint_muscle_jacobian(&theta)?;
        let gt = g.transpose();
        let a: DMatrix<f64> = &gt * &g + DMatrix::identity(n, n) * config.damping;
        let rhs = -(&gt * &r.0);
        let step = a
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| a.lu().solve(&rhs))
            .ok_or_else(|| Error::Numeric("Gauss–Newton system is singular".into()))?;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let mut trial = JointVector(&theta.0 + alpha * &step);
            model.clamp_to_limits(&mut trial);
            let tr = residual(model, &trial, measured)?;
            let tn = tr.norm();
            if !config.line_search || tn <= norm {
                accepted = Some((trial, tr, tn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, next_r, next_norm)) = accepted else {
            break;
        };
        if !next_norm.is_finite() {
            return Err(Error::EstimationFailure {
                best: best.0,
                residual: best.1,
            });
        }
        growth = if next_norm > norm { growth + 1 } else { 0 };
        let stalled = next_norm == norm && next == theta;
        theta = next;
        r = next_r;
        norm = next_norm;
        history.push(norm);
        if norm < best.1 {
            best = (theta.clone(), norm);
        }
        if growth >= DIVERGENCE_RUN {
            return Err(Error::EstimationFailure {
                best: best.0,
                residual: best.1,
            });
        }
        if stalled {
            break;
        }
    }
    Ok(Estimate {
        converged: norm <= config.tolerance,
        theta,
        residual: norm,
        iterations,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog;

    #[test]
    fn fixed_point_returns_exactly() {
        let model = catalog::planar_arm();
        let t = JointVector::from_slice(&[0.3, 1.1]);
        let l = model.muscle_lengths(&t).unwrap();
        let e = estimate_joint_angles(&model, &l, &EstimatorConfig::new(t.clone())).unwrap();
        assert_eq!(e.theta, t);
        assert_eq!(e.residual, 0.0);
        assert_eq!(e.iterations, 0);
    }

    #[test]
    fn pulley_recovers_angle() {
        let model = catalog::pulley_pair();
        let truth = JointVector::from_slice(&[0.3]);
        let l = model.muscle_lengths(&truth).unwrap();
        let mut cfg = EstimatorConfig::new(JointVector::zeros(1));
        cfg.max_iterations = 10;
        let e = estimate_joint_angles(&model, &l, &cfg).unwrap();
        assert!((e.theta[0] - 0.3).abs() < 1e-6);
        assert!(e.iterations <= 10);
    }

    #[test]
    fn residual_history_is_non_increasing() {
        let model = catalog::planar_arm();
        let truth = JointVector::from_slice(&[-0.7, 2.0]);
        let l = model.muscle_lengths(&truth).unwrap();
        let e =
            estimate_joint_angles(&model, &l, &EstimatorConfig::new(JointVector::zeros(2))).unwrap();
        for w in e.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(e.converged);
        assert!((&e.theta.0 - &truth.0).norm() < 1e-6);
    }

    #[test]
    fn output_respects_limits() {
        let model = catalog::planar_arm();
        // lengths taken beyond the elbow limit
        let mut file = model.to_file();
        file.joints[1].upper = 3.0;
        let wide = RobotModel::from_file(file, crate::model::RestLengths::Check).unwrap();
        let l = wide.muscle_lengths(&JointVector::from_slice(&[0.0, 2.8])).unwrap();
        let e =
            estimate_joint_angles(&model, &l, &EstimatorConfig::new(JointVector::zeros(2))).unwrap();
        model.check_joint_vector(&e.theta).unwrap();
        assert!(!e.converged);
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = catalog::pulley_pair();
        let cfg = EstimatorConfig::new(JointVector::zeros(1));
        assert!(estimate_joint_angles(&model, &MuscleVector::from_slice(&[0.3]), &cfg).is_err());
        assert!(
            estimate_joint_angles(&model, &MuscleVector::from_slice(&[0.3, -1.0]), &cfg).is_err()
        );
        let mut bad = cfg.clone();
        bad.max_iterations = 0;
        let l = model.rest_lengths();
        assert!(estimate_joint_angles(&model, &l, &bad).is_err());
        let mut bad = cfg;
        bad.theta_init = JointVector::from_slice(&[5.0]);
        assert!(matches!(
            estimate_joint_angles(&model, &l, &bad),
            Err(Error::JointRange { .. })
        ));
    }
}
