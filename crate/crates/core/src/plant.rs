//! Simulated robot: a perturbed copy of the nominal model driven by one-sided
//! spring muscle controllers, with first-order joint dynamics.
//!
//! Each muscle pulls with `T = max(0, k·(L − L_ref)) + T_offset`, where `L` is
//! the length measured on the perturbed plant. Joint torque is `τ = −Gₚᵀ·T`
//! and the joints obey `B·θ̇ = τ + τ_g`. The step is linearly implicit in the
//! spring stiffness:
//!
//! ```text
//! (B + dt·Gₚᵀ·diag(k·active)·Gₚ)·θ̇ = τ(θ) + τ_g,   θ ← clamp(θ + dt·θ̇)
//! ```
//!
//! where `active` marks muscles currently stretched past their reference.
//! A joint that hits a limit has its velocity zeroed.

use nalgebra::{DMatrix, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{JointVector, MuscleVector, RestLengths, RobotModel};
use crate::trajectory::MuscleTrajectory;

/// Default control period, seconds.
pub const DEFAULT_DT: f64 = 0.005;

/// Per-muscle spring constant `k` (kgf/m) and offset tension (kgf).
#[derive(Debug, Clone, PartialEq)]
pub struct MotorControllerParams {
    pub stiffness: MuscleVector,
    pub offset: MuscleVector,
}

impl MotorControllerParams {
    pub fn new(stiffness: MuscleVector, offset: MuscleVector) -> Result<Self> {
        let p = Self { stiffness, offset };
        p.validate()?;
        Ok(p)
    }

    /// Same `k` and offset on all `muscles`.
    pub fn uniform(muscles: usize, stiffness: f64, offset: f64) -> Result<Self> {
        Self::new(
            MuscleVector::from_slice(&vec![stiffness; muscles]),
            MuscleVector::from_slice(&vec![offset; muscles]),
        )
    }

    pub fn muscle_count(&self) -> usize {
        self.stiffness.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stiffness.len() != self.offset.len() {
            return Err(Error::validation(format!(
                "{} stiffness values but {} offsets",
                self.stiffness.len(),
                self.offset.len()
            )));
        }
        if let Some(k) = self.stiffness.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::validation(format!("muscle stiffness {k} must be positive")));
        }
        if let Some(t) = self.offset.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::validation(format!("offset tension {t} must be nonnegative")));
        }
        Ok(())
    }
}

/// Motor controller law: `max(0, k·(L − L_ref)) + T_offset` per muscle.
pub fn target_tension(
    params: &MotorControllerParams,
    lengths: &MuscleVector,
    reference: &MuscleVector,
) -> Result<MuscleVector> {
    let m = params.muscle_count();
    if lengths.len() != m || reference.len() != m || params.offset.len() != m {
        return Err(Error::validation(format!(
            "target_tension: {m} controllers, {} lengths, {} references",
            lengths.len(),
            reference.len()
        )));
    }
    let mut t = MuscleVector::zeros(m);
    for i in 0..m {
        t[i] = (params.stiffness[i] * (lengths[i] - reference[i])).max(0.0) + params.offset[i];
    }
    Ok(t)
}

/// Seeded model error: every via-point coordinate is shifted by a uniform
/// draw in `[−via_point_offset, via_point_offset]` and every muscle gets a
/// constant length error of a uniform fraction in
/// `[−rest_length_error, rest_length_error]` of its nominal rest length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub via_point_offset: f64,
    pub rest_length_error: f64,
    pub seed: u64,
}

impl Perturbation {
    pub fn none() -> Self {
        Self {
            via_point_offset: 0.0,
            rest_length_error: 0.0,
            seed: 0,
        }
    }

    /// ±5 mm via-point offsets and ±1 % rest-length error.
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            via_point_offset: 0.005,
            rest_length_error: 0.01,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantConfig {
    pub nominal_model: RobotModel,
    pub perturbation: Perturbation,
    /// Viscous coefficient per joint, kgf·m·s/rad.
    pub joint_damping: JointVector,
    pub dt: f64,
    /// Standard deviation of additive Gaussian tension-sensor noise, kgf.
    pub tension_noise: f64,
    /// Seed of the tension-noise stream, independent of the model error.
    pub noise_seed: u64,
    /// Constant joint torque, kgf·m. Off when `None`.
    pub gravity_torque: Option<JointVector>,
    /// Starting pose. The zero pose when `None`.
    pub initial_theta: Option<JointVector>,
}

impl PlantConfig {
    /// Unperturbed plant with uniform damping.
    pub fn new(nominal_model: RobotModel, damping: f64, dt: f64) -> Self {
        let n = nominal_model.joint_count();
        Self {
            nominal_model,
            perturbation: Perturbation::none(),
            joint_damping: JointVector::from_slice(&vec![damping; n]),
            dt,
            tension_noise: 0.0,
            noise_seed: 0,
            gravity_torque: None,
            initial_theta: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nominal_model.joint_count();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation(format!("dt {} must be positive", self.dt)));
        }
        if self.joint_damping.len() != n {
            return Err(Error::validation(format!(
                "{} damping values for {n} joints",
                self.joint_damping.len()
            )));
        }
        if let Some(b) = self.joint_damping.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::validation(format!("joint damping {b} must be positive")));
        }
        let p = &self.perturbation;
        for (name, v) in [
            ("via_point_offset", p.via_point_offset),
            ("rest_length_error", p.rest_length_error),
            ("tension_noise", self.tension_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} {v} must be nonnegative")));
            }
        }
        if let Some(g) = &self.gravity_torque {
            if g.len() != n || !g.is_finite() {
                return Err(Error::validation("gravity torque must be finite, one per joint"));
            }
        }
        if let Some(theta) = &self.initial_theta {
            self.nominal_model.check_joint_vector(theta)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub time: f64,
    pub theta: JointVector,
    pub theta_dot: JointVector,
    pub measured_lengths: MuscleVector,
    /// Tension applied by the controllers, kgf.
    pub tensions: MuscleVector,
}

/// One control cycle of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub time: f64,
    pub theta: JointVector,
    pub theta_dot: JointVector,
    pub end_effector: Point3<f64>,
    pub reference: MuscleVector,
    pub measured: MuscleVector,
    /// Sensed tension (applied tension plus sensor noise, floored at 0).
    pub tension: MuscleVector,
}

/// Per-muscle view of one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuscleFrame {
    pub time: f64,
    pub reference_length: f64,
    pub measured_length: f64,
    pub tension: f64,
}

/// Everything recorded while executing one reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub dt: f64,
    pub joint_names: Vec<String>,
    pub muscle_names: Vec<String>,
    pub cycles: Vec<CycleRecord>,
    /// Estimated joint angles per cycle with the final residual, when computed.
    pub estimates: Option<Vec<(JointVector, f64)>>,
}

impl TrialLog {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn muscle_count(&self) -> usize {
        self.muscle_names.len()
    }

    pub fn frame(&self, cycle: usize, muscle: usize) -> MuscleFrame {
        let c = &self.cycles[cycle];
        MuscleFrame {
            time: c.time,
            reference_length: c.reference[muscle],
            measured_length: c.measured[muscle],
            tension: c.tension[muscle],
        }
    }

    pub fn tension_series(&self, muscle: usize) -> Vec<f64> {
        self.cycles.iter().map(|c| c.tension[muscle]).collect()
    }

    pub fn end_effector_path(&self) -> Vec<Point3<f64>> {
        self.cycles.iter().map(|c| c.end_effector).collect()
    }
}

/// A plant instance: perturbed geometry plus the controller and noise state.
#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
    params: MotorControllerParams,
    model: RobotModel,
    length_error: MuscleVector,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl Plant {
    pub fn new(config: PlantConfig, params: MotorControllerParams) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        let nominal = &config.nominal_model;
        if params.muscle_count() != nominal.muscle_count() {
            return Err(Error::validation(format!(
                "{} motor controllers for {} muscles",
                params.muscle_count(),
                nominal.muscle_count()
            )));
        }
        let p = config.perturbation;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut file = nominal.to_file();
        if p.via_point_offset > 0.0 {
            let a = p.via_point_offset;
            for m in &mut file.muscles {
                for v in &mut m.via_points {
                    v.x += rng.random_range(-a..=a);
                    v.y += rng.random_range(-a..=a);
                    v.z += rng.random_range(-a..=a);
                }
            }
        }
        let model = if p.via_point_offset > 0.0 {
            RobotModel::from_file(file, RestLengths::Recompute)?
        } else {
            nominal.clone()
        };
        let rest = nominal.rest_lengths();
        let mut length_error = MuscleVector::zeros(rest.len());
        if p.rest_length_error > 0.0 {
            let e = p.rest_length_error;
            for i in 0..rest.len() {
                length_error[i] = rng.random_range(-e..=e) * rest[i];
            }
        }
        let noise = if config.tension_noise > 0.0 {
            let r = ChaCha8Rng::seed_from_u64(config.noise_seed);
            let normal = Normal::new(0.0, config.tension_noise)
                .map_err(|e| Error::validation(e.to_string()))?;
            Some((r, normal))
        } else {
            None
        };
        Ok(Self {
            config,
            params,
            model,
            length_error,
            noise,
        })
    }

    /// The perturbed geometry the plant actually moves with.
    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn params(&self) -> &MotorControllerParams {
        &self.params
    }

    /// Constant per-muscle length error added to every measurement, meters.
    pub fn length_error(&self) -> &MuscleVector {
        &self.length_error
    }

    /// Muscle lengths the plant reports at true pose `theta`.
    pub fn measured_lengths(&self, theta: &JointVector) -> Result<MuscleVector> {
        let mut l = self.model.muscle_lengths(theta)?;
        l.0 += &self.length_error.0;
        Ok(l)
    }

    /// Resting state at the configured starting pose, tensions against `reference`
    /// (or against the measured lengths when absent).
    pub fn initial_state(&self, reference: Option<&MuscleVector>) -> Result<PlantState> {
        let n = self.model.joint_count();
        let theta = match &self.config.initial_theta {
            Some(t) => t.clone(),
            None => {
                let mut t = JointVector::zeros(n);
                self.model.clamp_to_limits(&mut t);
                t
            }
        };
        let measured = self.measured_lengths(&theta)?;
        let tensions = target_tension(&self.params, &measured, reference.unwrap_or(&measured))?;
        Ok(PlantState {
            time: 0.0,
            theta,
            theta_dot: JointVector::zeros(n),
            measured_lengths: measured,
            tensions,
        })
    }

    /// Advance one control cycle toward `reference`.
    pub fn step(&self, state: &PlantState, reference: &MuscleVector) -> Result<PlantState> {
        let m = self.model.muscle_count();
        if reference.len() != m {
            return Err(Error::validation(format!(
                "reference has {} entries for {m} muscles",
                reference.len()
            )));
        }
        if reference.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::validation("reference lengths must be finite and positive"));
        }
        if !state.theta.is_finite() || !state.theta_dot.is_finite() {
            return Err(Error::Numeric(format!("plant state at t = {} is not finite", state.time)));
        }
        let dt = self.config.dt;
        let lengths = self.measured_lengths(&state.theta)?;
        let tension = target_tension(&self.params, &lengths, reference)?;
        let g = self.model.joint_muscle_jacobian(&state.theta)?;

        let mut rhs = -(g.transpose() * &tension.0);
        if let Some(grav) = &self.config.gravity_torque {
            rhs += &grav.0;
        }
        let mut weighted = g.clone();
        for i in 0..m {
            let active = lengths[i] > reference[i];
            let w = if active { self.params.stiffness[i] } else { 0.0 };
            weighted.row_mut(i).scale_mut(w);
        }
        let mut a: DMatrix<f64> = dt * g.transpose() * weighted;
        for j in 0..a.nrows() {
            a[(j, j)] += self.config.joint_damping[j];
        }
        let theta_dot = a
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::Numeric("joint dynamics matrix is not positive definite".into()))?;

        let mut theta = state.theta.clone();
        let mut theta_dot = JointVector(theta_dot);
        for (j, joint) in self.model.joints().iter().enumerate() {
            let next = theta[j] + dt * theta_dot[j];
            if next <= joint.lower {
                theta[j] = joint.lower;
                theta_dot[j] = 0.0;
            } else if next >= joint.upper {
                theta[j] = joint.upper;
                theta_dot[j] = 0.0;
            } else {
                theta[j] = next;
            }
        }
        if !theta.is_finite() || !theta_dot.is_finite() {
            return Err(Error::Numeric(format!(
                "plant state diverged at t = {}",
                state.time + dt
            )));
        }
        let measured = self.measured_lengths(&theta)?;
        let tensions = target_tension(&self.params, &measured, reference)?;
        Ok(PlantState {
            time: state.time + dt,
            theta,
            theta_dot,
            measured_lengths: measured,
            tensions,
        })
    }

    fn sense(&mut self, applied: &MuscleVector) -> MuscleVector {
        match &mut self.noise {
            Some((rng, normal)) => {
                let mut t = applied.clone();
                for v in t.iter_mut() {
                    *v = (*v + normal.sample(rng)).max(0.0);
                }
                t
            }
            None => applied.clone(),
        }
    }

    fn record(&mut self, state: &PlantState, reference: &MuscleVector) -> Result<CycleRecord> {
        Ok(CycleRecord {
            time: state.time,
            theta: state.theta.clone(),
            theta_dot: state.theta_dot.clone(),
            end_effector: self.model.end_effector_position(&state.theta)?,
            reference: reference.clone(),
            measured: state.measured_lengths.clone(),
            tension: self.sense(&state.tensions),
        })
    }

    /// Execute `reference` from the resting state. Cycle `k` of the log is the
    /// state at `k·dt` under reference sample `k`; an empty reference yields a
    /// log holding only the initial state.
    ///
    /// On error the cycles completed so far are returned with the error.
    pub fn execute(&mut self, reference: &MuscleTrajectory) -> (TrialLog, Option<Error>) {
        let mut log = TrialLog {
            dt: self.config.dt,
            joint_names: self.model.joint_names(),
            muscle_names: self.model.muscle_names(),
            cycles: Vec::with_capacity(reference.len().max(1)),
            estimates: None,
        };
        if (reference.dt - self.config.dt).abs() > 1e-12 * self.config.dt {
            let e = Error::validation(format!(
                "reference sampled at {} s, plant runs at {} s",
                reference.dt, self.config.dt
            ));
            return (log, Some(e));
        }
        let result = (|| -> Result<()> {
            let mut state = self.initial_state(reference.samples.first())?;
            let first = reference
                .samples
                .first()
                .cloned()
                .unwrap_or_else(|| state.measured_lengths.clone());
            if first.len() != self.model.muscle_count() {
                return Err(Error::validation(format!(
                    "reference has {} muscles, plant has {}",
                    first.len(),
                    self.model.muscle_count()
                )));
            }
            let rec = self.record(&state, &first)?;
            log.cycles.push(rec);
            for k in 1..reference.len() {
                let target = &reference.samples[k];
                state = self.step(&state, target)?;
                state.time = k as f64 * self.config.dt;
                let rec = self.record(&state, target)?;
                log.cycles.push(rec);
            }
            Ok(())
        })();
        (log, result.err())
    }
}

/// Build a fresh plant from `config` and execute `reference` on it.
pub fn run_motion(
    config: &PlantConfig,
    params: &MotorControllerParams,
    reference: &MuscleTrajectory,
) -> Result<TrialLog> {
    let mut plant = Plant::new(config.clone(), params.clone())?;
    match plant.execute(reference) {
        (log, None) => Ok(log),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog;

    fn pulley_config() -> PlantConfig {
        PlantConfig::new(catalog::pulley_pair(), 0.05, DEFAULT_DT)
    }

    fn v(x: &[f64]) -> MuscleVector {
        MuscleVector::from_slice(x)
    }

    #[test]
    fn tension_law_examples() {
        let p = MotorControllerParams::uniform(1, 10.0, 0.5).unwrap();
        let t = |d: f64| target_tension(&p, &v(&[0.3 + d]), &v(&[0.3])).unwrap()[0];
        assert_eq!(t(0.0), 0.5);
        assert_eq!(t(-0.03), 0.5);
        assert!((t(0.02) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn tension_rejects_mismatched_lengths() {
        let p = MotorControllerParams::uniform(2, 10.0, 0.5).unwrap();
        assert!(matches!(
            target_tension(&p, &v(&[0.3]), &v(&[0.3, 0.3])),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn params_validation() {
        assert!(MotorControllerParams::uniform(2, 0.0, 0.5).is_err());
        assert!(MotorControllerParams::uniform(2, 10.0, -0.1).is_err());
        assert!(MotorControllerParams::new(v(&[1.0]), v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn zero_offset_at_current_lengths_is_equilibrium() {
        let params = MotorControllerParams::uniform(6, 1000.0, 0.0).unwrap();
        let mut config = PlantConfig::new(catalog::planar_arm(), 0.08, DEFAULT_DT);
        config.initial_theta = Some(JointVector::from_slice(&[0.3, 0.7]));
        let plant = Plant::new(config, params).unwrap();
        let s0 = plant.initial_state(None).unwrap();
        let s1 = plant.step(&s0, &s0.measured_lengths).unwrap();
        assert_eq!(s1.theta, s0.theta);
        assert_eq!(s1.theta_dot, JointVector::zeros(2));
        assert_eq!(s1.tensions, MuscleVector::zeros(6));
    }

    #[test]
    fn symmetric_pair_is_stationary() {
        let params = MotorControllerParams::uniform(2, 1000.0, 0.5).unwrap();
        let mut plant = Plant::new(pulley_config(), params).unwrap();
        let rest = plant.model().rest_lengths();
        let reference = MuscleTrajectory::constant(DEFAULT_DT, rest, 200).unwrap();
        let (log, err) = plant.execute(&reference);
        assert!(err.is_none());
        for c in &log.cycles {
            assert!(c.theta[0].abs() < 1e-15);
        }
    }

    /// Pose where `f(θ) = 0` on the pulley, by bisection over the limits.
    fn pulley_root(f: impl Fn(f64) -> f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Net joint torque on the nominal pulley at `theta` under `target`.
    fn pulley_torque(theta: f64, target: &MuscleVector) -> f64 {
        let model = catalog::pulley_pair();
        let th = JointVector::from_slice(&[theta]);
        let l = model.muscle_lengths(&th).unwrap();
        let g = model.joint_muscle_jacobian(&th).unwrap();
        let t = target_tension(&MotorControllerParams::uniform(2, 1000.0, 0.5).unwrap(), &l, target)
            .unwrap();
        -(g[(0, 0)] * t[0] + g[(1, 0)] * t[1])
    }

    #[test]
    fn shortened_flexor_settles_between_the_two_springs() {
        // both springs stay engaged and share the 0.01 m error; on an ideal
        // pulley r·θ* = 0.005
        let params = MotorControllerParams::uniform(2, 1000.0, 0.5).unwrap();
        let mut plant = Plant::new(pulley_config(), params).unwrap();
        let rest = plant.model().rest_lengths();
        let mut target = rest.clone();
        target[0] -= 0.01;
        let reference = MuscleTrajectory::constant(DEFAULT_DT, target.clone(), 2000).unwrap();
        let (log, err) = plant.execute(&reference);
        assert!(err.is_none());
        let expected = pulley_root(|th| -pulley_torque(th, &target));
        let last = log.cycles.last().unwrap().theta[0];
        assert!((last - expected).abs() < 1e-6, "θ = {last}, expected {expected}");
        assert!((catalog::PULLEY_RADIUS * last - 0.005).abs() < 1e-4);
        for w in log.cycles.windows(2) {
            assert!(w[1].theta[0] >= w[0].theta[0]);
        }
    }

    #[test]
    fn symmetric_command_reaches_full_error() {
        // flexor shorter and extensor longer by 0.01 m: the extensor goes slack
        // and the flexor absorbs its whole error, r·θ* = 0.01 on an ideal pulley
        let params = MotorControllerParams::uniform(2, 1000.0, 0.5).unwrap();
        let mut plant = Plant::new(pulley_config(), params).unwrap();
        let rest = plant.model().rest_lengths();
        let mut target = rest.clone();
        target[0] -= 0.01;
        target[1] += 0.01;
        let reference = MuscleTrajectory::constant(DEFAULT_DT, target.clone(), 2000).unwrap();
        let (log, _) = plant.execute(&reference);
        let expected = pulley_root(|th| -pulley_torque(th, &target));
        let last = log.cycles.last().unwrap().theta[0];
        assert!((last - expected).abs() < 1e-6, "θ = {last}, expected {expected}");
        assert!((catalog::PULLEY_RADIUS * last - 0.01).abs() < 5e-4);
    }

    #[test]
    fn settles_under_constant_reference() {
        let params = MotorControllerParams::uniform(6, 1000.0, 0.5).unwrap();
        let mut config = PlantConfig::new(catalog::planar_arm(), 0.08, DEFAULT_DT);
        config.perturbation = Perturbation::default_with_seed(3);
        let model = catalog::planar_arm();
        let target = model
            .muscle_lengths(&JointVector::from_slice(&[0.4, 1.0]))
            .unwrap();
        let cycles = (10.0 / DEFAULT_DT) as usize + 1;
        let reference = MuscleTrajectory::constant(DEFAULT_DT, target, cycles).unwrap();
        let log = run_motion(&config, &params, &reference).unwrap();
        assert!(log.cycles.last().unwrap().theta_dot.norm() < 1e-6);
    }

    #[test]
    fn empty_reference_gives_initial_state_only() {
        let params = MotorControllerParams::uniform(2, 1000.0, 0.5).unwrap();
        let reference = MuscleTrajectory::new(DEFAULT_DT, vec![]).unwrap();
        let log = run_motion(&pulley_config(), &params, &reference).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.cycles[0].time, 0.0);
        assert_eq!(log.cycles[0].tension, v(&[0.5, 0.5]));
    }

    #[test]
    fn rest_reference_without_error_holds_offset_tension() {
        // the pulley's offset tensions balance, so the pose never leaves zero
        let params = MotorControllerParams::uniform(2, 1000.0, 0.5).unwrap();
        let config = pulley_config();
        let rest = config.nominal_model.rest_lengths();
        let reference = MuscleTrajectory::constant(DEFAULT_DT, rest, 100).unwrap();
        let log = run_motion(&config, &params, &reference).unwrap();
        for c in &log.cycles {
            assert!(c.tension.iter().all(|t| *t == 0.5));
        }
        for w in log.cycles.windows(2) {
            assert!(w[1].time > w[0].time);
        }
    }

    #[test]
    fn perturbation_is_seeded() {
        let params = MotorControllerParams::uniform(6, 1000.0, 0.5).unwrap();
        let mut config = PlantConfig::new(catalog::planar_arm(), 0.08, DEFAULT_DT);
        config.perturbation = Perturbation::default_with_seed(11);
        let a = Plant::new(config.clone(), params.clone()).unwrap();
        let b = Plant::new(config.clone(), params.clone()).unwrap();
        assert_eq!(a.model().rest_lengths(), b.model().rest_lengths());
        assert_eq!(a.length_error(), b.length_error());
        config.perturbation.seed = 12;
        let c = Plant::new(config, params).unwrap();
        assert_ne!(a.model().rest_lengths(), c.model().rest_lengths());
        let nominal = catalog::planar_arm().rest_lengths();
        for i in 0..6 {
            assert!(a.length_error()[i].abs() <= 0.01 * nominal[i]);
        }
    }

    #[test]
    fn tension_noise_is_reproducible_and_nonnegative() {
        let params = MotorControllerParams::uniform(2, 1000.0, 0.5).unwrap();
        let mut config = pulley_config();
        config.tension_noise = 0.8;
        config.noise_seed = 5;
        let rest = config.nominal_model.rest_lengths();
        let reference = MuscleTrajectory::constant(DEFAULT_DT, rest, 300).unwrap();
        let a = run_motion(&config, &params, &reference).unwrap();
        let b = run_motion(&config, &params, &reference).unwrap();
        assert_eq!(a, b);
        let all: Vec<f64> = a.cycles.iter().flat_map(|c| c.tension.iter().copied()).collect();
        assert!(all.iter().all(|t| *t >= 0.0));
        assert!(all.iter().any(|t| *t != 0.5));
        // the dynamics use the applied tension, so the pose stays put
        assert!(a.cycles.iter().all(|c| c.theta[0].abs() < 1e-15));
    }

    #[test]
    fn joint_limit_clamps_and_zeroes_velocity() {
        let params = MotorControllerParams::uniform(2, 1000.0, 0.0).unwrap();
        let plant = Plant::new(pulley_config(), params).unwrap();
        let mut target = plant.model().rest_lengths();
        target[0] -= 0.05; // beyond the upper limit of 1 rad
        let mut state = plant.initial_state(Some(&target)).unwrap();
        for _ in 0..2000 {
            state = plant.step(&state, &target).unwrap();
        }
        assert_eq!(state.theta[0], 1.0);
        assert_eq!(state.theta_dot[0], 0.0);
    }

    #[test]
    fn invalid_reference_is_rejected() {
        let params = MotorControllerParams::uniform(2, 1000.0, 0.5).unwrap();
        let plant = Plant::new(pulley_config(), params).unwrap();
        let s = plant.initial_state(None).unwrap();
        assert!(plant.step(&s, &v(&[f64::NAN, 0.3])).is_err());
        assert!(plant.step(&s, &v(&[-0.1, 0.3])).is_err());
        let wrong_dt = MuscleTrajectory::constant(0.01, v(&[0.3, 0.3]), 3).unwrap();
        let mut plant = plant;
        assert!(plant.execute(&wrong_dt).1.is_some());
    }

    #[test]
    fn config_validation() {
        let mut c = pulley_config();
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let mut c = pulley_config();
        c.joint_damping[0] = 0.0;
        assert!(c.validate().is_err());
        let mut c = pulley_config();
        c.perturbation.via_point_offset = -1.0;
        assert!(c.validate().is_err());
        let mut c = pulley_config();
        c.initial_theta = Some(JointVector::from_slice(&[2.0]));
        assert!(matches!(c.validate(), Err(Error::JointRange { .. })));
    }
}
