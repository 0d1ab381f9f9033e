//! Trial-to-trial reference corrections.
//!
//! Muscles are labeled per cycle from the planned reference: shortening
//! muscles are agonists, lengthening ones antagonists, and those within the
//! deadband neutral. The antagonist modifier lengthens antagonist references
//! by `C·max(T − T_th, 0)` and smooths the result with a centered moving
//! average. The agonist modifier turns a racket-to-target error into joint
//! corrections `θ_diff = J⁺·(P_shuttle − P_racket)` on the masked joints and
//! maps them to agonist length corrections `Δl′ = G(θ̂)·θ_diff`.
//!
//! Positive corrections lengthen the reference (slacken the muscle).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Point3, Vector3};

use crate::error::{Error, Result};
use crate::model::{pseudo_inverse, JointVector, MuscleVector, RobotModel};
use crate::plant::TrialLog;
use crate::trajectory::MuscleTrajectory;

/// Default classification deadband, meters per cycle.
pub const DEFAULT_DEADBAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Agonist,
    Antagonist,
    Neutral,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Agonist => "agonist",
            Role::Antagonist => "antagonist",
            Role::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agonist" => Ok(Role::Agonist),
            "antagonist" => Ok(Role::Antagonist),
            "neutral" => Ok(Role::Neutral),
            other => Err(Error::validation(format!("unknown muscle role `{other}`"))),
        }
    }
}

/// Role of every muscle at every cycle, indexed `[cycle][muscle]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleTable {
    pub roles: Vec<Vec<Role>>,
}

impl RoleTable {
    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn muscle_count(&self) -> usize {
        self.roles.first().map_or(0, Vec::len)
    }

    pub fn get(&self, cycle: usize, muscle: usize) -> Role {
        self.roles[cycle][muscle]
    }

    pub fn at(&self, cycle: usize) -> &[Role] {
        &self.roles[cycle]
    }
}

/// Label muscles by the sign of the reference length rate: central
/// differences inside, one-sided at the ends.
pub fn classify_roles(reference: &MuscleTrajectory, deadband: f64) -> Result<RoleTable> {
    let n = reference.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "role classification needs at least 2 samples, got {n}"
        )));
    }
    if !(deadband >= 0.0 && deadband.is_finite()) {
        return Err(Error::validation(format!("deadband {deadband} must be nonnegative")));
    }
    let s = &reference.samples;
    let m = reference.muscle_count();
    let roles = (0..n)
        .map(|k| {
            (0..m)
                .map(|i| {
                    let rate = if k == 0 {
                        s[1][i] - s[0][i]
                    } else if k == n - 1 {
                        s[n - 1][i] - s[n - 2][i]
                    } else {
                        0.5 * (s[k + 1][i] - s[k - 1][i])
                    };
                    if rate < -deadband {
                        Role::Agonist
                    } else if rate > deadband {
                        Role::Antagonist
                    } else {
                        Role::Neutral
                    }
                })
                .collect()
        })
        .collect();
    Ok(RoleTable { roles })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Antagonist,
    Agonist,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Antagonist => "antagonist",
            Provenance::Agonist => "agonist",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "antagonist" => Ok(Provenance::Antagonist),
            "agonist" => Ok(Provenance::Agonist),
            other => Err(Error::validation(format!("unknown provenance `{other}`"))),
        }
    }
}

/// Per-cycle muscle-length corrections, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionProfile {
    pub provenance: Provenance,
    pub dt: f64,
    pub deltas: Vec<MuscleVector>,
}

impl CorrectionProfile {
    pub fn zeros(provenance: Provenance, dt: f64, cycles: usize, muscles: usize) -> Self {
        Self {
            provenance,
            dt,
            deltas: vec![MuscleVector::zeros(muscles); cycles],
        }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Element-wise sum with another profile on the same time base.
    pub fn accumulate(&mut self, other: &CorrectionProfile) -> Result<()> {
        if other.len() != self.len() || (other.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::validation("cannot add profiles on different time bases"));
        }
        for (a, b) in self.deltas.iter_mut().zip(&other.deltas) {
            a.0 += &b.0;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.deltas
            .iter()
            .flat_map(|d| d.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntagonistParams {
    /// Correction gain `C`, meters per kgf.
    pub gain: f64,
    /// Tension threshold, kgf.
    pub threshold: f64,
    /// Moving-average window in cycles (odd).
    pub smoothing_window: usize,
}

impl Default for AntagonistParams {
    fn default() -> Self {
        Self {
            gain: 0.001,
            threshold: 1.0,
            smoothing_window: 41,
        }
    }
}

impl AntagonistParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(Error::validation(format!("gain {} must be nonnegative", self.gain)));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::validation(format!(
                "threshold {} must be nonnegative",
                self.threshold
            )));
        }
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(Error::validation(format!(
                "smoothing window {} must be odd and at least 1",
                self.smoothing_window
            )));
        }
        Ok(())
    }
}

/// Unsmoothed antagonist correction for one tension sample.
pub fn antagonist_law(params: &AntagonistParams, tension: f64) -> f64 {
    params.gain * (tension - params.threshold).max(0.0)
}

/// Centered moving average; near the ends the window is truncated to the
/// samples that exist.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(n);
            // direct sum keeps constant inputs exact
            if hi - lo <= 64 {
                values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            } else {
                (prefix[hi] - prefix[lo]) / (hi - lo) as f64
            }
        })
        .collect()
}

/// Antagonist modifier on a logged trial. Raw corrections are computed on
/// antagonist-labeled cycles only and smoothed per muscle. Smoothing can
/// spill into neighboring agonist cycles; those entries are cleared so the
/// two modifiers never act on the same muscle at the same cycle.
pub fn antagonist_correction(
    log: &TrialLog,
    roles: &RoleTable,
    params: &AntagonistParams,
) -> Result<CorrectionProfile> {
    params.validate()?;
    if log.len() != roles.len() {
        return Err(Error::validation(format!(
            "log has {} cycles, roles cover {}",
            log.len(),
            roles.len()
        )));
    }
    let m = log.muscle_count();
    if roles.muscle_count() != m {
        return Err(Error::validation(format!(
            "log has {m} muscles, roles cover {}",
            roles.muscle_count()
        )));
    }
    let mut profile = CorrectionProfile::zeros(Provenance::Antagonist, log.dt, log.len(), m);
    for i in 0..m {
        let raw: Vec<f64> = log
            .cycles
            .iter()
            .enumerate()
            .map(|(k, c)| match roles.get(k, i) {
                Role::Antagonist => antagonist_law(params, c.tension[i]),
                _ => 0.0,
            })
            .collect();
        let smooth = moving_average(&raw, params.smoothing_window);
        for (k, v) in smooth.into_iter().enumerate() {
            if roles.get(k, i) != Role::Agonist {
                profile.deltas[k][i] = v;
            }
        }
    }
    Ok(profile)
}

/// Racket and target positions from one camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetObservation {
    pub time: f64,
    pub shuttle: Point3<f64>,
    pub racket: Point3<f64>,
}

impl TargetObservation {
    pub fn position_difference(&self) -> Vector3<f64> {
        self.shuttle - self.racket
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.shuttle.iter().all(|v| v.is_finite())
            && self.racket.iter().all(|v| v.is_finite())
    }
}

/// Which joints the agonist modifier may correct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointMask(pub Vec<bool>);

impl JointMask {
    pub fn all(joints: usize) -> Self {
        Self(vec![true; joints])
    }

    /// Mask selecting the named joints.
    pub fn from_names(model: &RobotModel, names: &[String]) -> Result<Self> {
        let mut mask = vec![false; model.joint_count()];
        for name in names {
            let j = model
                .joint_index(name)
                .ok_or_else(|| Error::validation(format!("unknown joint `{name}` in mask")))?;
            mask[j] = true;
        }
        Ok(Self(mask))
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|m| **m).count()
    }
}

/// Joint correction `θ_diff = J⁺·P_diff` restricted to the masked joints.
pub fn joint_correction(
    obs: &TargetObservation,
    model: &RobotModel,
    theta_hat: &JointVector,
    mask: &JointMask,
) -> Result<JointVector> {
    let n = model.joint_count();
    if mask.0.len() != n {
        return Err(Error::validation(format!(
            "joint mask has {} entries for {n} joints",
            mask.0.len()
        )));
    }
    if mask.count() == 0 {
        return Err(Error::validation("joint mask selects no joint"));
    }
    if !obs.is_finite() {
        return Err(Error::validation("observation has non-finite coordinates"));
    }
    let j = model.task_jacobian(theta_hat)?;
    let cols: Vec<usize> = (0..n).filter(|c| mask.0[*c]).collect();
    let jm = DMatrix::from_fn(3, cols.len(), |r, c| j[(r, cols[c])]);
    if jm.iter().all(|v| *v == 0.0) {
        return Err(Error::SingularCorrection(
            "task Jacobian is zero on every masked joint".into(),
        ));
    }
    let dq = pseudo_inverse(&jm)? * obs.position_difference();
    let mut theta_diff = JointVector::zeros(n);
    for (c, &col) in cols.iter().enumerate() {
        theta_diff[col] = dq[c];
    }
    Ok(theta_diff)
}

/// `G(θ̂)·θ_diff` with entries outside agonist muscles cleared.
pub fn agonist_lengths(
    model: &RobotModel,
    theta_hat: &JointVector,
    theta_diff: &JointVector,
    roles: &[Role],
) -> Result<MuscleVector> {
    let g = model.joint_muscle_jacobian(theta_hat)?;
    let mut dl = MuscleVector(g * &theta_diff.0);
    mask_agonists(&mut dl, roles);
    Ok(dl)
}

fn mask_agonists(dl: &mut MuscleVector, roles: &[Role]) {
    for (v, r) in dl.iter_mut().zip(roles) {
        if *r != Role::Agonist {
            *v = 0.0;
        }
    }
}

/// Agonist modifier for a single observation at `cycle`.
pub fn agonist_correction(
    obs: &TargetObservation,
    model: &RobotModel,
    theta_hat: &JointVector,
    roles: &RoleTable,
    mask: &JointMask,
    cycle: usize,
) -> Result<MuscleVector> {
    if cycle >= roles.len() {
        return Err(Error::validation(format!(
            "cycle {cycle} is outside the {}-cycle role table",
            roles.len()
        )));
    }
    let theta_diff = joint_correction(obs, model, theta_hat, mask)?;
    agonist_lengths(model, theta_hat, &theta_diff, roles.at(cycle))
}

/// Time span over which one joint correction is spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgonistWindow {
    /// From the middle of the trial to its end.
    SecondHalf,
    /// `half_width` seconds either side of the closest approach.
    Centered { half_width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgonistSettings {
    pub mask: JointMask,
    pub window: AgonistWindow,
}

/// Racket position nearest to the target along the racket path observed
/// between consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestApproach {
    pub time: f64,
    pub distance: f64,
    pub observation: TargetObservation,
}

/// Project the target onto the polyline of observed racket positions.
pub fn closest_approach(observations: &[TargetObservation]) -> Result<ClosestApproach> {
    let first = observations.first().ok_or_else(|| {
        Error::DegenerateGeometry("no valid racket observation in the trial".into())
    })?;
    let mut best = ClosestApproach {
        time: first.time,
        distance: first.position_difference().norm(),
        observation: *first,
    };
    for w in observations.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let shuttle = Point3::from(0.5 * (a.shuttle.coords + b.shuttle.coords));
        let seg = b.racket - a.racket;
        let len2 = seg.norm_squared();
        let s = if len2 > 0.0 {
            ((shuttle - a.racket).dot(&seg) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let racket = a.racket + s * seg;
        let d = (shuttle - racket).norm();
        if d < best.distance {
            let time = a.time + s * (b.time - a.time);
            best = ClosestApproach {
                time,
                distance: d,
                observation: TargetObservation {
                    time,
                    shuttle,
                    racket,
                },
            };
        }
    }
    Ok(best)
}

/// Agonist profile for a whole trial.
///
/// The joint correction is computed once at the closest approach, from the
/// estimate at the nearest cycle. Over the window, length corrections are
/// evaluated at every camera frame with that frame's estimate, interpolated
/// linearly onto control cycles and restricted to the muscles that are
/// agonists at each cycle. `estimate` returns θ̂ for a control cycle.
#[allow(clippy::too_many_arguments)]
pub fn agonist_profile(
    model: &RobotModel,
    observations: &[TargetObservation],
    frame_times: &[f64],
    roles: &RoleTable,
    settings: &AgonistSettings,
    dt: f64,
    mut estimate: impl FnMut(usize) -> Result<JointVector>,
) -> Result<(CorrectionProfile, ClosestApproach, JointVector)> {
    let cycles = roles.len();
    let m = model.muscle_count();
    if cycles == 0 {
        return Err(Error::validation("agonist profile needs a nonempty trial"));
    }
    let cycle_of = |t: f64| ((t / dt).round().max(0.0) as usize).min(cycles - 1);
    let approach = closest_approach(observations)?;
    let theta_hat = estimate(cycle_of(approach.time))?;
    let theta_diff = joint_correction(&approach.observation, model, &theta_hat, &settings.mask)?;

    let end = (cycles - 1) as f64 * dt;
    let (t0, t1) = match settings.window {
        AgonistWindow::SecondHalf => (0.5 * end, end),
        AgonistWindow::Centered { half_width } => {
            if !(half_width >= 0.0) {
                return Err(Error::validation("agonist window half width must be nonnegative"));
            }
            ((approach.time - half_width).max(0.0), (approach.time + half_width).min(end))
        }
    };
    let (c0, c1) = (cycle_of(t0), cycle_of(t1));

    // corrections at camera frames inside the window
    let mut knots: Vec<(f64, MuscleVector)> = Vec::new();
    let g_times: Vec<f64> = frame_times.iter().copied().filter(|t| *t >= t0 && *t <= t1).collect();
    for t in g_times {
        let th = estimate(cycle_of(t))?;
        let g = model.joint_muscle_jacobian(&th)?;
        knots.push((t, MuscleVector(g * &theta_diff.0)));
    }
    if knots.is_empty() {
        let th = estimate(cycle_of(approach.time))?;
        let g = model.joint_muscle_jacobian(&th)?;
        knots.push((approach.time, MuscleVector(g * &theta_diff.0)));
    }

    let mut profile = CorrectionProfile::zeros(Provenance::Agonist, dt, cycles, m);
    let mut idx = 0;
    for c in c0..=c1 {
        let t = c as f64 * dt;
        while idx + 1 < knots.len() && knots[idx + 1].0 <= t {
            idx += 1;
        }
        let mut dl = if t <= knots[0].0 {
            knots[0].1.clone()
        } else if idx + 1 >= knots.len() {
            knots[idx].1.clone()
        } else {
            let (ta, a) = &knots[idx];
            let (tb, b) = &knots[idx + 1];
            let s = (t - ta) / (tb - ta);
            MuscleVector(a.0.clone() * (1.0 - s) + b.0.clone() * s)
        };
        mask_agonists(&mut dl, roles.at(c));
        profile.deltas[c] = dl;
    }
    Ok((profile, approach, theta_diff))
}

/// Reference plus the sum of all profiles. The input is not modified.
pub fn apply_corrections(
    reference: &MuscleTrajectory,
    profiles: &[&CorrectionProfile],
) -> Result<MuscleTrajectory> {
    let mut out = reference.clone();
    for p in profiles {
        if p.len() != reference.len() || (p.dt - reference.dt).abs() > 1e-12 * reference.dt {
            return Err(Error::validation(format!(
                "{} profile has {} cycles at {} s, reference has {} at {} s",
                p.provenance,
                p.len(),
                p.dt,
                reference.len(),
                reference.dt
            )));
        }
        for (s, d) in out.samples.iter_mut().zip(&p.deltas) {
            if d.len() != s.len() {
                return Err(Error::validation("profile and reference muscle counts differ"));
            }
            s.0 += &d.0;
        }
    }
    Ok(out)
}
