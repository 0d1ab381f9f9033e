//! Scenario runner: executes an iteration plan of trials and corrections,
//! computes per-trial summaries and writes everything as CSV.

pub mod motion;
pub mod output;
pub mod scenario;

use std::collections::BTreeMap;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::estimator::estimate_joint_angles;
use crate::model::JointVector;
use crate::perception::{observe, ObservationRecord};
use crate::plant::{Plant, TrialLog};
use crate::refine::{
    agonist_profile, antagonist_correction, apply_corrections, classify_roles, ClosestApproach,
    CorrectionProfile, Provenance, Role, RoleTable,
};

pub use scenario::{Scenario, ScenarioFile, Step};

/// Metrics of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial: usize,
    pub peak_tension: Vec<f64>,
    pub mean_tension: Vec<f64>,
    /// Largest tension over (cycle, muscle) pairs labeled antagonist, kgf.
    pub peak_antagonist_tension: f64,
    /// `Σ T·dt` over all muscles and cycles, kgf·s.
    pub integrated_tension: f64,
    pub integrated_agonist_tension: f64,
    pub integrated_antagonist_tension: f64,
    /// Closest distance from the target to the end-effector path, when a
    /// target is set.
    pub min_distance: Option<f64>,
    pub min_distance_time: Option<f64>,
    pub hit: Option<bool>,
}

/// Distance from `target` to the polyline through `path`, with the
/// interpolated time of the closest point.
pub fn closest_point_on_path(path: &[Point3<f64>], dt: f64, target: &Point3<f64>) -> (f64, f64) {
    let mut best = ((path[0] - target).norm(), 0.0);
    for (k, w) in path.windows(2).enumerate() {
        let seg = w[1] - w[0];
        let len2 = seg.norm_squared();
        let s = if len2 > 0.0 {
            ((target - w[0]).dot(&seg) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let d = (w[0] + s * seg - target).norm();
        if d < best.0 {
            best = (d, (k as f64 + s) * dt);
        }
    }
    best
}

/// Summary of `log` with roles from the planned reference.
pub fn summarize(
    trial: usize,
    log: &TrialLog,
    roles: &RoleTable,
    shuttle: Option<&Point3<f64>>,
    hit_radius: f64,
) -> Result<TrialSummary> {
    if log.is_empty() {
        return Err(Error::validation("cannot summarize an empty trial log"));
    }
    if roles.len() != log.len() {
        return Err(Error::validation(format!(
            "log has {} cycles, roles cover {}",
            log.len(),
            roles.len()
        )));
    }
    let m = log.muscle_count();
    let mut peak = vec![f64::NEG_INFINITY; m];
    let mut sum = vec![0.0; m];
    let mut peak_antagonist = 0.0f64;
    let (mut ag, mut an) = (0.0, 0.0);
    for (k, c) in log.cycles.iter().enumerate() {
        for i in 0..m {
            let t = c.tension[i];
            peak[i] = peak[i].max(t);
            sum[i] += t;
            match roles.get(k, i) {
                Role::Antagonist => {
                    peak_antagonist = peak_antagonist.max(t);
                    an += t;
                }
                Role::Agonist => ag += t,
                Role::Neutral => {}
            }
        }
    }
    let cycles = log.len() as f64;
    let total: f64 = sum.iter().sum();
    let (min_distance, min_distance_time, hit) = match shuttle {
        Some(s) => {
            let (d, t) = closest_point_on_path(&log.end_effector_path(), log.dt, s);
            (Some(d), Some(t), Some(d < hit_radius))
        }
        None => (None, None, None),
    };
    Ok(TrialSummary {
        trial,
        peak_tension: peak,
        mean_tension: sum.iter().map(|s| s / cycles).collect(),
        peak_antagonist_tension: peak_antagonist,
        integrated_tension: total * log.dt,
        integrated_agonist_tension: ag * log.dt,
        integrated_antagonist_tension: an * log.dt,
        min_distance,
        min_distance_time,
        hit,
    })
}

/// A correction computed by one plan step.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionRecord {
    /// 1-based count among correction steps.
    pub index: usize,
    pub profile: CorrectionProfile,
    /// Camera frames used by an agonist correction.
    pub observations: Vec<ObservationRecord>,
    pub approach: Option<ClosestApproach>,
    pub joint_correction: Option<JointVector>,
}

/// Everything produced by [`run_refinement`].
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub roles: Option<RoleTable>,
    pub trials: Vec<(TrialLog, TrialSummary)>,
    pub corrections: Vec<CorrectionRecord>,
}

/// Camera frame times inside a trial of `cycles` control cycles.
pub fn frame_times(fps: f64, dt: f64, cycles: usize) -> Vec<f64> {
    let end = (cycles.saturating_sub(1)) as f64 * dt;
    (0..)
        .map(|f| f as f64 / fps)
        .take_while(|t| *t <= end + 1e-12)
        .collect()
}

/// End-effector position at time `t`, interpolated between cycles.
fn racket_at(log: &TrialLog, t: f64) -> Point3<f64> {
    let x = t / log.dt;
    let k = (x.floor() as usize).min(log.len() - 1);
    if k + 1 >= log.len() {
        return log.cycles[k].end_effector;
    }
    let s = x - k as f64;
    let (a, b) = (log.cycles[k].end_effector, log.cycles[k + 1].end_effector);
    a + s * (b - a)
}

fn observe_trial(
    scenario: &Scenario,
    log: &TrialLog,
    correction_index: usize,
) -> Result<Vec<ObservationRecord>> {
    let rig = scenario
        .rig
        .as_ref()
        .ok_or_else(|| Error::validation("apply-agonist needs a camera rig"))?;
    let shuttle = scenario
        .shuttle
        .ok_or_else(|| Error::validation("apply-agonist needs a target"))?;
    frame_times(scenario.fps, log.dt, log.len())
        .into_iter()
        .enumerate()
        .map(|(f, t)| {
            let index = ((correction_index as u64) << 32) | f as u64;
            observe(rig, &racket_at(log, t), &shuttle, &scenario.noise, t, index)
        })
        .collect()
}

fn estimate_at(scenario: &Scenario, log: &TrialLog, cycle: usize) -> Result<(JointVector, f64)> {
    let init = scenario.joint_reference.samples[cycle.min(scenario.joint_reference.len() - 1)].clone();
    let e = estimate_joint_angles(
        &scenario.model,
        &log.cycles[cycle].measured,
        &scenario.estimator_config(init),
    )?;
    Ok((e.theta, e.residual))
}

/// Execute the scenario plan. Returns what was completed together with the
/// error that stopped it, if any.
pub fn run_refinement(scenario: &Scenario) -> (Outcome, Option<Error>) {
    let mut out = Outcome::default();
    let err = run_into(scenario, &mut out).err();
    (out, err)
}

fn run_into(scenario: &Scenario, out: &mut Outcome) -> Result<()> {
    let base = &scenario.reference;
    let roles = classify_roles(base, scenario.deadband)?;
    out.roles = Some(roles.clone());
    let mut active: BTreeMap<Provenance, CorrectionProfile> = BTreeMap::new();
    let mut corrections = 0usize;

    for step in &scenario.plan {
        match step {
            Step::Run => {
                let profiles: Vec<&CorrectionProfile> = active.values().collect();
                let reference = apply_corrections(base, &profiles)?;
                let mut config = scenario.plant.clone();
                config.noise_seed = scenario::derive_seed(scenario.seed, 100 + out.trials.len() as u64);
                let mut plant = Plant::new(config, scenario.motor.clone())?;
                let (mut log, err) = plant.execute(&reference);
                let trial = out.trials.len() + 1;
                if let Some(e) = err {
                    if !log.is_empty() {
                        let partial_roles = RoleTable {
                            roles: roles.roles[..log.len()].to_vec(),
                        };
                        let s = summarize(trial, &log, &partial_roles, scenario.shuttle.as_ref(), scenario.hit_radius)?;
                        out.trials.push((log, s));
                    }
                    return Err(e);
                }
                if scenario.estimate_joints {
                    let est = (0..log.len())
                        .map(|k| estimate_at(scenario, &log, k))
                        .collect::<Result<Vec<_>>>()?;
                    log.estimates = Some(est);
                }
                let s = summarize(trial, &log, &roles, scenario.shuttle.as_ref(), scenario.hit_radius)?;
                out.trials.push((log, s));
            }
            Step::ApplyAntagonist | Step::ApplyAgonist => {
                let (log, _) = out.trials.last().ok_or_else(|| {
                    Error::validation(format!("`{}` before any `run` step", step.as_str()))
                })?;
                corrections += 1;
                let record = if *step == Step::ApplyAntagonist {
                    CorrectionRecord {
                        index: corrections,
                        profile: antagonist_correction(log, &roles, &scenario.antagonist)?,
                        observations: Vec::new(),
                        approach: None,
                        joint_correction: None,
                    }
                } else {
                    let observations = observe_trial(scenario, log, corrections)?;
                    let valid: Vec<_> = observations.iter().filter_map(|o| o.observation().copied()).collect();
                    let times: Vec<f64> = observations.iter().map(|o| o.time()).collect();
                    let (profile, approach, theta_diff) = agonist_profile(
                        &scenario.model,
                        &valid,
                        &times,
                        &roles,
                        &scenario.agonist,
                        log.dt,
                        |k| estimate_at(scenario, log, k).map(|e| e.0),
                    )?;
                    CorrectionRecord {
                        index: corrections,
                        profile,
                        observations,
                        approach: Some(approach),
                        joint_correction: Some(theta_diff),
                    }
                };
                let provenance = record.profile.provenance;
                match active.get_mut(&provenance) {
                    Some(existing) if scenario.accumulate => existing.accumulate(&record.profile)?,
                    _ => {
                        active.insert(provenance, record.profile.clone());
                    }
                }
                out.corrections.push(record);
            }
        }
    }
    Ok(())
}
