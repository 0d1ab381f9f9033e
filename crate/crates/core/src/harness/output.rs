//! CSV output of a refinement run and recomputation of summaries from it.
//!
//! Files written to the output directory:
//!
//! | file | header |
//! |------|--------|
//! | `roles.csv` | `cycle,muscle,role` |
//! | `trial_<i>_muscles.csv` | `time,muscle,ref_length,meas_length,tension` |
//! | `trial_<i>_joints.csv` | `time,joint,theta,theta_dot,ee_x,ee_y,ee_z` (+ `theta_hat,estimate_residual`) |
//! | `correction_<n>_<provenance>.csv` | `cycle,muscle,delta_l,provenance` |
//! | `observations_<n>.csv` | `time,shuttle_x,…,racket_z,ray_gap_left,ray_gap_right,dropout` |
//! | `summary.csv` | one row per trial |
//! | `run.toml` | run metadata |
//!
//! Floats carry 9 significant digits.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{closest_point_on_path, Outcome, Scenario, TrialSummary};
use crate::error::{Error, Result};
use crate::perception::ObservationRecord;
use crate::refine::{Role, RoleTable};

/// Format like C's `%.9g`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Run metadata written next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub scenario: String,
    pub seed: u64,
    pub plan: Vec<String>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
    pub dt: f64,
    pub hit_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuttle: Option<[f64; 3]>,
    pub joints: Vec<String>,
    pub muscles: Vec<String>,
    pub trials: usize,
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<std::fs::File>, dir: &Path, name: &str) -> Result<()> {
    w.flush().map_err(|e| Error::io(dir.join(name), e))
}

/// Write every artifact of `outcome` into `dir` (created if missing).
pub fn write_outcome(
    dir: &Path,
    scenario: &Scenario,
    outcome: &Outcome,
    error: Option<&Error>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let muscles = scenario.model.muscle_names();
    let joints = scenario.model.joint_names();

    if let Some(roles) = &outcome.roles {
        let mut w = writer(dir, "roles.csv")?;
        w.write_record(["cycle", "muscle", "role"])?;
        for (k, row) in roles.roles.iter().enumerate() {
            for (i, r) in row.iter().enumerate() {
                w.write_record([k.to_string().as_str(), muscles[i].as_str(), r.as_str()])?;
            }
        }
        finish(w, dir, "roles.csv")?;
    }

    for (t, (log, _)) in outcome.trials.iter().enumerate() {
        let name = format!("trial_{}_muscles.csv", t + 1);
        let mut w = writer(dir, &name)?;
        w.write_record(["time", "muscle", "ref_length", "meas_length", "tension"])?;
        for c in &log.cycles {
            let time = fmt_float(c.time);
            for (i, m) in muscles.iter().enumerate() {
                w.write_record([
                    time.clone(),
                    m.clone(),
                    fmt_float(c.reference[i]),
                    fmt_float(c.measured[i]),
                    fmt_float(c.tension[i]),
                ])?;
            }
        }
        finish(w, dir, &name)?;

        let name = format!("trial_{}_joints.csv", t + 1);
        let mut w = writer(dir, &name)?;
        let mut header = vec!["time", "joint", "theta", "theta_dot", "ee_x", "ee_y", "ee_z"];
        if log.estimates.is_some() {
            header.extend(["theta_hat", "estimate_residual"]);
        }
        w.write_record(&header)?;
        for (k, c) in log.cycles.iter().enumerate() {
            for (j, name) in joints.iter().enumerate() {
                let mut row = vec![
                    fmt_float(c.time),
                    name.clone(),
                    fmt_float(c.theta[j]),
                    fmt_float(c.theta_dot[j]),
                    fmt_float(c.end_effector.x),
                    fmt_float(c.end_effector.y),
                    fmt_float(c.end_effector.z),
                ];
                if let Some(est) = &log.estimates {
                    row.push(fmt_float(est[k].0[j]));
                    row.push(fmt_float(est[k].1));
                }
                w.write_record(&row)?;
            }
        }
        finish(w, dir, &name)?;
    }

    for rec in &outcome.corrections {
        let p = &rec.profile;
        let name = format!("correction_{}_{}.csv", rec.index, p.provenance);
        let mut w = writer(dir, &name)?;
        w.write_record(["cycle", "muscle", "delta_l", "provenance"])?;
        for (k, d) in p.deltas.iter().enumerate() {
            for (i, m) in muscles.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    m.clone(),
                    fmt_float(d[i]),
                    p.provenance.to_string(),
                ])?;
            }
        }
        finish(w, dir, &name)?;

        if !rec.observations.is_empty() {
            let name = format!("observations_{}.csv", rec.index);
            let mut w = writer(dir, &name)?;
            w.write_record([
                "time", "shuttle_x", "shuttle_y", "shuttle_z", "racket_x", "racket_y", "racket_z",
                "ray_gap_left", "ray_gap_right", "dropout",
            ])?;
            for o in &rec.observations {
                let row: Vec<String> = match o {
                    ObservationRecord::Observed {
                        observation: ob,
                        ray_gap_left,
                        ray_gap_right,
                    } => {
                        let mut r = vec![fmt_float(ob.time)];
                        r.extend(ob.shuttle.iter().map(|v| fmt_float(*v)));
                        r.extend(ob.racket.iter().map(|v| fmt_float(*v)));
                        r.extend([fmt_float(*ray_gap_left), fmt_float(*ray_gap_right), "0".into()]);
                        r
                    }
                    ObservationRecord::Dropout { time } => {
                        let mut r = vec![fmt_float(*time)];
                        r.extend(std::iter::repeat_n(String::new(), 8));
                        r.push("1".into());
                        r
                    }
                };
                w.write_record(&row)?;
            }
            finish(w, dir, &name)?;
        }
    }

    let summaries: Vec<TrialSummary> = outcome.trials.iter().map(|(_, s)| s.clone()).collect();
    write_summary(dir, &muscles, &summaries)?;

    let meta = RunMetadata {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        plan: scenario.plan.iter().map(|s| s.as_str().to_string()).collect(),
        status: if error.is_some() { "error" } else { "ok" }.into(),
        error: error.map(|e| e.to_string()),
        exit_code: error.map_or(0, Error::exit_code),
        dt: scenario.plant.dt,
        hit_radius: scenario.hit_radius,
        shuttle: scenario.shuttle.map(|p| [p.x, p.y, p.z]),
        joints,
        muscles,
        trials: outcome.trials.len(),
    };
    let path = dir.join("run.toml");
    let text = toml::to_string(&meta).map_err(|e| Error::validation(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Write `summary.csv`.
pub fn write_summary(dir: &Path, muscles: &[String], summaries: &[TrialSummary]) -> Result<()> {
    let mut w = writer(dir, "summary.csv")?;
    let mut header: Vec<String> = [
        "trial",
        "peak_antagonist_tension",
        "integrated_tension",
        "integrated_agonist_tension",
        "integrated_antagonist_tension",
        "min_distance",
        "min_distance_time",
        "hit",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(muscles.iter().map(|m| format!("peak_{m}")));
    header.extend(muscles.iter().map(|m| format!("mean_{m}")));
    w.write_record(&header)?;
    for s in summaries {
        let mut row = vec![
            s.trial.to_string(),
            fmt_float(s.peak_antagonist_tension),
            fmt_float(s.integrated_tension),
            fmt_float(s.integrated_agonist_tension),
            fmt_float(s.integrated_antagonist_tension),
            opt(s.min_distance),
            opt(s.min_distance_time),
            s.hit.map(|h| h.to_string()).unwrap_or_default(),
        ];
        row.extend(s.peak_tension.iter().map(|v| fmt_float(*v)));
        row.extend(s.mean_tension.iter().map(|v| fmt_float(*v)));
        w.write_record(&row)?;
    }
    finish(w, dir, "summary.csv")
}

pub fn read_metadata(dir: &Path) -> Result<RunMetadata> {
    let path = dir.join("run.toml");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path,
        message: e.to_string(),
    })
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        message: format!("`{s}` is not a number"),
    })
}

fn column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: format!("missing column `{name}`"),
    })
}

/// Read `roles.csv` for the given muscle order.
pub fn read_roles(dir: &Path, muscles: &[String]) -> Result<RoleTable> {
    let path = dir.join("roles.csv");
    let mut r = reader(&path)?;
    let h = r.headers()?.clone();
    let (ci, mi, ri) = (column(&path, &h, "cycle")?, column(&path, &h, "muscle")?, column(&path, &h, "role")?);
    let index: BTreeMap<&str, usize> = muscles.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let mut roles: Vec<Vec<Role>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cycle: usize = rec[ci].parse().map_err(|_| Error::Parse {
            path: path.clone(),
            message: format!("bad cycle `{}`", &rec[ci]),
        })?;
        let m = *index.get(&rec[mi]).ok_or_else(|| Error::Parse {
            path: path.clone(),
            message: format!("unknown muscle `{}`", &rec[mi]),
        })?;
        while roles.len() <= cycle {
            roles.push(vec![Role::Neutral; muscles.len()]);
        }
        roles[cycle][m] = rec[ri].parse()?;
    }
    Ok(RoleTable { roles })
}

/// Trial files present in `dir`, ordered by trial number.
fn trial_numbers(dir: &Path) -> Result<Vec<usize>> {
    let mut n = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(num) = name.strip_prefix("trial_").and_then(|s| s.strip_suffix("_muscles.csv")) {
            if let Ok(k) = num.parse() {
                n.push(k);
            }
        }
    }
    n.sort_unstable();
    Ok(n)
}

/// Recompute every trial summary from the CSV files in `dir` and rewrite
/// `summary.csv`.
pub fn summarize_dir(dir: &Path) -> Result<Vec<TrialSummary>> {
    let meta = read_metadata(dir)?;
    let roles = read_roles(dir, &meta.muscles)?;
    let m = meta.muscles.len();
    let index: BTreeMap<&str, usize> =
        meta.muscles.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let shuttle = meta.shuttle.map(Point3::from);
    let mut summaries = Vec::new();
    for trial in trial_numbers(dir)? {
        let path: PathBuf = dir.join(format!("trial_{trial}_muscles.csv"));
        let mut r = reader(&path)?;
        let h = r.headers()?.clone();
        let (ti, mi, xi) = (column(&path, &h, "time")?, column(&path, &h, "muscle")?, column(&path, &h, "tension")?);
        let mut tensions: Vec<Vec<f64>> = Vec::new();
        let mut last_time = None;
        for rec in r.records() {
            let rec = rec?;
            let t = rec[ti].to_string();
            if last_time.as_ref() != Some(&t) {
                tensions.push(vec![0.0; m]);
                last_time = Some(t);
            }
            let i = *index.get(&rec[mi]).ok_or_else(|| Error::Parse {
                path: path.clone(),
                message: format!("unknown muscle `{}`", &rec[mi]),
            })?;
            tensions.last_mut().unwrap()[i] = parse_f64(&path, &rec[xi])?;
        }
        if tensions.is_empty() {
            return Err(Error::validation(format!("{} has no rows", path.display())));
        }
        if tensions.len() > roles.len() {
            return Err(Error::validation(format!(
                "{} has more cycles than roles.csv",
                path.display()
            )));
        }

        let jpath = dir.join(format!("trial_{trial}_joints.csv"));
        let mut r = reader(&jpath)?;
        let h = r.headers()?.clone();
        let (ti, xi, yi, zi) = (
            column(&jpath, &h, "time")?,
            column(&jpath, &h, "ee_x")?,
            column(&jpath, &h, "ee_y")?,
            column(&jpath, &h, "ee_z")?,
        );
        let mut path_pts = Vec::new();
        let mut last_time = None;
        for rec in r.records() {
            let rec = rec?;
            let t = rec[ti].to_string();
            if last_time.as_ref() == Some(&t) {
                continue;
            }
            last_time = Some(t);
            path_pts.push(Point3::new(
                parse_f64(&jpath, &rec[xi])?,
                parse_f64(&jpath, &rec[yi])?,
                parse_f64(&jpath, &rec[zi])?,
            ));
        }

        let mut peak = vec![f64::NEG_INFINITY; m];
        let mut sum = vec![0.0; m];
        let (mut pa, mut ag, mut an) = (0.0f64, 0.0, 0.0);
        for (k, row) in tensions.iter().enumerate() {
            for i in 0..m {
                peak[i] = peak[i].max(row[i]);
                sum[i] += row[i];
                match roles.get(k, i) {
                    Role::Antagonist => {
                        pa = pa.max(row[i]);
                        an += row[i];
                    }
                    Role::Agonist => ag += row[i],
                    Role::Neutral => {}
                }
            }
        }
        let (min_distance, min_distance_time, hit) = match (&shuttle, path_pts.is_empty()) {
            (Some(s), false) => {
                let (d, t) = closest_point_on_path(&path_pts, meta.dt, s);
                (Some(d), Some(t), Some(d < meta.hit_radius))
            }
            _ => (None, None, None),
        };
        let n = tensions.len() as f64;
        summaries.push(TrialSummary {
            trial,
            mean_tension: sum.iter().map(|s| s / n).collect(),
            integrated_tension: sum.iter().sum::<f64>() * meta.dt,
            peak_tension: peak,
            peak_antagonist_tension: pa,
            integrated_agonist_tension: ag * meta.dt,
            integrated_antagonist_tension: an * meta.dt,
            min_distance,
            min_distance_time,
            hit,
        });
    }
    write_summary(dir, &meta.muscles, &summaries)?;
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(0.5), "0.5");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(-2.25), "-2.25");
        assert_eq!(fmt_float(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_float(123456789.4), "123456789");
        assert_eq!(fmt_float(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_float(0.0001234567891), "0.000123456789");
        assert_eq!(fmt_float(1.5e-7), "1.5e-07");
        assert_eq!(fmt_float(0.1 + 0.2), "0.3");
        assert_eq!(fmt_float(9.999999999), "10");
    }

    #[test]
    fn formatting_keeps_nine_digits() {
        for x in [0.123456789123, 98765.4321987, 1.0 / 3.0, -7.0e-12, 4.0e20] {
            let back: f64 = fmt_float(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9, "{x} -> {}", fmt_float(x));
        }
    }
}
