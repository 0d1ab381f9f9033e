use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::catalog::{self, PULLEY_RADIUS};
use super::*;

const TWO_LINK: &str = r#"
name = "two_link"

[[links]]
name = "base"

[[links]]
name = "upper"
parent = "base"
joint = "shoulder"

[[links]]
name = "lower"
parent = "upper"
joint = "elbow"
xyz = [0.3, 0.0, 0.0]

[[joints]]
name = "shoulder"
parent = "base"
axis = [0.0, 0.0, 1.0]
lower = -3.0
upper = 3.0

[[joints]]
name = "elbow"
parent = "upper"
axis = [0.0, 0.0, 1.0]
lower = -3.0
upper = 3.0

[[muscles]]
name = "biarticular"
rest_length = 0.5
via_points = [
    { link = "base", x = -0.1, y = 0.04, z = 0.0 },
    { link = "lower", x = 0.1, y = 0.04, z = 0.0 },
]

[[muscles]]
name = "upper_only"
rest_length = 0.2
via_points = [
    { link = "base", x = -0.1, y = -0.04, z = 0.0 },
    { link = "upper", x = 0.1, y = -0.04, z = 0.0 },
]

[end_effector]
link = "lower"
xyz = [0.25, 0.0, 0.0]
"#;

fn two_link() -> RobotModel {
    RobotModel::from_toml_str(TWO_LINK, RestLengths::Check).unwrap()
}

fn jv(v: &[f64]) -> JointVector {
    JointVector::from_slice(v)
}

fn random_pose(model: &RobotModel, rng: &mut ChaCha8Rng) -> JointVector {
    JointVector::from(
        model
            .joints()
            .iter()
            .map(|j| rng.random_range(j.lower..j.upper))
            .collect::<Vec<_>>(),
    )
}

/// Central differences of any vector-valued map of θ.
fn central_difference(
    theta: &JointVector,
    h: f64,
    f: impl Fn(&JointVector) -> Vec<f64>,
) -> DMatrix<f64> {
    let rows = f(theta).len();
    let mut out = DMatrix::zeros(rows, theta.len());
    for j in 0..theta.len() {
        let (mut tp, mut tm) = (theta.clone(), theta.clone());
        tp[j] += h;
        tm[j] -= h;
        let (fp, fm) = (f(&tp), f(&tm));
        for i in 0..rows {
            out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}

fn max_relative_error(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    let scale = analytic.amax().max(1e-12);
    analytic
        .iter()
        .zip(fd.iter())
        .map(|(a, b)| (a - b).abs() / a.abs().max(scale))
        .fold(0.0, f64::max)
}

#[test]
fn loader_accepts_two_link_and_reports_sizes() {
    let m = two_link();
    assert_eq!(m.joint_count(), 2);
    assert_eq!(m.muscle_count(), 2);
    assert_eq!(m.joint_names(), vec!["shoulder", "elbow"]);
}

#[test]
fn loader_rejects_unknown_keys() {
    let text = TWO_LINK.replace("name = \"two_link\"", "name = \"two_link\"\ncolor = \"red\"");
    assert!(matches!(
        RobotModel::from_toml_str(&text, RestLengths::Check),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn loader_rejects_wrong_rest_length() {
    let text = TWO_LINK.replace("rest_length = 0.2", "rest_length = 0.2000001");
    assert!(matches!(
        RobotModel::from_toml_str(&text, RestLengths::Check),
        Err(Error::Validation(_))
    ));
}

#[test]
fn loader_rejects_non_unit_axis_and_bad_limits() {
    let text = TWO_LINK.replacen("axis = [0.0, 0.0, 1.0]", "axis = [0.0, 0.0, 1.1]", 1);
    assert!(RobotModel::from_toml_str(&text, RestLengths::Check).is_err());
    let text = TWO_LINK.replacen("lower = -3.0", "lower = 3.0", 1);
    assert!(RobotModel::from_toml_str(&text, RestLengths::Check).is_err());
}

#[test]
fn loader_rejects_single_via_point_and_unknown_link() {
    let text = TWO_LINK.replace(
        "    { link = \"upper\", x = 0.1, y = -0.04, z = 0.0 },\n",
        "",
    );
    assert!(RobotModel::from_toml_str(&text, RestLengths::Check).is_err());
    let text = TWO_LINK.replace("{ link = \"upper\", x = 0.1", "{ link = \"hand\", x = 0.1");
    assert!(RobotModel::from_toml_str(&text, RestLengths::Check).is_err());
}

#[test]
fn file_round_trip_preserves_model() {
    for (_, model) in catalog::all() {
        let text = model.to_file().to_toml_string();
        let back = RobotModel::from_toml_str(&text, RestLengths::Check).unwrap();
        assert_eq!(back, model);
    }
}

#[test]
fn zero_pose_returns_rest_lengths() {
    for (_, model) in catalog::all() {
        let l = model.muscle_lengths(&JointVector::zeros(model.joint_count())).unwrap();
        assert!((l.0.clone() - model.rest_lengths().0).amax() < 1e-15);
    }
}

#[test]
fn straight_biarticular_zero_pose_is_anchor_distance() {
    let m = two_link();
    let l = m.muscle_lengths(&jv(&[0.0, 0.0])).unwrap();
    // base anchor (-0.1, 0.04) to lower-link point (0.3 + 0.1, 0.04)
    assert!((l[0] - 0.5).abs() < 1e-15);
}

#[test]
fn pulley_flexor_tracks_ideal_pulley() {
    let m = catalog::pulley_pair();
    let l0 = m.rest_lengths();
    let l = m.muscle_lengths(&jv(&[0.5])).unwrap();
    // Independent oracle: tangent point (0, r) rotated by θ, chord to the fixed anchor.
    let r = PULLEY_RADIUS;
    let d = catalog::PULLEY_ANCHOR_DISTANCE;
    let p = Point3::new(-r * 0.5f64.sin(), r * 0.5f64.cos(), 0.0);
    let anchor = Point3::new(-d, r, 0.0);
    let chord = (p - anchor).norm();
    assert!((l[0] - l0[0] - (chord - d)).abs() < 1e-12);
    // Ideal wrap l0 − rθ; a via-point polyline cannot wrap, so the chord
    // falls short of the arc by O(rθ³).
    assert!((l[0] - (l0[0] - r * 0.5)).abs() < 5e-4);
    assert!(l[1] > l0[1]);
}

#[test]
fn pulley_jacobian_is_minus_radius_at_tangent_pose() {
    let m = catalog::pulley_pair();
    let g = m.joint_muscle_jacobian(&jv(&[0.0])).unwrap();
    assert!((g[(0, 0)] + PULLEY_RADIUS).abs() < 1e-15);
    assert!((g[(1, 0)] - PULLEY_RADIUS).abs() < 1e-15);
}

#[test]
fn jacobians_match_central_differences_on_all_catalog_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-6;
    let mut models: Vec<RobotModel> = catalog::all().into_iter().map(|(_, m)| m).collect();
    models.push(two_link());
    for model in &models {
        for _ in 0..25 {
            let theta = random_pose(model, &mut rng);
            let g = model.joint_muscle_jacobian(&theta).unwrap();
            let g_fd = central_difference(&theta, h, |t| {
                model.lengths_unchecked(t).unwrap().iter().cloned().collect()
            });
            assert!(max_relative_error(&g, &g_fd) < 1e-5, "{}", model.name());

            let j = model.task_jacobian(&theta).unwrap();
            let j_fd = central_difference(&theta, h, |t| {
                model.ee_unchecked(t).coords.iter().cloned().collect()
            });
            assert!(max_relative_error(&j, &j_fd) < 1e-5, "{}", model.name());
        }
    }
}

#[test]
fn proximal_muscle_has_zero_distal_column() {
    let m = two_link();
    let g = m.joint_muscle_jacobian(&jv(&[0.4, -0.7])).unwrap();
    assert_eq!(g[(1, 1)], 0.0);
    assert!(g[(1, 0)] != 0.0);
}

#[test]
fn planar_fk_and_jacobian() {
    let m = two_link();
    let p = m.end_effector_position(&jv(&[0.0, 0.0])).unwrap();
    assert!((p - Point3::new(0.55, 0.0, 0.0)).norm() < 1e-15);
    let p = m.end_effector_position(&jv(&[FRAC_PI_2, 0.0])).unwrap();
    assert!((p - Point3::new(0.0, 0.55, 0.0)).norm() < 1e-15);
    let j = m.task_jacobian(&jv(&[0.0, 0.0])).unwrap();
    assert!((j.column(0) - Vector3::new(0.0, 0.55, 0.0)).norm() < 1e-15);
    assert!((j.column(1) - Vector3::new(0.0, 0.25, 0.0)).norm() < 1e-15);
}

#[test]
fn joint_through_end_effector_has_zero_column() {
    // end effector placed on the elbow axis
    let text = TWO_LINK.replace("xyz = [0.25, 0.0, 0.0]\n", "xyz = [0.0, 0.0, 0.0]\n");
    let m = RobotModel::from_toml_str(&text, RestLengths::Check).unwrap();
    let j = m.task_jacobian(&jv(&[0.3, 1.1])).unwrap();
    assert!(j.column(1).norm() < 1e-15);
}

#[test]
fn limit_violation_names_the_joint() {
    let m = catalog::planar_arm();
    match m.muscle_lengths(&jv(&[0.0, 2.5])) {
        Err(Error::JointRange { joint, .. }) => assert_eq!(joint, "elbow"),
        other => panic!("expected range error, got {other:?}"),
    }
    assert!(m.task_jacobian(&jv(&[-1.2, 0.0])).is_err());
    assert!(m.muscle_lengths(&jv(&[0.0])).is_err());
}

#[test]
fn coincident_via_points_are_rejected() {
    let text = TWO_LINK.replace(
        "{ link = \"upper\", x = 0.1, y = -0.04, z = 0.0 },",
        "{ link = \"upper\", x = 0.1, y = -0.04, z = 0.0 },\n    { link = \"upper\", x = 0.1, y = -0.04, z = 0.0 },",
    );
    let err = RobotModel::from_toml_str(&text, RestLengths::Recompute).unwrap_err();
    assert!(matches!(err, Error::DegenerateRouting { segment: 1, .. }), "{err:?}");
}

#[test]
fn lengths_invariant_under_base_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = catalog::planar_arm();
    let moved = model.with_base(Isometry3::from_parts(
        Translation3::new(0.4, -1.3, 2.0),
        UnitQuaternion::from_euler_angles(0.3, -1.1, 2.2),
    ));
    for _ in 0..20 {
        let theta = random_pose(&model, &mut rng);
        let a = model.muscle_lengths(&theta).unwrap();
        let b = moved.muscle_lengths(&theta).unwrap();
        assert!((a.0 - b.0).amax() < 1e-12);
    }
}

#[test]
fn planar_arm_moment_arms_keep_their_sign_over_the_limit_box() {
    let m = catalog::planar_arm();
    let signs = [(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (-1.0, -1.0), (1.0, 1.0)];
    for a in 0..=20 {
        for b in 0..=20 {
            let s = -1.0 + 2.0 * a as f64 / 20.0;
            let e = -0.1 + 2.4 * b as f64 / 20.0;
            let g = m.joint_muscle_jacobian(&jv(&[s, e])).unwrap();
            for (i, (ss, es)) in signs.iter().enumerate() {
                if *ss != 0.0 {
                    assert!(g[(i, 0)] * ss > 0.005, "muscle {i} shoulder at ({s}, {e})");
                } else {
                    assert_eq!(g[(i, 0)], 0.0);
                }
                if *es != 0.0 {
                    assert!(g[(i, 1)] * es > 0.005, "muscle {i} elbow at ({s}, {e})");
                } else {
                    assert_eq!(g[(i, 1)], 0.0);
                }
            }
        }
    }
}
