//! Built-in robot descriptions. The files under `scenarios/` are generated
//! from these with `cargo run --example write_models`.

use super::{
    EndEffectorSpec, JointSpec, LinkSpec, ModelFile, MuscleSpec, RestLengths, RobotModel,
    ViaPointSpec,
};

/// Pulley radius of [`pulley_pair`], meters.
pub const PULLEY_RADIUS: f64 = 0.02;
/// Distance from the pulley tangent point to the base anchors of [`pulley_pair`].
pub const PULLEY_ANCHOR_DISTANCE: f64 = 0.3;
/// Wrap via-points per muscle in [`pulley_pair`].
pub const PULLEY_WRAP_POINTS: usize = 64;

/// Upper-arm and forearm lengths of [`planar_arm`].
pub const UPPER_ARM: f64 = 0.3;
pub const FOREARM: f64 = 0.25;

fn vp(link: &str, x: f64, y: f64, z: f64) -> ViaPointSpec {
    ViaPointSpec {
        link: link.to_string(),
        x,
        y,
        z,
    }
}

fn link(name: &str, parent: Option<&str>, joint: Option<&str>, xyz: [f64; 3]) -> LinkSpec {
    LinkSpec {
        name: name.to_string(),
        parent: parent.map(str::to_string),
        joint: joint.map(str::to_string),
        xyz,
        rpy: [0.0; 3],
    }
}

fn joint(name: &str, parent: &str, axis: [f64; 3], lower: f64, upper: f64) -> JointSpec {
    JointSpec {
        name: name.to_string(),
        parent: parent.to_string(),
        axis,
        lower,
        upper,
    }
}

fn muscle(name: &str, via_points: Vec<ViaPointSpec>) -> MuscleSpec {
    MuscleSpec {
        name: name.to_string(),
        rest_length: 0.0,
        via_points,
    }
}

fn finish(file: ModelFile) -> RobotModel {
    RobotModel::from_file(file, RestLengths::Recompute).expect("catalog model is valid")
}

/// One hinge about +z driven by an antagonistic pair wrapped on a pulley of
/// radius [`PULLEY_RADIUS`]. The flexor leaves the pulley tangentially at
/// `(0, r, 0)` toward a base anchor, so `∂l/∂θ = −r` at θ = 0. The extensor
/// mirrors it below the axis. The wrapped part of each path is a dense arc of
/// via-points fixed to the pulley.
pub fn pulley_pair() -> RobotModel {
    let r = PULLEY_RADIUS;
    let d = PULLEY_ANCHOR_DISTANCE;
    let wrap = |sign: f64| -> Vec<ViaPointSpec> {
        let mut pts = vec![vp("base", -d, sign * r, 0.0), vp("pulley", 0.0, sign * r, 0.0)];
        // arc from 90° to 170° (mirrored for the extensor), excluding the tangent point
        let start = std::f64::consts::FRAC_PI_2;
        let span = 80f64.to_radians();
        for k in 1..=PULLEY_WRAP_POINTS {
            let a = start + span * k as f64 / PULLEY_WRAP_POINTS as f64;
            pts.push(vp("pulley", r * a.cos(), sign * r * a.sin(), 0.0));
        }
        pts
    };
    finish(ModelFile {
        name: Some("pulley_pair".into()),
        base: None,
        links: vec![
            link("base", None, None, [0.0; 3]),
            link("pulley", Some("base"), Some("hinge"), [0.0; 3]),
        ],
        joints: vec![joint("hinge", "base", [0.0, 0.0, 1.0], -1.0, 1.0)],
        muscles: vec![muscle("flexor", wrap(1.0)), muscle("extensor", wrap(-1.0))],
        end_effector: EndEffectorSpec {
            link: "pulley".into(),
            xyz: [0.2, 0.0, 0.0],
            rpy: [0.0; 3],
        },
    })
}

/// Desk-scale planar arm in the x–y plane: shoulder and elbow about +z,
/// two monoarticular muscles per joint and one biarticular pair.
pub fn planar_arm() -> RobotModel {
    finish(ModelFile {
        name: Some("planar_arm".into()),
        base: None,
        links: vec![
            link("torso", None, None, [0.0; 3]),
            link("upper_arm", Some("torso"), Some("shoulder"), [0.0; 3]),
            link("forearm", Some("upper_arm"), Some("elbow"), [UPPER_ARM, 0.0, 0.0]),
        ],
        joints: vec![
            joint("shoulder", "torso", [0.0, 0.0, 1.0], -1.0, 1.0),
            joint("elbow", "upper_arm", [0.0, 0.0, 1.0], -0.1, 2.3),
        ],
        muscles: vec![
            muscle(
                "shoulder_flexor",
                vec![
                    vp("torso", -0.10, 0.06, 0.0),
                    vp("torso", 0.0, 0.06, 0.0),
                    vp("upper_arm", 0.10, 0.03, 0.0),
                ],
            ),
            muscle(
                "shoulder_extensor",
                vec![
                    vp("torso", -0.10, -0.06, 0.0),
                    vp("torso", 0.0, -0.06, 0.0),
                    vp("upper_arm", 0.10, -0.03, 0.0),
                ],
            ),
            muscle(
                "elbow_flexor",
                vec![vp("upper_arm", 0.08, 0.03, 0.0), vp("forearm", 0.06, 0.03, 0.0)],
            ),
            muscle(
                "elbow_extensor",
                vec![vp("upper_arm", 0.08, -0.025, 0.0), vp("forearm", -0.03, -0.025, 0.0)],
            ),
            muscle(
                "biarticular_flexor",
                vec![
                    vp("torso", -0.10, 0.065, 0.0),
                    vp("torso", 0.0, 0.065, 0.0),
                    vp("upper_arm", 0.12, 0.035, 0.0),
                    vp("forearm", 0.05, 0.025, 0.0),
                ],
            ),
            muscle(
                "biarticular_extensor",
                vec![
                    vp("torso", -0.10, -0.065, 0.0),
                    vp("torso", 0.0, -0.065, 0.0),
                    vp("upper_arm", 0.12, -0.035, 0.0),
                    vp("forearm", -0.03, -0.03, 0.0),
                ],
            ),
        ],
        end_effector: EndEffectorSpec {
            link: "forearm".into(),
            xyz: [FOREARM, 0.0, 0.0],
            rpy: [0.0; 3],
        },
    })
}

/// 13-joint arm (6 scapula, 3 shoulder, 1 elbow, 3 wrist) with an
/// antagonistic pair per joint and four multi-articular muscles. Provided as a
/// larger configuration; not used by the default scenarios.
pub fn whole_arm() -> RobotModel {
    let names = [
        "scapula_1", "scapula_2", "scapula_3", "scapula_4", "scapula_5", "scapula_6",
        "shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow", "wrist_yaw",
        "wrist_pitch", "wrist_roll",
    ];
    let axes: [[f64; 3]; 13] = [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];
    // distance from each joint to the next along the parent's local +x
    let lengths = [
        0.03, 0.03, 0.04, 0.03, 0.03, 0.05, 0.03, 0.03, 0.26, 0.05, 0.20, 0.03, 0.04,
    ];
    let mut links = vec![link("body", None, None, [0.0; 3])];
    let mut joints = Vec::new();
    let mut prev = "body".to_string();
    let mut offset = 0.0;
    for (k, name) in names.iter().enumerate() {
        let lname = format!("link_{}", k + 1);
        links.push(link(&lname, Some(&prev), Some(name), [offset, 0.0, 0.0]));
        let limit = if *name == "elbow" { (-0.1, 2.2) } else { (-0.8, 0.8) };
        joints.push(joint(name, &prev, axes[k], limit.0, limit.1));
        offset = lengths[k];
        prev = lname;
    }

    // side vector perpendicular to a joint axis
    let side = |axis: [f64; 3]| -> [f64; 3] {
        if axis[0] != 0.0 {
            [0.0, 1.0, 0.0]
        } else if axis[1] != 0.0 {
            [0.0, 0.0, 1.0]
        } else {
            [0.0, 1.0, 0.0]
        }
    };
    let link_name = |k: usize| if k == 0 { "body".to_string() } else { format!("link_{k}") };
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let mut muscles = Vec::new();
    for (k, name) in names.iter().enumerate() {
        // each pair runs tangentially past the axis, offset to either side
        let s = side(axes[k]);
        let t = cross(axes[k], s);
        let (rho, half) = (0.015, 0.03);
        let joint_x = if k == 0 { 0.0 } else { lengths[k - 1] };
        for (tag, sign) in [("flexor", 1.0), ("extensor", -1.0)] {
            let p = |i: usize, along: f64| sign * rho * s[i] + along * t[i];
            muscles.push(muscle(
                &format!("{name}_{tag}"),
                vec![
                    vp(&link_name(k), joint_x + p(0, -half), p(1, -half), p(2, -half)),
                    vp(&link_name(k + 1), p(0, half), p(1, half), p(2, half)),
                ],
            ));
        }
    }
    // multi-articular: shoulder to forearm and upper arm to hand, two sides each
    for (name, from, to, to_x) in [
        ("biceps_long", 6usize, 10usize, 0.06),
        ("wrist_flexor_long", 9, 13, 0.02),
    ] {
        for (tag, sign) in [("front", 1.0), ("back", -1.0)] {
            let from_len = lengths[from - 1];
            muscles.push(muscle(
                &format!("{name}_{tag}"),
                vec![
                    vp(&link_name(from), 0.3 * from_len, 0.0, sign * 0.02),
                    vp(&link_name(to - 1), 0.5 * lengths[to - 2], 0.0, sign * 0.025),
                    vp(&link_name(to), to_x, 0.0, sign * 0.02),
                ],
            ));
        }
    }

    finish(ModelFile {
        name: Some("whole_arm".into()),
        base: None,
        links,
        joints,
        muscles,
        end_effector: EndEffectorSpec {
            link: "link_13".into(),
            xyz: [0.08, 0.0, 0.0],
            rpy: [0.0; 3],
        },
    })
}

/// Every built-in model with the file stem it is written under.
pub fn all() -> Vec<(&'static str, RobotModel)> {
    vec![
        ("pulley_pair", pulley_pair()),
        ("planar_arm", planar_arm()),
        ("whole_arm", whole_arm()),
    ]
}
