//! Synthetic robot models and reference clips.
//!
//! Used by the test suites and handy for trying the pipeline without
//! retargeted motion data. The humanoid is a 29-DoF, 35 kg biped with the
//! usual hip/knee/ankle, waist and 7-DoF arm layout.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kinematics::KinematicState;
use crate::model::{Configuration, Joint, JointKind, KinematicModel, Link, MotionClip};
use crate::spatial::{rot_exp, RigidTransform, Vec3};

fn link(name: &str, mass: f64, com: [f64; 3]) -> Link {
    Link {
        name: name.into(),
        mass,
        com: Vec3::from(com),
    }
}

fn revolute(
    name: &str,
    parent: &str,
    child: &str,
    xyz: [f64; 3],
    axis: Vec3,
    limits: (f64, f64),
) -> Joint {
    Joint {
        name: name.into(),
        kind: JointKind::Revolute,
        parent: parent.into(),
        child: child.into(),
        origin: RigidTransform::from_translation(Vec3::from(xyz)),
        axis,
        lower: limits.0,
        upper: limits.1,
    }
}

/// Fixed-base two-link planar arm, 1 m links rotating about z, with a `tip`
/// frame at the end of the second link.
pub fn planar_arm() -> KinematicModel {
    KinematicModel::new(
        "planar_arm",
        true,
        vec![
            link("base", 0.0, [0.0; 3]),
            link("upper", 1.0, [0.5, 0.0, 0.0]),
            link("fore", 1.0, [0.5, 0.0, 0.0]),
            link("tip", 0.0, [0.0; 3]),
        ],
        vec![
            revolute(
                "shoulder",
                "base",
                "upper",
                [0.0; 3],
                Vec3::z(),
                (-FRAC_PI_2, FRAC_PI_2),
            ),
            revolute(
                "elbow",
                "upper",
                "fore",
                [1.0, 0.0, 0.0],
                Vec3::z(),
                (0.0, 2.8),
            ),
            Joint {
                name: "tip_mount".into(),
                kind: JointKind::Fixed,
                parent: "fore".into(),
                child: "tip".into(),
                origin: RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0)),
                axis: Vec3::z(),
                lower: 0.0,
                upper: 0.0,
            },
        ],
        vec!["tip".into()],
        vec![],
        vec!["fore".into()],
    )
    .expect("planar arm fixture is valid")
}

/// Floating-base humanoid: pelvis root, two 6-DoF legs, 3-DoF waist and two
/// 7-DoF arms. Total mass 35 kg.
pub fn humanoid() -> KinematicModel {
    let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
    let mut links = vec![link("pelvis", 4.0, [0.0, 0.0, 0.0])];
    let mut joints = Vec::new();

    for (side, s) in [("left", 1.0), ("right", -1.0)] {
        let n = |part: &str| format!("{side}_{part}");
        let roll_limits = if s > 0.0 { (-0.5, 2.9) } else { (-2.9, 0.5) };
        links.extend([
            link(&n("hip_pitch_link"), 1.5, [0.0, 0.0, 0.0]),
            link(&n("hip_roll_link"), 1.5, [0.0, 0.0, -0.03]),
            link(&n("hip_yaw_link"), 2.5, [0.0, 0.0, -0.15]),
            link(&n("knee_link"), 2.0, [0.0, 0.0, -0.15]),
            link(&n("ankle_pitch_link"), 0.3, [0.0, 0.0, 0.0]),
            link(&n("foot"), 0.6, [0.03, 0.0, -0.03]),
        ]);
        joints.extend([
            revolute(
                &n("hip_pitch_joint"),
                "pelvis",
                &n("hip_pitch_link"),
                [0.0, 0.1 * s, -0.05],
                y,
                (-2.5, 2.8),
            ),
            revolute(
                &n("hip_roll_joint"),
                &n("hip_pitch_link"),
                &n("hip_roll_link"),
                [0.0; 3],
                x,
                roll_limits,
            ),
            revolute(
                &n("hip_yaw_joint"),
                &n("hip_roll_link"),
                &n("hip_yaw_link"),
                [0.0, 0.0, -0.05],
                z,
                (-2.7, 2.7),
            ),
            revolute(
                &n("knee_joint"),
                &n("hip_yaw_link"),
                &n("knee_link"),
                [0.0, 0.0, -0.3],
                y,
                (-0.08, 2.9),
            ),
            revolute(
                &n("ankle_pitch_joint"),
                &n("knee_link"),
                &n("ankle_pitch_link"),
                [0.0, 0.0, -0.3],
                y,
                (-0.87, 0.52),
            ),
            revolute(
                &n("ankle_roll_joint"),
                &n("ankle_pitch_link"),
                &n("foot"),
                [0.0; 3],
                x,
                (-0.26, 0.26),
            ),
        ]);
    }

    links.extend([
        link("waist_yaw_link", 0.5, [0.0, 0.0, 0.0]),
        link("waist_roll_link", 0.5, [0.0, 0.0, 0.0]),
        link("torso_link", 6.6, [0.0, 0.0, 0.15]),
    ]);
    joints.extend([
        revolute(
            "waist_yaw_joint",
            "pelvis",
            "waist_yaw_link",
            [0.0, 0.0, 0.05],
            z,
            (-2.6, 2.6),
        ),
        revolute(
            "waist_roll_joint",
            "waist_yaw_link",
            "waist_roll_link",
            [0.0; 3],
            x,
            (-0.52, 0.52),
        ),
        revolute(
            "waist_pitch_joint",
            "waist_roll_link",
            "torso_link",
            [0.0; 3],
            y,
            (-0.52, 0.52),
        ),
    ]);

    for (side, s) in [("left", 1.0), ("right", -1.0)] {
        let n = |part: &str| format!("{side}_{part}");
        let roll_limits = if s > 0.0 { (-1.6, 2.3) } else { (-2.3, 1.6) };
        links.extend([
            link(&n("shoulder_pitch_link"), 0.5, [0.0, 0.0, 0.0]),
            link(&n("shoulder_roll_link"), 0.5, [0.0, 0.0, 0.0]),
            link(&n("shoulder_yaw_link"), 1.0, [0.0, 0.0, -0.1]),
            link(&n("elbow_link"), 0.6, [0.0, 0.0, -0.1]),
            link(&n("wrist_roll_link"), 0.2, [0.0, 0.0, 0.0]),
            link(&n("wrist_pitch_link"), 0.2, [0.0, 0.0, 0.0]),
            link(&n("hand"), 0.3, [0.0, 0.0, -0.04]),
        ]);
        joints.extend([
            revolute(
                &n("shoulder_pitch_joint"),
                "torso_link",
                &n("shoulder_pitch_link"),
                [0.0, 0.15 * s, 0.3],
                y,
                (-3.1, 2.7),
            ),
            revolute(
                &n("shoulder_roll_joint"),
                &n("shoulder_pitch_link"),
                &n("shoulder_roll_link"),
                [0.0; 3],
                x,
                roll_limits,
            ),
            revolute(
                &n("shoulder_yaw_joint"),
                &n("shoulder_roll_link"),
                &n("shoulder_yaw_link"),
                [0.0; 3],
                z,
                (-2.6, 2.6),
            ),
            revolute(
                &n("elbow_joint"),
                &n("shoulder_yaw_link"),
                &n("elbow_link"),
                [0.0, 0.0, -0.2],
                y,
                (-2.1, 1.0),
            ),
            revolute(
                &n("wrist_roll_joint"),
                &n("elbow_link"),
                &n("wrist_roll_link"),
                [0.0, 0.0, -0.2],
                z,
                (-1.97, 1.97),
            ),
            revolute(
                &n("wrist_pitch_joint"),
                &n("wrist_roll_link"),
                &n("wrist_pitch_link"),
                [0.0; 3],
                y,
                (-1.6, 1.6),
            ),
            revolute(
                &n("wrist_yaw_joint"),
                &n("wrist_pitch_link"),
                &n("hand"),
                [0.0; 3],
                x,
                (-1.6, 1.6),
            ),
        ]);
    }

    KinematicModel::new(
        "humanoid29",
        false,
        links,
        joints,
        vec!["left_hand".into(), "right_hand".into()],
        vec!["left_foot".into(), "right_foot".into()],
        vec![
            "torso_link".into(),
            "left_elbow_link".into(),
            "right_elbow_link".into(),
            "left_knee_link".into(),
            "right_knee_link".into(),
        ],
    )
    .expect("humanoid fixture is valid")
}

fn set_joint(model: &KinematicModel, q: &mut Configuration, name: &str, value: f64) {
    let slot = model
        .movable_joints()
        .position(|j| j.name == name)
        .unwrap_or_else(|| panic!("fixture joint `{name}` missing"));
    q.joints[slot] = value;
}

/// Slightly crouched stance with elbows bent and hands in front of the torso.
/// The base height puts both foot origins at z = 0.05 m.
pub fn standing_pose(model: &KinematicModel) -> Configuration {
    let mut q = Configuration::new(RigidTransform::identity(), vec![0.0; model.joint_count()]);
    for side in ["left", "right"] {
        let s = if side == "left" { 1.0 } else { -1.0 };
        set_joint(model, &mut q, &format!("{side}_hip_pitch_joint"), -0.2);
        set_joint(model, &mut q, &format!("{side}_knee_joint"), 0.4);
        set_joint(model, &mut q, &format!("{side}_ankle_pitch_joint"), -0.2);
        set_joint(model, &mut q, &format!("{side}_shoulder_pitch_joint"), -0.3);
        set_joint(
            model,
            &mut q,
            &format!("{side}_shoulder_roll_joint"),
            0.15 * s,
        );
        set_joint(model, &mut q, &format!("{side}_elbow_joint"), -1.2);
    }
    let state = KinematicState::new(model, &q).expect("fixture width");
    let foot_z = state
        .pose_of("left_foot")
        .expect("fixture foot")
        .translation
        .z;
    q.base.translation.z = 0.05 - foot_z;
    q
}

/// A clip holding `q` for `frames` frames, all feet in contact.
pub fn static_clip(model: &KinematicModel, q: Configuration, frames: usize, dt: f64) -> MotionClip {
    let feet = model.feet().to_vec();
    let contacts = vec![vec![true; feet.len()]; frames];
    MotionClip::new(dt, vec![q; frames], feet, contacts).expect("fixture clip")
}

pub fn standing_clip(model: &KinematicModel, frames: usize, dt: f64) -> MotionClip {
    static_clip(model, standing_pose(model), frames, dt)
}

/// Standing pose carried along at constant base velocity (feet follow the base).
pub fn gliding_clip(model: &KinematicModel, frames: usize, dt: f64, velocity: Vec3) -> MotionClip {
    let q0 = standing_pose(model);
    let seq = (0..frames)
        .map(|k| {
            let mut q = q0.clone();
            q.base.translation += velocity * (k as f64 * dt);
            q
        })
        .collect();
    let feet = model.feet().to_vec();
    MotionClip::new(dt, seq, feet.clone(), vec![vec![true; feet.len()]; frames])
        .expect("fixture clip")
}

/// Standing with both arms swinging in opposition at 0.5 Hz.
pub fn arm_swing_clip(model: &KinematicModel, frames: usize, dt: f64) -> MotionClip {
    let q0 = standing_pose(model);
    let left = model
        .movable_joints()
        .position(|j| j.name == "left_shoulder_pitch_joint")
        .expect("fixture joint");
    let right = model
        .movable_joints()
        .position(|j| j.name == "right_shoulder_pitch_joint")
        .expect("fixture joint");
    let seq = (0..frames)
        .map(|k| {
            let t = k as f64 * dt;
            let a = 0.4 * (2.0 * PI * 0.5 * t).sin();
            let mut q = q0.clone();
            q.joints[left] += a;
            q.joints[right] -= a;
            q
        })
        .collect();
    let feet = model.feet().to_vec();
    MotionClip::new(dt, seq, feet.clone(), vec![vec![true; feet.len()]; frames])
        .expect("fixture clip")
}

/// Random floating-base serial chain with `n` revolute or prismatic joints
/// and randomly oriented joint frames. Every link carries mass.
pub fn random_chain(seed: u64, n: usize) -> KinematicModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = vec![link("l0", rng.random_range(0.5..2.0), [0.0, 0.0, 0.0])];
    let mut joints = Vec::new();
    for i in 1..=n {
        let com = [
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        ];
        links.push(link(&format!("l{i}"), rng.random_range(0.1..2.0), com));
        let axis = loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let norm = v.norm();
            if norm > 0.1 && norm <= 1.0 {
                break v / norm;
            }
        };
        let rot = rot_exp(&Vec3::new(
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        ))
        .expect("finite");
        let kind = if rng.random_bool(0.2) {
            JointKind::Prismatic
        } else {
            JointKind::Revolute
        };
        joints.push(Joint {
            name: format!("j{i}"),
            kind,
            parent: format!("l{}", i - 1),
            child: format!("l{i}"),
            origin: RigidTransform::new(
                rot,
                Vec3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                ),
            ),
            axis,
            lower: -3.0,
            upper: 3.0,
        });
    }
    KinematicModel::new(
        format!("chain{seed}"),
        false,
        links,
        joints,
        vec![format!("l{n}")],
        vec![],
        vec![],
    )
    .expect("random chain is valid")
}
