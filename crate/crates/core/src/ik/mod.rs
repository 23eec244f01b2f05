//! Compliance tasks and the weighted differential-IK solve.
//!
//! The forced hand gets a spring-law target pose: its reference pose offset by
//! `F / k_t` in translation and rotated by `exp([tau / k_r]x)`. The rest of the
//! task set keeps stance feet on their reference poses, shifts the CoM target
//! to balance the external moment about the reference CoP, and tethers
//! keypoint links and the whole configuration to the reference.

mod solver;

pub use solver::{solve_ik, IkParams, IkSolution, TaskResidual};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::KinematicState;
use crate::model::{Configuration, KinematicModel, MotionClip};
use crate::spatial::{rot_exp, RigidTransform, Rotation, Vec3, Wrench};

/// Gravitational acceleration used by the CoM moment compensation (m/s^2).
pub const GRAVITY: f64 = 9.81;

/// Commanded robot stiffness: translational (N/m) and rotational (N·m/rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessCommand {
    pub k_t: f64,
    pub k_r: f64,
}

impl StiffnessCommand {
    pub const TRAINING_K_T: (f64, f64) = (40.0, 1000.0);
    pub const TRAINING_K_R: (f64, f64) = (0.1, 10.0);

    pub fn new(k_t: f64, k_r: f64) -> Result<Self> {
        if !(k_t.is_finite() && k_t > 0.0 && k_r.is_finite() && k_r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stiffness must be positive and finite (k_t = {k_t}, k_r = {k_r})"
            )));
        }
        Ok(StiffnessCommand { k_t, k_r })
    }

    pub fn in_training_range(&self) -> bool {
        let (tl, th) = Self::TRAINING_K_T;
        let (rl, rh) = Self::TRAINING_K_R;
        (tl..=th).contains(&self.k_t) && (rl..=rh).contains(&self.k_r)
    }
}

/// Reference point about which the external moment is balanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopMode {
    /// Midpoint of the in-contact foot origins (or the single stance foot).
    #[default]
    StanceMidpoint,
    /// Ground projection of the reference CoM.
    ComProjection,
}

/// One reference frame: configuration plus the feet in contact.
#[derive(Debug, Clone)]
pub struct ReferenceFrame<'a> {
    pub q: &'a Configuration,
    pub stance: Vec<&'a str>,
}

impl<'a> ReferenceFrame<'a> {
    pub fn from_clip(clip: &'a MotionClip, frame: usize) -> Self {
        let stance = clip
            .feet
            .iter()
            .zip(&clip.contacts[frame])
            .filter(|(_, &c)| c)
            .map(|(f, _)| f.as_str())
            .collect();
        ReferenceFrame {
            q: &clip.frames[frame],
            stance,
        }
    }
}

/// Spring-law targets for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CompliantTargets {
    pub link: String,
    pub p_ref: Vec3,
    pub p_des: Vec3,
    pub r_des: Rotation,
    pub com_ref: Vec3,
    pub com_target_xy: Vector2<f64>,
    pub cop: Vec3,
    /// Total external moment about `cop`.
    pub moment: Vec3,
}

fn reference_cop(
    state: &KinematicState<'_>,
    model: &KinematicModel,
    stance: &[&str],
    com: &Vec3,
    mode: CopMode,
) -> Result<Vec3> {
    let ground_z = || -> Result<f64> {
        if model.feet().is_empty() {
            return Ok(0.0);
        }
        let mut z = 0.0;
        for f in model.feet() {
            z += state.pose_of(f)?.translation.z;
        }
        Ok(z / model.feet().len() as f64)
    };
    match mode {
        CopMode::StanceMidpoint if !stance.is_empty() => {
            let mut acc = Vec3::zeros();
            for f in stance {
                acc += state.pose_of(f)?.translation;
            }
            Ok(acc / stance.len() as f64)
        }
        _ => Ok(Vec3::new(com.x, com.y, ground_z()?)),
    }
}

/// Spring-law targets with the default CoP definition.
pub fn compliant_targets(
    model: &KinematicModel,
    frame: &ReferenceFrame<'_>,
    link: &str,
    wrench: &Wrench,
    cmd: &StiffnessCommand,
) -> Result<CompliantTargets> {
    compliant_targets_with(model, frame, link, wrench, cmd, CopMode::default())
}

pub fn compliant_targets_with(
    model: &KinematicModel,
    frame: &ReferenceFrame<'_>,
    link: &str,
    wrench: &Wrench,
    cmd: &StiffnessCommand,
    cop_mode: CopMode,
) -> Result<CompliantTargets> {
    if !(cmd.k_t > 0.0 && cmd.k_r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stiffness must be positive (k_t = {}, k_r = {})",
            cmd.k_t, cmd.k_r
        )));
    }
    if !wrench.is_finite() {
        return Err(Error::InvalidArgument("wrench is not finite".into()));
    }
    if !model.hands().iter().any(|h| h == link) {
        return Err(Error::InvalidArgument(format!(
            "`{link}` is not a hand link"
        )));
    }
    let state = KinematicState::new(model, frame.q)?;
    let reference = state.pose_of(link)?;
    let p_des = reference.translation + wrench.force / cmd.k_t;
    let r_des = reference.rotation * rot_exp(&(wrench.torque / cmd.k_r))?;

    let com_ref = state.center_of_mass();
    let cop = reference_cop(&state, model, &frame.stance, &com_ref, cop_mode)?;
    let moment = (reference.translation - cop).cross(&wrench.force) + wrench.torque;
    let mg = model.total_mass() * GRAVITY;
    let com_target_xy = Vector2::new(com_ref.x - moment.y / mg, com_ref.y + moment.x / mg);

    Ok(CompliantTargets {
        link: link.to_string(),
        p_ref: reference.translation,
        p_des,
        r_des,
        com_ref,
        com_target_xy,
        cop,
        moment,
    })
}

/// Task weights of the soft hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskWeights {
    pub compliant_interaction: f64,
    pub foot_placement: f64,
    pub com_stabilization: f64,
    pub keypoint_posture: f64,
    pub joint_posture: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        TaskWeights {
            compliant_interaction: 5.0,
            foot_placement: 2.5,
            com_stabilization: 0.1,
            keypoint_posture: 0.01,
            joint_posture: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskRole {
    CompliantInteraction,
    FootPlacement,
    ComStabilization,
    KeypointPosture,
    JointPosture,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskKind {
    /// Full pose of a link frame origin.
    LinkPose {
        link: String,
        target: RigidTransform,
    },
    /// Position of a link frame origin only.
    LinkPosition { link: String, target: Vec3 },
    /// Horizontal CoM position.
    ComXy { target: Vector2<f64> },
    /// Whole configuration, base included.
    Posture { target: Configuration },
}

/// One weighted term `w * ||e||^2` of the IK objective.
#[derive(Debug, Clone, PartialEq)]
pub struct IkTask {
    pub role: TaskRole,
    pub weight: f64,
    pub kind: TaskKind,
}

impl IkTask {
    pub fn new(role: TaskRole, weight: f64, kind: TaskKind) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "task weight must be positive, got {weight}"
            )));
        }
        Ok(IkTask { role, weight, kind })
    }

    pub fn link(&self) -> Option<&str> {
        match &self.kind {
            TaskKind::LinkPose { link, .. } | TaskKind::LinkPosition { link, .. } => Some(link),
            _ => None,
        }
    }
}

/// The five-part task set for one frame: forced hand, stance feet, CoM,
/// keypoints and joint posture, in that order.
pub fn build_task_set(
    model: &KinematicModel,
    frame: &ReferenceFrame<'_>,
    targets: &CompliantTargets,
    weights: &TaskWeights,
) -> Result<Vec<IkTask>> {
    let state = KinematicState::new(model, frame.q)?;
    let mut tasks = Vec::with_capacity(4 + model.feet().len() + model.keypoints().len());
    tasks.push(IkTask::new(
        TaskRole::CompliantInteraction,
        weights.compliant_interaction,
        TaskKind::LinkPose {
            link: targets.link.clone(),
            target: RigidTransform::new(targets.r_des, targets.p_des),
        },
    )?);
    for foot in model.feet() {
        if frame.stance.contains(&foot.as_str()) {
            tasks.push(IkTask::new(
                TaskRole::FootPlacement,
                weights.foot_placement,
                TaskKind::LinkPose {
                    link: foot.clone(),
                    target: state.pose_of(foot)?,
                },
            )?);
        }
    }
    tasks.push(IkTask::new(
        TaskRole::ComStabilization,
        weights.com_stabilization,
        TaskKind::ComXy {
            target: targets.com_target_xy,
        },
    )?);
    for kp in model.keypoints() {
        tasks.push(IkTask::new(
            TaskRole::KeypointPosture,
            weights.keypoint_posture,
            TaskKind::LinkPose {
                link: kp.clone(),
                target: state.pose_of(kp)?,
            },
        )?);
    }
    tasks.push(IkTask::new(
        TaskRole::JointPosture,
        weights.joint_posture,
        TaskKind::Posture {
            target: frame.q.clone(),
        },
    )?);
    Ok(tasks)
}
