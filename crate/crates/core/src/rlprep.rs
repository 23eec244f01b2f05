//! Pure functions for a downstream RL trainer: observation assembly, reward
//! terms and reset/termination anchors on an augmented dataset.
//!
//! The observation's reference block is always built from the original clip;
//! rewards track the augmented configuration stored in each dataset frame.

use serde::{Deserialize, Serialize};

use crate::augment::AugmentedFrame;
use crate::error::{Error, Result};
use crate::ik::StiffnessCommand;
use crate::kinematics::KinematicState;
use crate::model::{Configuration, KinematicModel, MotionClip};
use crate::spatial::{rot_log, Vec3, Wrench};

/// Gravity direction in the world frame.
const GRAVITY_DIR: Vec3 = Vec3::new(0.0, 0.0, -1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    /// Steps of proprioception, command and action history.
    pub history: usize,
    /// Past reference points, spaced like the future ones.
    pub past_points: usize,
    pub future_points: usize,
    /// Time of the last future point (s).
    pub future_horizon: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig {
            history: 3,
            past_points: 3,
            future_points: 20,
            future_horizon: 1.0,
        }
    }
}

impl ObservationConfig {
    fn validate(&self) -> Result<()> {
        if self.history == 0 || self.future_points == 0 || !(self.future_horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid observation settings: {self:?}"
            )));
        }
        Ok(())
    }

    /// Spacing of reference points (s).
    pub fn point_spacing(&self) -> f64 {
        self.future_horizon / self.future_points as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationBlock {
    pub name: String,
    pub width: usize,
    pub depth: usize,
}

/// Ordered blocks of the flat observation vector. Each block occupies
/// `width * depth` entries; history blocks run from the newest step to the
/// oldest, reference points from the oldest past point to the furthest
/// future point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub blocks: Vec<ObservationBlock>,
    pub total_width: usize,
}

impl ObservationLayout {
    pub fn new(model: &KinematicModel, cfg: &ObservationConfig) -> Self {
        let n = model.joint_count();
        let nf = model.feet().len();
        let h = cfg.history;
        let points = 1 + cfg.past_points + cfg.future_points;
        let shape = [
            ("joint_pos_rel_default", n, h),
            ("joint_vel", n, h),
            ("base_ang_vel", 3, h),
            ("projected_gravity", 3, h),
            ("reference", n + 10 + nf, points),
            ("log_stiffness", 2, h),
            ("previous_actions", n, h),
        ];
        let blocks: Vec<ObservationBlock> = shape
            .iter()
            .map(|&(name, width, depth)| ObservationBlock {
                name: name.to_string(),
                width,
                depth,
            })
            .collect();
        let total_width = blocks.iter().map(|b| b.width * b.depth).sum();
        ObservationLayout {
            blocks,
            total_width,
        }
    }

    /// Machine-readable schema for an external trainer.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("layout serializes");
        s.push('\n');
        s
    }
}

/// Measured robot state at one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub q: Configuration,
    pub joint_vel: Vec<f64>,
    /// Base angular velocity in the base frame.
    pub base_ang_vel: Vec3,
}

/// Inputs of [`assemble_observation`]. Histories are ordered oldest first;
/// shorter histories are left-padded by repeating the oldest entry.
#[derive(Debug, Clone)]
pub struct ObservationInputs<'a> {
    pub states: &'a [RobotState],
    pub clip: &'a MotionClip,
    pub frame: usize,
    pub cmds: &'a [StiffnessCommand],
    pub actions: &'a [Vec<f64>],
    pub default_joints: &'a [f64],
}

/// Newest-first view of `items` padded to `depth`.
fn history<T>(items: &[T], depth: usize) -> impl Iterator<Item = &T> {
    (0..depth).map(move |i| &items[items.len().saturating_sub(1 + i)])
}

fn base_velocity(clip: &MotionClip, frame: usize) -> Result<(Vec3, Vec3)> {
    let last = clip.len() - 1;
    let (a, b) = match frame {
        0 => (0, 1),
        f if f == last => (last - 1, last),
        f => (f - 1, f + 1),
    };
    let span = (b - a) as f64 * clip.dt;
    let (pa, pb) = (&clip.frames[a].base, &clip.frames[b].base);
    let lin = (pb.translation - pa.translation) / span;
    let ang = rot_log(&(pb.rotation * pa.rotation.transpose()))? / span;
    let r = clip.frames[frame].base.rotation.transpose();
    Ok((r.rotate(&lin), r.rotate(&ang)))
}

/// Flat observation vector and its layout.
pub fn assemble_observation(
    model: &KinematicModel,
    inputs: &ObservationInputs<'_>,
    cfg: &ObservationConfig,
) -> Result<(Vec<f64>, ObservationLayout)> {
    cfg.validate()?;
    let clip = inputs.clip;
    if inputs.frame >= clip.len() {
        return Err(Error::Clip {
            frame: Some(inputs.frame),
            reason: format!("frame out of range for a clip of {} frames", clip.len()),
        });
    }
    if inputs.states.is_empty() || inputs.cmds.is_empty() || inputs.actions.is_empty() {
        return Err(Error::InvalidArgument(
            "observation histories must hold at least one entry".into(),
        ));
    }
    let n = model.joint_count();
    if inputs.default_joints.len() != n {
        return Err(Error::WidthMismatch {
            expected: n,
            actual: inputs.default_joints.len(),
        });
    }
    for s in inputs.states {
        model.check_width(&s.q)?;
        if s.joint_vel.len() != n {
            return Err(Error::WidthMismatch {
                expected: n,
                actual: s.joint_vel.len(),
            });
        }
    }
    for a in inputs.actions {
        if a.len() != n {
            return Err(Error::WidthMismatch {
                expected: n,
                actual: a.len(),
            });
        }
    }

    let layout = ObservationLayout::new(model, cfg);
    let h = cfg.history;
    let mut obs = Vec::with_capacity(layout.total_width);
    for s in history(inputs.states, h) {
        obs.extend(
            s.q.joints
                .iter()
                .zip(inputs.default_joints)
                .map(|(q, d)| q - d),
        );
    }
    for s in history(inputs.states, h) {
        obs.extend_from_slice(&s.joint_vel);
    }
    for s in history(inputs.states, h) {
        obs.extend(s.base_ang_vel.iter());
    }
    for s in history(inputs.states, h) {
        obs.extend(s.q.base.rotation.transpose().rotate(&GRAVITY_DIR).iter());
    }

    let spacing = cfg.point_spacing();
    let t0 = clip.time(inputs.frame);
    let past = cfg.past_points as isize;
    for k in -past..=(cfg.future_points as isize) {
        let j = clip.frame_at(t0 + k as f64 * spacing);
        let q = &clip.frames[j];
        obs.extend_from_slice(&q.joints);
        obs.push(q.base.translation.z);
        obs.extend(q.base.rotation.transpose().rotate(&GRAVITY_DIR).iter());
        let (lin, ang) = base_velocity(clip, j)?;
        obs.extend(lin.iter());
        obs.extend(ang.iter());
        for foot in model.feet() {
            obs.push(if clip.in_contact(j, foot) { 1.0 } else { 0.0 });
        }
    }

    for c in history(inputs.cmds, h) {
        obs.push(c.k_t.ln());
        obs.push(c.k_r.ln());
    }
    for a in history(inputs.actions, h) {
        obs.extend_from_slice(a);
    }
    debug_assert_eq!(obs.len(), layout.total_width);
    Ok((obs, layout))
}

/// Weights and kernel widths of the reward terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub w_force_link_pos: f64,
    pub w_force_link_rot: f64,
    pub w_force: f64,
    pub w_torque: f64,
    pub w_keypoint_pos: f64,
    pub w_keypoint_rot: f64,
    pub w_base_orientation: f64,
    pub w_base_lin_vel: f64,
    pub w_base_ang_vel: f64,
    pub w_alive: f64,
    pub w_joint_limits: f64,
    pub w_foot_sliding: f64,
    pub w_joint_vel: f64,
    pub w_action_rate: f64,
    pub w_stance_joint_motion: f64,
    /// Kernel widths: m, rad, N, N·m, m/s, rad/s.
    pub sigma_pos: f64,
    pub sigma_rot: f64,
    pub sigma_force: f64,
    pub sigma_torque: f64,
    pub sigma_lin_vel: f64,
    pub sigma_ang_vel: f64,
    /// Control step (s) for finite-difference velocities.
    pub dt: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_force_link_pos: 3.0,
            w_force_link_rot: 3.0,
            w_force: 2.0,
            w_torque: 2.0,
            w_keypoint_pos: 2.0,
            w_keypoint_rot: 2.0,
            w_base_orientation: 0.5,
            w_base_lin_vel: 0.5,
            w_base_ang_vel: 0.5,
            w_alive: 1.5,
            w_joint_limits: -10.0,
            w_foot_sliding: -0.005,
            w_joint_vel: -2.8e-4,
            w_action_rate: -0.01,
            w_stance_joint_motion: -0.4,
            sigma_pos: 0.25,
            sigma_rot: 0.5,
            sigma_force: 25.0,
            sigma_torque: 2.5,
            sigma_lin_vel: 0.5,
            sigma_ang_vel: 1.0,
            dt: 0.02,
        }
    }
}

/// Inputs of [`compute_rewards`] for one control step.
#[derive(Debug, Clone)]
pub struct RewardInputs<'a> {
    pub q: &'a Configuration,
    pub q_prev: &'a Configuration,
    pub action: &'a [f64],
    pub action_prev: &'a [f64],
    pub frame: &'a AugmentedFrame,
    /// Dataset frame one step earlier; the same frame at an episode start.
    pub frame_prev: &'a AugmentedFrame,
    pub applied: &'a Wrench,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub terms: Vec<(&'static str, f64)>,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

fn kernel(weight: f64, err_sq: f64, sigma: f64) -> f64 {
    weight * (-err_sq / (sigma * sigma)).exp()
}

fn base_twist(q: &Configuration, q_prev: &Configuration, dt: f64) -> Result<(Vec3, Vec3)> {
    let lin = (q.base.translation - q_prev.base.translation) / dt;
    let ang = rot_log(&(q.base.rotation * q_prev.base.rotation.transpose()))? / dt;
    Ok((lin, ang))
}

/// Weighted reward terms. Compliance and tracking terms are Gaussian kernels
/// of the error against the frame's augmented configuration and wrench;
/// penalties are weighted squared norms.
pub fn compute_rewards(
    model: &KinematicModel,
    inputs: &RewardInputs<'_>,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown> {
    let n = model.joint_count();
    for q in [
        inputs.q,
        inputs.q_prev,
        &inputs.frame.q_aug,
        &inputs.frame_prev.q_aug,
    ] {
        model.check_width(q)?;
    }
    if inputs.action.len() != inputs.action_prev.len() {
        return Err(Error::WidthMismatch {
            expected: inputs.action_prev.len(),
            actual: inputs.action.len(),
        });
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reward dt must be positive, got {}",
            cfg.dt
        )));
    }
    let frame = inputs.frame;
    let state = KinematicState::new(model, inputs.q)?;
    let prev = KinematicState::new(model, inputs.q_prev)?;
    let target = KinematicState::new(model, &frame.q_aug)?;

    let (link_pos_sq, link_rot_sq) = match &frame.link {
        Some(link) => {
            let l = model.link_index(link)?;
            let (a, b) = (state.link_pose(l), target.link_pose(l));
            let rot = rot_log(&(a.rotation * b.rotation.transpose()))?;
            (
                (a.translation - b.translation).norm_squared(),
                rot.norm_squared(),
            )
        }
        None => (0.0, 0.0),
    };
    let force_sq = (inputs.applied.force - frame.wrench.force).norm_squared();
    let torque_sq = (inputs.applied.torque - frame.wrench.torque).norm_squared();

    let mut kp_pos_sq = 0.0;
    let mut kp_rot_sq = 0.0;
    for k in model.keypoints() {
        let l = model.link_index(k)?;
        let (a, b) = (state.link_pose(l), target.link_pose(l));
        kp_pos_sq += (a.translation - b.translation).norm_squared();
        kp_rot_sq += rot_log(&(a.rotation * b.rotation.transpose()))?.norm_squared();
    }
    let base_rot_sq =
        rot_log(&(inputs.q.base.rotation * frame.q_aug.base.rotation.transpose()))?.norm_squared();
    let (lin, ang) = base_twist(inputs.q, inputs.q_prev, cfg.dt)?;
    let (lin_t, ang_t) = base_twist(&frame.q_aug, &inputs.frame_prev.q_aug, cfg.dt)?;

    let limits: f64 = inputs
        .q
        .joints
        .iter()
        .zip(model.limits())
        .map(|(&q, (lo, hi))| {
            let v = if q < lo {
                lo - q
            } else if q > hi {
                q - hi
            } else {
                0.0
            };
            v * v
        })
        .sum();

    let mut sliding = 0.0;
    let mut stance_slots: Vec<usize> = Vec::new();
    for (foot, &contact) in model.feet().iter().zip(&frame.contacts) {
        if !contact {
            continue;
        }
        let l = model.link_index(foot)?;
        let v = (state.link_pose(l).translation - prev.link_pose(l).translation) / cfg.dt;
        sliding += v.x * v.x + v.y * v.y;
        for s in model.chain_slots(foot)? {
            if !stance_slots.contains(&s) {
                stance_slots.push(s);
            }
        }
    }
    let qd: Vec<f64> = (0..n)
        .map(|j| (inputs.q.joints[j] - inputs.q_prev.joints[j]) / cfg.dt)
        .collect();
    let joint_vel: f64 = qd.iter().map(|v| v * v).sum();
    let stance_motion: f64 = stance_slots.iter().map(|&s| qd[s] * qd[s]).sum();
    let action_rate: f64 = inputs
        .action
        .iter()
        .zip(inputs.action_prev)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();

    let terms = vec![
        (
            "force_link_pos",
            kernel(cfg.w_force_link_pos, link_pos_sq, cfg.sigma_pos),
        ),
        (
            "force_link_rot",
            kernel(cfg.w_force_link_rot, link_rot_sq, cfg.sigma_rot),
        ),
        ("force", kernel(cfg.w_force, force_sq, cfg.sigma_force)),
        ("torque", kernel(cfg.w_torque, torque_sq, cfg.sigma_torque)),
        (
            "keypoint_pos",
            kernel(cfg.w_keypoint_pos, kp_pos_sq, cfg.sigma_pos),
        ),
        (
            "keypoint_rot",
            kernel(cfg.w_keypoint_rot, kp_rot_sq, cfg.sigma_rot),
        ),
        (
            "base_orientation",
            kernel(cfg.w_base_orientation, base_rot_sq, cfg.sigma_rot),
        ),
        (
            "base_lin_vel",
            kernel(
                cfg.w_base_lin_vel,
                (lin - lin_t).norm_squared(),
                cfg.sigma_lin_vel,
            ),
        ),
        (
            "base_ang_vel",
            kernel(
                cfg.w_base_ang_vel,
                (ang - ang_t).norm_squared(),
                cfg.sigma_ang_vel,
            ),
        ),
        ("alive", cfg.w_alive),
        ("joint_limits", cfg.w_joint_limits * limits),
        ("foot_sliding", cfg.w_foot_sliding * sliding),
        ("joint_vel", cfg.w_joint_vel * joint_vel),
        ("action_rate", cfg.w_action_rate * action_rate),
        (
            "stance_joint_motion",
            cfg.w_stance_joint_motion * stance_motion,
        ),
    ];
    let total = terms.iter().map(|(_, v)| v).sum();
    Ok(RewardBreakdown { terms, total })
}

/// Reference state initialization candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct RsiCandidate {
    pub frame: usize,
    pub q: Configuration,
    /// Load acting at this frame.
    pub wrench: Wrench,
    pub link: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeAnchors {
    pub candidates: Vec<RsiCandidate>,
    /// Maximum keypoint deviation from `q_aug` before termination (m).
    pub threshold: f64,
    targets: Vec<Configuration>,
}

pub const DEFAULT_TERMINATION_THRESHOLD: f64 = 0.5;

/// Every dataset frame is a reset candidate (uniform weight), initialized at
/// its augmented posture under its concurrent load.
pub fn episode_anchors(frames: &[AugmentedFrame], threshold: f64) -> Result<EpisodeAnchors> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "termination threshold must be positive, got {threshold}"
        )));
    }
    Ok(EpisodeAnchors {
        candidates: frames
            .iter()
            .map(|f| RsiCandidate {
                frame: f.index,
                q: f.q_aug.clone(),
                wrench: f.wrench,
                link: f.link.clone(),
            })
            .collect(),
        threshold,
        targets: frames.iter().map(|f| f.q_aug.clone()).collect(),
    })
}

impl EpisodeAnchors {
    /// Largest keypoint distance between `q` and the frame's `q_aug`.
    pub fn keypoint_deviation(
        &self,
        model: &KinematicModel,
        q: &Configuration,
        frame: usize,
    ) -> Result<f64> {
        let target = self.targets.get(frame).ok_or_else(|| Error::Clip {
            frame: Some(frame),
            reason: "frame out of range for the dataset".into(),
        })?;
        let a = KinematicState::new(model, q)?;
        let b = KinematicState::new(model, target)?;
        let mut worst = 0.0_f64;
        for k in model.keypoints() {
            let l = model.link_index(k)?;
            worst = worst.max((a.link_pose(l).translation - b.link_pose(l).translation).norm());
        }
        Ok(worst)
    }

    pub fn should_terminate(
        &self,
        model: &KinematicModel,
        q: &Configuration,
        frame: usize,
    ) -> Result<bool> {
        Ok(self.keypoint_deviation(model, q, frame)? > self.threshold)
    }
}
