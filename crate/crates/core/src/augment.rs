//! Per-event simulation, feasibility gate and the scale-down/reject loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::AugmentConfig;
use crate::error::{Error, Result};
use crate::events::{build_schedule, InteractionEvent};
use crate::ik::{
    build_task_set, compliant_targets_with, solve_ik, ReferenceFrame, StiffnessCommand,
};
use crate::kinematics::KinematicState;
use crate::model::{Configuration, KinematicModel, MotionClip};
use crate::spatial::{rot_log, Vec3, Wrench};

/// Tracking tolerances an event frame must meet to be kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeasibilityConfig {
    /// Forced link position error against its spring-law target (m).
    pub hand_position: f64,
    /// Stance foot position drift from the reference (m).
    pub foot_position: f64,
    /// Stance foot rotation drift from the reference (rad).
    pub foot_rotation: f64,
    /// Horizontal CoM error against the moment-compensated target (m).
    pub com_xy: f64,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        FeasibilityConfig {
            hand_position: 0.05,
            foot_position: 0.05,
            foot_rotation: 0.1,
            com_xy: 0.15,
        }
    }
}

impl FeasibilityConfig {
    pub fn validate(&self) -> Result<()> {
        for v in [
            self.hand_position,
            self.foot_position,
            self.foot_rotation,
            self.com_xy,
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "feasibility tolerances must be positive: {self:?}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectionConfig {
    /// Factor applied to a ramp's peak wrench or a collision's duration after
    /// a failed attempt.
    pub scale: f64,
    /// Events whose peak force falls below this (N) are rejected outright.
    pub min_peak_force: f64,
    pub max_attempts: usize,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        RejectionConfig {
            scale: 0.8,
            min_peak_force: 1.0,
            max_attempts: 100,
        }
    }
}

impl RejectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale < 1.0)
            || !(self.min_peak_force >= 0.0)
            || self.max_attempts == 0
        {
            return Err(Error::InvalidArgument(format!(
                "invalid rejection settings: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameResiduals {
    pub hand_pos: f64,
    pub hand_rot: f64,
    pub foot_pos_max: f64,
    pub foot_rot_max: f64,
    pub com_xy: f64,
}

/// One output frame of the augmented dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedFrame {
    pub index: usize,
    pub time: f64,
    pub q_ref: Configuration,
    pub wrench: Wrench,
    pub link: Option<String>,
    pub event: Option<usize>,
    pub cmd: Option<StiffnessCommand>,
    pub contacts: Vec<bool>,
    pub q_aug: Configuration,
    pub residuals: FrameResiduals,
    pub p_ref_link: Option<Vec3>,
    pub p_aug_link: Option<Vec3>,
}

impl AugmentedFrame {
    /// Unforced frame: the augmented configuration is the reference.
    pub fn reference(clip: &MotionClip, index: usize) -> Self {
        AugmentedFrame {
            index,
            time: clip.time(index),
            q_ref: clip.frames[index].clone(),
            wrench: Wrench::zero(),
            link: None,
            event: None,
            cmd: None,
            contacts: clip.contacts[index].clone(),
            q_aug: clip.frames[index].clone(),
            residuals: FrameResiduals::default(),
            p_ref_link: None,
            p_aug_link: None,
        }
    }
}

/// Frames of one simulated event and, on failure, the first failing frame
/// with its violations.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSimulation {
    pub frames: Vec<AugmentedFrame>,
    pub failed_frame: Option<usize>,
    pub violations: Vec<String>,
}

impl EventSimulation {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Violations of `limits` by one solved frame, each naming the criterion
/// and its magnitude; empty when the frame passes.
pub fn feasibility_check(residuals: &FrameResiduals, limits: &FeasibilityConfig) -> Vec<String> {
    let mut out = Vec::new();
    let r = residuals;
    if r.hand_pos > limits.hand_position {
        out.push(format!(
            "link tracking {:.3} > {}",
            r.hand_pos, limits.hand_position
        ));
    }
    if r.foot_pos_max > limits.foot_position {
        out.push(format!(
            "stance foot {:.3} > {}",
            r.foot_pos_max, limits.foot_position
        ));
    }
    if r.foot_rot_max > limits.foot_rotation {
        out.push(format!(
            "stance foot rotation {:.3} > {}",
            r.foot_rot_max, limits.foot_rotation
        ));
    }
    if r.com_xy > limits.com_xy {
        out.push(format!("CoM {:.3} > {}", r.com_xy, limits.com_xy));
    }
    out
}

/// Solves one frame under `wrench` on `event.hand`, warm-started at `q_init`.
pub fn augment_frame(
    model: &KinematicModel,
    clip: &MotionClip,
    index: usize,
    event: &InteractionEvent,
    wrench: Wrench,
    q_init: &Configuration,
    cfg: &AugmentConfig,
) -> Result<AugmentedFrame> {
    let frame = ReferenceFrame::from_clip(clip, index);
    let mut out = AugmentedFrame::reference(clip, index);
    out.link = Some(event.hand.clone());
    out.event = Some(event.id);
    out.cmd = Some(event.cmd);
    out.wrench = wrench;
    let ref_state = KinematicState::new(model, frame.q)?;
    let hand = model.link_index(&event.hand)?;
    out.p_ref_link = Some(ref_state.link_pose(hand).translation);
    if wrench.is_zero() {
        out.p_aug_link = out.p_ref_link;
        return Ok(out);
    }

    let targets = compliant_targets_with(model, &frame, &event.hand, &wrench, &event.cmd, cfg.cop)?;
    let tasks = build_task_set(model, &frame, &targets, &cfg.weights)?;
    let sol = solve_ik(model, q_init, &tasks, &cfg.ik)?;
    let state = KinematicState::new(model, &sol.q)?;

    let hand_pose = state.link_pose(hand);
    let mut res = FrameResiduals {
        hand_pos: (hand_pose.translation - targets.p_des).norm(),
        hand_rot: rot_log(&(hand_pose.rotation * targets.r_des.transpose()))?.norm(),
        ..FrameResiduals::default()
    };
    for foot in &frame.stance {
        let l = model.link_index(foot)?;
        let a = state.link_pose(l);
        let b = ref_state.link_pose(l);
        res.foot_pos_max = res.foot_pos_max.max((a.translation - b.translation).norm());
        res.foot_rot_max = res
            .foot_rot_max
            .max(rot_log(&(a.rotation * b.rotation.transpose()))?.norm());
    }
    let com = state.center_of_mass();
    res.com_xy = ((com.x - targets.com_target_xy.x).powi(2)
        + (com.y - targets.com_target_xy.y).powi(2))
    .sqrt();
    out.p_aug_link = Some(hand_pose.translation);
    out.q_aug = sol.q;
    out.residuals = res;
    Ok(out)
}

/// Runs the IK over every frame of `event`, warm-starting each frame from
/// the previous solution.
pub fn simulate_event(
    model: &KinematicModel,
    clip: &MotionClip,
    event: &InteractionEvent,
    cfg: &AugmentConfig,
) -> Result<EventSimulation> {
    let mut frames = Vec::with_capacity(event.end_frame - event.start_frame + 1);
    let mut q_prev: Option<Configuration> = None;
    for k in event.start_frame..=event.end_frame {
        let wrench = event.wrench_at(clip, model, k)?;
        let q_init = q_prev.take().unwrap_or_else(|| clip.frames[k].clone());
        let frame = match augment_frame(model, clip, k, event, wrench, &q_init, cfg) {
            Ok(f) => f,
            Err(e @ (Error::SolverDiverged(_) | Error::NearSingular { .. })) => {
                return Ok(EventSimulation {
                    frames,
                    failed_frame: Some(k),
                    violations: vec![e.to_string()],
                });
            }
            Err(e) => return Err(e),
        };
        let violations = feasibility_check(&frame.residuals, &cfg.feasibility);
        q_prev = Some(if frame.wrench.is_zero() {
            clip.frames[k].clone()
        } else {
            frame.q_aug.clone()
        });
        frames.push(frame);
        if !violations.is_empty() {
            return Ok(EventSimulation {
                frames,
                failed_frame: Some(k),
                violations,
            });
        }
    }
    Ok(EventSimulation {
        frames,
        failed_frame: None,
        violations: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStatus {
    Accepted,
    Rejected,
}

/// Final state of one scheduled event after the rejection loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    /// The event as finally simulated (after any scaling).
    pub event: InteractionEvent,
    pub status: EventStatus,
    /// Number of simulations run.
    pub attempts: usize,
    /// Number of scale-down rounds applied.
    pub scalings: usize,
    /// Product of the scale factors applied.
    pub scale: f64,
    /// Peak force of the final event (N).
    pub peak_force: f64,
    /// Violation of each failed attempt, in order.
    pub failures: Vec<String>,
    pub reason: Option<String>,
}

impl EventOutcome {
    /// `accepted`, `accepted-after-scaling(k)` or `rejected`.
    pub fn status_label(&self) -> String {
        match self.status {
            EventStatus::Accepted if self.scalings == 0 => "accepted".into(),
            EventStatus::Accepted => format!("accepted-after-scaling({})", self.scalings),
            EventStatus::Rejected => "rejected".into(),
        }
    }
}

/// Simulates `event` with `simulate`, scaling it down after each failure
/// until it passes, its peak force drops below the floor, or the attempt
/// budget runs out.
pub fn run_with_rejection<F>(
    model: &KinematicModel,
    clip: &MotionClip,
    event: &InteractionEvent,
    cfg: &RejectionConfig,
    mut simulate: F,
) -> Result<(EventOutcome, Option<Vec<AugmentedFrame>>)>
where
    F: FnMut(&InteractionEvent) -> Result<EventSimulation>,
{
    let mut current = event.clone();
    let mut scale = 1.0;
    let mut scalings = 0;
    let mut attempts = 0;
    let mut failures: Vec<String> = Vec::new();
    loop {
        let peak = current.peak_force(clip, model)?;
        let rejected = peak < cfg.min_peak_force || attempts >= cfg.max_attempts;
        if rejected {
            let reason = if peak < cfg.min_peak_force {
                format!("peak force {peak:.3} N below {} N", cfg.min_peak_force)
            } else {
                format!("attempt budget of {} exhausted", cfg.max_attempts)
            };
            let outcome = EventOutcome {
                event: current,
                status: EventStatus::Rejected,
                attempts,
                scalings,
                scale,
                peak_force: peak,
                failures,
                reason: Some(reason),
            };
            return Ok((outcome, None));
        }
        attempts += 1;
        let sim = simulate(&current)?;
        if sim.feasible() {
            let outcome = EventOutcome {
                event: current,
                status: EventStatus::Accepted,
                attempts,
                scalings,
                scale,
                peak_force: peak,
                failures,
                reason: None,
            };
            return Ok((outcome, Some(sim.frames)));
        }
        let failure = format!(
            "frame {}: {}",
            sim.failed_frame
                .map_or_else(|| "?".to_string(), |f| f.to_string()),
            sim.violations.join("; ")
        );
        log::debug!("event {} attempt {attempts}: {failure}", current.id);
        failures.push(failure);
        scale *= cfg.scale;
        scalings += 1;
        current = current.scaled(cfg.scale, clip);
    }
}

/// Result of augmenting one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipAugmentation {
    pub frames: Vec<AugmentedFrame>,
    pub outcomes: Vec<EventOutcome>,
}

impl ClipAugmentation {
    pub fn accepted(&self) -> impl Iterator<Item = &EventOutcome> {
        self.outcomes
            .iter()
            .filter(|o| o.status == EventStatus::Accepted)
    }
}

/// Samples an event schedule with `cfg.seed` and augments the whole clip.
pub fn augment_clip(
    model: &KinematicModel,
    clip: &MotionClip,
    cfg: &AugmentConfig,
) -> Result<ClipAugmentation> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let schedule = build_schedule(clip, model, &cfg.sampler, &mut rng)?;
    augment_with_schedule(model, clip, &schedule, cfg)
}

/// Augments a clip under a given event schedule.
pub fn augment_with_schedule(
    model: &KinematicModel,
    clip: &MotionClip,
    schedule: &[InteractionEvent],
    cfg: &AugmentConfig,
) -> Result<ClipAugmentation> {
    let mut frames: Vec<AugmentedFrame> = (0..clip.len())
        .map(|k| AugmentedFrame::reference(clip, k))
        .collect();
    let mut outcomes = Vec::with_capacity(schedule.len());
    for event in schedule {
        let (outcome, sim) = run_with_rejection(model, clip, event, &cfg.rejection, |e| {
            simulate_event(model, clip, e, cfg)
        })?;
        if let Some(sim) = sim {
            for f in sim {
                let k = f.index;
                frames[k] = f;
            }
        }
        outcomes.push(outcome);
    }
    Ok(ClipAugmentation { frames, outcomes })
}
