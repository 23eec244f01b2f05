//! Interaction event sampling and wrench profiles.
//!
//! Two kinds of event act on a hand link. A ramp event raises a wrench
//! linearly to a peak, holds it and lowers it again. A collision event places
//! a virtual wall at the hand's reference position at an onset sampled from
//! the hand's speed; the wrench then follows the series-spring law as the
//! reference motion keeps pushing into the wall.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcefield::{series_spring_equilibrium, EnvStiffness};
use crate::ik::StiffnessCommand;
use crate::kinematics::KinematicState;
use crate::model::{clip_link_velocity, KinematicModel, MotionClip};
use crate::spatial::{Vec3, Wrench};

/// Closed interval `[lo, hi]`.
pub type Range = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Commanded translational stiffness range (N/m), sampled log-uniformly.
    pub k_t: Range,
    /// Commanded rotational stiffness range (N·m/rad), sampled log-uniformly.
    pub k_r: Range,
    /// Environment stiffness ranges, sampled log-uniformly.
    pub k_env_linear: Range,
    pub k_env_angular: Range,
    /// Peak force (N) and torque (N·m) bounds.
    pub max_force: f64,
    pub max_torque: f64,
    /// Peak displacement (m) and rotation (rad) bounds.
    pub max_displacement: f64,
    pub max_rotation: f64,
    /// Rest between consecutive events (s).
    pub rest: Range,
    /// Hold at peak wrench (s).
    pub hold: Range,
    /// Ramp speed of the displacement (m/s).
    pub speed: Range,
    /// Collision onset hazard per metre of hand travel.
    pub collision_alpha: f64,
    /// Collision onset hazard per second.
    pub collision_beta: f64,
    /// Probability that a scheduled event is a ramp rather than a collision.
    pub ramp_fraction: f64,
    /// Duration of a collision event (s).
    pub collision_duration: Range,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            k_t: [40.0, 1000.0],
            k_r: [0.1, 10.0],
            k_env_linear: [10.0, 1000.0],
            k_env_angular: [0.1, 10.0],
            max_force: 140.0,
            max_torque: 10.0,
            max_displacement: 0.7,
            max_rotation: 2.0,
            rest: [0.5, 1.5],
            hold: [0.5, 1.0],
            speed: [0.1, 1.0],
            collision_alpha: 2.0,
            collision_beta: 0.1,
            ramp_fraction: 0.5,
            collision_duration: [0.5, 1.0],
        }
    }
}

fn check_range(name: &str, r: &Range, positive: bool) -> Result<()> {
    let ok = r[0].is_finite()
        && r[1].is_finite()
        && r[0] <= r[1]
        && if positive { r[0] > 0.0 } else { r[0] >= 0.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "invalid range for {name}: {r:?}"
        )))
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("k_t", &self.k_t, true)?;
        check_range("k_r", &self.k_r, true)?;
        check_range("k_env_linear", &self.k_env_linear, true)?;
        check_range("k_env_angular", &self.k_env_angular, true)?;
        check_range("rest", &self.rest, false)?;
        check_range("hold", &self.hold, false)?;
        check_range("speed", &self.speed, true)?;
        check_range("collision_duration", &self.collision_duration, true)?;
        for (name, v) in [
            ("max_force", self.max_force),
            ("max_torque", self.max_torque),
            ("max_displacement", self.max_displacement),
            ("max_rotation", self.max_rotation),
            ("collision_alpha", self.collision_alpha),
            ("collision_beta", self.collision_beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.ramp_fraction) {
            return Err(Error::InvalidArgument(format!(
                "ramp_fraction must lie in [0, 1], got {}",
                self.ramp_fraction
            )));
        }
        Ok(())
    }
}

/// Samples `exp(u)` with `u ~ U[ln lo, ln hi]`.
pub fn sample_log_uniform<R: Rng + ?Sized>(range: &Range, rng: &mut R) -> Result<f64> {
    check_range("log-uniform", range, true)?;
    Ok(log_uniform(rng, range))
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, r: &Range) -> f64 {
    if r[0] == r[1] {
        return r[0];
    }
    rng.random_range(r[0].ln()..=r[1].ln()).exp()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: &Range) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

/// Direction drawn uniformly on the unit sphere.
pub fn sample_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let v: [f64; 3] = UnitSphere.sample(rng);
    Vec3::from(v)
}

/// Shortest ramp time (s), so a zero-displacement ramp still has a profile.
const MIN_RAMP_TIME: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Ramp {
        /// Wrench at the plateau.
        peak: Wrench,
        ramp_up: f64,
        hold: f64,
        ramp_down: f64,
    },
    Collision {
        /// Reference hand position at the onset frame.
        anchor: Vec3,
        /// Unit penetration direction (reference hand velocity at onset).
        normal: Vec3,
        duration: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub id: usize,
    pub hand: String,
    pub cmd: StiffnessCommand,
    pub k_env: EnvStiffness,
    /// Start time (s); always the time of `start_frame`.
    pub start_time: f64,
    /// First frame of the event; the onset frame for collisions.
    pub start_frame: usize,
    /// Last frame of the event (inclusive).
    pub end_frame: usize,
    /// Time since the previous event ended (s).
    pub rest_before: f64,
    pub kind: EventKind,
}

impl InteractionEvent {
    pub fn is_ramp(&self) -> bool {
        matches!(self.kind, EventKind::Ramp { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            EventKind::Ramp { .. } => "ramp",
            EventKind::Collision { .. } => "collision",
        }
    }

    /// Duration of the wrench profile (s).
    pub fn duration(&self) -> f64 {
        match &self.kind {
            EventKind::Ramp {
                ramp_up,
                hold,
                ramp_down,
                ..
            } => ramp_up + hold + ramp_down,
            EventKind::Collision { duration, .. } => *duration,
        }
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&frame)
    }

    /// Wrench applied at `frame` of `clip`; zero outside the event.
    pub fn wrench_at(
        &self,
        clip: &MotionClip,
        model: &KinematicModel,
        frame: usize,
    ) -> Result<Wrench> {
        if !self.contains(frame) {
            return Ok(Wrench::zero());
        }
        match &self.kind {
            EventKind::Ramp { .. } => wrench_profile(self, clip.time(frame)),
            EventKind::Collision { anchor, normal, .. } => {
                let p = KinematicState::new(model, &clip.frames[frame])?
                    .pose_of(&self.hand)?
                    .translation;
                let pen = (p - anchor).dot(normal);
                let f = series_spring_equilibrium(pen, self.cmd.k_t, self.k_env.linear)?.force;
                Ok(Wrench::new(-normal * f, Vec3::zeros()))
            }
        }
    }

    /// Largest force magnitude over the event's frames.
    pub fn peak_force(&self, clip: &MotionClip, model: &KinematicModel) -> Result<f64> {
        match &self.kind {
            EventKind::Ramp { peak, .. } => Ok(peak.force.norm()),
            EventKind::Collision { .. } => {
                let mut out = 0.0_f64;
                for k in self.start_frame..=self.end_frame {
                    out = out.max(self.wrench_at(clip, model, k)?.force.norm());
                }
                Ok(out)
            }
        }
    }

    /// Copy with the ramp's peak wrench, or the collision's duration, scaled
    /// by `factor`.
    pub fn scaled(&self, factor: f64, clip: &MotionClip) -> InteractionEvent {
        let mut e = self.clone();
        match &mut e.kind {
            EventKind::Ramp { peak, .. } => *peak = peak.scaled(factor),
            EventKind::Collision { duration, .. } => {
                *duration *= factor;
                let end = clip.frame_at(e.start_time + *duration);
                e.end_frame = end.clamp(e.start_frame, self.end_frame);
            }
        }
        e
    }
}

/// Normalized ramp-hold-ramp shape in `[0, 1]` at time `t` after the start.
pub fn ramp_profile(t: f64, up: f64, hold: f64, down: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t < up {
        t / up
    } else if t <= up + hold {
        1.0
    } else if t < up + hold + down {
        1.0 - (t - up - hold) / down
    } else {
        0.0
    }
}

/// Wrench of a ramp event at clip time `t`; zero outside the event window.
pub fn wrench_profile(event: &InteractionEvent, t: f64) -> Result<Wrench> {
    match &event.kind {
        EventKind::Ramp {
            peak,
            ramp_up,
            hold,
            ramp_down,
        } => Ok(peak.scaled(ramp_profile(
            t - event.start_time,
            *ramp_up,
            *hold,
            *ramp_down,
        ))),
        EventKind::Collision { .. } => Err(Error::InvalidArgument(format!(
            "event {} is a collision; its wrench depends on the clip",
            event.id
        ))),
    }
}

fn pick_hand<R: Rng + ?Sized>(model: &KinematicModel, rng: &mut R) -> Result<String> {
    if model.hands().is_empty() {
        return Err(Error::model(model.name(), "model declares no hand links"));
    }
    Ok(model.hands()[rng.random_range(0..model.hands().len())].clone())
}

/// Samples a ramp event starting at the frame nearest `t_start`: hand,
/// log-uniform stiffness, displacement within the force and travel limits,
/// isotropic directions, speed-derived ramp time and a hold.
pub fn sample_ramp_event<R: Rng + ?Sized>(
    clip: &MotionClip,
    model: &KinematicModel,
    t_start: f64,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<InteractionEvent> {
    let hand = pick_hand(model, rng)?;
    let k_t = log_uniform(rng, &cfg.k_t);
    let k_r = log_uniform(rng, &cfg.k_r);
    let d_max = cfg.max_displacement.min(cfg.max_force / k_t);
    let r_max = cfg.max_rotation.min(cfg.max_torque / k_r);
    let displacement = rng.random_range(0.0..=d_max);
    let rotation = rng.random_range(0.0..=r_max);
    let force = sample_direction(rng) * (k_t * displacement);
    let torque = sample_direction(rng) * (k_r * rotation);
    let speed = uniform(rng, &cfg.speed);
    let ramp = (displacement / speed).max(MIN_RAMP_TIME);
    let hold = uniform(rng, &cfg.hold);
    let k_env = EnvStiffness {
        linear: log_uniform(rng, &cfg.k_env_linear),
        angular: log_uniform(rng, &cfg.k_env_angular),
    };
    let start_frame = clip.frame_at(t_start);
    let start_time = clip.time(start_frame);
    Ok(InteractionEvent {
        id: 0,
        hand,
        cmd: StiffnessCommand { k_t, k_r },
        k_env,
        start_time,
        start_frame,
        end_frame: clip.frame_at(start_time + 2.0 * ramp + hold),
        rest_before: 0.0,
        kind: EventKind::Ramp {
            peak: Wrench::new(force, torque),
            ramp_up: ramp,
            hold,
            ramp_down: ramp,
        },
    })
}

pub fn onset_probability(cfg: &SamplerConfig, speed: f64, dt: f64) -> f64 {
    (dt * (cfg.collision_alpha * speed + cfg.collision_beta)).clamp(0.0, 1.0)
}

/// Per-frame, per-hand collision onsets: each trial fires with probability
/// `min(1, dt (alpha |v| + beta))`. Frames inside `occupied` events are
/// dropped.
pub fn sample_collision_onsets<R: Rng + ?Sized>(
    clip: &MotionClip,
    model: &KinematicModel,
    cfg: &SamplerConfig,
    rng: &mut R,
    occupied: &[InteractionEvent],
) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for k in 0..clip.len() {
        for hand in model.hands() {
            let v = clip_link_velocity(clip, model, hand, k)?;
            let hit = rng.random_bool(onset_probability(cfg, v.norm(), clip.dt));
            if hit && !occupied.iter().any(|e| e.contains(k)) {
                out.push((k, hand.clone()));
            }
        }
    }
    Ok(out)
}

/// Collision event at `onset`: the wall anchor is the reference hand
/// position there, the normal its direction of travel.
pub fn collision_event<R: Rng + ?Sized>(
    clip: &MotionClip,
    model: &KinematicModel,
    hand: &str,
    onset: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<InteractionEvent> {
    let k_t = log_uniform(rng, &cfg.k_t);
    let k_r = log_uniform(rng, &cfg.k_r);
    let k_env = EnvStiffness {
        linear: log_uniform(rng, &cfg.k_env_linear),
        angular: log_uniform(rng, &cfg.k_env_angular),
    };
    let duration = uniform(rng, &cfg.collision_duration);
    let v = clip_link_velocity(clip, model, hand, onset)?;
    let normal = if v.norm() < 1e-3 {
        sample_direction(rng)
    } else {
        v.normalize()
    };
    let anchor = KinematicState::new(model, &clip.frames[onset])?
        .pose_of(hand)?
        .translation;
    let start_time = clip.time(onset);
    Ok(InteractionEvent {
        id: 0,
        hand: hand.to_string(),
        cmd: StiffnessCommand { k_t, k_r },
        k_env,
        start_time,
        start_frame: onset,
        end_frame: clip.frame_at(start_time + duration).max(onset),
        rest_before: 0.0,
        kind: EventKind::Collision {
            anchor,
            normal,
            duration,
        },
    })
}

/// Alternates rests and events over the clip. Sampling stops at the first
/// event that would run past the end of the clip.
pub fn build_schedule<R: Rng + ?Sized>(
    clip: &MotionClip,
    model: &KinematicModel,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<InteractionEvent>> {
    cfg.validate()?;
    if model.hands().is_empty() {
        return Err(Error::model(model.name(), "model declares no hand links"));
    }
    let end = clip.duration();
    let mut events: Vec<InteractionEvent> = Vec::new();
    let mut last_end = 0.0;
    loop {
        let t = ((last_end + uniform(rng, &cfg.rest)) / clip.dt).ceil() * clip.dt;
        if t >= end {
            break;
        }
        let mut event = if rng.random_bool(cfg.ramp_fraction) {
            sample_ramp_event(clip, model, t, cfg, rng)?
        } else {
            let mut k = (t / clip.dt).ceil() as usize;
            let mut onset = None;
            'scan: while k < clip.len() {
                for hand in model.hands() {
                    let v = clip_link_velocity(clip, model, hand, k)?;
                    if rng.random_bool(onset_probability(cfg, v.norm(), clip.dt)) {
                        onset = Some((k, hand.clone()));
                        break 'scan;
                    }
                }
                k += 1;
            }
            let Some((k, hand)) = onset else { break };
            collision_event(clip, model, &hand, k, cfg, rng)?
        };
        if event.start_time + event.duration() > end {
            break;
        }
        event.id = events.len();
        event.rest_before = event.start_time - last_end;
        last_end = clip.time(event.end_frame);
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ramp_profile_shape() {
        assert_eq!(ramp_profile(0.0, 1.0, 1.0, 1.0), 0.0);
        assert_eq!(ramp_profile(0.5, 1.0, 1.0, 1.0), 0.5);
        assert_eq!(ramp_profile(1.5, 1.0, 1.0, 1.0), 1.0);
        assert_eq!(ramp_profile(2.5, 1.0, 1.0, 1.0), 0.5);
        assert_eq!(ramp_profile(3.5, 1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn ramp_draws_respect_bounds() {
        let model = fixtures::humanoid();
        let clip = fixtures::standing_clip(&model, 100, 0.02);
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let e = sample_ramp_event(&clip, &model, 0.3, &cfg, &mut rng).unwrap();
            let EventKind::Ramp {
                peak,
                ramp_up,
                ramp_down,
                hold,
            } = e.kind
            else {
                unreachable!()
            };
            assert!(peak.force.norm() <= 140.0 + 1e-9 && peak.torque.norm() <= 10.0 + 1e-9);
            assert!(peak.force.norm() / e.cmd.k_t <= 0.7 + 1e-12);
            assert!(peak.torque.norm() / e.cmd.k_r <= 2.0 + 1e-12);
            assert!((40.0..=1000.0).contains(&e.cmd.k_t));
            assert!((0.1..=10.0).contains(&e.cmd.k_r));
            assert_eq!(ramp_up, ramp_down);
            assert!((0.5..=1.0).contains(&hold));
            assert_eq!(e.start_frame, 15);
        }
    }

    #[test]
    fn wrench_profile_midpoints() {
        let model = fixtures::humanoid();
        let clip = fixtures::standing_clip(&model, 200, 0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = sample_ramp_event(&clip, &model, 0.5, &SamplerConfig::default(), &mut rng).unwrap();
        let EventKind::Ramp {
            peak,
            ramp_up,
            hold,
            ..
        } = e.kind
        else {
            unreachable!()
        };
        assert_eq!(wrench_profile(&e, e.start_time).unwrap(), Wrench::zero());
        assert_eq!(
            wrench_profile(&e, e.start_time + ramp_up + hold / 2.0).unwrap(),
            peak
        );
        let half = wrench_profile(&e, e.start_time + ramp_up / 2.0).unwrap();
        assert!((half.force - peak.force * 0.5).amax() < 1e-12);
    }

    #[test]
    fn log_uniform_rejects_non_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_log_uniform(&[0.0, 10.0], &mut rng).is_err());
        assert_eq!(sample_log_uniform(&[40.0, 40.0], &mut rng).unwrap(), 40.0);
    }

    #[test]
    fn short_clip_gives_empty_schedule() {
        let model = fixtures::humanoid();
        let clip = fixtures::standing_clip(&model, 16, 0.02);
        let s = build_schedule(
            &clip,
            &model,
            &SamplerConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn schedule_is_deterministic_and_disjoint() {
        let model = fixtures::humanoid();
        let clip = fixtures::arm_swing_clip(&model, 1001, 0.02);
        let cfg = SamplerConfig::default();
        let a = build_schedule(&clip, &model, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = build_schedule(&clip, &model, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for w in a.windows(2) {
            assert!(w[0].end_frame <= w[1].start_frame);
        }
        for e in &a {
            assert!(e.end_frame < clip.len());
            assert!(e.rest_before >= 0.5 - 1e-12);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SamplerConfig {
            k_t: [100.0, 10.0],
            ..SamplerConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
