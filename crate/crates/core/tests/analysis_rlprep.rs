use compliant_motion::analysis::{
    effective_stiffness, stiffness_bounds, tracking_metrics, NoiseBudget, StiffnessBins,
};
use compliant_motion::augment::{augment_clip, AugmentedFrame, EventStatus};
use compliant_motion::config::AugmentConfig;
use compliant_motion::events::SamplerConfig;
use compliant_motion::fixtures;
use compliant_motion::ik::StiffnessCommand;
use compliant_motion::model::KinematicModel;
use compliant_motion::rlprep::{
    assemble_observation, compute_rewards, episode_anchors, ObservationConfig, ObservationInputs,
    RewardConfig, RewardInputs, RobotState, DEFAULT_TERMINATION_THRESHOLD,
};
use compliant_motion::spatial::{Vec3, Wrench};
use compliant_motion::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn bounds_follow_the_noise_ratios(fnoise in 0.1..10.0f64, pnoise in 1e-4..0.01f64, facc in 10.0..100.0f64, pacc in 0.05..0.5f64) {
        let b = stiffness_bounds(&NoiseBudget::new(fnoise, pnoise, facc, pacc).unwrap()).unwrap();
        // A force error of fnoise at k_min moves the position by exactly pacc.
        prop_assert!((fnoise / b.k_min - pacc).abs() < 1e-12);
        prop_assert!((pnoise * b.k_max - facc).abs() < 1e-9);
    }
}

#[test]
fn crossed_budget_is_infeasible() {
    let err = stiffness_bounds(&NoiseBudget::new(10.0, 0.1, 1.0, 0.01).unwrap()).unwrap_err();
    assert!(matches!(err, Error::InfeasibleBudget { .. }));
    assert!(NoiseBudget::new(0.0, 0.1, 1.0, 0.01).is_err());
}

#[test]
fn constant_stiffness_dataset_stays_in_envelope() {
    let model = fixtures::humanoid();
    let clip = fixtures::standing_clip(&model, 1500, 0.02);
    let mut frames: Vec<AugmentedFrame> = Vec::new();
    for seed in 0..3 {
        let cfg = AugmentConfig {
            seed,
            sampler: SamplerConfig {
                k_t: [200.0, 200.0],
                ramp_fraction: 1.0,
                ..SamplerConfig::default()
            },
            ..AugmentConfig::default()
        };
        let aug = augment_clip(&model, &clip, &cfg).unwrap();
        assert!(aug
            .outcomes
            .iter()
            .any(|o| o.status == EventStatus::Accepted));
        // Keep event ids unique across seeds.
        frames.extend(aug.frames.into_iter().map(|mut f| {
            f.event = f.event.map(|e| e + 1000 * seed as usize);
            f
        }));
    }
    let curve = effective_stiffness(&frames, &StiffnessBins::Edges(vec![100.0, 400.0])).unwrap();
    assert_eq!(curve.len(), 1);
    assert_eq!(curve[0].commanded, 200.0);
    assert!(
        (160.0..=250.0).contains(&curve[0].median_effective),
        "{curve:?}"
    );
}

#[test]
fn curve_recovers_synthetic_ratios() {
    let model = fixtures::humanoid();
    let clip = fixtures::standing_clip(&model, 40, 0.02);
    let mut frames: Vec<AugmentedFrame> = Vec::new();
    // Two events: k = 100 realized exactly, k = 500 realized at 80%.
    for (event, (k, realized)) in [(100.0, 1.0), (500.0, 0.8)].into_iter().enumerate() {
        for i in 0..20 {
            let mut f = AugmentedFrame::reference(&clip, event * 20 + i);
            let force = if i < 10 {
                50.0 * (i as f64 / 10.0)
            } else {
                50.0
            };
            f.event = Some(event);
            f.cmd = Some(StiffnessCommand::new(k, 1.0).unwrap());
            f.wrench = Wrench::new(Vec3::new(force, 0.0, 0.0), Vec3::zeros());
            f.p_ref_link = Some(Vec3::zeros());
            f.p_aug_link = Some(Vec3::new(force / k * realized, 0.0, 0.0));
            frames.push(f);
        }
    }
    let curve = effective_stiffness(
        &frames,
        &StiffnessBins::LogSpaced {
            count: 2,
            lo: 40.0,
            hi: 1000.0,
        },
    )
    .unwrap();
    assert_eq!(curve.len(), 2);
    assert!((curve[0].median_effective - 100.0).abs() < 1e-9);
    assert!((curve[1].median_effective - 625.0).abs() < 1e-9);
    // Only frames at >= 99% of the peak count.
    assert_eq!(curve[0].samples, 10);
}

#[test]
fn tracking_metrics_oracles() {
    let model = fixtures::humanoid();
    let clip = fixtures::arm_swing_clip(&model, 30, 0.02);
    let shifted: Vec<_> = clip
        .frames
        .iter()
        .map(|q| {
            let mut q = q.clone();
            q.base.translation.y += 0.01;
            q
        })
        .collect();
    let m = tracking_metrics(&model, &shifted, &clip.frames).unwrap();
    assert!(m.joint_error_deg.abs() < 1e-12);
    assert!((m.keypoint_error_cm - 1.0).abs() < 1e-9);
    assert!(m.keypoint_error_sem_cm < 1e-9);
    let bent: Vec<_> = clip
        .frames
        .iter()
        .map(|q| {
            let mut q = q.clone();
            q.joints.iter_mut().for_each(|j| *j += 1f64.to_radians());
            q
        })
        .collect();
    let m = tracking_metrics(&model, &bent, &clip.frames).unwrap();
    assert!((m.joint_error_deg - 1.0).abs() < 1e-9);
    assert!(tracking_metrics(&model, &bent[..3], &clip.frames).is_err());
}

fn sample_dataset(
    model: &KinematicModel,
) -> (compliant_motion::model::MotionClip, Vec<AugmentedFrame>) {
    let clip = fixtures::arm_swing_clip(model, 500, 0.02);
    let cfg = AugmentConfig {
        seed: 12,
        ..AugmentConfig::default()
    };
    let aug = augment_clip(model, &clip, &cfg).unwrap();
    (clip, aug.frames)
}

#[test]
fn dataset_targets_dominate_perturbations() {
    let model = fixtures::humanoid();
    let (_, frames) = sample_dataset(&model);
    assert!(frames.iter().any(|f| !f.wrench.is_zero()));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = RewardConfig::default();
    let action = vec![0.0; model.joint_count()];
    for k in (0..frames.len()).step_by(5) {
        let frame = &frames[k];
        let frame_prev = &frames[k.saturating_sub(1)];
        let reward = |q: &compliant_motion::model::Configuration| {
            let inputs = RewardInputs {
                q,
                q_prev: &frame_prev.q_aug,
                action: &action,
                action_prev: &action,
                frame,
                frame_prev,
                applied: &frame.wrench,
            };
            compute_rewards(&model, &inputs, &cfg).unwrap().total
        };
        let best = reward(&frame.q_aug);
        for _ in 0..100 {
            let dq: Vec<f64> = (0..model.dof())
                .map(|i| {
                    if i < 6 {
                        rng.random_range(-0.02..0.02)
                    } else {
                        rng.random_range(-0.05..0.05)
                    }
                })
                .collect();
            let q = frame.q_aug.integrate(&dq);
            assert!(reward(&q) < best, "frame {k}");
        }
    }
}

#[test]
fn observation_is_pure_sized_by_layout_and_reads_the_clip() {
    let model = fixtures::humanoid();
    let (clip, frames) = sample_dataset(&model);
    let cfg = ObservationConfig::default();
    let n = model.joint_count();
    let k = frames
        .iter()
        .position(|f| f.index >= 2 && f.q_aug != f.q_ref)
        .expect("a displaced frame");
    let states: Vec<RobotState> = frames[k - 2..=k]
        .iter()
        .map(|f| RobotState {
            q: f.q_aug.clone(),
            joint_vel: vec![0.1; n],
            base_ang_vel: Vec3::new(0.0, 0.0, 0.2),
        })
        .collect();
    let cmds = [StiffnessCommand::new(100.0, 1.0).unwrap()];
    let actions = vec![vec![0.0; n]; 2];
    let default_joints = fixtures::standing_pose(&model).joints;
    let inputs = ObservationInputs {
        states: &states,
        clip: &clip,
        frame: k,
        cmds: &cmds,
        actions: &actions,
        default_joints: &default_joints,
    };
    let (a, layout) = assemble_observation(&model, &inputs, &cfg).unwrap();
    let (b, _) = assemble_observation(&model, &inputs, &cfg).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let (h, nf) = (cfg.history, model.feet().len());
    let points = 1 + cfg.past_points + cfg.future_points;
    let formula = h * (n + n + 3 + 3) + (n + 10 + nf) * points + 2 * h + n * h;
    assert_eq!(a.len(), formula);
    assert_eq!(layout.total_width, formula);

    // Feeding augmented postures as the reference would change the block.
    let mut swapped = clip.clone();
    for f in &frames {
        swapped.frames[f.index] = f.q_aug.clone();
    }
    let (c, _) = assemble_observation(
        &model,
        &ObservationInputs {
            clip: &swapped,
            ..inputs.clone()
        },
        &cfg,
    )
    .unwrap();
    assert_ne!(a, c);
}

#[test]
fn future_reference_clamps_at_clip_end() {
    let model = fixtures::humanoid();
    let clip = fixtures::arm_swing_clip(&model, 60, 0.02);
    let cfg = ObservationConfig::default();
    let n = model.joint_count();
    let states = [RobotState {
        q: clip.frames[59].clone(),
        joint_vel: vec![0.0; n],
        base_ang_vel: Vec3::zeros(),
    }];
    let cmds = [StiffnessCommand::new(100.0, 1.0).unwrap()];
    let actions = [vec![0.0; n]];
    let default_joints = vec![0.0; n];
    let inputs = ObservationInputs {
        states: &states,
        clip: &clip,
        frame: 59,
        cmds: &cmds,
        actions: &actions,
        default_joints: &default_joints,
    };
    let (obs, layout) = assemble_observation(&model, &inputs, &cfg).unwrap();
    let start: usize = layout
        .blocks
        .iter()
        .take_while(|b| b.name != "reference")
        .map(|b| b.width * b.depth)
        .sum();
    let width = n + 10 + model.feet().len();
    let point = |i: usize| &obs[start + i * width..start + (i + 1) * width];
    let current = cfg.past_points;
    for i in current + 1..=current + cfg.future_points {
        assert_eq!(point(i), point(current), "future point {i}");
    }
    assert_ne!(point(0), point(current));
}

#[test]
fn anchors_start_at_augmented_postures_and_terminate_on_drift() {
    let model = fixtures::humanoid();
    let (_, frames) = sample_dataset(&model);
    let anchors = episode_anchors(&frames, DEFAULT_TERMINATION_THRESHOLD).unwrap();
    assert_eq!(anchors.candidates.len(), frames.len());
    for (c, f) in anchors.candidates.iter().zip(&frames) {
        assert_eq!(c.q, f.q_aug);
        assert_eq!(c.wrench, f.wrench);
    }
    let k = 250;
    assert!(!anchors
        .should_terminate(&model, &frames[k].q_aug, k)
        .unwrap());
    let mut far = frames[k].q_aug.clone();
    far.base.translation.x += 0.6;
    assert!(anchors.should_terminate(&model, &far, k).unwrap());
    assert!(episode_anchors(&frames, 0.0).is_err());
}
