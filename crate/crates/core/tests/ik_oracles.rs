use std::f64::consts::FRAC_PI_2;

use compliant_motion::fixtures;
use compliant_motion::ik::{
    build_task_set, compliant_targets, solve_ik, IkParams, IkTask, ReferenceFrame,
    StiffnessCommand, TaskKind, TaskRole, TaskWeights,
};
use compliant_motion::kinematics::KinematicState;
use compliant_motion::model::Configuration;
use compliant_motion::spatial::{Vec3, Wrench};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHOULDER: (f64, f64) = (-FRAC_PI_2, FRAC_PI_2);
const ELBOW: (f64, f64) = (0.0, 2.8);
const GRID_RES: f64 = 2e-3;

/// Closed-form tip of the planar arm (two 1 m links about z).
fn planar_tip(a: f64, b: f64) -> (f64, f64) {
    (a.cos() + (a + b).cos(), a.sin() + (a + b).sin())
}

/// Exhaustive search over the joint box, endpoints included.
fn grid_argmin(target: (f64, f64)) -> (f64, f64, f64) {
    let steps = |(lo, hi): (f64, f64)| ((hi - lo) / GRID_RES).ceil() as usize;
    let (na, nb) = (steps(SHOULDER), steps(ELBOW));
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=na {
        let a = (SHOULDER.0 + i as f64 * GRID_RES).min(SHOULDER.1);
        for j in 0..=nb {
            let b = (ELBOW.0 + j as f64 * GRID_RES).min(ELBOW.1);
            let (x, y) = planar_tip(a, b);
            let c = (x - target.0).powi(2) + (y - target.1).powi(2);
            if c < best.0 {
                best = (c, a, b);
            }
        }
    }
    best
}

fn tip_task(target: Vec3, weight: f64) -> IkTask {
    IkTask::new(
        TaskRole::Custom,
        weight,
        TaskKind::LinkPosition {
            link: "tip".into(),
            target,
        },
    )
    .unwrap()
}

#[test]
fn planar_solution_matches_grid_search() {
    let model = fixtures::planar_arm();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut targets: Vec<(f64, f64)> = (0..12)
        .map(|_| planar_tip(rng.random_range(-1.2..1.2), rng.random_range(0.3..2.5)))
        .collect();
    // Out of reach, and behind the shoulder limit.
    targets.extend([(2.6, 0.4), (-0.8, 1.6), (0.3, -2.2)]);
    for target in targets {
        let (_, ga, gb) = grid_argmin(target);
        let mut q0 = model.zero_configuration();
        q0.joints = vec![0.0, 1.0];
        let tasks = [tip_task(Vec3::new(target.0, target.1, 0.0), 1.0)];
        let params = IkParams {
            max_iterations: 500,
            ..IkParams::default()
        };
        let sol = solve_ik(&model, &q0, &tasks, &params).unwrap();
        let (a, b) = (sol.q.joints[0], sol.q.joints[1]);
        assert!(
            (a - ga).abs() <= GRID_RES && (b - gb).abs() <= GRID_RES,
            "target {target:?}: ik ({a}, {b}) vs grid ({ga}, {gb})"
        );
    }
}

#[test]
fn conflicting_targets_settle_at_weighted_mean() {
    let model = fixtures::planar_arm();
    let (t1, t2) = (Vec3::new(1.2, 0.8, 0.0), Vec3::new(1.0, 1.2, 0.0));
    let (w1, w2) = (5.0, 1.0);
    let expected = (t1 * w1 + t2 * w2) / (w1 + w2);
    let mut q0 = model.zero_configuration();
    q0.joints = vec![0.2, 1.2];
    let sol = solve_ik(
        &model,
        &q0,
        &[tip_task(t1, w1), tip_task(t2, w2)],
        &IkParams::default(),
    )
    .unwrap();
    let tip = KinematicState::new(&model, &sol.q)
        .unwrap()
        .pose_of("tip")
        .unwrap()
        .translation;
    assert!(
        (tip - expected).norm() < 5e-4,
        "tip {tip:?} vs {expected:?}"
    );
}

#[test]
fn zero_wrench_task_set_leaves_reference_untouched() {
    let model = fixtures::humanoid();
    let clip = fixtures::arm_swing_clip(&model, 40, 0.02);
    let cmd = StiffnessCommand::new(200.0, 2.0).unwrap();
    for k in [0, 13, 39] {
        let frame = ReferenceFrame::from_clip(&clip, k);
        for hand in model.hands() {
            let targets = compliant_targets(&model, &frame, hand, &Wrench::zero(), &cmd).unwrap();
            let tasks = build_task_set(&model, &frame, &targets, &TaskWeights::default()).unwrap();
            let sol = solve_ik(&model, frame.q, &tasks, &IkParams::default()).unwrap();
            let d = sol.q.difference(frame.q).unwrap();
            assert!(
                d.iter().all(|x| x.abs() < 1e-9),
                "frame {k}: {:e}",
                d.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            );
        }
    }
}

#[test]
fn hand_follows_spring_law_while_waist_rests_on_a_limit() {
    let model = fixtures::humanoid();
    let q = fixtures::standing_pose(&model);
    let frame = ReferenceFrame {
        q: &q,
        stance: vec!["left_foot", "right_foot"],
    };
    let cmd = StiffnessCommand::new(243.0, 0.25).unwrap();
    let wrench = Wrench::new(Vec3::new(52.0, 0.0, -2.6), Vec3::zeros());
    let targets = compliant_targets(&model, &frame, "right_hand", &wrench, &cmd).unwrap();
    let tasks = build_task_set(&model, &frame, &targets, &TaskWeights::default()).unwrap();
    let sol = solve_ik(&model, &q, &tasks, &IkParams::default()).unwrap();
    let hand = KinematicState::new(&model, &sol.q)
        .unwrap()
        .pose_of("right_hand")
        .unwrap()
        .translation;
    assert!(
        (hand - targets.p_des).norm() < 0.01,
        "hand residual {}",
        (hand - targets.p_des).norm()
    );
    assert!(sol.q.within_limits(&model, 1e-12));
}

fn humanoid_with_random_targets(seed: u64) -> (Configuration, Vec<IkTask>) {
    let model = fixtures::humanoid();
    let q = fixtures::standing_pose(&model);
    let state = KinematicState::new(&model, &q).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::new();
    for link in ["left_hand", "right_hand", "torso_link"] {
        let p = state.pose_of(link).unwrap().translation;
        let offset = Vec3::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
        );
        tasks.push(
            IkTask::new(
                TaskRole::Custom,
                rng.random_range(0.01..5.0),
                TaskKind::LinkPosition {
                    link: link.into(),
                    target: p + offset,
                },
            )
            .unwrap(),
        );
    }
    (q, tasks)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cost_never_increases_and_limits_hold(seed in 0u64..10_000) {
        let model = fixtures::humanoid();
        let (q, tasks) = humanoid_with_random_targets(seed);
        let sol = solve_ik(&model, &q, &tasks, &IkParams::default()).unwrap();
        for w in sol.cost_history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(sol.q.within_limits(&model, 1e-12));
        prop_assert!(sol.cost_history.len() <= sol.iterations + 1);
    }
}
