//! Stiffness feasibility bounds, effective stiffness of a dataset and
//! trajectory tracking metrics.
//!
//! The effective-stiffness curve is measured on the kinematic dataset (the
//! supervision target), not on a trained controller.

use std::collections::HashMap;

use crate::augment::AugmentedFrame;
use crate::error::{Error, Result};
use crate::kinematics::KinematicState;
use crate::model::{Configuration, KinematicModel};

/// Sensing noise and required accuracy of force and position estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// N.
    pub force_noise: f64,
    /// m.
    pub position_noise: f64,
    /// N.
    pub force_accuracy: f64,
    /// m.
    pub position_accuracy: f64,
}

impl NoiseBudget {
    pub fn new(
        force_noise: f64,
        position_noise: f64,
        force_accuracy: f64,
        position_accuracy: f64,
    ) -> Result<Self> {
        let b = NoiseBudget {
            force_noise,
            position_noise,
            force_accuracy,
            position_accuracy,
        };
        for v in [
            force_noise,
            position_noise,
            force_accuracy,
            position_accuracy,
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "noise budget entries must be positive: {b:?}"
                )));
            }
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessBounds {
    pub k_min: f64,
    pub k_max: f64,
}

/// A stiffness is resolvable when the force noise moves the position by less
/// than the required position accuracy (`k > k_min`) and the position noise
/// moves the force by less than the required force accuracy (`k < k_max`).
pub fn stiffness_bounds(budget: &NoiseBudget) -> Result<StiffnessBounds> {
    let k_min = budget.force_noise / budget.position_accuracy;
    let k_max = budget.force_accuracy / budget.position_noise;
    if k_min >= k_max {
        return Err(Error::InfeasibleBudget { k_min, k_max });
    }
    Ok(StiffnessBounds { k_min, k_max })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessCurvePoint {
    /// Median commanded k_t of the samples in the bin (N/m).
    pub commanded: f64,
    /// Median force/displacement ratio (N/m).
    pub median_effective: f64,
    pub samples: usize,
}

/// Bins over commanded translational stiffness.
#[derive(Debug, Clone, PartialEq)]
pub enum StiffnessBins {
    /// `count` log-spaced bins over `[lo, hi]`.
    LogSpaced { count: usize, lo: f64, hi: f64 },
    /// Explicit increasing edges; `n` edges make `n - 1` bins.
    Edges(Vec<f64>),
}

impl StiffnessBins {
    pub fn edges(&self) -> Result<Vec<f64>> {
        let edges = match self {
            StiffnessBins::LogSpaced { count, lo, hi } => {
                if *count == 0 || !(*lo > 0.0 && hi > lo) {
                    return Err(Error::InvalidArgument(format!(
                        "invalid log bins: {self:?}"
                    )));
                }
                let (a, b) = (lo.ln(), hi.ln());
                let mut e: Vec<f64> = (0..=*count)
                    .map(|i| (a + (b - a) * i as f64 / *count as f64).exp())
                    .collect();
                e[0] = *lo;
                e[*count] = *hi;
                e
            }
            StiffnessBins::Edges(e) => e.clone(),
        };
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "bin edges must be increasing: {edges:?}"
            )));
        }
        Ok(edges)
    }
}

/// Fraction of the event peak force a frame must reach to count as plateau.
pub const PLATEAU_FRACTION: f64 = 0.99;
/// Displacements below this (m) are excluded from the ratio.
pub const MIN_DISPLACEMENT: f64 = 1e-3;

/// Median of a non-empty slice.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// One plateau sample: commanded stiffness, force magnitude, displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauSample {
    pub event: usize,
    pub commanded: f64,
    pub force: f64,
    pub displacement: f64,
}

/// Plateau frames of every forced event: frames whose force is within 1% of
/// the event's peak and whose hand displacement is at least 1 mm.
pub fn plateau_samples(frames: &[AugmentedFrame]) -> Vec<PlateauSample> {
    let mut peaks: HashMap<usize, f64> = HashMap::new();
    for f in frames {
        if let Some(e) = f.event {
            let p = peaks.entry(e).or_insert(0.0);
            *p = p.max(f.wrench.force.norm());
        }
    }
    let mut out = Vec::new();
    for f in frames {
        let (Some(e), Some(cmd), Some(a), Some(b)) = (f.event, f.cmd, f.p_aug_link, f.p_ref_link)
        else {
            continue;
        };
        let force = f.wrench.force.norm();
        let peak = peaks[&e];
        if peak <= 0.0 || force < PLATEAU_FRACTION * peak {
            continue;
        }
        let displacement = (a - b).norm();
        if displacement < MIN_DISPLACEMENT {
            continue;
        }
        out.push(PlateauSample {
            event: e,
            commanded: cmd.k_t,
            force,
            displacement,
        });
    }
    out
}

/// Median force/displacement ratio of plateau frames per commanded-stiffness
/// bin. Empty bins are omitted.
pub fn effective_stiffness(
    frames: &[AugmentedFrame],
    bins: &StiffnessBins,
) -> Result<Vec<StiffnessCurvePoint>> {
    stiffness_curve(&plateau_samples(frames), bins)
}

/// Binned curve over precomputed plateau samples, e.g. pooled from several
/// datasets whose event ids overlap.
pub fn stiffness_curve(
    samples: &[PlateauSample],
    bins: &StiffnessBins,
) -> Result<Vec<StiffnessCurvePoint>> {
    let edges = bins.edges()?;
    let nb = edges.len() - 1;
    let mut commanded: Vec<Vec<f64>> = vec![Vec::new(); nb];
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); nb];
    for s in samples {
        let last = edges[nb];
        if s.commanded < edges[0] || s.commanded > last {
            continue;
        }
        let b = edges[1..]
            .iter()
            .position(|&e| s.commanded < e)
            .unwrap_or(nb - 1);
        commanded[b].push(s.commanded);
        ratios[b].push(s.force / s.displacement);
    }
    let mut out = Vec::new();
    for b in 0..nb {
        if ratios[b].is_empty() {
            log::warn!(
                "stiffness bin [{}, {}) has no plateau samples",
                edges[b],
                edges[b + 1]
            );
            continue;
        }
        out.push(StiffnessCurvePoint {
            commanded: median(&mut commanded[b]),
            median_effective: median(&mut ratios[b]),
            samples: ratios[b].len(),
        });
    }
    Ok(out)
}

pub const CURVE_CSV_HEADER: &str = "commanded_stiffness,median_effective_stiffness,sample_count";

pub fn curve_to_csv(points: &[StiffnessCurvePoint]) -> String {
    let mut out = format!("{CURVE_CSV_HEADER}\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.commanded, p.median_effective, p.samples
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingMetrics {
    /// Mean absolute joint difference (degrees), base excluded.
    pub joint_error_deg: f64,
    pub joint_error_sem_deg: f64,
    /// Mean keypoint position difference (cm).
    pub keypoint_error_cm: f64,
    pub keypoint_error_sem_cm: f64,
    pub frames: usize,
}

pub const METRICS_CSV_HEADER: &str =
    "joint_error_deg,joint_error_sem_deg,keypoint_error_cm,keypoint_error_sem_cm,frames";

impl TrackingMetrics {
    pub fn to_csv(&self) -> String {
        format!(
            "{METRICS_CSV_HEADER}\n{:.6},{:.6},{:.6},{:.6},{}\n",
            self.joint_error_deg,
            self.joint_error_sem_deg,
            self.keypoint_error_cm,
            self.keypoint_error_sem_cm,
            self.frames
        )
    }
}

fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean joint error in degrees and mean keypoint error in centimetres
/// between two trajectories, with standard errors over frames.
pub fn tracking_metrics(
    model: &KinematicModel,
    a: &[Configuration],
    b: &[Configuration],
) -> Result<TrackingMetrics> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("trajectories are empty".into()));
    }
    let keypoints: Vec<usize> = model
        .keypoints()
        .iter()
        .map(|k| model.link_index(k))
        .collect::<Result<_>>()?;
    let mut joint = Vec::with_capacity(a.len());
    let mut key = Vec::with_capacity(a.len());
    for (qa, qb) in a.iter().zip(b) {
        model.check_width(qa)?;
        model.check_width(qb)?;
        let n = qa.joints.len();
        let dj = if n == 0 {
            0.0
        } else {
            qa.joints
                .iter()
                .zip(&qb.joints)
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / n as f64
        };
        joint.push(dj.to_degrees());
        if keypoints.is_empty() {
            key.push(0.0);
            continue;
        }
        let sa = KinematicState::new(model, qa)?;
        let sb = KinematicState::new(model, qb)?;
        let dk = keypoints
            .iter()
            .map(|&l| (sa.link_pose(l).translation - sb.link_pose(l).translation).norm())
            .sum::<f64>()
            / keypoints.len() as f64;
        key.push(dk * 100.0);
    }
    let (joint_error_deg, joint_error_sem_deg) = mean_and_sem(&joint);
    let (keypoint_error_cm, keypoint_error_sem_cm) = mean_and_sem(&key);
    Ok(TrackingMetrics {
        joint_error_deg,
        joint_error_sem_deg,
        keypoint_error_cm,
        keypoint_error_sem_cm,
        frames: a.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ik::StiffnessCommand;
    use crate::model::MotionClip;
    use crate::spatial::{Vec3, Wrench};

    #[test]
    fn bounds_from_worked_budget() {
        let b = stiffness_bounds(&NoiseBudget::new(4.0, 0.01, 10.0, 0.10).unwrap()).unwrap();
        assert_eq!(b.k_min.round(), 40.0);
        assert_eq!(b.k_max.round(), 1000.0);
        let b = stiffness_bounds(&NoiseBudget::new(8.0, 0.01, 10.0, 0.10).unwrap()).unwrap();
        assert!((b.k_min - 80.0).abs() < 1e-9);
        assert!(matches!(
            stiffness_bounds(&NoiseBudget::new(200.0, 0.01, 10.0, 0.10).unwrap()),
            Err(Error::InfeasibleBudget { .. })
        ));
        assert!(NoiseBudget::new(0.0, 0.01, 10.0, 0.1).is_err());
    }

    fn forced_frame(
        clip: &MotionClip,
        k: usize,
        event: usize,
        k_t: f64,
        force: f64,
        d: f64,
    ) -> AugmentedFrame {
        let mut f = AugmentedFrame::reference(clip, k);
        f.event = Some(event);
        f.cmd = Some(StiffnessCommand { k_t, k_r: 1.0 });
        f.wrench = Wrench::new(Vec3::new(force, 0.0, 0.0), Vec3::zeros());
        f.p_ref_link = Some(Vec3::zeros());
        f.p_aug_link = Some(Vec3::new(d, 0.0, 0.0));
        f
    }

    #[test]
    fn constant_ratio_gives_exact_median() {
        let model = fixtures::humanoid();
        let clip = fixtures::standing_clip(&model, 10, 0.02);
        let frames = vec![
            forced_frame(&clip, 0, 0, 100.0, 10.0, 0.1),
            forced_frame(&clip, 1, 1, 100.0, 20.0, 0.2),
            // Below the plateau of event 1.
            forced_frame(&clip, 2, 1, 100.0, 5.0, 0.01),
            // Displacement under 1 mm.
            forced_frame(&clip, 3, 2, 100.0, 0.05, 0.0005),
        ];
        let curve =
            effective_stiffness(&frames, &StiffnessBins::Edges(vec![40.0, 1000.0])).unwrap();
        assert_eq!(curve.len(), 1);
        assert_eq!(curve[0].samples, 2);
        assert!((curve[0].median_effective - 100.0).abs() < 1e-9);
        assert_eq!(curve[0].commanded, 100.0);
    }

    #[test]
    fn empty_bins_are_omitted() {
        let model = fixtures::humanoid();
        let clip = fixtures::standing_clip(&model, 10, 0.02);
        let frames = vec![forced_frame(&clip, 0, 0, 500.0, 10.0, 0.02)];
        let curve = effective_stiffness(
            &frames,
            &StiffnessBins::LogSpaced {
                count: 4,
                lo: 40.0,
                hi: 1000.0,
            },
        )
        .unwrap();
        assert_eq!(curve.len(), 1);
        assert!(curve_to_csv(&curve).starts_with(CURVE_CSV_HEADER));
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let model = fixtures::humanoid();
        let clip = fixtures::arm_swing_clip(&model, 20, 0.02);
        let m = tracking_metrics(&model, &clip.frames, &clip.frames).unwrap();
        assert_eq!((m.joint_error_deg, m.keypoint_error_cm), (0.0, 0.0));
    }

    #[test]
    fn uniform_one_degree_offset() {
        let model = fixtures::humanoid();
        let clip = fixtures::arm_swing_clip(&model, 20, 0.02);
        let shifted: Vec<_> = clip
            .frames
            .iter()
            .map(|q| {
                let mut q = q.clone();
                q.joints.iter_mut().for_each(|x| *x += 1f64.to_radians());
                q
            })
            .collect();
        let m = tracking_metrics(&model, &clip.frames, &shifted).unwrap();
        assert!((m.joint_error_deg - 1.0).abs() < 1e-12);
        assert!(m.joint_error_sem_deg < 1e-12);
        assert!(tracking_metrics(&model, &clip.frames, &shifted[1..]).is_err());
    }
}
