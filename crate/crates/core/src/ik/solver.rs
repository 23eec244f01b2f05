//! Damped least-squares solve of the weighted task objective.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use super::{IkTask, TaskKind};
use crate::error::{Error, Result};
use crate::kinematics::KinematicState;
use crate::model::{Configuration, KinematicModel, BASE_DOF};
use crate::spatial::{left_jacobian_inverse, rot_log, Vec3};

/// Maximum number of step halvings per iteration.
pub const MAX_HALVINGS: usize = 8;

/// Distance within which a joint counts as resting on a limit.
const LIMIT_EPS: f64 = 1e-9;

/// Solves `(JᵀJ + λI) dq = -Jᵀr`, Cholesky first with an LU fallback.
fn damped_step(jac: &DMatrix<f64>, r: &DVector<f64>, damping: f64) -> Result<DVector<f64>> {
    let mut h = jac.transpose() * jac;
    for k in 0..h.nrows() {
        h[(k, k)] += damping;
    }
    let g = -(jac.transpose() * r);
    match h.clone().cholesky() {
        Some(c) => Ok(c.solve(&g)),
        None => h
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::SolverDiverged("singular normal equations".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkParams {
    /// Levenberg damping added to the normal equations.
    pub damping: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the infinity norm of the applied step.
    pub tolerance: f64,
    /// Cap on the infinity norm of a single step.
    pub step_cap: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            damping: 1e-4,
            max_iterations: 100,
            tolerance: 1e-6,
            step_cap: 0.2,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.damping.is_finite()
            && self.damping > 0.0
            && self.max_iterations > 0
            && self.tolerance.is_finite()
            && self.tolerance > 0.0
            && self.step_cap.is_finite()
            && self.step_cap > 0.0
            && self.tolerance < self.step_cap;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid IK parameters: {self:?}"
            )))
        }
    }
}

/// Unweighted residual norms of one task at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskResidual {
    pub position: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: Configuration,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value before the first step and after every accepted step.
    pub cost_history: Vec<f64>,
    /// One entry per task, in task order.
    pub residuals: Vec<TaskResidual>,
}

impl IkSolution {
    pub fn final_cost(&self) -> f64 {
        *self
            .cost_history
            .last()
            .expect("cost history is never empty")
    }
}

enum Resolved<'t> {
    Pose(usize, &'t IkTask),
    Position(usize, &'t IkTask),
    ComXy(&'t IkTask),
    Posture(&'t IkTask),
}

impl Resolved<'_> {
    fn rows(&self, dof: usize) -> usize {
        match self {
            Resolved::Pose(..) => 6,
            Resolved::Position(..) => 3,
            Resolved::ComXy(..) => 2,
            Resolved::Posture(..) => dof,
        }
    }
}

struct Evaluation {
    /// sqrt(w)-scaled stacked residual.
    r: DVector<f64>,
    /// sqrt(w)-scaled stacked Jacobian over all dof columns.
    jac: Option<DMatrix<f64>>,
    norms: Vec<TaskResidual>,
}

fn evaluate(
    model: &KinematicModel,
    tasks: &[Resolved<'_>],
    q: &Configuration,
    rows: usize,
    with_jacobian: bool,
) -> Result<Evaluation> {
    let dof = model.dof();
    let state = KinematicState::new(model, q)?;
    let mut r = DVector::zeros(rows);
    let mut jac = with_jacobian.then(|| DMatrix::zeros(rows, dof));
    let mut norms = Vec::with_capacity(tasks.len());
    let mut row = 0;
    for task in tasks {
        let n = task.rows(dof);
        match task {
            Resolved::Pose(link, t) => {
                let TaskKind::LinkPose { target, .. } = &t.kind else {
                    unreachable!()
                };
                let s = t.weight.sqrt();
                let pose = state.link_pose(*link);
                let e_rot = rot_log(&(pose.rotation * target.rotation.transpose()))?;
                let e_pos = pose.translation - target.translation;
                r.rows_mut(row, 3).copy_from(&(e_rot * s));
                r.rows_mut(row + 3, 3).copy_from(&(e_pos * s));
                if let Some(j) = jac.as_mut() {
                    let fj = state.frame_jacobian(*link);
                    let jl = left_jacobian_inverse(&e_rot);
                    j.view_mut((row, 0), (3, dof))
                        .copy_from(&(jl * fj.rows(0, 3) * s));
                    j.view_mut((row + 3, 0), (3, dof))
                        .copy_from(&(fj.rows(3, 3) * s));
                }
                norms.push(TaskResidual {
                    position: e_pos.norm(),
                    rotation: e_rot.norm(),
                });
            }
            Resolved::Position(link, t) => {
                let TaskKind::LinkPosition { target, .. } = &t.kind else {
                    unreachable!()
                };
                let s = t.weight.sqrt();
                let e_pos = state.link_pose(*link).translation - target;
                r.rows_mut(row, 3).copy_from(&(e_pos * s));
                if let Some(j) = jac.as_mut() {
                    let fj = state.frame_jacobian(*link);
                    j.view_mut((row, 0), (3, dof))
                        .copy_from(&(fj.rows(3, 3) * s));
                }
                norms.push(TaskResidual {
                    position: e_pos.norm(),
                    rotation: 0.0,
                });
            }
            Resolved::ComXy(t) => {
                let TaskKind::ComXy { target } = &t.kind else {
                    unreachable!()
                };
                let s = t.weight.sqrt();
                let com = state.center_of_mass();
                let e = nalgebra::Vector2::new(com.x - target.x, com.y - target.y);
                r.rows_mut(row, 2).copy_from(&(e * s));
                if let Some(j) = jac.as_mut() {
                    let cj = state.com_jacobian();
                    j.view_mut((row, 0), (2, dof))
                        .copy_from(&(cj.rows(0, 2) * s));
                }
                norms.push(TaskResidual {
                    position: e.norm(),
                    rotation: 0.0,
                });
            }
            Resolved::Posture(t) => {
                let TaskKind::Posture { target } = &t.kind else {
                    unreachable!()
                };
                let s = t.weight.sqrt();
                let e = q.difference(target)?;
                for (k, v) in e.iter().enumerate() {
                    r[row + k] = v * s;
                }
                if let Some(j) = jac.as_mut() {
                    for k in 0..dof {
                        j[(row + k, k)] = s;
                    }
                    let e_rot = Vec3::new(e[3], e[4], e[5]);
                    let jl: Matrix3<f64> = left_jacobian_inverse(&e_rot) * s;
                    j.view_mut((row + 3, 3), (3, 3)).copy_from(&jl);
                }
                let joints = &e[BASE_DOF..];
                let rot = Vec3::new(e[3], e[4], e[5]).norm();
                let pos = (Vec3::new(e[0], e[1], e[2]).norm_squared()
                    + joints.iter().map(|x| x * x).sum::<f64>())
                .sqrt();
                norms.push(TaskResidual {
                    position: pos,
                    rotation: rot,
                });
            }
        }
        row += n;
    }
    Ok(Evaluation { r, jac, norms })
}

/// Minimizes `sum_i w_i ||e_i(q)||^2` from `q_init` with damped Gauss-Newton
/// steps, a per-step infinity-norm cap, joint-limit clamping and a halving
/// line search that keeps the cost non-increasing.
pub fn solve_ik(
    model: &KinematicModel,
    q_init: &Configuration,
    tasks: &[IkTask],
    params: &IkParams,
) -> Result<IkSolution> {
    params.validate()?;
    model.check_width(q_init)?;
    if !q_init.is_finite() {
        return Err(Error::InvalidArgument(
            "initial configuration is not finite".into(),
        ));
    }
    let dof = model.dof();
    let mut resolved = Vec::with_capacity(tasks.len());
    for t in tasks {
        resolved.push(match &t.kind {
            TaskKind::LinkPose { link, .. } => Resolved::Pose(model.link_index(link)?, t),
            TaskKind::LinkPosition { link, .. } => Resolved::Position(model.link_index(link)?, t),
            TaskKind::ComXy { .. } => Resolved::ComXy(t),
            TaskKind::Posture { target } => {
                model.check_width(target)?;
                Resolved::Posture(t)
            }
        });
    }
    let rows: usize = resolved.iter().map(|t| t.rows(dof)).sum();
    let first = if model.fixed_base() { BASE_DOF } else { 0 };
    let limits: Vec<(f64, f64)> = model.limits().collect();
    let active = dof - first;

    let mut q = q_init.clone();
    model.clamp_to_limits(&mut q);
    let mut eval = evaluate(model, &resolved, &q, rows, true)?;
    let mut cost = eval.r.norm_squared();
    let mut cost_history = vec![cost];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iterations {
        iterations += 1;
        let full = eval.jac.take().expect("jacobian requested");
        let mut jac = full.columns(first, active).into_owned();
        // Active set: joints resting on a limit whose step points outward
        // are frozen and the step is re-solved over the others.
        let mut step;
        loop {
            step = damped_step(&jac, &eval.r, params.damping)?;
            let mut changed = false;
            for k in 0..active {
                let t = first + k;
                if t < BASE_DOF || step[k] == 0.0 {
                    continue;
                }
                let (lo, hi) = limits[t - BASE_DOF];
                let v = q.joints[t - BASE_DOF];
                if (v <= lo + LIMIT_EPS && step[k] < 0.0) || (v >= hi - LIMIT_EPS && step[k] > 0.0)
                {
                    jac.column_mut(k).fill(0.0);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !step.iter().all(|x| x.is_finite()) {
            return Err(Error::SolverDiverged(format!(
                "non-finite step at iteration {iterations}"
            )));
        }
        let amax = step.amax();
        let mut scale = if amax > params.step_cap {
            params.step_cap / amax
        } else {
            1.0
        };
        // Shorten the step so the first joint to reach a limit stops on it.
        let mut truncated = false;
        for k in 0..active {
            let t = first + k;
            if t < BASE_DOF {
                continue;
            }
            let (lo, hi) = limits[t - BASE_DOF];
            let v = q.joints[t - BASE_DOF];
            let d = step[k] * scale;
            let room = if d < 0.0 { lo - v } else { hi - v };
            if (d < 0.0 && v + d < lo) || (d > 0.0 && v + d > hi) {
                scale *= (room / d).clamp(0.0, 1.0);
                truncated = true;
            }
        }
        let mut full_step = vec![0.0; dof];
        for k in 0..active {
            full_step[first + k] = step[k] * scale;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial_step: Vec<f64> = full_step.iter().map(|d| d * alpha).collect();
            let mut trial = q.integrate(&trial_step);
            model.clamp_to_limits(&mut trial);
            // A trial that lands on the log singularity is treated as a cost increase.
            if let Ok(e) = evaluate(model, &resolved, &trial, rows, false) {
                let c = e.r.norm_squared();
                if c.is_finite() && c <= cost {
                    accepted = Some((trial, c));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, c)) = accepted else {
            break;
        };
        let applied = trial
            .difference(&q)?
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        q = trial;
        cost = c;
        cost_history.push(cost);
        eval = evaluate(model, &resolved, &q, rows, true)?;
        if applied < params.tolerance && !truncated {
            converged = true;
            break;
        }
    }
    if eval.jac.is_none() {
        eval = evaluate(model, &resolved, &q, rows, false)?;
    }
    if !q.is_finite() {
        return Err(Error::SolverDiverged("non-finite configuration".into()));
    }
    Ok(IkSolution {
        q,
        iterations,
        converged,
        cost_history,
        residuals: eval.norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ik::{IkTask, TaskKind, TaskRole};
    use crate::kinematics::KinematicState;
    use crate::spatial::RigidTransform;

    #[test]
    fn reaches_a_reachable_point_on_the_arm() {
        let model = fixtures::planar_arm();
        let mut q0 = model.zero_configuration();
        q0.joints = vec![0.3, 0.5];
        // Tip target computed from a known configuration.
        let mut qt = q0.clone();
        qt.joints = vec![0.7, 1.1];
        let target = KinematicState::new(&model, &qt)
            .unwrap()
            .pose_of("tip")
            .unwrap()
            .translation;
        let tasks = vec![IkTask::new(
            TaskRole::Custom,
            1.0,
            TaskKind::LinkPosition {
                link: "tip".into(),
                target,
            },
        )
        .unwrap()];
        let sol = solve_ik(&model, &q0, &tasks, &IkParams::default()).unwrap();
        assert!(sol.residuals[0].position < 1e-5, "{:?}", sol.residuals);
        for w in sol.cost_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn fixed_base_never_moves_base() {
        let model = fixtures::planar_arm();
        let q0 = model.zero_configuration();
        let tasks = vec![IkTask::new(
            TaskRole::Custom,
            1.0,
            TaskKind::LinkPosition {
                link: "tip".into(),
                target: Vec3::new(0.0, 5.0, 0.0),
            },
        )
        .unwrap()];
        let sol = solve_ik(&model, &q0, &tasks, &IkParams::default()).unwrap();
        assert_eq!(sol.q.base, RigidTransform::identity());
        assert!(sol.q.within_limits(&model, 0.0));
    }

    #[test]
    fn already_solved_stops_immediately() {
        let model = fixtures::humanoid();
        let q = fixtures::standing_pose(&model);
        let tasks = vec![IkTask::new(
            TaskRole::JointPosture,
            1e-4,
            TaskKind::Posture { target: q.clone() },
        )
        .unwrap()];
        let sol = solve_ik(&model, &q, &tasks, &IkParams::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.q, q);
    }

    #[test]
    fn rejects_bad_params() {
        let model = fixtures::planar_arm();
        let q = model.zero_configuration();
        let p = IkParams {
            damping: 0.0,
            ..IkParams::default()
        };
        assert!(solve_ik(&model, &q, &[], &p).is_err());
    }
}
