//! Forward kinematics, world-frame Jacobians and center of mass.
//!
//! Jacobian columns follow the tangent layout of
//! [`Configuration::integrate`](crate::model::Configuration::integrate):
//! base translation (3), base rotation (3, world frame about the base origin),
//! then one column per movable joint. Rows are angular (3) then linear (3),
//! both in the world frame, taken about the frame origin.

use std::collections::HashMap;

use nalgebra::{DMatrix, Matrix3};

use crate::error::Result;
use crate::model::{Configuration, JointKind, KinematicModel, BASE_DOF};
use crate::spatial::{rot_exp_unchecked, skew, RigidTransform, Vec3};

/// 6 x dof frame Jacobian; rows: angular then linear.
pub type FrameJacobian = DMatrix<f64>;

/// Forward kinematics of one configuration, with the per-joint world data
/// needed to assemble Jacobians.
#[derive(Debug, Clone)]
pub struct KinematicState<'m> {
    model: &'m KinematicModel,
    base_origin: Vec3,
    link_poses: Vec<RigidTransform>,
    joint_axes: Vec<Vec3>,
    joint_origins: Vec<Vec3>,
}

impl<'m> KinematicState<'m> {
    pub fn new(model: &'m KinematicModel, q: &Configuration) -> Result<Self> {
        model.check_width(q)?;
        let nl = model.links().len();
        let nj = model.joints().len();
        let mut link_poses = vec![RigidTransform::identity(); nl];
        let mut joint_axes = vec![Vec3::zeros(); nj];
        let mut joint_origins = vec![Vec3::zeros(); nj];
        link_poses[model.root()] = q.base;
        for &j in model.topo_order() {
            let joint = &model.joints()[j];
            let frame = link_poses[model.joint_parent_link(j)].compose(&joint.origin);
            let motion = match (joint.kind, model.joint_slot(j)) {
                (JointKind::Revolute, Some(s)) => RigidTransform::new(
                    rot_exp_unchecked(&(joint.axis * q.joints[s])),
                    Vec3::zeros(),
                ),
                (JointKind::Prismatic, Some(s)) => {
                    RigidTransform::from_translation(joint.axis * q.joints[s])
                }
                _ => RigidTransform::identity(),
            };
            joint_axes[j] = frame.rotation * joint.axis;
            joint_origins[j] = frame.translation;
            link_poses[model.joint_child_link(j)] = frame.compose(&motion);
        }
        Ok(KinematicState {
            model,
            base_origin: q.base.translation,
            link_poses,
            joint_axes,
            joint_origins,
        })
    }

    pub fn model(&self) -> &KinematicModel {
        self.model
    }

    pub fn link_pose(&self, link: usize) -> &RigidTransform {
        &self.link_poses[link]
    }

    pub fn link_poses(&self) -> &[RigidTransform] {
        &self.link_poses
    }

    pub fn pose_of(&self, name: &str) -> Result<RigidTransform> {
        Ok(self.link_poses[self.model.link_index(name)?])
    }

    /// Linear-velocity Jacobian (3 x dof) of a world point rigidly attached
    /// to `link`.
    pub fn point_jacobian(&self, link: usize, point: &Vec3) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, self.model.dof());
        self.add_point_jacobian(link, point, 1.0, &mut jac);
        jac
    }

    fn add_point_jacobian(&self, link: usize, point: &Vec3, scale: f64, jac: &mut DMatrix<f64>) {
        let model = self.model;
        for k in 0..3 {
            jac[(k, k)] += scale;
        }
        let lever = -skew(&(point - self.base_origin)) * scale;
        let mut block = jac.view_mut((0, 3), (3, 3));
        block += lever;
        for &j in model.support(link) {
            let col = BASE_DOF + model.joint_slot(j).expect("support lists movable joints");
            let a = self.joint_axes[j];
            let v = match model.joints()[j].kind {
                JointKind::Revolute => a.cross(&(point - self.joint_origins[j])),
                _ => a,
            };
            for k in 0..3 {
                jac[(k, col)] += scale * v[k];
            }
        }
    }

    /// 6 x dof Jacobian of the frame origin of `link`.
    pub fn frame_jacobian(&self, link: usize) -> FrameJacobian {
        let model = self.model;
        let mut jac = DMatrix::zeros(6, model.dof());
        let point = self.link_poses[link].translation;
        for k in 0..3 {
            jac[(k + 3, k)] = 1.0;
            jac[(k, k + 3)] = 1.0;
        }
        let lever: Matrix3<f64> = -skew(&(point - self.base_origin));
        jac.view_mut((3, 3), (3, 3)).copy_from(&lever);
        for &j in model.support(link) {
            let col = BASE_DOF + model.joint_slot(j).expect("support lists movable joints");
            let a = self.joint_axes[j];
            match model.joints()[j].kind {
                JointKind::Revolute => {
                    let v = a.cross(&(point - self.joint_origins[j]));
                    for k in 0..3 {
                        jac[(k, col)] = a[k];
                        jac[(k + 3, col)] = v[k];
                    }
                }
                _ => {
                    for k in 0..3 {
                        jac[(k + 3, col)] = a[k];
                    }
                }
            }
        }
        jac
    }

    /// World center of mass of the whole model.
    pub fn center_of_mass(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        for (l, link) in self.model.links().iter().enumerate() {
            acc += link.mass * self.link_poses[l].transform_point(&link.com);
        }
        acc / self.model.total_mass()
    }

    /// 3 x dof Jacobian of [`KinematicState::center_of_mass`].
    pub fn com_jacobian(&self) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, self.model.dof());
        let m = self.model.total_mass();
        for (l, link) in self.model.links().iter().enumerate() {
            if link.mass == 0.0 {
                continue;
            }
            let p = self.link_poses[l].transform_point(&link.com);
            self.add_point_jacobian(l, &p, link.mass / m, &mut jac);
        }
        jac
    }
}

/// World pose of every link, keyed by link name.
pub fn forward_kinematics(
    model: &KinematicModel,
    q: &Configuration,
) -> Result<HashMap<String, RigidTransform>> {
    let state = KinematicState::new(model, q)?;
    Ok(model
        .links()
        .iter()
        .zip(state.link_poses())
        .map(|(l, p)| (l.name.clone(), *p))
        .collect())
}

pub fn frame_jacobian(
    model: &KinematicModel,
    q: &Configuration,
    link: &str,
) -> Result<FrameJacobian> {
    let l = model.link_index(link)?;
    Ok(KinematicState::new(model, q)?.frame_jacobian(l))
}

pub fn center_of_mass(model: &KinematicModel, q: &Configuration) -> Result<Vec3> {
    Ok(KinematicState::new(model, q)?.center_of_mass())
}

pub fn com_jacobian(model: &KinematicModel, q: &Configuration) -> Result<DMatrix<f64>> {
    Ok(KinematicState::new(model, q)?.com_jacobian())
}
