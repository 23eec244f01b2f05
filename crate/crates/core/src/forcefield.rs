//! Environment springs: the virtual force field pulling a link toward a set
//! point, and the series-spring contact force of a collision.

use crate::error::{Error, Result};
use crate::spatial::{rot_log, RigidTransform, Vec3, Wrench};

/// Stiffness of a virtual environment spring.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnvStiffness {
    /// N/m.
    pub linear: f64,
    /// N·m/rad.
    pub angular: f64,
}

impl EnvStiffness {
    pub fn new(linear: f64, angular: f64) -> Result<Self> {
        if !(linear.is_finite() && linear > 0.0 && angular.is_finite() && angular > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "environment stiffness must be positive (linear = {linear}, angular = {angular})"
            )));
        }
        Ok(EnvStiffness { linear, angular })
    }
}

/// Wrench exerted on a link at `link_pose` by a spring anchored at
/// `set_point`: `F = K_lin (p_set - p)`, `tau = K_ang R log(R^T R_set)`.
pub fn forcefield_wrench(
    link_pose: &RigidTransform,
    set_point: &RigidTransform,
    k_env: &EnvStiffness,
) -> Result<Wrench> {
    let force = (set_point.translation - link_pose.translation) * k_env.linear;
    let rel = link_pose.rotation.transpose() * set_point.rotation;
    let torque = link_pose.rotation.rotate(&rot_log(&rel)?) * k_env.angular;
    Ok(Wrench::new(force, torque))
}

/// Quasi-static equilibrium of a robot spring in series with an
/// environment spring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSpring {
    /// Contact force magnitude (N).
    pub force: f64,
    /// Share of the penetration absorbed by the robot (m).
    pub robot_deflection: f64,
    /// Share of the penetration absorbed by the environment (m).
    pub env_deflection: f64,
}

/// Contact force for a penetration `pen` of a robot spring `k_robot` in
/// series with an environment spring `k_env`. Negative penetration is no
/// contact.
pub fn series_spring_equilibrium(pen: f64, k_robot: f64, k_env: f64) -> Result<SeriesSpring> {
    if !(k_robot.is_finite() && k_robot > 0.0 && k_env.is_finite() && k_env > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "series stiffness must be positive (robot = {k_robot}, env = {k_env})"
        )));
    }
    if !pen.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "penetration is not finite: {pen}"
        )));
    }
    let pen = pen.max(0.0);
    let force = pen * k_robot * k_env / (k_robot + k_env);
    let robot_deflection = force / k_robot;
    Ok(SeriesSpring {
        force,
        robot_deflection,
        env_deflection: pen - robot_deflection,
    })
}

/// Closed-form translational equilibrium of a link whose reference sits at
/// `p_ref`, commanded at `k_robot`, against a field anchored at `p_set`.
pub fn translational_equilibrium(
    p_ref: &Vec3,
    p_set: &Vec3,
    k_robot: f64,
    k_env: f64,
) -> Result<Vec3> {
    if !(k_robot > 0.0 && k_env >= 0.0) {
        return Err(Error::InvalidArgument("stiffness must be positive".into()));
    }
    Ok(p_ref + (p_set - p_ref) * (k_env / (k_robot + k_env)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::rot_exp;
    use approx::assert_relative_eq;

    #[test]
    fn linear_spring_pulls_toward_set_point() {
        let link = RigidTransform::identity();
        let set = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.1));
        let w = forcefield_wrench(&link, &set, &EnvStiffness::new(500.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(w.force, Vec3::new(0.0, 0.0, 50.0), epsilon = 1e-12);
        assert_eq!(w.torque, Vec3::zeros());
    }

    #[test]
    fn angular_spring_torque_is_world_frame() {
        let base = rot_exp(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let link = RigidTransform::new(base, Vec3::zeros());
        let set = RigidTransform::new(
            base * rot_exp(&Vec3::new(0.2, 0.0, 0.0)).unwrap(),
            Vec3::zeros(),
        );
        let w = forcefield_wrench(&link, &set, &EnvStiffness::new(1.0, 3.0).unwrap()).unwrap();
        let expected = base.rotate(&Vec3::new(0.6, 0.0, 0.0));
        assert_relative_eq!(w.torque, expected, epsilon = 1e-12);
    }

    #[test]
    fn series_spring_halves_equal_springs() {
        let s = series_spring_equilibrium(0.2, 100.0, 100.0).unwrap();
        assert_relative_eq!(s.force, 10.0, epsilon = 1e-12);
        assert_relative_eq!(s.robot_deflection, 0.1, epsilon = 1e-12);
        assert_relative_eq!(s.env_deflection, 0.1, epsilon = 1e-12);
        assert_eq!(
            series_spring_equilibrium(0.0, 100.0, 100.0).unwrap().force,
            0.0
        );
        assert!(series_spring_equilibrium(0.1, 0.0, 100.0).is_err());
    }

    #[test]
    fn rigid_wall_limit() {
        let s = series_spring_equilibrium(0.1, 100.0, 1e8).unwrap();
        assert!((s.force - 10.0).abs() / 10.0 < 1e-4);
        assert!((s.robot_deflection - 0.1).abs() < 1e-5);
    }

    #[test]
    fn equilibrium_between_springs() {
        let p = translational_equilibrium(&Vec3::zeros(), &Vec3::new(0.3, 0.0, 0.0), 100.0, 200.0)
            .unwrap();
        assert_relative_eq!(p.x, 0.2, epsilon = 1e-15);
    }
}
