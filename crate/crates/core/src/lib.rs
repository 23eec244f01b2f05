//! Offline compliant motion augmentation for humanoid reference clips.
//!
//! Given a kinematic model and a reference clip, the pipeline samples
//! interaction events (ramped wrenches and simulated collisions) at commanded
//! stiffnesses, solves a weighted differential-IK problem per frame so the
//! forced hand behaves like a spring about its reference while feet, balance
//! and posture are preserved, rejects or scales down infeasible events, and
//! writes a dataset of `(q_ref, wrench, stiffness command, q_aug)` frames.
//!
//! Module map:
//! - [`spatial`]: rotations, transforms, wrenches, SO(3) exp/log
//! - [`model`]: model/clip files, configurations
//! - [`kinematics`]: forward kinematics, Jacobians, center of mass
//! - [`ik`]: spring-law targets, task set, damped least-squares solver
//! - [`events`]: event sampling and wrench profiles
//! - [`forcefield`]: virtual spring law and series-spring equilibrium
//! - [`augment`]: per-event simulation, feasibility gate, rejection loop
//! - [`dataset`]: dataset manifest and frame encodings
//! - [`analysis`]: stiffness bounds, effective stiffness, tracking metrics
//! - [`rlprep`]: observation layout, reward terms, RSI/termination anchors

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod augment;
pub mod config;
pub mod dataset;
pub mod error;
pub mod events;
pub mod fixtures;
pub mod forcefield;
pub mod ik;
pub mod kinematics;
pub mod model;
pub mod rlprep;
pub mod spatial;

pub use error::{Error, Result};
