//! Kinematic robot description, configurations and reference motion clips.
//!
//! The floating base is an implicit free joint attached to the root link; its
//! pose lives in [`Configuration::base`] and is never listed among the joints.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::KinematicState;
use crate::spatial::{rot_log, RigidTransform, Rotation, Vec3, QUATERNION_NORM_TOL};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const CLIP_FORMAT_VERSION: u32 = 1;

/// Number of degrees of freedom of the floating base: translation then rotation.
pub const BASE_DOF: usize = 6;

const AXIS_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    /// kg
    pub mass: f64,
    /// Center of mass in the link frame (m).
    pub com: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Pose of the joint frame in the parent link frame.
    pub origin: RigidTransform,
    /// Unit axis in the joint frame. Unused for fixed joints.
    pub axis: Vec3,
    pub lower: f64,
    pub upper: f64,
}

/// Validated kinematic tree with named link sets.
#[derive(Debug, Clone)]
pub struct KinematicModel {
    name: String,
    fixed_base: bool,
    links: Vec<Link>,
    joints: Vec<Joint>,
    hands: Vec<String>,
    feet: Vec<String>,
    keypoints: Vec<String>,

    root: usize,
    link_index: HashMap<String, usize>,
    joint_parent: Vec<usize>,
    joint_child: Vec<usize>,
    /// Configuration slot of each joint, `None` for fixed joints.
    joint_slot: Vec<Option<usize>>,
    /// Joints in parent-before-child order.
    topo: Vec<usize>,
    /// For each link, the movable joints on its path from the root.
    support: Vec<Vec<usize>>,
    /// Movable joints in configuration order.
    movable: Vec<usize>,
    total_mass: f64,
}

impl KinematicModel {
    /// Validates and indexes a model.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        fixed_base: bool,
        links: Vec<Link>,
        joints: Vec<Joint>,
        hands: Vec<String>,
        feet: Vec<String>,
        keypoints: Vec<String>,
    ) -> Result<Self> {
        let mut link_index = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.name.clone(), i).is_some() {
                return Err(Error::model(&l.name, "duplicate link name"));
            }
            if !(l.mass.is_finite() && l.mass >= 0.0) {
                return Err(Error::model(
                    &l.name,
                    "mass must be finite and non-negative",
                ));
            }
            if !l.com.iter().all(|x| x.is_finite()) {
                return Err(Error::model(&l.name, "center of mass is not finite"));
            }
        }

        let mut seen_joints = HashMap::new();
        let mut joint_parent = Vec::with_capacity(joints.len());
        let mut joint_child = Vec::with_capacity(joints.len());
        let mut parent_of: Vec<Option<usize>> = vec![None; links.len()];
        for (j, joint) in joints.iter().enumerate() {
            if seen_joints.insert(joint.name.clone(), j).is_some() {
                return Err(Error::model(&joint.name, "duplicate joint name"));
            }
            let p = *link_index.get(&joint.parent).ok_or_else(|| {
                Error::model(
                    &joint.name,
                    format!("unknown parent link `{}`", joint.parent),
                )
            })?;
            let c = *link_index.get(&joint.child).ok_or_else(|| {
                Error::model(&joint.name, format!("unknown child link `{}`", joint.child))
            })?;
            if p == c {
                return Err(Error::model(
                    &joint.name,
                    "cycle: joint connects a link to itself",
                ));
            }
            if let Some(prev) = parent_of[c] {
                return Err(Error::model(
                    &joint.name,
                    format!(
                        "link `{}` already has parent joint `{}`",
                        joint.child, joints[prev].name
                    ),
                ));
            }
            parent_of[c] = Some(j);
            if !joint.origin.is_finite() {
                return Err(Error::model(&joint.name, "origin is not finite"));
            }
            if joint.kind != JointKind::Fixed {
                let n = joint.axis.norm();
                if !n.is_finite() || (n - 1.0).abs() > AXIS_NORM_TOL {
                    return Err(Error::model(
                        &joint.name,
                        format!("non-unit axis (norm {n})"),
                    ));
                }
                if !(joint.lower.is_finite() && joint.upper.is_finite()) {
                    return Err(Error::model(&joint.name, "limits must be finite"));
                }
                if joint.lower > joint.upper {
                    return Err(Error::model(
                        &joint.name,
                        format!(
                            "lower limit {} exceeds upper limit {}",
                            joint.lower, joint.upper
                        ),
                    ));
                }
            }
            joint_parent.push(p);
            joint_child.push(c);
        }

        // Cycle check: walking up from any link must terminate.
        for start in 0..links.len() {
            let mut cur = start;
            for _ in 0..=links.len() {
                match parent_of[cur] {
                    Some(j) => {
                        cur = joint_parent[j];
                        if cur == start {
                            return Err(Error::model(&joints[j].name, "cycle in kinematic tree"));
                        }
                    }
                    None => break,
                }
            }
        }

        let roots: Vec<usize> = (0..links.len())
            .filter(|&i| parent_of[i].is_none())
            .collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::model(name_or(&links), "model has no root link")),
            many => {
                return Err(Error::model(
                    &links[many[1]].name,
                    format!(
                        "multiple root links (`{}` and `{}`)",
                        links[many[0]].name, links[many[1]].name
                    ),
                ))
            }
        };

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (j, &p) in joint_parent.iter().enumerate() {
            children[p].push(j);
        }
        let mut topo = Vec::with_capacity(joints.len());
        let mut queue = VecDeque::from([root]);
        while let Some(l) = queue.pop_front() {
            for &j in &children[l] {
                topo.push(j);
                queue.push_back(joint_child[j]);
            }
        }

        let mut joint_slot = vec![None; joints.len()];
        let mut movable = Vec::new();
        for (j, joint) in joints.iter().enumerate() {
            if joint.kind != JointKind::Fixed {
                joint_slot[j] = Some(movable.len());
                movable.push(j);
            }
        }

        let mut support: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for &j in &topo {
            let mut s = support[joint_parent[j]].clone();
            if joint_slot[j].is_some() {
                s.push(j);
            }
            support[joint_child[j]] = s;
        }

        for (set, names) in [
            ("hands", &hands),
            ("feet", &feet),
            ("keypoints", &keypoints),
        ] {
            for n in names {
                if !link_index.contains_key(n) {
                    return Err(Error::model(
                        n,
                        format!("link listed in `{set}` does not exist"),
                    ));
                }
            }
        }

        let total_mass: f64 = links.iter().map(|l| l.mass).sum();
        if total_mass <= 0.0 {
            return Err(Error::model(name_or(&links), "total mass must be positive"));
        }

        Ok(KinematicModel {
            name: name.into(),
            fixed_base,
            links,
            joints,
            hands,
            feet,
            keypoints,
            root,
            link_index,
            joint_parent,
            joint_child,
            joint_slot,
            topo,
            support,
            movable,
            total_mass,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn fixed_base(&self) -> bool {
        self.fixed_base
    }
    pub fn links(&self) -> &[Link] {
        &self.links
    }
    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }
    pub fn hands(&self) -> &[String] {
        &self.hands
    }
    pub fn feet(&self) -> &[String] {
        &self.feet
    }
    pub fn keypoints(&self) -> &[String] {
        &self.keypoints
    }
    pub fn root(&self) -> usize {
        self.root
    }
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Number of movable (non-fixed) joints.
    pub fn joint_count(&self) -> usize {
        self.movable.len()
    }

    /// Base DoF plus movable joints.
    pub fn dof(&self) -> usize {
        BASE_DOF + self.movable.len()
    }

    pub fn link_index(&self, name: &str) -> Result<usize> {
        self.link_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLink(name.to_string()))
    }

    /// Movable joints in configuration order.
    pub fn movable_joints(&self) -> impl Iterator<Item = &Joint> {
        self.movable.iter().map(|&j| &self.joints[j])
    }

    pub fn movable_joint_names(&self) -> Vec<String> {
        self.movable_joints().map(|j| j.name.clone()).collect()
    }

    pub(crate) fn topo_order(&self) -> &[usize] {
        &self.topo
    }
    pub(crate) fn joint_parent_link(&self, j: usize) -> usize {
        self.joint_parent[j]
    }
    pub(crate) fn joint_child_link(&self, j: usize) -> usize {
        self.joint_child[j]
    }
    pub(crate) fn joint_slot(&self, j: usize) -> Option<usize> {
        self.joint_slot[j]
    }
    pub(crate) fn support(&self, link: usize) -> &[usize] {
        &self.support[link]
    }

    /// Joint limits in configuration order.
    pub fn limits(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.movable_joints().map(|j| (j.lower, j.upper))
    }

    /// Movable joint slots on the chain from the root to `link`.
    pub fn chain_slots(&self, link: &str) -> Result<Vec<usize>> {
        let l = self.link_index(link)?;
        Ok(self.support[l]
            .iter()
            .filter_map(|&j| self.joint_slot[j])
            .collect())
    }

    pub fn clamp_to_limits(&self, q: &mut Configuration) {
        for (v, (lo, hi)) in q.joints.iter_mut().zip(self.limits()) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn check_width(&self, q: &Configuration) -> Result<()> {
        if q.joints.len() != self.joint_count() {
            return Err(Error::WidthMismatch {
                expected: self.joint_count(),
                actual: q.joints.len(),
            });
        }
        Ok(())
    }

    /// Configuration with the base at identity and every joint at zero,
    /// clamped into limits.
    pub fn zero_configuration(&self) -> Configuration {
        let mut q = Configuration::new(RigidTransform::identity(), vec![0.0; self.joint_count()]);
        self.clamp_to_limits(&mut q);
        q
    }
}

fn name_or(links: &[Link]) -> &str {
    links.first().map(|l| l.name.as_str()).unwrap_or("<model>")
}

// ---------------------------------------------------------------------------
// Model file

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    name: String,
    #[serde(default)]
    fixed_base: bool,
    links: Vec<LinkEntry>,
    joints: Vec<JointEntry>,
    hands: Vec<String>,
    feet: Vec<String>,
    keypoints: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    name: String,
    mass: f64,
    com: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    #[serde(rename = "type")]
    kind: JointKind,
    parent: String,
    child: String,
    origin: RigidTransform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limits: Option<[f64; 2]>,
}

/// Parses a model document (JSON, `format_version` 1).
pub fn parse_model(text: &str, path: &Path) -> Result<KinematicModel> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::parse(path, e))?;
    let version = value.get("format_version").and_then(|v| v.as_u64());
    match version {
        Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::SchemaVersion {
                path: path.into(),
                expected: MODEL_FORMAT_VERSION,
                found: v as u32,
            })
        }
        None => return Err(Error::parse(path, "missing `format_version`")),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::parse(path, e))?;
    let links = file
        .links
        .into_iter()
        .map(|l| Link {
            name: l.name,
            mass: l.mass,
            com: Vec3::from(l.com),
        })
        .collect();
    let mut joints = Vec::with_capacity(file.joints.len());
    for j in file.joints {
        let (axis, (lower, upper)) = match j.kind {
            JointKind::Fixed => (j.axis.map(Vec3::from).unwrap_or_else(Vec3::z), (0.0, 0.0)),
            _ => {
                let axis = j
                    .axis
                    .ok_or_else(|| Error::model(&j.name, "movable joint needs an `axis`"))?;
                let limits = j
                    .limits
                    .ok_or_else(|| Error::model(&j.name, "movable joint needs `limits`"))?;
                (Vec3::from(axis), (limits[0], limits[1]))
            }
        };
        joints.push(Joint {
            name: j.name,
            kind: j.kind,
            parent: j.parent,
            child: j.child,
            origin: j.origin,
            axis,
            lower,
            upper,
        });
    }
    KinematicModel::new(
        file.name,
        file.fixed_base,
        links,
        joints,
        file.hands,
        file.feet,
        file.keypoints,
    )
}

pub fn load_model(path: impl AsRef<Path>) -> Result<KinematicModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}

/// Canonical text form of a model; loading it back is lossless.
pub fn model_to_string(model: &KinematicModel) -> String {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        name: model.name.clone(),
        fixed_base: model.fixed_base,
        links: model
            .links
            .iter()
            .map(|l| LinkEntry {
                name: l.name.clone(),
                mass: l.mass,
                com: l.com.into(),
            })
            .collect(),
        joints: model
            .joints
            .iter()
            .map(|j| JointEntry {
                name: j.name.clone(),
                kind: j.kind,
                parent: j.parent.clone(),
                child: j.child.clone(),
                origin: j.origin,
                axis: (j.kind != JointKind::Fixed).then(|| j.axis.into()),
                limits: (j.kind != JointKind::Fixed).then_some([j.lower, j.upper]),
            })
            .collect(),
        hands: model.hands.clone(),
        feet: model.feet.clone(),
        keypoints: model.keypoints.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn save_model(model: &KinematicModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Configuration

/// Floating-base pose plus one scalar per movable joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub base: RigidTransform,
    pub joints: Vec<f64>,
}

impl Configuration {
    pub fn new(base: RigidTransform, joints: Vec<f64>) -> Self {
        Configuration { base, joints }
    }

    pub fn dof(&self) -> usize {
        BASE_DOF + self.joints.len()
    }

    /// Applies a tangent increment `[dp; dtheta; dq]`. The base rotation
    /// increment is a world-frame rotation about the base origin.
    pub fn integrate(&self, dq: &[f64]) -> Configuration {
        debug_assert_eq!(dq.len(), self.dof());
        let dp = Vec3::new(dq[0], dq[1], dq[2]);
        let dtheta = Vec3::new(dq[3], dq[4], dq[5]);
        let rotation = crate::spatial::rot_exp_unchecked(&dtheta) * self.base.rotation;
        Configuration {
            base: RigidTransform::new(rotation, self.base.translation + dp),
            joints: self
                .joints
                .iter()
                .zip(&dq[BASE_DOF..])
                .map(|(q, d)| q + d)
                .collect(),
        }
    }

    /// Tangent difference `self - other`, inverse of [`Configuration::integrate`].
    pub fn difference(&self, other: &Configuration) -> Result<Vec<f64>> {
        let dp = self.base.translation - other.base.translation;
        let dtheta = rot_log(&(self.base.rotation * other.base.rotation.transpose()))?;
        let mut out = Vec::with_capacity(self.dof());
        out.extend(dp.iter());
        out.extend(dtheta.iter());
        out.extend(self.joints.iter().zip(&other.joints).map(|(a, b)| a - b));
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.base.is_finite() && self.joints.iter().all(|x| x.is_finite())
    }

    /// True when every joint lies inside its limits widened by `tol`.
    pub fn within_limits(&self, model: &KinematicModel, tol: f64) -> bool {
        self.joints
            .iter()
            .zip(model.limits())
            .all(|(&q, (lo, hi))| q >= lo - tol && q <= hi + tol)
    }
}

// ---------------------------------------------------------------------------
// Motion clips

/// Time-indexed reference trajectory with a foot contact schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub dt: f64,
    pub frames: Vec<Configuration>,
    /// Foot link names, in the order of each `contacts` row.
    pub feet: Vec<String>,
    /// `contacts[frame][foot]`.
    pub contacts: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitViolation {
    pub frame: usize,
    pub joint: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl MotionClip {
    pub fn new(
        dt: f64,
        frames: Vec<Configuration>,
        feet: Vec<String>,
        contacts: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Clip {
                frame: None,
                reason: format!("dt must be positive, got {dt}"),
            });
        }
        if frames.len() < 2 {
            return Err(Error::Clip {
                frame: None,
                reason: format!("clip needs at least 2 frames, got {}", frames.len()),
            });
        }
        if contacts.len() != frames.len() {
            return Err(Error::Clip {
                frame: None,
                reason: "contact schedule length differs from frame count".into(),
            });
        }
        for (i, (f, c)) in frames.iter().zip(&contacts).enumerate() {
            if !f.is_finite() {
                return Err(Error::Clip {
                    frame: Some(i),
                    reason: "non-finite value".into(),
                });
            }
            if c.len() != feet.len() {
                return Err(Error::Clip {
                    frame: Some(i),
                    reason: "contact row width differs from foot list".into(),
                });
            }
        }
        Ok(MotionClip {
            dt,
            frames,
            feet,
            contacts,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(frames - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.frames.len() - 1) as f64 * self.dt
    }

    pub fn time(&self, frame: usize) -> f64 {
        frame as f64 * self.dt
    }

    /// Nearest frame to time `t`, clamped into the clip.
    pub fn frame_at(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.frames.len() - 1)
        }
    }

    /// Contact flag of a named foot at a frame; feet missing from the
    /// schedule are treated as not in contact.
    pub fn in_contact(&self, frame: usize, foot: &str) -> bool {
        self.feet
            .iter()
            .position(|f| f == foot)
            .map(|i| self.contacts[frame][i])
            .unwrap_or(false)
    }

    /// Every (frame, joint) outside its limits.
    pub fn limit_violations(&self, model: &KinematicModel) -> Vec<LimitViolation> {
        let mut out = Vec::new();
        for (i, f) in self.frames.iter().enumerate() {
            for (joint, &value) in model.movable_joints().zip(&f.joints) {
                if value < joint.lower || value > joint.upper {
                    out.push(LimitViolation {
                        frame: i,
                        joint: joint.name.clone(),
                        value,
                        lower: joint.lower,
                        upper: joint.upper,
                    });
                }
            }
        }
        out
    }
}

/// Parses the text clip format against `model`.
///
/// ```text
/// format_version: 1
/// dt: 0.02
/// joints: j1,j2,...
/// feet: left_foot,right_foot
/// ---
/// base_x,base_y,base_z,base_qw,base_qx,base_qy,base_qz,j1,...,contact_left_foot,...
/// 0,0,0.7,1,0,0,0,...,1,1
/// ```
///
/// Joint and foot columns may be in any order; they are remapped onto the
/// model's order.
pub fn parse_clip(text: &str, model: &KinematicModel, path: &Path) -> Result<MotionClip> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });

    let mut header: HashMap<String, String> = HashMap::new();
    for (_, line) in lines.by_ref() {
        if line.trim() == "---" {
            break;
        }
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(path, format!("bad header line `{line}`")))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        header
            .get(k)
            .ok_or_else(|| Error::parse(path, format!("missing header `{k}`")))
    };
    let version: u32 = get("format_version")?
        .parse()
        .map_err(|e| Error::parse(path, format!("format_version: {e}")))?;
    if version != CLIP_FORMAT_VERSION {
        return Err(Error::SchemaVersion {
            path: path.into(),
            expected: CLIP_FORMAT_VERSION,
            found: version,
        });
    }
    let dt: f64 = get("dt")?
        .parse()
        .map_err(|e| Error::parse(path, format!("dt: {e}")))?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Clip {
            frame: None,
            reason: format!("dt must be positive, got {dt}"),
        });
    }
    let split = |s: &str| -> Vec<String> {
        s.split(',')
            .map(|x| x.trim().to_string())
            .filter(|x| !x.is_empty())
            .collect()
    };
    let joint_names = split(get("joints")?);
    let foot_names = split(get("feet")?);

    let model_joints = model.movable_joint_names();
    if joint_names.len() != model_joints.len() {
        return Err(Error::WidthMismatch {
            expected: model_joints.len(),
            actual: joint_names.len(),
        });
    }
    // column index in file for each model joint
    let mut joint_cols = Vec::with_capacity(model_joints.len());
    for name in &model_joints {
        let col = joint_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Clip {
                frame: None,
                reason: format!("joint `{name}` missing from clip header"),
            })?;
        joint_cols.push(col);
    }
    let mut foot_cols = Vec::with_capacity(model.feet().len());
    for foot in model.feet() {
        let col = foot_names
            .iter()
            .position(|n| n == foot)
            .ok_or_else(|| Error::Clip {
                frame: None,
                reason: format!("foot `{foot}` missing from clip header"),
            })?;
        foot_cols.push(col);
    }

    // column header row
    let _ = lines.next();

    let nj = joint_names.len();
    let width = 7 + nj + foot_names.len();
    let mut frames = Vec::new();
    let mut contacts = Vec::new();
    for (frame, (_, line)) in lines.enumerate() {
        let vals: Vec<&str> = line.split(',').map(str::trim).collect();
        if vals.len() != width {
            return Err(Error::Clip {
                frame: Some(frame),
                reason: format!(
                    "row width {} does not match header width {width}",
                    vals.len()
                ),
            });
        }
        let mut nums = Vec::with_capacity(7 + nj);
        for v in &vals[..7 + nj] {
            let x: f64 = v.parse().map_err(|_| Error::Clip {
                frame: Some(frame),
                reason: format!("cannot parse `{v}` as a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::Clip {
                    frame: Some(frame),
                    reason: "non-finite value".into(),
                });
            }
            nums.push(x);
        }
        let rotation = Rotation::from_quaternion_wxyz(
            [nums[3], nums[4], nums[5], nums[6]],
            QUATERNION_NORM_TOL,
        )
        .map_err(|e| Error::Clip {
            frame: Some(frame),
            reason: e.to_string(),
        })?;
        let base = RigidTransform::new(rotation, Vec3::new(nums[0], nums[1], nums[2]));
        let joints = joint_cols.iter().map(|&c| nums[7 + c]).collect();
        frames.push(Configuration::new(base, joints));

        let mut row = Vec::with_capacity(foot_cols.len());
        for &c in &foot_cols {
            let flag = match vals[7 + nj + c] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(Error::Clip {
                        frame: Some(frame),
                        reason: format!("bad contact flag `{other}`"),
                    })
                }
            };
            row.push(flag);
        }
        contacts.push(row);
    }

    MotionClip::new(dt, frames, model.feet().to_vec(), contacts)
}

pub fn load_clip(path: impl AsRef<Path>, model: &KinematicModel) -> Result<MotionClip> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_clip(&text, model, path)
}

pub fn clip_to_string(clip: &MotionClip, model: &KinematicModel) -> String {
    let joints = model.movable_joint_names();
    let mut s = String::new();
    let _ = writeln!(s, "format_version: {CLIP_FORMAT_VERSION}");
    let _ = writeln!(s, "dt: {}", clip.dt);
    let _ = writeln!(s, "joints: {}", joints.join(","));
    let _ = writeln!(s, "feet: {}", clip.feet.join(","));
    s.push_str("---\n");
    let mut cols = vec![
        "base_x", "base_y", "base_z", "base_qw", "base_qx", "base_qy", "base_qz",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    cols.extend(joints);
    cols.extend(clip.feet.iter().map(|f| format!("contact_{f}")));
    s.push_str(&cols.join(","));
    s.push('\n');
    for (f, c) in clip.frames.iter().zip(&clip.contacts) {
        let q = f.base.rotation.to_quaternion_wxyz();
        let t = f.base.translation;
        let mut row: Vec<String> = [t.x, t.y, t.z, q[0], q[1], q[2], q[3]]
            .iter()
            .chain(&f.joints)
            .map(|x| x.to_string())
            .collect();
        row.extend(c.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn save_clip(clip: &MotionClip, model: &KinematicModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, clip_to_string(clip, model)).map_err(|e| Error::io(path, e))
}

/// World-frame velocity of a link origin along the clip, by central
/// differences (one-sided at the ends).
pub fn clip_link_velocity(
    clip: &MotionClip,
    model: &KinematicModel,
    link: &str,
    frame: usize,
) -> Result<Vec3> {
    let last = clip.len() - 1;
    if frame > last {
        return Err(Error::Clip {
            frame: Some(frame),
            reason: "frame index out of range".into(),
        });
    }
    let (a, b) = if frame == 0 {
        (0, 1)
    } else if frame == last {
        (last - 1, last)
    } else {
        (frame - 1, frame + 1)
    };
    let l = model.link_index(link)?;
    let pa = KinematicState::new(model, &clip.frames[a])?
        .link_pose(l)
        .translation;
    let pb = KinematicState::new(model, &clip.frames[b])?
        .link_pose(l)
        .translation;
    Ok((pb - pa) / ((b - a) as f64 * clip.dt))
}
