//! Dataset directories: manifest, frame encodings and the event report.
//!
//! A dataset directory holds
//! - `manifest.json`: schema version, input hashes, seed and resolved config
//! - `frames.jsonl`: one JSON object per frame
//! - `frames.bin` (optional): the same frames in a length-prefixed binary form
//! - `events.csv`: one row per scheduled event with its final status

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{AugmentedFrame, ClipAugmentation, EventOutcome, FrameResiduals};
use crate::config::AugmentConfig;
use crate::error::{Error, Result};
use crate::ik::StiffnessCommand;
use crate::model::Configuration;
use crate::spatial::{RigidTransform, Rotation, Vec3, Wrench, QUATERNION_NORM_TOL};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_JSONL: &str = "frames.jsonl";
pub const FRAMES_BIN: &str = "frames.bin";
pub const EVENTS_CSV: &str = "events.csv";
pub const BIN_MAGIC: &[u8; 8] = b"CMAUGFRM";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub model_name: String,
    pub model_sha256: String,
    pub clip: String,
    pub clip_sha256: String,
    pub seed: u64,
    pub joint_names: Vec<String>,
    pub feet: Vec<String>,
    pub frame_count: usize,
    pub event_count: usize,
    pub accepted_events: usize,
    pub files: Vec<String>,
    pub config: AugmentConfig,
}

/// Identity of the inputs a dataset was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSource {
    pub model_name: String,
    pub model_sha256: String,
    pub clip: String,
    pub clip_sha256: String,
    pub joint_names: Vec<String>,
    pub feet: Vec<String>,
}

/// Writes a complete dataset directory and returns its manifest.
pub fn write_dataset(
    dir: impl AsRef<Path>,
    source: &DatasetSource,
    aug: &ClipAugmentation,
    cfg: &AugmentConfig,
) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![FRAMES_JSONL.to_string(), EVENTS_CSV.to_string()];
    write_atomic(
        dir.join(FRAMES_JSONL),
        frames_to_jsonl(&aug.frames).as_bytes(),
    )?;
    write_atomic(dir.join(EVENTS_CSV), events_csv(&aug.outcomes).as_bytes())?;
    if cfg.binary {
        write_atomic(dir.join(FRAMES_BIN), &encode_frames(&aug.frames))?;
        files.push(FRAMES_BIN.to_string());
    }
    let manifest = DatasetManifest {
        schema_version: DATASET_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model_name: source.model_name.clone(),
        model_sha256: source.model_sha256.clone(),
        clip: source.clip.clone(),
        clip_sha256: source.clip_sha256.clone(),
        seed: cfg.seed,
        joint_names: source.joint_names.clone(),
        feet: source.feet.clone(),
        frame_count: aug.frames.len(),
        event_count: aug.outcomes.len(),
        accepted_events: aug.accepted().count(),
        files,
        config: cfg.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e))?;
    let found = raw
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if found != DATASET_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path,
            expected: DATASET_SCHEMA_VERSION,
            found,
        });
    }
    serde_json::from_value(raw).map_err(|e| Error::parse(&path, e))
}

/// Manifest plus frames of a dataset directory, from the JSON lines file.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<AugmentedFrame>)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let frames = read_frames_jsonl(dir.join(FRAMES_JSONL))?;
    Ok((manifest, frames))
}

pub fn frames_to_jsonl(frames: &[AugmentedFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f).expect("frame serializes"));
        out.push('\n');
    }
    out
}

pub fn read_frames_jsonl(path: impl AsRef<Path>) -> Result<Vec<AugmentedFrame>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut frames = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        frames.push(f);
    }
    Ok(frames)
}

/// Header of the event report.
pub const EVENTS_CSV_HEADER: &str =
    "id,type,hand,start_frame,end_frame,start_time,duration,k_t,k_r,k_env,peak_force,scalings,scale,attempts,status,reason";

/// One row per event; `reason` is quoted and lists each failed attempt.
pub fn events_csv(outcomes: &[EventOutcome]) -> String {
    let mut out = String::from(EVENTS_CSV_HEADER);
    out.push('\n');
    for o in outcomes {
        let e = &o.event;
        let mut reason: Vec<&str> = o.failures.iter().map(String::as_str).collect();
        if let Some(r) = &o.reason {
            reason.push(r);
        }
        let reason = reason.join(" | ").replace('"', "'");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"\n",
            e.id,
            e.kind_name(),
            e.hand,
            e.start_frame,
            e.end_frame,
            e.start_time,
            e.duration(),
            e.cmd.k_t,
            e.cmd.k_r,
            e.k_env.linear,
            o.peak_force,
            o.scalings,
            o.scale,
            o.attempts,
            o.status_label(),
            reason
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Binary frames: magic, u32 version, then u32-length-prefixed records.
// All numbers little-endian.

struct Writer(Vec<u8>);

impl Writer {
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn flag(&mut self, b: bool) {
        self.0.push(b as u8);
    }
    fn vec3(&mut self, v: &Vec3) {
        for x in v.iter() {
            self.f64(*x);
        }
    }
    fn config(&mut self, q: &Configuration) {
        self.vec3(&q.base.translation);
        for x in q.base.rotation.to_quaternion_wxyz() {
            self.f64(x);
        }
        self.u32(q.joints.len() as u32);
        for x in &q.joints {
            self.f64(*x);
        }
    }
}

fn encode_frame(f: &AugmentedFrame) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(256 + 16 * f.q_ref.joints.len()));
    w.u64(f.index as u64);
    w.f64(f.time);
    w.config(&f.q_ref);
    w.vec3(&f.wrench.force);
    w.vec3(&f.wrench.torque);
    w.flag(f.link.is_some());
    if let Some(l) = &f.link {
        w.u32(l.len() as u32);
        w.0.extend_from_slice(l.as_bytes());
    }
    w.flag(f.event.is_some());
    if let Some(e) = f.event {
        w.u64(e as u64);
    }
    w.flag(f.cmd.is_some());
    if let Some(c) = f.cmd {
        w.f64(c.k_t);
        w.f64(c.k_r);
    }
    w.u32(f.contacts.len() as u32);
    for &c in &f.contacts {
        w.flag(c);
    }
    w.config(&f.q_aug);
    let r = &f.residuals;
    for x in [
        r.hand_pos,
        r.hand_rot,
        r.foot_pos_max,
        r.foot_rot_max,
        r.com_xy,
    ] {
        w.f64(x);
    }
    for p in [&f.p_ref_link, &f.p_aug_link] {
        w.flag(p.is_some());
        if let Some(p) = p {
            w.vec3(p);
        }
    }
    w.0
}

pub fn encode_frames(frames: &[AugmentedFrame]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&DATASET_SCHEMA_VERSION.to_le_bytes());
    for f in frames {
        let rec = encode_frame(f);
        out.extend_from_slice(&(rec.len() as u32).to_le_bytes());
        out.extend_from_slice(&rec);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.buf.len() {
            return Err(format!("truncated record at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn flag(&mut self) -> std::result::Result<bool, String> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(format!("invalid flag byte {b}")),
        }
    }
    fn vec3(&mut self) -> std::result::Result<Vec3, String> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn config(&mut self) -> std::result::Result<Configuration, String> {
        let t = self.vec3()?;
        let q = [self.f64()?, self.f64()?, self.f64()?, self.f64()?];
        let rotation =
            Rotation::from_quaternion_wxyz(q, QUATERNION_NORM_TOL).map_err(|e| e.to_string())?;
        let n = self.u32()? as usize;
        let joints = (0..n)
            .map(|_| self.f64())
            .collect::<std::result::Result<_, _>>()?;
        Ok(Configuration::new(RigidTransform::new(rotation, t), joints))
    }
}

fn decode_frame(rec: &[u8]) -> std::result::Result<AugmentedFrame, String> {
    let mut r = Reader { buf: rec, pos: 0 };
    let index = r.u64()? as usize;
    let time = r.f64()?;
    let q_ref = r.config()?;
    let wrench = Wrench::new(r.vec3()?, r.vec3()?);
    let link = if r.flag()? {
        let n = r.u32()? as usize;
        Some(String::from_utf8(r.take(n)?.to_vec()).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let event = if r.flag()? {
        Some(r.u64()? as usize)
    } else {
        None
    };
    let cmd = if r.flag()? {
        Some(StiffnessCommand {
            k_t: r.f64()?,
            k_r: r.f64()?,
        })
    } else {
        None
    };
    let nc = r.u32()? as usize;
    let contacts = (0..nc)
        .map(|_| r.flag())
        .collect::<std::result::Result<_, _>>()?;
    let q_aug = r.config()?;
    let residuals = FrameResiduals {
        hand_pos: r.f64()?,
        hand_rot: r.f64()?,
        foot_pos_max: r.f64()?,
        foot_rot_max: r.f64()?,
        com_xy: r.f64()?,
    };
    let p_ref_link = if r.flag()? { Some(r.vec3()?) } else { None };
    let p_aug_link = if r.flag()? { Some(r.vec3()?) } else { None };
    if r.pos != rec.len() {
        return Err(format!("{} trailing bytes in record", rec.len() - r.pos));
    }
    Ok(AugmentedFrame {
        index,
        time,
        q_ref,
        wrench,
        link,
        event,
        cmd,
        contacts,
        q_aug,
        residuals,
        p_ref_link,
        p_aug_link,
    })
}

pub fn decode_frames(bytes: &[u8], path: &Path) -> Result<Vec<AugmentedFrame>> {
    if bytes.len() < 12 || &bytes[..8] != BIN_MAGIC {
        return Err(Error::parse(path, "not a frame file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != DATASET_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            expected: DATASET_SCHEMA_VERSION,
            found: version,
        });
    }
    let mut pos = 12;
    let mut frames = Vec::new();
    while pos < bytes.len() {
        if pos + 4 > bytes.len() {
            return Err(Error::parse(path, "truncated length prefix"));
        }
        let n = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if pos + n > bytes.len() {
            return Err(Error::parse(
                path,
                format!("record {} truncated", frames.len()),
            ));
        }
        let f = decode_frame(&bytes[pos..pos + n])
            .map_err(|e| Error::parse(path, format!("record {}: {e}", frames.len())))?;
        frames.push(f);
        pos += n;
    }
    Ok(frames)
}

pub fn read_frames_bin(path: impl AsRef<Path>) -> Result<Vec<AugmentedFrame>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_frames(&bytes, path)
}

/// Provenance record of one command-line run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub seed: u64,
    pub model: String,
    pub model_sha256: String,
    pub clips: Vec<RunInput>,
    pub config: AugmentConfig,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInput {
    pub path: String,
    pub sha256: String,
    pub output: String,
}

impl RunManifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("run manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::augment_clip;
    use crate::fixtures;

    fn sample() -> Vec<AugmentedFrame> {
        let model = fixtures::humanoid();
        let clip = fixtures::arm_swing_clip(&model, 200, 0.02);
        let cfg = AugmentConfig {
            seed: 4,
            ..AugmentConfig::default()
        };
        augment_clip(&model, &clip, &cfg).unwrap().frames
    }

    #[test]
    fn binary_round_trip_matches_json() {
        let frames = sample();
        let json: Vec<AugmentedFrame> = frames_to_jsonl(&frames)
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let bin = decode_frames(&encode_frames(&frames), Path::new("x")).unwrap();
        assert_eq!(json, bin);
    }

    #[test]
    fn bad_magic_and_version_rejected() {
        assert!(decode_frames(b"NOTFRAMExxxx", Path::new("x")).is_err());
        let mut bytes = encode_frames(&[]);
        bytes[8] = 9;
        assert!(matches!(
            decode_frames(&bytes, Path::new("x")),
            Err(Error::SchemaVersion { found: 9, .. })
        ));
    }

    #[test]
    fn truncated_record_rejected() {
        let frames = sample();
        let bytes = encode_frames(&frames[..2]);
        assert!(decode_frames(&bytes[..bytes.len() - 3], Path::new("x")).is_err());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
