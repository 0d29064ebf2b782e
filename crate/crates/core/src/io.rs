//! Map files, task files, placement reports and PLY exports.
//!
//! All JSON written here prints floats with 17 significant digits, so a
//! saved map loads back bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter};

use crate::error::{Error, MapError};
use crate::geometry::Pose;
use crate::inverse::{InverseReachabilityMap, InverseSphere};
use crate::kinematics::IkSettings;
use crate::placement::{BaseCandidate, PlacementMethod, PlacementParams, TaskPose, TaskPoseSet, UnionMap};
use crate::reachability::{color_bin, ReachabilityMap, SphereRecord};
use crate::warning::{Reported, Warning};

pub const FORMAT_VERSION: u32 = 1;

const KIND_REACHABILITY: &str = "reachability";
const KIND_INVERSE: &str = "inverse";

/// Compact JSON with every float in scientific notation and 17 significant
/// digits.
struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            CompactFormatter.write_f64(writer, value)
        }
    }
}

/// Serializes `value` as JSON with exact floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Format(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct MapFile<S> {
    format_version: u32,
    map_kind: String,
    chain_fingerprint: String,
    resolution: f64,
    radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Vector3<f64>>,
    samples_per_sphere: usize,
    ik_settings: IkSettings,
    spheres: Vec<S>,
}

#[derive(Deserialize)]
struct MapHeader {
    format_version: u32,
    map_kind: String,
    chain_fingerprint: String,
}

/// How a loaded map is checked against the robot it will be used with.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOptions {
    /// Fingerprint of the intended chain; unchecked when `None`.
    pub expected_fingerprint: Option<String>,
    /// Downgrade a fingerprint mismatch to a warning.
    pub allow_fingerprint_mismatch: bool,
}

fn decode<S: DeserializeOwned>(text: &str, kind: &str, opts: &LoadOptions) -> Result<Reported<MapFile<S>>, Error> {
    let header: MapHeader = serde_json::from_str(text).map_err(|e| MapError::Corrupt(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(MapError::VersionMismatch {
            found: header.format_version,
            expected: FORMAT_VERSION,
        }
        .into());
    }
    if header.map_kind != kind {
        return Err(MapError::WrongKind {
            expected: kind.into(),
            found: header.map_kind,
        }
        .into());
    }
    let mut warnings = Vec::new();
    if let Some(expected) = &opts.expected_fingerprint {
        if *expected != header.chain_fingerprint {
            if !opts.allow_fingerprint_mismatch {
                return Err(MapError::FingerprintMismatch {
                    expected: expected.clone(),
                    found: header.chain_fingerprint,
                }
                .into());
            }
            warnings.push(Warning::FingerprintMismatch {
                expected: expected.clone(),
                found: header.chain_fingerprint,
            });
        }
    }
    let file: MapFile<S> = serde_json::from_str(text).map_err(|e| MapError::Corrupt(e.to_string()))?;
    if !(file.resolution > 0.0) || file.samples_per_sphere == 0 {
        return Err(MapError::Corrupt("non-positive resolution or sample count".into()).into());
    }
    Ok(Reported::new(file, warnings))
}

pub fn reachability_map_to_json(map: &ReachabilityMap) -> Result<String, Error> {
    to_json(&MapFile {
        format_version: FORMAT_VERSION,
        map_kind: KIND_REACHABILITY.into(),
        chain_fingerprint: map.chain_fingerprint.clone(),
        resolution: map.resolution,
        radius: map.radius,
        origin: None,
        samples_per_sphere: map.samples_per_sphere,
        ik_settings: map.settings.clone(),
        spheres: map.spheres.clone(),
    })
}

pub fn reachability_map_from_json(text: &str, opts: &LoadOptions) -> Result<Reported<ReachabilityMap>, Error> {
    let Reported { value: f, warnings } = decode::<SphereRecord>(text, KIND_REACHABILITY, opts)?;
    for s in &f.spheres {
        let expected = s.n_sampled > 0
            && s.reachable_poses.len() <= s.n_sampled
            && s.reach_measure == 100.0 * s.reachable_poses.len() as f64 / s.n_sampled as f64;
        if !expected || color_bin(s.reach_measure).ok() != Some(s.color_bin) {
            return Err(MapError::Corrupt(format!("sphere {} has an inconsistent measure", s.voxel_index)).into());
        }
    }
    if f.spheres.windows(2).any(|w| w[0].voxel_index >= w[1].voxel_index) {
        return Err(MapError::Corrupt("spheres not in voxel order".into()).into());
    }
    Ok(Reported {
        value: ReachabilityMap {
            chain_fingerprint: f.chain_fingerprint,
            resolution: f.resolution,
            radius: f.radius,
            samples_per_sphere: f.samples_per_sphere,
            settings: f.ik_settings,
            spheres: f.spheres,
        },
        warnings,
    })
}

pub fn inverse_map_to_json(map: &InverseReachabilityMap) -> Result<String, Error> {
    to_json(&MapFile {
        format_version: FORMAT_VERSION,
        map_kind: KIND_INVERSE.into(),
        chain_fingerprint: map.chain_fingerprint.clone(),
        resolution: map.resolution,
        radius: map.radius,
        origin: Some(map.origin),
        samples_per_sphere: map.samples_per_sphere,
        ik_settings: map.settings.clone(),
        spheres: map.spheres.clone(),
    })
}

pub fn inverse_map_from_json(text: &str, opts: &LoadOptions) -> Result<Reported<InverseReachabilityMap>, Error> {
    let Reported { value: f, warnings } = decode::<InverseSphere>(text, KIND_INVERSE, opts)?;
    if f.spheres.windows(2).any(|w| w[0].voxel_index >= w[1].voxel_index) {
        return Err(MapError::Corrupt("spheres not in voxel order".into()).into());
    }
    Ok(Reported {
        value: InverseReachabilityMap {
            chain_fingerprint: f.chain_fingerprint,
            resolution: f.resolution,
            radius: f.radius,
            origin: f.origin.unwrap_or_else(Vector3::zeros),
            samples_per_sphere: f.samples_per_sphere,
            settings: f.ik_settings,
            spheres: f.spheres,
        },
        warnings,
    })
}

pub fn save_map(map: &ReachabilityMap, path: &Path) -> Result<(), Error> {
    write_file(path, &reachability_map_to_json(map)?)
}

pub fn load_map(path: &Path, opts: &LoadOptions) -> Result<Reported<ReachabilityMap>, Error> {
    reachability_map_from_json(&read_file(path)?, opts)
}

pub fn save_inverse_map(map: &InverseReachabilityMap, path: &Path) -> Result<(), Error> {
    write_file(path, &inverse_map_to_json(map)?)
}

pub fn load_inverse_map(path: &Path, opts: &LoadOptions) -> Result<Reported<InverseReachabilityMap>, Error> {
    inverse_map_from_json(&read_file(path)?, opts)
}

/// Kind recorded in a map file header, without loading the spheres.
pub fn map_kind(text: &str) -> Result<String, Error> {
    #[derive(Deserialize)]
    struct Kind {
        map_kind: String,
    }
    let k: Kind = serde_json::from_str(text).map_err(|e| MapError::Corrupt(e.to_string()))?;
    Ok(k.map_kind)
}

/// One entry of a task pose file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPoseRecord {
    pub position: [f64; 3],
    pub orientation_quaternion: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

pub fn parse_tasks(text: &str) -> Result<TaskPoseSet, Error> {
    let records: Vec<TaskPoseRecord> =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("task file: {e}")))?;
    let tasks = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let pose = Pose::from_wxyz(r.position, r.orientation_quaternion)
                .map_err(|e| Error::Format(format!("task {i}: {e}")))?;
            Ok(TaskPose { pose, label: r.label })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(TaskPoseSet::new(tasks)?)
}

pub fn tasks_to_json(tasks: &TaskPoseSet) -> Result<String, Error> {
    let records: Vec<TaskPoseRecord> = tasks
        .tasks()
        .iter()
        .map(|t| TaskPoseRecord {
            position: t.pose.position.into(),
            orientation_quaternion: t.pose.wxyz(),
            label: t.label.clone(),
        })
        .collect();
    to_json(&records)
}

pub fn load_tasks(path: &Path) -> Result<TaskPoseSet, Error> {
    parse_tasks(&read_file(path)?)
}

/// Ranked placement result with the evidence behind each candidate.
#[derive(Debug, Clone, Serialize)]
pub struct PlacementReport {
    pub method: PlacementMethod,
    pub parameters: PlacementParams,
    pub task_count: usize,
    pub candidates: Vec<BaseCandidate>,
    pub warnings: Vec<Warning>,
}

pub fn report_to_json(report: &PlacementReport) -> Result<String, Error> {
    to_json(report)
}

/// A colored point with one scalar attribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlyPoint {
    pub position: Vector3<f64>,
    pub rgb: [u8; 3],
    pub value: f64,
}

/// ASCII PLY point cloud with per-vertex color and a scalar property named
/// `scalar_name`.
pub fn ply_string(points: &[PlyPoint], scalar_name: &str) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", points.len());
    for axis in ["x", "y", "z"] {
        let _ = writeln!(out, "property double {axis}");
    }
    for channel in ["red", "green", "blue"] {
        let _ = writeln!(out, "property uchar {channel}");
    }
    let _ = writeln!(out, "property double {scalar_name}");
    out.push_str("end_header\n");
    for p in points {
        let [r, g, b] = p.rgb;
        let _ = writeln!(
            out,
            "{} {} {} {r} {g} {b} {}",
            p.position.x, p.position.y, p.position.z, p.value
        );
    }
    out
}

pub fn reachability_ply(map: &ReachabilityMap) -> String {
    let pts: Vec<PlyPoint> = map
        .spheres
        .iter()
        .map(|s| PlyPoint {
            position: s.center,
            rgb: s.color_bin.rgb(),
            value: s.reach_measure,
        })
        .collect();
    ply_string(&pts, "reach_measure")
}

pub fn inverse_ply(map: &InverseReachabilityMap) -> String {
    let pts: Vec<PlyPoint> = map
        .spheres
        .iter()
        .map(|s| PlyPoint {
            position: s.center,
            rgb: s.color_bin.rgb(),
            value: s.measure,
        })
        .collect();
    ply_string(&pts, "measure")
}

pub fn union_ply(map: &UnionMap) -> String {
    let pts: Vec<PlyPoint> = map
        .spheres
        .iter()
        .map(|s| PlyPoint {
            position: s.center,
            rgb: s.color_bin.rgb(),
            value: s.placebase_index,
        })
        .collect();
    ply_string(&pts, "placebase_index")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    write_file(path, text)
}
