//! Inverse reachability maps: every reachable TCP pose inverted, so that
//! each entry is an arm-base pose relative to a task frame at the origin.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::Pose;
use crate::grid::{cluster_points, voxelize};
use crate::kinematics::{IkSettings, JointConfig};
use crate::reachability::{color_bin, ColorBin, ReachabilityMap};
use crate::warning::{Reported, Warning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseEntry {
    pub pose: Pose,
    /// Joint configuration reaching the inverse of `pose`.
    pub witness: JointConfig,
    /// Voxel of the source map the pose came from.
    pub source_voxel: usize,
    /// Position of the source pose in the source map's pose order.
    pub source_entry: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseSphere {
    pub voxel_index: usize,
    pub center: Vector3<f64>,
    pub entries: Vec<InverseEntry>,
    /// Cluster size as a percentage of the largest cluster.
    pub measure: f64,
    pub color_bin: ColorBin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseReachabilityMap {
    pub chain_fingerprint: String,
    pub resolution: f64,
    /// Grid half-extent about `origin`.
    pub radius: f64,
    pub origin: Vector3<f64>,
    pub samples_per_sphere: usize,
    pub settings: IkSettings,
    pub spheres: Vec<InverseSphere>,
}

impl InverseReachabilityMap {
    pub fn pose_count(&self) -> usize {
        self.spheres.iter().map(|s| s.entries.len()).sum()
    }

    /// Entries in sphere order; the position in this sequence is the entry's
    /// global index.
    pub fn entries(&self) -> impl Iterator<Item = &InverseEntry> + '_ {
        self.spheres.iter().flat_map(|s| s.entries.iter())
    }
}

/// A map whose poses can be inverted.
pub trait PoseMap {
    fn chain_fingerprint(&self) -> &str;
    fn resolution(&self) -> f64;
    fn samples_per_sphere(&self) -> usize;
    fn settings(&self) -> &IkSettings;
    /// `(pose, witness, voxel)` in canonical order.
    fn pose_entries(&self) -> Vec<(Pose, &JointConfig, usize)>;
}

impl PoseMap for ReachabilityMap {
    fn chain_fingerprint(&self) -> &str {
        &self.chain_fingerprint
    }
    fn resolution(&self) -> f64 {
        self.resolution
    }
    fn samples_per_sphere(&self) -> usize {
        self.samples_per_sphere
    }
    fn settings(&self) -> &IkSettings {
        &self.settings
    }
    fn pose_entries(&self) -> Vec<(Pose, &JointConfig, usize)> {
        self.poses().map(|(v, p)| (p.pose, &p.witness, v)).collect()
    }
}

impl PoseMap for InverseReachabilityMap {
    fn chain_fingerprint(&self) -> &str {
        &self.chain_fingerprint
    }
    fn resolution(&self) -> f64 {
        self.resolution
    }
    fn samples_per_sphere(&self) -> usize {
        self.samples_per_sphere
    }
    fn settings(&self) -> &IkSettings {
        &self.settings
    }
    fn pose_entries(&self) -> Vec<(Pose, &JointConfig, usize)> {
        self.spheres
            .iter()
            .flat_map(|s| s.entries.iter().map(move |e| (e.pose, &e.witness, s.voxel_index)))
            .collect()
    }
}

/// Center and half-extent of a cubic grid at `resolution` that strictly
/// contains every point.
pub(crate) fn bounding_grid(points: &[Vector3<f64>], resolution: f64) -> (Vector3<f64>, f64) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let origin = (lo + hi) / 2.0;
    let half = ((hi - lo) / 2.0).max();
    (origin, resolution * ((half / resolution).floor() + 1.0))
}

/// Clusters of point indices with their voxel center, plus the grid
/// parameters used.
pub(crate) struct Clustered {
    pub origin: Vector3<f64>,
    pub radius: f64,
    pub clusters: Vec<(usize, Vector3<f64>, Vec<usize>)>,
    pub out_of_bounds: usize,
}

pub(crate) fn cluster_on_bounding_grid(points: &[Vector3<f64>], resolution: f64) -> Result<Clustered, Error> {
    let (origin, radius) = bounding_grid(points, resolution);
    let grid = voxelize(radius, resolution, origin)?;
    let c = cluster_points(&grid, points);
    Ok(Clustered {
        origin,
        radius,
        clusters: c
            .clusters
            .into_iter()
            .map(|(v, members)| (v, grid.center(v), members))
            .collect(),
        out_of_bounds: c.out_of_bounds.len(),
    })
}

/// Inverts every pose of `map` and re-clusters the inverted positions on a
/// grid of the same resolution centered on their bounding cube.
pub fn invert_map<M: PoseMap>(map: &M) -> Result<Reported<InverseReachabilityMap>, Error> {
    let resolution = map.resolution();
    let source = map.pose_entries();
    let mut irm = InverseReachabilityMap {
        chain_fingerprint: map.chain_fingerprint().to_owned(),
        resolution,
        radius: resolution,
        origin: Vector3::zeros(),
        samples_per_sphere: map.samples_per_sphere(),
        settings: map.settings().clone(),
        spheres: Vec::new(),
    };
    if source.is_empty() {
        return Ok(Reported::new(irm, vec![Warning::EmptyMap]));
    }

    let inverted: Vec<Pose> = source.par_iter().map(|(p, _, _)| p.invert()).collect();
    let positions: Vec<Vector3<f64>> = inverted.iter().map(|p| p.position).collect();
    let clustered = cluster_on_bounding_grid(&positions, resolution)?;
    let largest = clustered
        .clusters
        .iter()
        .map(|(_, _, m)| m.len())
        .max()
        .unwrap_or(1);
    irm.origin = clustered.origin;
    irm.radius = clustered.radius;
    irm.spheres = clustered
        .clusters
        .into_iter()
        .map(|(voxel_index, center, members)| {
            let measure = 100.0 * members.len() as f64 / largest as f64;
            InverseSphere {
                voxel_index,
                center,
                entries: members
                    .into_iter()
                    .map(|i| InverseEntry {
                        pose: inverted[i],
                        witness: source[i].1.clone(),
                        source_voxel: source[i].2,
                        source_entry: i,
                    })
                    .collect(),
                measure,
                color_bin: color_bin(measure).expect("measure within range"),
            }
        })
        .collect();
    let warnings = match clustered.out_of_bounds {
        0 => Vec::new(),
        count => vec![Warning::OutOfGridPoints { count }],
    };
    Ok(Reported::new(irm, warnings))
}
