use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, PlacementError};
use crate::geometry::Pose;
use crate::inverse::{cluster_on_bounding_grid, InverseReachabilityMap};
use crate::kinematics::JointConfig;
use crate::reachability::{color_bin, ColorBin};
use crate::warning::{Reported, Warning};

use super::TaskPoseSet;

/// How cluster sizes are turned into a placebase index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacebaseMode {
    /// Min-max normalization to `[0, 100]`.
    #[default]
    Normalized,
    /// `n * b_max / (b_max - b_min) * 100`, zeroed below 1. Unbounded.
    AsPrinted,
}

/// Density score of a cluster of `n` members, given the smallest and
/// largest cluster sizes of the map.
pub fn placebase_index(n: usize, b_min: usize, b_max: usize, mode: PlacebaseMode) -> Result<f64, PlacementError> {
    if b_min > b_max || n < b_min || n > b_max {
        return Err(PlacementError::InvalidParameter(format!(
            "cluster size {n} outside [{b_min}, {b_max}]"
        )));
    }
    if b_max == b_min {
        return Ok(if n > 0 { 100.0 } else { 0.0 });
    }
    let span = (b_max - b_min) as f64;
    Ok(match mode {
        PlacebaseMode::Normalized => 100.0 * (n - b_min) as f64 / span,
        PlacebaseMode::AsPrinted => {
            let d = n as f64 * b_max as f64 / span * 100.0;
            if d >= 1.0 {
                d
            } else {
                0.0
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionMember {
    /// Candidate base pose in the world frame.
    pub pose: Pose,
    pub task_index: usize,
    /// Global index of the inverse-map entry it was built from.
    pub irm_entry: usize,
    /// Joint configuration reaching task `task_index` from `pose`.
    pub witness: JointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionSphere {
    pub voxel_index: usize,
    pub center: Vector3<f64>,
    pub members: Vec<UnionMember>,
    pub placebase_index: f64,
    pub color_bin: ColorBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionMap {
    pub resolution: f64,
    pub radius: f64,
    pub origin: Vector3<f64>,
    pub mode: PlacebaseMode,
    pub b_min: usize,
    pub b_max: usize,
    /// Sorted by voxel index.
    pub spheres: Vec<UnionSphere>,
}

impl UnionMap {
    pub fn member_count(&self) -> usize {
        self.spheres.iter().map(|s| s.members.len()).sum()
    }

    /// Spheres whose center lies within half a voxel of `ground_z`. Indices
    /// and cluster bounds are those of the full map.
    pub fn ground_slice(&self, ground_z: f64) -> UnionMap {
        let tol = self.resolution / 2.0;
        UnionMap {
            spheres: self
                .spheres
                .iter()
                .filter(|s| (s.center.z - ground_z).abs() <= tol)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// The `m` spheres with the highest placebase index (ties toward the
    /// lower voxel index), in rank order.
    pub fn top_spheres(&self, m: usize) -> Reported<Vec<&UnionSphere>> {
        let mut ranked: Vec<&UnionSphere> = self.spheres.iter().collect();
        ranked.sort_by(|a, b| {
            b.placebase_index
                .total_cmp(&a.placebase_index)
                .then(a.voxel_index.cmp(&b.voxel_index))
        });
        let available = ranked.len();
        ranked.truncate(m);
        let warnings = if available < m {
            vec![Warning::FewerSpheresThanRequested {
                requested: m,
                available,
            }]
        } else {
            Vec::new()
        };
        Reported::new(ranked, warnings)
    }
}

/// Transforms the inverse map by every task pose and clusters the results.
pub fn build_union_map(
    irm: &InverseReachabilityMap,
    tasks: &TaskPoseSet,
    mode: PlacebaseMode,
) -> Result<Reported<UnionMap>, Error> {
    build_union_map_with_offset(irm, tasks, mode, None)
}

/// Like [`build_union_map`] with every member additionally composed with
/// `offset` on the right.
pub(crate) fn build_union_map_with_offset(
    irm: &InverseReachabilityMap,
    tasks: &TaskPoseSet,
    mode: PlacebaseMode,
    offset: Option<&Pose>,
) -> Result<Reported<UnionMap>, Error> {
    if tasks.is_empty() {
        return Err(PlacementError::EmptyTasks.into());
    }
    if irm.pose_count() == 0 {
        return Err(PlacementError::EmptyMap.into());
    }
    let mut members = Vec::with_capacity(irm.pose_count() * tasks.len());
    for (task_index, task) in tasks.poses().enumerate() {
        for (irm_entry, e) in irm.entries().enumerate() {
            let b = task.compose(&e.pose);
            members.push(UnionMember {
                pose: match offset {
                    Some(o) => b.compose(o),
                    None => b,
                },
                task_index,
                irm_entry,
                witness: e.witness.clone(),
            });
        }
    }
    let positions: Vec<Vector3<f64>> = members.iter().map(|m| m.pose.position).collect();
    let clustered = cluster_on_bounding_grid(&positions, irm.resolution)?;
    let sizes = clustered.clusters.iter().map(|(_, _, m)| m.len());
    let b_min = sizes.clone().min().unwrap_or(0);
    let b_max = sizes.max().unwrap_or(0);

    let mut slots: Vec<Option<UnionMember>> = members.into_iter().map(Some).collect();
    let spheres = clustered
        .clusters
        .into_iter()
        .map(|(voxel_index, center, idx)| {
            let placebase = placebase_index(idx.len(), b_min, b_max, mode)?;
            Ok(UnionSphere {
                voxel_index,
                center,
                members: idx
                    .into_iter()
                    .map(|i| slots[i].take().expect("each member clustered once"))
                    .collect(),
                placebase_index: placebase,
                color_bin: color_bin(placebase.min(100.0)).expect("clamped into range"),
            })
        })
        .collect::<Result<Vec<_>, PlacementError>>()?;

    let warnings = match clustered.out_of_bounds {
        0 => Vec::new(),
        count => vec![Warning::OutOfGridPoints { count }],
    };
    Ok(Reported::new(
        UnionMap {
            resolution: irm.resolution,
            radius: clustered.radius,
            origin: clustered.origin,
            mode,
            b_min,
            b_max,
            spheres,
        },
        warnings,
    ))
}
