//! Base placement: union maps built from an inverse reachability map and a
//! set of task poses, and four strategies for ranking candidate bases.

mod search;
mod union;

use crate::error::PlacementError;
use crate::geometry::Pose;

pub use search::{
    find_base, find_base_grasp_reachability, find_base_ik_score, find_base_pca, find_base_vertical,
    pca_yaw, vertical_union_map, BaseCandidate, PlacementMethod, PlacementParams, TaskEvidence,
};
pub use union::{build_union_map, placebase_index, PlacebaseMode, UnionMap, UnionMember, UnionSphere};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPose {
    pub pose: Pose,
    pub label: Option<String>,
}

impl TaskPose {
    pub fn new(pose: Pose) -> Self {
        Self { pose, label: None }
    }
}

/// Non-empty list of world-frame TCP poses the robot must reach.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPoseSet {
    tasks: Vec<TaskPose>,
}

impl TaskPoseSet {
    pub fn new(tasks: Vec<TaskPose>) -> Result<Self, PlacementError> {
        if tasks.is_empty() {
            return Err(PlacementError::EmptyTasks);
        }
        Ok(Self { tasks })
    }

    pub fn from_poses(poses: &[Pose]) -> Result<Self, PlacementError> {
        Self::new(poses.iter().copied().map(TaskPose::new).collect())
    }

    pub fn tasks(&self) -> &[TaskPose] {
        &self.tasks
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> + '_ {
        self.tasks.iter().map(|t| &t.pose)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}
