//! Forward kinematics, geometric Jacobian, self-collision and inverse
//! kinematics for a [`KinematicChain`].
//!
//! All poses are expressed in the arm-base frame (the parent link of the
//! first movable joint).

mod ik;
mod planar;

use std::ops::Deref;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::KinematicsError;
use crate::geometry::Pose;
use crate::robot::{JointKind, KinematicChain};

pub use ik::{
    pose_error, solve_ik, solve_ik_multi, solve_ik_multi_seeded, IkSettings, MatchMode,
};
pub(crate) use ik::solve_ik_stream;
pub use planar::{analytic_ik_2r, Planar2rSolutions};

/// Values of the movable joints, base to tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(Vec<f64>);

impl JointConfig {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute per-joint difference.
    pub fn linf_distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn within_limits(&self, chain: &KinematicChain) -> bool {
        self.0.len() == chain.dof()
            && self
                .0
                .iter()
                .zip(chain.limits())
                .all(|(v, (lo, hi))| *v >= lo && *v <= hi)
    }
}

impl Deref for JointConfig {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

fn check_dim(chain: &KinematicChain, q: &[f64]) -> Result<(), KinematicsError> {
    if q.len() != chain.dof() {
        return Err(KinematicsError::Dimension {
            expected: chain.dof(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Frames of the arm base (identity), every link after a joint in
/// [`KinematicChain::joints`], and every tool link. The last entry is the
/// TCP.
pub fn link_frames(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Pose>, KinematicsError> {
    check_dim(chain, q)?;
    Ok(link_frames_unchecked(chain, q))
}

pub(crate) fn link_frames_unchecked(chain: &KinematicChain, q: &[f64]) -> Vec<Pose> {
    let mut frames = Vec::with_capacity(1 + chain.joints().len() + chain.tool().len());
    let mut current = Pose::identity();
    frames.push(current);
    let mut qi = q.iter();
    for j in chain.joints() {
        let value = if j.is_movable() {
            *qi.next().expect("dimension checked")
        } else {
            0.0
        };
        current = current.compose(&j.transform(value));
        frames.push(current);
    }
    for j in chain.tool() {
        current = current.compose(&j.origin);
        frames.push(current);
    }
    frames
}

pub(crate) fn fk_unchecked(chain: &KinematicChain, q: &[f64]) -> Pose {
    let mut current = Pose::identity();
    let mut qi = q.iter();
    for j in chain.joints() {
        let value = if j.is_movable() {
            *qi.next().expect("dimension checked")
        } else {
            0.0
        };
        current = current.compose(&j.transform(value));
    }
    current.compose(chain.tcp_offset())
}

/// TCP pose in the arm-base frame.
pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<Pose, KinematicsError> {
    check_dim(chain, q)?;
    Ok(fk_unchecked(chain, q))
}

/// Geometric Jacobian at the TCP: rows 0..3 linear velocity, rows 3..6
/// angular velocity, one column per movable joint.
pub fn jacobian(chain: &KinematicChain, q: &[f64]) -> Result<DMatrix<f64>, KinematicsError> {
    check_dim(chain, q)?;
    Ok(jacobian_unchecked(chain, q).1)
}

/// TCP pose and Jacobian from a single pass over the chain.
pub(crate) fn jacobian_unchecked(chain: &KinematicChain, q: &[f64]) -> (Pose, DMatrix<f64>) {
    let mut axes: Vec<(JointKind, Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(chain.dof());
    let mut current = Pose::identity();
    let mut qi = q.iter();
    for j in chain.joints() {
        let joint_frame = current.compose(&j.origin);
        let value = if j.is_movable() {
            let axis = joint_frame.orientation * j.axis;
            axes.push((j.kind, axis, joint_frame.position));
            *qi.next().expect("dimension checked")
        } else {
            0.0
        };
        current = current.compose(&j.transform(value));
    }
    let tcp = current.compose(chain.tcp_offset());
    let mut jac = DMatrix::zeros(6, axes.len());
    for (c, (kind, axis, origin)) in axes.iter().enumerate() {
        match kind {
            JointKind::Revolute => {
                let lin = axis.cross(&(tcp.position - origin));
                jac.fixed_view_mut::<3, 1>(0, c).copy_from(&lin);
                jac.fixed_view_mut::<3, 1>(3, c).copy_from(axis);
            }
            JointKind::Prismatic => {
                jac.fixed_view_mut::<3, 1>(0, c).copy_from(axis);
            }
            JointKind::Fixed => unreachable!("only movable joints get columns"),
        }
    }
    (tcp, jac)
}

/// True iff any non-adjacent pair of primitives (arm-arm or arm-static)
/// touches or overlaps at `q`. Primitives on links joined by a single joint,
/// or on the same link, are never tested against each other.
pub fn self_collision(chain: &KinematicChain, q: &[f64]) -> Result<bool, KinematicsError> {
    check_dim(chain, q)?;
    Ok(self_collision_unchecked(chain, q))
}

pub(crate) fn self_collision_unchecked(chain: &KinematicChain, q: &[f64]) -> bool {
    if chain.collision_pairs().is_empty() {
        return false;
    }
    let frames = link_frames_unchecked(chain, q);
    let arm: Vec<_> = chain
        .arm_body()
        .iter()
        .zip(chain.arm_primitive_frames())
        .map(|(p, f)| p.placed(&frames[f]))
        .collect();
    let statics = chain.static_placed();
    chain.collision_pairs().iter().any(|&(i, j)| {
        let other = if j < arm.len() {
            &arm[j]
        } else {
            &statics[j - arm.len()]
        };
        arm[i].clearance(other) <= 0.0
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::robot::{parse_robot, KinematicChain};

    pub const PLANAR_2R: &str = r#"<robot name="planar2r">
  <link name="base"/>
  <link name="link1"/>
  <link name="link2"/>
  <link name="tcp"/>
  <joint name="j1" type="revolute">
    <parent link="base"/><child link="link1"/>
    <axis xyz="0 0 1"/><limit lower="-3.141592653589793" upper="3.141592653589793"/>
  </joint>
  <joint name="j2" type="revolute">
    <parent link="link1"/><child link="link2"/>
    <origin xyz="1 0 0"/>
    <axis xyz="0 0 1"/><limit lower="-3.141592653589793" upper="3.141592653589793"/>
  </joint>
  <joint name="tip" type="fixed">
    <parent link="link2"/><child link="tcp"/>
    <origin xyz="1 0 0"/>
  </joint>
</robot>"#;

    pub fn planar_2r() -> KinematicChain {
        parse_robot(PLANAR_2R).unwrap().value
    }

    /// Planar 3R arm (links 1, 1, 0.8) with capsules on every link, so the
    /// third link can fold back onto the first.
    pub const PLANAR_3R_CAPSULES: &str = r#"<robot name="planar3r">
  <link name="base"/>
  <link name="link1"><collision_primitive type="capsule" radius="0.05" length="0.8"><origin xyz="0.5 0 0" rpy="0 1.5707963267948966 0"/></collision_primitive></link>
  <link name="link2"><collision_primitive type="capsule" radius="0.05" length="0.8"><origin xyz="0.5 0 0" rpy="0 1.5707963267948966 0"/></collision_primitive></link>
  <link name="link3"><collision_primitive type="capsule" radius="0.05" length="0.6"><origin xyz="0.4 0 0" rpy="0 1.5707963267948966 0"/></collision_primitive></link>
  <link name="tcp"/>
  <joint name="j1" type="revolute"><parent link="base"/><child link="link1"/><axis xyz="0 0 1"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="j2" type="revolute"><parent link="link1"/><child link="link2"/><origin xyz="1 0 0"/><axis xyz="0 0 1"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="j3" type="revolute"><parent link="link2"/><child link="link3"/><origin xyz="1 0 0"/><axis xyz="0 0 1"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="tip" type="fixed"><parent link="link3"/><child link="tcp"/><origin xyz="0.8 0 0"/></joint>
</robot>"#;

    pub fn planar_3r() -> KinematicChain {
        parse_robot(PLANAR_3R_CAPSULES).unwrap().value
    }

    /// Planar 2R with an intermediate fixed joint, for Jacobian shape checks.
    pub const PLANAR_2R_FIXED_MID: &str = r#"<robot name="p2f">
  <link name="base"/><link name="l1"/><link name="l1b"/><link name="l2"/>
  <joint name="j1" type="revolute"><parent link="base"/><child link="l1"/><axis xyz="0 0 1"/><limit lower="-3" upper="3"/></joint>
  <joint name="f" type="fixed"><parent link="l1"/><child link="l1b"/><origin xyz="0.5 0 0"/></joint>
  <joint name="j2" type="prismatic"><parent link="l1b"/><child link="l2"/><origin xyz="0.5 0 0"/><axis xyz="1 0 0"/><limit lower="0" upper="0.5"/></joint>
</robot>"#;
}
