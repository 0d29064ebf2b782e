//! Sphere and capsule primitives and exact distance queries between them.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Sphere,
    Capsule,
}

/// Collision geometry attached to a link.
///
/// A capsule is the set of points within `radius` of a segment of `length`
/// running along the local z-axis of `local_offset`, centered on its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionPrimitive {
    pub kind: PrimitiveKind,
    pub attached_link: String,
    pub local_offset: Pose,
    pub radius: f64,
    pub length: f64,
}

impl CollisionPrimitive {
    pub fn sphere(link: &str, offset: Pose, radius: f64) -> Self {
        Self {
            kind: PrimitiveKind::Sphere,
            attached_link: link.to_owned(),
            local_offset: offset,
            radius,
            length: 0.0,
        }
    }

    pub fn capsule(link: &str, offset: Pose, radius: f64, length: f64) -> Self {
        Self {
            kind: PrimitiveKind::Capsule,
            attached_link: link.to_owned(),
            local_offset: offset,
            radius,
            length,
        }
    }

    /// Core segment and radius once the owning link sits at `link_pose`.
    pub fn placed(&self, link_pose: &Pose) -> PlacedPrimitive {
        let frame = link_pose.compose(&self.local_offset);
        let half = match self.kind {
            PrimitiveKind::Sphere => 0.0,
            PrimitiveKind::Capsule => 0.5 * self.length,
        };
        let axis = frame.z_axis() * half;
        PlacedPrimitive {
            a: frame.position - axis,
            b: frame.position + axis,
            radius: self.radius,
        }
    }
}

/// A primitive in a common frame: all points within `radius` of segment `ab`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedPrimitive {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl PlacedPrimitive {
    /// Closed containment: points on the surface count as inside.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        point_segment_distance(p, &self.a, &self.b) <= self.radius
    }

    /// Signed clearance; zero or negative means the shapes touch or overlap.
    pub fn clearance(&self, other: &PlacedPrimitive) -> f64 {
        segment_segment_distance(&self.a, &self.b, &other.a, &other.b) - self.radius - other.radius
    }
}

pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Closest distance between segments `p1q1` and `p2q2`.
pub fn segment_segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> f64 {
    const EPS: f64 = 1e-15;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}
