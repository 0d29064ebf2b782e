//! Rigid transforms, sphere-surface sampling and surface frames.
//!
//! Orientation is a unit quaternion everywhere inside the pipeline. Euler
//! angles only appear at import/export boundaries and always use the
//! Z-Y-X intrinsic convention (roll about x, then pitch about y, then yaw
//! about z, composed as `Rz(yaw) * Ry(pitch) * Rx(roll)`), which is also the
//! convention of URDF `rpy` attributes.

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// A rigid transform in SE(3).
///
/// Composition follows matrix order: `a.compose(&b)` is `A * B`, i.e. `b`
/// is applied first and the result is expressed in `a`'s parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRepr", try_from = "PoseRepr")]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

/// Serialized form: position and a `[w, x, y, z]` quaternion.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        Self {
            position: p.position.into(),
            orientation: p.wxyz(),
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = GeometryError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        let pose = Pose::from_wxyz(r.position, r.orientation)?;
        let [w, x, y, z] = r.orientation;
        let q = Quaternion::new(w, x, y, z);
        // keep stored unit quaternions bit-for-bit so files round-trip exactly
        if (q.norm() - 1.0).abs() <= 1e-12 {
            return Ok(Pose {
                position: pose.position,
                orientation: UnitQuaternion::new_unchecked(q),
            });
        }
        Ok(pose)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    /// Builds a pose, renormalizing the rotation so the unit-norm invariant
    /// holds regardless of how the quaternion was produced.
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: renormalize(orientation),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn from_rotation(orientation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), orientation)
    }

    /// Rotation of `angle` radians about world z.
    pub fn rot_z(angle: f64) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle))
    }

    /// Builds a pose from a quaternion given as `[w, x, y, z]`.
    pub fn from_wxyz(position: [f64; 3], wxyz: [f64; 4]) -> Result<Self, GeometryError> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-12 || position.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPose(format!(
                "position {position:?}, quaternion {wxyz:?}"
            )));
        }
        Ok(Self::new(
            Vector3::from(position),
            UnitQuaternion::from_quaternion(q),
        ))
    }

    /// Quaternion components in `[w, x, y, z]` order.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Z-Y-X intrinsic Euler angles (`roll`, `pitch`, `yaw`).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Vector3::from(xyz),
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        )
    }

    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.orientation.euler_angles();
        [r, p, y]
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation * other.position,
            self.orientation * other.orientation,
        )
    }

    pub fn invert(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-(inv * self.position), inv)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.orientation.to_rotation_matrix().matrix()
    }

    /// Homogeneous 4x4 form.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Pose {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let rot = Rotation3::from_matrix_unchecked(r);
        Pose::new(
            m.fixed_view::<3, 1>(0, 3).into_owned(),
            UnitQuaternion::from_rotation_matrix(&rot),
        )
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::x()
    }

    pub fn y_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::y()
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    /// Euclidean distance between positions and the angle of the relative
    /// rotation, in radians.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        (
            (self.position - other.position).norm(),
            self.orientation.angle_to(&other.orientation),
        )
    }

    /// Largest absolute difference over position and quaternion components,
    /// with the quaternion sign chosen to match `other` (q and -q are the
    /// same rotation).
    pub fn max_component_diff(&self, other: &Pose) -> f64 {
        let a = self.wxyz();
        let mut b = other.wxyz();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        if dot < 0.0 {
            b.iter_mut().for_each(|v| *v = -*v);
        }
        let dq = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let dp = (self.position - other.position).amax();
        dq.max(dp)
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// Deterministic quasi-uniform unit vectors on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePointSet {
    points: Vec<Vector3<f64>>,
}

impl SpherePointSet {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }
}

/// Golden-angle spiral: heights are evenly spaced in `z` (mid-cell
/// offsets, so neither pole is sampled) and successive longitudes advance by
/// the golden angle.
pub fn sphere_points(n: usize) -> Result<SpherePointSet, GeometryError> {
    if n == 0 {
        return Err(GeometryError::EmptySampling);
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let nf = n as f64;
    let points = (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / nf;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * k as f64;
            let v = Vector3::new(r * phi.cos(), r * phi.sin(), z);
            v / v.norm()
        })
        .collect();
    Ok(SpherePointSet { points })
}

/// Frame on a sphere surface whose z-axis points at the sphere center.
///
/// The x-axis is `normalize(world_z × z)`; when the frame z-axis is
/// (anti)parallel to world z the x-axis is world x.
pub fn frame_at_point(center: &Vector3<f64>, radius: f64, surface_point: &Vector3<f64>) -> Pose {
    let dir = surface_point.normalize();
    let z = -dir;
    let world_z = Vector3::z();
    let x = if z.dot(&world_z).abs() > 1.0 - 1e-9 {
        Vector3::x()
    } else {
        world_z.cross(&z).normalize()
    };
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Pose::new(
        center + dir * radius,
        UnitQuaternion::from_rotation_matrix(&rot),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn rot_z_matrix(a: f64) -> Matrix4<f64> {
        let (s, c) = a.sin_cos();
        Matrix4::new(
            c, -s, 0.0, 0.0, //
            s, c, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        )
    }

    #[test]
    fn compose_identity() {
        let p = Pose::identity().compose(&Pose::identity());
        assert_eq!(p.max_component_diff(&Pose::identity()), 0.0);
    }

    #[test]
    fn compose_translations_add() {
        let p = Pose::from_translation(1.0, 0.0, 0.0).compose(&Pose::from_translation(0.0, 2.0, 0.0));
        assert_eq!(p.position, Vector3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn compose_rotation_then_translation_matches_matrix_product() {
        let a = Pose::rot_z(FRAC_PI_2);
        let b = Pose::from_translation(1.0, 0.0, 0.0);
        let mut tb = Matrix4::identity();
        tb[(0, 3)] = 1.0;
        let expected = rot_z_matrix(FRAC_PI_2) * tb;
        let got = a.compose(&b);
        assert_abs_diff_eq!(got.to_matrix(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(got.position, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
        assert!(got.orientation.angle_to(&a.orientation) < 1e-12);
    }

    #[test]
    fn invert_cases() {
        assert_eq!(
            Pose::identity().invert().max_component_diff(&Pose::identity()),
            0.0
        );
        let t = Pose::from_translation(1.0, 0.0, 0.0).invert();
        assert_eq!(t.position, Vector3::new(-1.0, 0.0, 0.0));

        let mut m = rot_z_matrix(FRAC_PI_2);
        m[(0, 3)] = 1.0;
        m[(1, 3)] = 2.0;
        m[(2, 3)] = 3.0;
        let oracle = m.try_inverse().unwrap();
        let p = Pose::from_matrix(&m).invert();
        assert_abs_diff_eq!(p.to_matrix(), oracle, epsilon = 1e-9);
    }

    #[test]
    fn euler_round_trip() {
        let p = Pose::from_xyz_rpy([0.1, 0.2, 0.3], [0.3, -0.4, 1.2]);
        let rpy = p.rpy();
        assert_abs_diff_eq!(rpy[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(rpy[1], -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(rpy[2], 1.2, epsilon = 1e-12);
        // Rz * Ry * Rx
        let expected = Rotation3::from_axis_angle(&Vector3::z_axis(), 1.2)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -0.4)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), 0.3);
        assert_abs_diff_eq!(p.rotation_matrix(), *expected.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn from_wxyz_rejects_zero_quaternion() {
        assert!(Pose::from_wxyz([0.0; 3], [0.0; 4]).is_err());
        let p = Pose::from_wxyz([0.0; 3], [2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.wxyz(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn sphere_points_rejects_zero() {
        assert!(matches!(sphere_points(0), Err(GeometryError::EmptySampling)));
    }

    #[test]
    fn sphere_points_single() {
        let s = sphere_points(1).unwrap();
        assert_eq!(s.count(), 1);
        assert_abs_diff_eq!(s.points()[0].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_points_pair_is_well_separated() {
        let s = sphere_points(2).unwrap();
        let angle = s.points()[0].angle(&s.points()[1]);
        assert!(angle > FRAC_PI_2, "separation {angle}");
    }

    #[test]
    fn sphere_points_are_unit() {
        for n in [1, 2, 3, 50, 777] {
            for p in sphere_points(n).unwrap().points() {
                assert!((p.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sphere_points_centroid_near_zero() {
        let s = sphere_points(200).unwrap();
        let mean = s.points().iter().sum::<Vector3<f64>>() / 200.0;
        assert!(mean.norm() < 0.05, "centroid {}", mean.norm());
    }

    #[test]
    fn frame_axis_aligned_cases() {
        let f = frame_at_point(&Vector3::zeros(), 1.0, &Vector3::z());
        assert_abs_diff_eq!(f.position, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f.z_axis(), Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f.x_axis(), Vector3::x(), epsilon = 1e-12);

        let f = frame_at_point(&Vector3::zeros(), 2.0, &Vector3::x());
        assert_abs_diff_eq!(f.position, Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f.z_axis(), Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn frame_is_proper_rotation() {
        // Gram-Schmidt reference: orthonormalize (z, world_x, world_y) and
        // compare the z column and orthonormality.
        let center = Vector3::new(0.3, -0.2, 0.5);
        for p in sphere_points(64).unwrap().points() {
            let f = frame_at_point(&center, 0.04, p);
            let r = f.rotation_matrix();
            assert_abs_diff_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-9);
            assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(f.z_axis(), -p, epsilon = 1e-9);
            // x and y are tangent to the sphere
            assert!(f.x_axis().dot(p).abs() < 1e-9);
            assert!(f.y_axis().dot(p).abs() < 1e-9);
        }
    }
}
