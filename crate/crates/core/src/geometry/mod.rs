//! Gripper model, rigid frames and grasp candidate generation.
//!
//! Gripper coordinates are `(u, v, t)`: `u` is the closing direction between the fingers, `v`
//! the finger-height direction and `t` the approach direction. The closing volume is the box
//! `u ∈ [-width/2, width/2)`, `v ∈ [-height/2, height/2)`, `t ∈ [0, depth)`.

mod normals;
mod sampling;

use std::fmt;

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use normals::{estimate_normals, KdTree, DEFAULT_K_NEIGHBORS};
pub use sampling::{
    derive_seed, pose_from_contact, sample_grasp_candidates, sample_surface_points,
    CandidateSet,
};

/// Gripper-frame coordinates are snapped to multiples of this step (2^-32 m) when points are
/// extracted. Any sum of a snapped coordinate and a snapped translation below 2^20 m is exact in
/// `f64`, which makes translating a feature and extracting it again lossless.
pub const GRIPPER_FRAME_QUANTUM: f64 = 1.0 / 4_294_967_296.0;

pub fn quantize(x: f64) -> f64 {
    (x * 4_294_967_296.0).round() * GRIPPER_FRAME_QUANTUM
}

pub fn quantize_point(p: &Point3<f64>) -> Point3<f64> {
    Point3::new(quantize(p.x), quantize(p.y), quantize(p.z))
}

/// Voxel counts `(a, b, c)` along `(u, v, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl GridDims {
    pub fn voxel_count(&self) -> usize {
        self.a * self.b * self.c
    }

    pub fn packed_len(&self) -> usize {
        self.voxel_count().div_ceil(8)
    }

    /// Linear bit index of voxel `(i_u, i_v, i_t)`.
    #[inline]
    pub fn bit_index(&self, iu: usize, iv: usize, it: usize) -> usize {
        (it * self.b + iv) * self.a + iu
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.a, self.b, self.c)
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.a, self.b, self.c)
    }
}

/// Parallel-jaw closing volume and the voxel edge used to encode it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGripperSpec", into = "RawGripperSpec")]
pub struct GripperSpec {
    width: f64,
    height: f64,
    depth: f64,
    resolution: f64,
    dims: GridDims,
}

#[derive(Serialize, Deserialize)]
struct RawGripperSpec {
    width: f64,
    height: f64,
    depth: f64,
    resolution: f64,
}

impl TryFrom<RawGripperSpec> for GripperSpec {
    type Error = Error;

    fn try_from(raw: RawGripperSpec) -> Result<Self> {
        GripperSpec::new(raw.width, raw.height, raw.depth, raw.resolution)
    }
}

impl From<GripperSpec> for RawGripperSpec {
    fn from(s: GripperSpec) -> Self {
        RawGripperSpec {
            width: s.width,
            height: s.height,
            depth: s.depth,
            resolution: s.resolution,
        }
    }
}

/// Maximum distance of `extent / resolution` from an integer.
const VOXEL_FIT_TOLERANCE: f64 = 1e-9;

impl GripperSpec {
    pub fn new(width: f64, height: f64, depth: f64, resolution: f64) -> Result<Self> {
        for (name, v) in
            [("width", width), ("height", height), ("depth", depth), ("resolution", resolution)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("gripper {name} must be > 0, got {v}")));
            }
        }
        let count = |name: &str, extent: f64| -> Result<usize> {
            let ratio = extent / resolution;
            let n = ratio.round();
            if (ratio - n).abs() > VOXEL_FIT_TOLERANCE {
                return Err(Error::Config(format!(
                    "gripper {name} {extent} is not a whole number of {resolution} voxels"
                )));
            }
            if !(1.0..=u16::MAX as f64).contains(&n) {
                return Err(Error::Config(format!("gripper {name} gives {n} voxels")));
            }
            Ok(n as usize)
        };
        let dims = GridDims {
            a: count("width", width)?,
            b: count("height", height)?,
            c: count("depth", depth)?,
        };
        Ok(GripperSpec { width, height, depth, resolution, dims })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn max_extent(&self) -> f64 {
        self.width.max(self.height).max(self.depth)
    }

    /// Length of the closing volume's space diagonal.
    pub fn diagonal(&self) -> f64 {
        (self.width.powi(2) + self.height.powi(2) + self.depth.powi(2)).sqrt()
    }

    /// Half-open containment test on gripper-frame coordinates.
    #[inline]
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        -hw <= p.x && p.x < hw && -hh <= p.y && p.y < hh && 0.0 <= p.z && p.z < self.depth
    }

    /// Lower and upper corners of the closing volume in gripper coordinates.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        (
            Point3::new(-self.width / 2.0, -self.height / 2.0, 0.0),
            Point3::new(self.width / 2.0, self.height / 2.0, self.depth),
        )
    }

    /// Center of voxel `(iu, iv, it)` in gripper coordinates.
    pub fn voxel_center(&self, iu: usize, iv: usize, it: usize) -> Point3<f64> {
        let r = self.resolution;
        Point3::new(
            (iu as f64 + 0.5) * r - self.width / 2.0,
            (iv as f64 + 0.5) * r - self.height / 2.0,
            (it as f64 + 0.5) * r,
        )
    }
}

/// Tolerance on `RᵀR = I` and `det R = 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Proper rigid motion `x ↦ R·x + w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransform", into = "RawTransform")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Row-major rotation plus translation.
#[derive(Serialize, Deserialize)]
struct RawTransform {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<RawTransform> for RigidTransform {
    type Error = Error;

    fn try_from(raw: RawTransform) -> Result<Self> {
        let r = raw.rotation;
        RigidTransform::new(
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vector3::from(raw.translation),
        )
    }
}

impl From<RigidTransform> for RawTransform {
    fn from(t: RigidTransform) -> Self {
        let m = t.rotation;
        RawTransform {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation: t.translation.into(),
        }
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite transform".into()));
        }
        let gram_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if gram_err > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "rotation is not proper orthonormal (|RᵀR-I|={gram_err:e}, det={det})"
            )));
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation }
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Result<Self> {
        RigidTransform::new(q.to_rotation_matrix().into_inner(), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(self.rotation);
        UnitQuaternion::from_rotation_matrix(&rot)
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `Rᵀ·(p − w)`.
    pub fn apply_inverse(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.tr_mul(&(p.coords - self.translation)))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }
}

/// Gripper frame placed in object coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    /// Maps gripper coordinates `(u, v, t)` into object coordinates.
    pub frame: RigidTransform,
    /// Index of the surface point the candidate was built on.
    pub source_point_index: usize,
}

impl GraspPose {
    pub fn new(frame: RigidTransform, source_point_index: usize) -> Self {
        GraspPose { frame, source_point_index }
    }

    /// The same grasp after moving the whole scene by `motion`.
    pub fn moved_by(&self, motion: &RigidTransform) -> GraspPose {
        GraspPose { frame: motion.compose(&self.frame), ..*self }
    }
}

/// Expresses an object-frame point in the gripper frame of `pose`.
pub fn to_gripper_frame(point: &Point3<f64>, pose: &GraspPose) -> Point3<f64> {
    pose.frame.apply_inverse(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform4(-1.0f64..1.0),
            prop::array::uniform3(-5.0f64..5.0),
        )
            .prop_filter("nonzero quaternion", |(q, _)| q.iter().map(|c| c * c).sum::<f64>() > 1e-3)
            .prop_map(|(q, t)| {
                let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                    q[0], q[1], q[2], q[3],
                ));
                RigidTransform::from_quaternion(&q, Vector3::from(t)).unwrap()
            })
    }

    #[test]
    fn spec_validation() {
        let spec = GripperSpec::new(0.08, 0.02, 0.06, 0.01).unwrap();
        assert_eq!(spec.dims(), GridDims { a: 8, b: 2, c: 6 });
        assert!(GripperSpec::new(0.085, 0.02, 0.06, 0.01).is_err());
        assert!(GripperSpec::new(0.0, 0.02, 0.06, 0.01).is_err());
        assert!(GripperSpec::new(0.08, 0.02, 0.06, -0.01).is_err());
        assert!(GripperSpec::new(0.004, 0.02, 0.06, 0.01).is_err());
        let back: GripperSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<GripperSpec>(
            r#"{"width":0.085,"height":0.02,"depth":0.06,"resolution":0.01}"#
        )
        .is_err());
    }

    #[test]
    fn half_open_containment() {
        let spec = GripperSpec::new(0.02, 0.02, 0.02, 0.01).unwrap();
        assert!(spec.contains(&Point3::new(-0.01, -0.01, 0.0)));
        assert!(!spec.contains(&Point3::new(0.01, 0.0, 0.01)));
        assert!(!spec.contains(&Point3::new(0.0, 0.01, 0.01)));
        assert!(!spec.contains(&Point3::new(0.0, 0.0, 0.02)));
        assert!(!spec.contains(&Point3::new(0.0, 0.0, -1e-300)));
    }

    #[test]
    fn rejects_improper_rotation() {
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(reflect, Vector3::zeros()).is_err());
        assert!(RigidTransform::new(Matrix3::identity() * 1.001, Vector3::zeros()).is_err());
    }

    #[test]
    fn origin_maps_to_zero() {
        let q = UnitQuaternion::from_euler_angles(0.3, -1.2, 2.0);
        let frame = RigidTransform::from_quaternion(&q, Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let pose = GraspPose::new(frame, 0);
        let g = to_gripper_frame(&Point3::new(1.0, 2.0, 3.0), &pose);
        assert!(g.coords.norm() < 1e-12);
    }

    #[test]
    fn quantize_is_idempotent_and_exact_under_lattice_translation() {
        let x = quantize(0.012_345_678_9);
        assert_eq!(quantize(x), x);
        let t = quantize(3.7);
        assert_eq!((x + t) - t, x);
    }

    proptest! {
        #[test]
        fn inverse_of_frame_application(frame in arb_transform(),
                                        q in prop::array::uniform3(-0.2f64..0.2)) {
            let pose = GraspPose::new(frame, 0);
            let q = Point3::from(q);
            let back = to_gripper_frame(&frame.apply(&q), &pose);
            prop_assert!((back - q).norm() < 1e-9);
        }

        #[test]
        fn gripper_coordinates_ignore_scene_motion(frame in arb_transform(), motion in arb_transform(),
                                                   p in prop::array::uniform3(-1.0f64..1.0)) {
            let pose = GraspPose::new(frame, 0);
            let p = Point3::from(p);
            let direct = to_gripper_frame(&p, &pose);
            let moved = to_gripper_frame(&motion.apply(&p), &pose.moved_by(&motion));
            prop_assert!((direct - moved).norm() < 1e-9);
        }

        #[test]
        fn serde_round_trip_keeps_rotation(frame in arb_transform()) {
            let json = serde_json::to_string(&frame).unwrap();
            let back: RigidTransform = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, frame);
        }
    }
}
