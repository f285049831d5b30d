//! Object points inside the gripper closing volume, expressed in gripper coordinates.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{quantize_point, to_gripper_frame, GraspPose, GripperSpec};
use crate::model_io::PointCloud;

/// Nonempty set of `(u, v, t)` points that lie in the closing volume of `pose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperFrameCloud {
    points: Vec<Point3<f64>>,
    source_object: String,
    pose: GraspPose,
}

impl GripperFrameCloud {
    /// Checks that `points` is nonempty and inside the closing volume of `spec`.
    pub fn new(
        points: Vec<Point3<f64>>,
        source_object: impl Into<String>,
        pose: GraspPose,
        spec: &GripperSpec,
    ) -> Result<Self> {
        let cloud = GripperFrameCloud { points, source_object: source_object.into(), pose };
        cloud.validate(spec)?;
        Ok(cloud)
    }

    /// Re-checks the invariants, e.g. after deserialization.
    pub fn validate(&self, spec: &GripperSpec) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidInput("gripper-frame cloud must be nonempty".into()));
        }
        match self.points.iter().find(|p| !spec.contains(p)) {
            Some(p) => Err(Error::InvalidInput(format!(
                "point {p:?} lies outside the closing volume"
            ))),
            None => Ok(()),
        }
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn source_object(&self) -> &str {
        &self.source_object
    }

    pub fn pose(&self) -> &GraspPose {
        &self.pose
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Collects the object points that fall inside the closing volume of `pose`.
///
/// Each point is moved into the gripper frame, snapped to the
/// [`GRIPPER_FRAME_QUANTUM`](crate::geometry::GRIPPER_FRAME_QUANTUM) lattice and kept if it
/// passes the half-open box test. Returns `None` when nothing survives.
pub fn extract_region(
    cloud: &PointCloud,
    pose: &GraspPose,
    spec: &GripperSpec,
    source_object: &str,
) -> Option<GripperFrameCloud> {
    let points: Vec<_> = cloud
        .points()
        .iter()
        .map(|p| quantize_point(&to_gripper_frame(p, pose)))
        .filter(|g| spec.contains(g))
        .collect();
    (!points.is_empty()).then(|| GripperFrameCloud {
        points,
        source_object: source_object.to_owned(),
        pose: *pose,
    })
}

/// World-frame bounding box of the closing volume, grown by `margin` on every side.
struct WorldBox {
    lo: Point3<f64>,
    hi: Point3<f64>,
}

impl WorldBox {
    fn new(pose: &GraspPose, spec: &GripperSpec, margin: f64) -> Self {
        let (lo, hi) = spec.bounds();
        let mut wlo = Point3::from([f64::INFINITY; 3]);
        let mut whi = Point3::from([f64::NEG_INFINITY; 3]);
        for corner in 0..8 {
            let c = Point3::new(
                if corner & 1 == 0 { lo.x } else { hi.x },
                if corner & 2 == 0 { lo.y } else { hi.y },
                if corner & 4 == 0 { lo.z } else { hi.z },
            );
            let w = pose.frame.apply(&c);
            wlo = wlo.inf(&w);
            whi = whi.sup(&w);
        }
        let m = nalgebra::Vector3::repeat(margin);
        WorldBox { lo: wlo - m, hi: whi + m }
    }

    #[inline]
    fn may_contain(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| self.lo[i] <= p[i] && p[i] <= self.hi[i])
    }
}

/// Same result as [`extract_region`]; points outside a slightly grown world-frame bounding box
/// of the closing volume are rejected before the frame change.
pub fn extract_region_prefiltered(
    cloud: &PointCloud,
    pose: &GraspPose,
    spec: &GripperSpec,
    source_object: &str,
) -> Option<GripperFrameCloud> {
    // far larger than any rounding in the transform or the lattice snap
    let bbox = WorldBox::new(pose, spec, spec.resolution());
    let points: Vec<_> = cloud
        .points()
        .iter()
        .filter(|p| bbox.may_contain(p))
        .map(|p| quantize_point(&to_gripper_frame(p, pose)))
        .filter(|g| spec.contains(g))
        .collect();
    (!points.is_empty()).then(|| GripperFrameCloud {
        points,
        source_object: source_object.to_owned(),
        pose: *pose,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<GripperFrameCloud>,
    pub dropped: usize,
}

/// Drops empty intersections, keeping the order of the rest.
pub fn filter_nonempty(
    regions: impl IntoIterator<Item = Option<GripperFrameCloud>>,
) -> FilterOutcome {
    let mut kept = Vec::new();
    let mut dropped = 0;
    for region in regions {
        match region {
            Some(r) => kept.push(r),
            None => dropped += 1,
        }
    }
    FilterOutcome { kept, dropped }
}
