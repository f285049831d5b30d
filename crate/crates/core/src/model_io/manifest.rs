//! JSON manifest describing how each unique feature sits in the composite object.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::assembly::{AssembledObject, Plane};
use crate::error::{Error, Result};
use crate::geometry::{GraspPose, GridDims, RigidTransform};

pub const MANIFEST_FORMAT: &str = "grasp-atlas-manifest/1";

/// Position plus unit quaternion `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
}

impl PoseEntry {
    pub fn from_transform(t: &RigidTransform) -> Self {
        let q = t.quaternion();
        PoseEntry { position: (*t.translation()).into(), quaternion: [q.w, q.i, q.j, q.k] }
    }

    pub fn to_transform(&self) -> Result<RigidTransform> {
        let [w, x, y, z] = self.quaternion;
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("quaternion norm {norm} is not 1")));
        }
        let q = UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z));
        RigidTransform::from_quaternion(&q, Vector3::from(self.position))
    }

    pub fn to_pose(&self) -> Result<GraspPose> {
        Ok(GraspPose::new(self.to_transform()?, 0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperEntry {
    pub width: f64,
    pub height: f64,
    pub depth: f64,
    pub resolution: f64,
    pub dims: GridDims,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFeature {
    pub id: usize,
    pub source_object: String,
    /// Exemplar grasp in its source object's frame.
    pub grasp_pose: PoseEntry,
    /// Gripper pose in the composite frame that reproduces the feature.
    pub placement_pose: PoseEntry,
    pub placement_translation: [f64; 3],
    pub plane: Plane,
    pub score: f64,
    pub scores: [f64; 3],
    pub areas: [usize; 3],
    pub n_feature: [u32; 3],
    pub cell: [usize; 2],
    /// First composite point of this feature.
    pub point_offset: usize,
    pub point_count: usize,
    pub occupied_count: usize,
    pub source_count: usize,
    /// Hex digest of the feature's occupancy grid.
    pub canonical_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub gripper: GripperEntry,
    pub resolution: f64,
    pub spacing: f64,
    pub pitch: f64,
    pub panel_offset: f64,
    pub composite_points: usize,
    pub features: Vec<ManifestFeature>,
}

impl Manifest {
    pub fn from_assembled(asm: &AssembledObject) -> Self {
        let spec = &asm.spec;
        let features = asm
            .placements
            .iter()
            .zip(asm.point_ranges())
            .map(|(p, range)| ManifestFeature {
                id: p.feature_id,
                source_object: p.source_object.clone(),
                grasp_pose: PoseEntry::from_transform(&p.grasp_pose.frame),
                placement_pose: PoseEntry::from_transform(&p.placement_pose().frame),
                placement_translation: p.translation.into(),
                plane: p.classification.plane,
                score: p.classification.score(),
                scores: p.classification.scores,
                areas: p.classification.areas,
                n_feature: p.classification.n_feature,
                cell: [p.cell.0, p.cell.1],
                point_offset: range.start,
                point_count: range.len(),
                occupied_count: p.occupied_count,
                source_count: p.source_count,
                canonical_key: format!("{:016x}", p.canonical_key),
            })
            .collect();
        Manifest {
            format: MANIFEST_FORMAT.to_owned(),
            gripper: GripperEntry {
                width: spec.width(),
                height: spec.height(),
                depth: spec.depth(),
                resolution: spec.resolution(),
                dims: spec.dims(),
            },
            resolution: spec.resolution(),
            spacing: asm.spacing,
            pitch: asm.pitch,
            panel_offset: asm.panel_offset,
            composite_points: asm.composite_cloud.len(),
            features,
        }
    }
}

fn check_finite(value: &serde_json::Value) -> Result<()> {
    match value {
        serde_json::Value::Null => {
            Err(Error::Serialization("manifest contains a non-finite number".into()))
        }
        serde_json::Value::Array(items) => items.iter().try_for_each(check_finite),
        serde_json::Value::Object(map) => map.values().try_for_each(check_finite),
        _ => Ok(()),
    }
}

pub fn write_manifest(asm: &AssembledObject) -> Result<String> {
    let manifest = Manifest::from_assembled(asm);
    // serde_json turns NaN and infinities into null, which this format never uses otherwise
    let value =
        serde_json::to_value(&manifest).map_err(|e| Error::Serialization(e.to_string()))?;
    check_finite(&value)?;
    let mut text =
        serde_json::to_string_pretty(&value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn read_manifest(text: &str) -> Result<Manifest> {
    let manifest: Manifest =
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::Serialization(format!("unknown manifest format `{}`", manifest.format)));
    }
    Ok(manifest)
}
