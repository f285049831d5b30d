//! Readers and writers for every artifact the pipeline touches: OBJ meshes, ASCII PLY point
//! clouds, the packed `.gfa` grid-set container and the JSON assembly manifest.
//!
//! All functions here are pure; the file-system helpers at the bottom only add path context to
//! errors.

mod grid_set;
mod manifest;
mod obj;
mod ply;

use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid_set::{read_grid_set, write_grid_set, GridRecord, GridSet, GFA_MAGIC};

pub use manifest::{
    read_manifest, write_manifest, GripperEntry, Manifest, ManifestFeature, PoseEntry,
    MANIFEST_FORMAT,
};
pub use obj::{parse_obj, write_obj};
pub use ply::{parse_ply_ascii, write_ply_ascii};

/// Triangle mesh in object coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v as usize >= n) {
                return Err(Error::InvalidInput(format!(
                    "triangle {i} references vertex out of range (vertex count {n})"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidInput(format!("triangle {i} is degenerate: {tri:?}")));
            }
        }
        Ok(Mesh { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

/// Unordered point set, optionally with per-point unit normals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normals: Option<Vec<Vector3<f64>>>,
}

/// Tolerance on normal length accepted by [`PointCloud::with_normals`].
pub const NORMAL_UNIT_TOLERANCE: f64 = 1e-6;

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        PointCloud { points, normals: None }
    }

    pub fn with_normals(points: Vec<Point3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::InvalidInput(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        if let Some(i) =
            normals.iter().position(|n| (n.norm() - 1.0).abs() > NORMAL_UNIT_TOLERANCE)
        {
            return Err(Error::InvalidInput(format!(
                "normal {i} is not unit length (norm {})",
                normals[i].norm()
            )));
        }
        Ok(PointCloud { points, normals: Some(normals) })
    }

    /// Skips the normal checks; for constructing deliberately invalid inputs.
    #[cfg(test)]
    pub(crate) fn from_raw(points: Vec<Point3<f64>>, normals: Option<Vec<Vector3<f64>>>) -> Self {
        PointCloud { points, normals }
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    parse_obj(&read_text(path)?).map_err(|e| e.in_file(path))
}

pub fn load_point_cloud(path: &Path) -> Result<PointCloud> {
    parse_ply_ascii(&read_text(path)?).map_err(|e| e.in_file(path))
}
