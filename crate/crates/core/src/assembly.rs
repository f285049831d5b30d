//! Plane classification of unique features and their occlusion-free assembly into one object.
//!
//! Each grid is OR-projected onto the three gripper planes. A projection's corner count is the
//! number of 2×2 windows holding exactly three set pixels (the four L-shaped corner kernels).
//! The plane score is `S_p / (S_uv + S_ut + S_vt) × N_p` with `S_p` the projected area, and the
//! feature is placed on the panel of its best plane.

use std::fmt;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dedup::{FeatureRecord, OccupancyGrid};
use crate::error::{Error, Result};
use crate::geometry::{quantize, GraspPose, GripperSpec};
use crate::model_io::PointCloud;

/// Gripper plane, in tie-break priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Uv,
    Ut,
    Vt,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Uv, Plane::Ut, Plane::Vt];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::Uv => "uv",
            Plane::Ut => "ut",
            Plane::Vt => "vt",
        }
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-major binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{} pixels for a {rows}x{cols} image",
                bits.len()
            )));
        }
        Ok(BinaryImage { rows, cols, bits })
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged image rows".into()));
        }
        let bits = rows.iter().flat_map(|r| r.iter().map(|&v| v != 0)).collect();
        BinaryImage::new(rows.len(), cols, bits)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// OR-reduction of the grid along the axis the plane leaves out. Image rows follow the first
/// axis of the plane name, columns the second.
pub fn project(grid: &OccupancyGrid, plane: Plane) -> BinaryImage {
    let d = grid.dims();
    let (rows, cols) = match plane {
        Plane::Uv => (d.a, d.b),
        Plane::Ut => (d.a, d.c),
        Plane::Vt => (d.b, d.c),
    };
    let mut bits = vec![false; rows * cols];
    for it in 0..d.c {
        for iv in 0..d.b {
            for iu in 0..d.a {
                if grid.get(iu, iv, it) {
                    let (r, c) = match plane {
                        Plane::Uv => (iu, iv),
                        Plane::Ut => (iu, it),
                        Plane::Vt => (iv, it),
                    };
                    bits[r * cols + c] = true;
                }
            }
        }
    }
    BinaryImage { rows, cols, bits }
}

/// Number of 2×2 windows with exactly three set pixels.
pub fn count_corner_features(img: &BinaryImage) -> u32 {
    if img.rows < 2 || img.cols < 2 {
        return 0;
    }
    let mut count = 0;
    for r in 0..img.rows - 1 {
        for c in 0..img.cols - 1 {
            let sum = img.get(r, c) as u8
                + img.get(r, c + 1) as u8
                + img.get(r + 1, c) as u8
                + img.get(r + 1, c + 1) as u8;
            count += u32::from(sum == 3);
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneClassification {
    pub plane: Plane,
    /// Corner counts `N_p`, indexed by [`Plane::index`].
    pub n_feature: [u32; 3],
    /// Projected areas `S_p`.
    pub areas: [usize; 3],
    pub scores: [f64; 3],
}

impl PlaneClassification {
    pub fn score(&self) -> f64 {
        self.scores[self.plane.index()]
    }
}

/// Highest score wins; ties go to the earlier plane in `uv, ut, vt`.
pub fn pick_plane(scores: &[f64; 3]) -> Plane {
    let mut best = Plane::Uv;
    for p in [Plane::Ut, Plane::Vt] {
        if scores[p.index()] > scores[best.index()] {
            best = p;
        }
    }
    best
}

pub fn classify_plane(grid: &OccupancyGrid) -> PlaneClassification {
    let mut n_feature = [0; 3];
    let mut areas = [0; 3];
    for p in Plane::ALL {
        let img = project(grid, p);
        areas[p.index()] = img.area();
        n_feature[p.index()] = count_corner_features(&img);
    }
    let total: usize = areas.iter().sum();
    let scores = std::array::from_fn(|i| {
        if total == 0 {
            0.0
        } else {
            areas[i] as f64 / total as f64 * f64::from(n_feature[i])
        }
    });
    PlaneClassification { plane: pick_plane(&scores), n_feature, areas, scores }
}

/// One feature placed in the composite frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    /// Index of the feature in the sorted unique set.
    pub feature_id: usize,
    pub source_object: String,
    /// Exemplar's grasp pose in its source object.
    pub grasp_pose: GraspPose,
    pub classification: PlaneClassification,
    /// `(row, col)` inside the panel.
    pub cell: (usize, usize),
    /// Offset added to gripper-frame points; lies on the quantization lattice.
    pub translation: Vector3<f64>,
    /// Exemplar points in gripper coordinates.
    pub exemplar: Vec<Point3<f64>>,
    pub occupied_count: usize,
    pub source_count: usize,
    pub canonical_key: u64,
}

impl Placement {
    /// Gripper pose that sees this feature in the composite exactly as in its source.
    pub fn placement_pose(&self) -> GraspPose {
        GraspPose::new(
            crate::geometry::RigidTransform::from_translation(self.translation),
            0,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledObject {
    pub spec: GripperSpec,
    pub spacing: f64,
    /// Distance between neighbouring cell origins: `spacing + resolution`.
    pub pitch: f64,
    /// Distance of the `ut` and `vt` panels from the composite origin.
    pub panel_offset: f64,
    pub placements: Vec<Placement>,
    pub composite_cloud: PointCloud,
}

impl AssembledObject {
    /// Range of `composite_cloud` points belonging to each placement, in placement order.
    pub fn point_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.placements
            .iter()
            .map(|p| {
                let r = start..start + p.exemplar.len();
                start = r.end;
                r
            })
            .collect()
    }
}

fn cell_translation(plane: Plane, row: usize, col: usize, pitch: f64, offset: f64) -> Vector3<f64> {
    let (r, c) = (quantize(row as f64 * pitch), quantize(col as f64 * pitch));
    match plane {
        Plane::Uv => Vector3::new(c, r, 0.0),
        Plane::Ut => Vector3::new(c, -offset, r),
        Plane::Vt => Vector3::new(-offset, c, r),
    }
}

/// Tiles the features on three panels, one per plane class.
///
/// Panel `uv` lies in the composite XY plane at z = 0, panel `ut` in XZ at y = −offset, panel
/// `vt` in YZ at x = −offset. Features are translated only, so their `(u, v, t)` axes stay
/// aligned with `(x, y, z)` and the chosen projection plane is parallel to its panel. Within a
/// panel the cells form a row-major square-ish grid with side `ceil(sqrt(count))`.
pub fn layout(
    records: &[FeatureRecord],
    classes: &[PlaneClassification],
    spec: &GripperSpec,
    spacing: f64,
) -> Result<AssembledObject> {
    if records.len() != classes.len() {
        return Err(Error::InvalidInput(format!(
            "{} records but {} classifications",
            records.len(),
            classes.len()
        )));
    }
    if !(spacing.is_finite() && spacing >= spec.max_extent()) {
        return Err(Error::InvalidInput(format!(
            "spacing {spacing} is below the gripper's largest extent {}",
            spec.max_extent()
        )));
    }
    // one empty voxel between neighbouring cells keeps padded boxes apart
    let pitch = spacing + spec.resolution();
    let panel_offset = quantize(2.0 * pitch + spec.max_extent());

    let mut counts = [0usize; 3];
    for c in classes {
        counts[c.plane.index()] += 1;
    }
    let sides = counts.map(|n| (n as f64).sqrt().ceil().max(1.0) as usize);
    let mut next = [0usize; 3];

    let mut placements = Vec::with_capacity(records.len());
    for (id, (rec, class)) in records.iter().zip(classes).enumerate() {
        let p = class.plane.index();
        let (row, col) = (next[p] / sides[p], next[p] % sides[p]);
        next[p] += 1;
        placements.push(Placement {
            feature_id: id,
            source_object: rec.exemplar.source_object().to_owned(),
            grasp_pose: *rec.exemplar.pose(),
            classification: class.clone(),
            cell: (row, col),
            translation: cell_translation(class.plane, row, col, pitch, panel_offset),
            exemplar: rec.exemplar.points().to_vec(),
            occupied_count: rec.grid.occupied_count(),
            source_count: rec.sources.len(),
            canonical_key: rec.canonical_key,
        });
    }

    let mut assembled = AssembledObject {
        spec: *spec,
        spacing,
        pitch,
        panel_offset,
        placements,
        composite_cloud: PointCloud::default(),
    };
    assembled.composite_cloud = compose_cloud(&assembled);
    Ok(assembled)
}

/// All translated exemplar clouds, concatenated in placement order.
pub fn compose_cloud(assembled: &AssembledObject) -> PointCloud {
    let points = assembled
        .placements
        .iter()
        .flat_map(|pl| pl.exemplar.iter().map(move |p| p + pl.translation))
        .collect();
    PointCloud::new(points)
}

/// Axis-aligned bounds of each placed feature's points in the composite frame.
pub fn placement_bounds(assembled: &AssembledObject) -> Vec<(Point3<f64>, Point3<f64>)> {
    let pts = assembled.composite_cloud.points();
    assembled
        .point_ranges()
        .into_iter()
        .map(|range| {
            pts[range].iter().fold(
                (Point3::from([f64::INFINITY; 3]), Point3::from([f64::NEG_INFINITY; 3])),
                |(lo, hi), p| (lo.inf(p), hi.sup(p)),
            )
        })
        .collect()
}

/// True when no two boxes, each grown by `pad` on every side, overlap or touch.
pub fn boxes_disjoint(boxes: &[(Point3<f64>, Point3<f64>)], pad: f64) -> bool {
    for (i, (alo, ahi)) in boxes.iter().enumerate() {
        for (blo, bhi) in &boxes[i + 1..] {
            let overlap =
                (0..3).all(|k| alo[k] - pad <= bhi[k] + pad && blo[k] - pad <= ahi[k] + pad);
            if overlap {
                return false;
            }
        }
    }
    true
}
