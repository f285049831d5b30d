use std::f64::consts::TAU;

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::{GraspPose, GripperSpec, RigidTransform};
use crate::error::{Error, Result};
use crate::model_io::{Mesh, PointCloud};

/// Independent sub-seed for stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    xxh3_64_with_seed(&stream.to_le_bytes(), seed)
}

/// Area-weighted uniform sampling of `n` points on the mesh surface.
pub fn sample_surface_points(mesh: &Mesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::InvalidInput("mesh has no triangles".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles().len());
    let mut total = 0.0;
    for i in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(i);
        total += 0.5 * (b - a).cross(&(c - a)).norm();
        cumulative.push(total);
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidInput("mesh has zero total surface area".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let target = rng.gen::<f64>() * total;
            let tri = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(tri);
            let (mut r1, mut r2) = (rng.gen::<f64>(), rng.gen::<f64>());
            if r1 + r2 > 1.0 {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            a + (b - a) * r1 + (c - a) * r2
        })
        .collect();
    Ok(PointCloud::new(points))
}

/// Gripper frame for a contact at `point` with outward `normal`: the closing axis follows the
/// normal, the approach axis is rotated by `roll` about it, and the contact lands at
/// `(0, 0, depth/2)`. Returns `None` for a zero or non-finite normal.
pub fn pose_from_contact(
    point: &Point3<f64>,
    normal: &Vector3<f64>,
    roll: f64,
    spec: &GripperSpec,
    source_point_index: usize,
) -> Option<GraspPose> {
    let len = normal.norm();
    if !(len > 1e-12 && len.is_finite()) {
        return None;
    }
    let u = normal / len;
    // reference axis least aligned with u
    let axis = match u.iamin() {
        0 => Vector3::x(),
        1 => Vector3::y(),
        _ => Vector3::z(),
    };
    let e1 = axis.cross(&u).normalize();
    let e2 = u.cross(&e1);
    let t = e1 * roll.cos() + e2 * roll.sin();
    let v = t.cross(&u);
    let rotation = Matrix3::from_columns(&[u, v, t]);
    let translation = point.coords - t * (spec.depth() / 2.0);
    RigidTransform::new(rotation, translation)
        .ok()
        .map(|frame| GraspPose::new(frame, source_point_index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub poses: Vec<GraspPose>,
    /// Draws that landed on a point with a degenerate normal.
    pub skipped: usize,
}

/// Draws `m` grasp candidates from a cloud with normals: a uniformly random surface point and a
/// uniformly random roll of the approach axis about its normal.
pub fn sample_grasp_candidates(
    cloud: &PointCloud,
    m: usize,
    spec: &GripperSpec,
    seed: u64,
) -> Result<CandidateSet> {
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::InvalidInput("grasp sampling needs a cloud with normals".into()))?;
    if cloud.is_empty() {
        return Err(Error::InvalidInput("grasp sampling on an empty cloud".into()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("candidate count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poses = Vec::with_capacity(m);
    let mut skipped = 0;
    for _ in 0..m {
        let idx = rng.gen_range(0..cloud.len());
        let roll = rng.gen::<f64>() * TAU;
        match pose_from_contact(&cloud.points()[idx], &normals[idx], roll, spec, idx) {
            Some(pose) => poses.push(pose),
            None => skipped += 1,
        }
    }
    Ok(CandidateSet { poses, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::to_gripper_frame;
    use crate::model_io::parse_obj;
    use crate::pipeline::box_mesh;

    fn spec() -> GripperSpec {
        GripperSpec::new(0.08, 0.02, 0.06, 0.01).unwrap()
    }

    #[test]
    fn single_sample_inside_triangle() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3").unwrap();
        let cloud = sample_surface_points(&mesh, 1, 42).unwrap();
        let p = cloud.points()[0];
        // barycentric coordinates (1 - x - y, x, y)
        let (b1, b2) = (p.x, p.y);
        let b0 = 1.0 - b1 - b2;
        for b in [b0, b1, b2] {
            assert!((0.0..=1.0).contains(&b));
        }
        assert_eq!(p.z, 0.0);
    }

    #[test]
    fn area_weighting_on_cube() {
        let mesh = box_mesh(Vector3::new(1.0, 1.0, 1.0));
        let n = 60_000;
        let cloud = sample_surface_points(&mesh, n, 9).unwrap();
        let mut faces = [0usize; 6];
        for p in cloud.points() {
            let (axis, coord) = (0..3)
                .map(|a| (a, p[a]))
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .unwrap();
            faces[axis * 2 + usize::from(coord > 0.0)] += 1;
        }
        let expected = n as f64 / 6.0;
        for count in faces {
            assert!((count as f64 - expected).abs() < 0.05 * expected, "{faces:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let mesh = box_mesh(Vector3::new(0.1, 0.2, 0.05));
        assert_eq!(
            sample_surface_points(&mesh, 500, 7).unwrap(),
            sample_surface_points(&mesh, 500, 7).unwrap()
        );
        assert_ne!(
            sample_surface_points(&mesh, 500, 7).unwrap(),
            sample_surface_points(&mesh, 500, 8).unwrap()
        );
    }

    #[test]
    fn zero_area_mesh_rejected() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3").unwrap();
        assert!(sample_surface_points(&mesh, 10, 0).is_err());
    }

    #[test]
    fn contact_lands_mid_depth() {
        let spec = spec();
        let pose =
            pose_from_contact(&Point3::origin(), &Vector3::z(), 0.0, &spec, 0).unwrap();
        let g = to_gripper_frame(&Point3::origin(), &pose);
        assert!((g - Point3::new(0.0, 0.0, spec.depth() / 2.0)).norm() < 1e-15);
        assert_eq!(pose.frame.rotation().column(0), Vector3::z());
    }

    #[test]
    fn zero_normal_is_skipped() {
        assert!(pose_from_contact(&Point3::origin(), &Vector3::zeros(), 0.0, &spec(), 0).is_none());
        let cloud = PointCloud::from_raw(vec![Point3::origin(); 4], Some(vec![Vector3::zeros(); 4]));
        let set = sample_grasp_candidates(&cloud, 10, &spec(), 1).unwrap();
        assert!(set.poses.is_empty());
        assert_eq!(set.skipped, 10);
    }

    #[test]
    fn candidates_are_valid_and_reproducible() {
        let mesh = box_mesh(Vector3::new(0.1, 0.06, 0.04));
        let cloud = sample_surface_points(&mesh, 400, 5).unwrap();
        let cloud = crate::geometry::estimate_normals(&cloud, 10).unwrap();
        let a = sample_grasp_candidates(&cloud, 100, &spec(), 77).unwrap();
        let b = sample_grasp_candidates(&cloud, 100, &spec(), 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.poses.len(), 100);
        for pose in &a.poses {
            let r = pose.frame.rotation();
            assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            let p = cloud.points()[pose.source_point_index];
            let g = to_gripper_frame(&p, pose);
            assert!((g - Point3::new(0.0, 0.0, spec().depth() / 2.0)).norm() < 1e-12);
        }
    }
}
