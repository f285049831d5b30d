use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model_io::PointCloud;

pub const DEFAULT_K_NEIGHBORS: usize = 10;

/// Static 3-d tree over a borrowed point slice. Nodes are laid out implicitly: the median of
/// each index range is the node, the halves are its children.
pub struct KdTree<'a> {
    points: &'a [Point3<f64>],
    order: Vec<usize>,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        KdTree { points, order }
    }

    /// The `k` points closest to `query`, nearest first. Equal distances are ordered by index,
    /// so the result is unique.
    pub fn nearest(&self, query: &Point3<f64>, k: usize) -> Vec<usize> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(query, k, 0, self.order.len(), 0, &mut heap);
        heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
    }

    fn search(
        &self,
        query: &Point3<f64>,
        k: usize,
        lo: usize,
        hi: usize,
        depth: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let index = self.order[mid];
        let node = &self.points[index];
        let cand = Candidate { dist2: (node - query).norm_squared(), index };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }

        let axis = depth % 3;
        let diff = query[axis] - node[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(query, k, near.0, near.1, depth + 1, heap);
        // ties on the splitting plane can hide equal-distance points on either side
        if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
            self.search(query, k, far.0, far.1, depth + 1, heap);
        }
    }
}

fn build(points: &[Point3<f64>], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&i, &j| {
        points[i][axis].total_cmp(&points[j][axis]).then(i.cmp(&j))
    });
    let (left, right) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

/// Per-point normals from a local plane fit: the eigenvector of the smallest eigenvalue of the
/// covariance of each point and its `k` nearest neighbours, flipped to face away from the cloud
/// centroid.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if k < 3 {
        return Err(Error::InvalidInput(format!("k must be at least 3, got {k}")));
    }
    let points = cloud.points();
    if points.len() < k + 1 {
        return Err(Error::InvalidInput(format!(
            "normal estimation with k={k} needs at least {} points, cloud has {}",
            k + 1,
            points.len()
        )));
    }
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords)
        / points.len() as f64;
    let tree = KdTree::new(points);

    let normals: Vec<Vector3<f64>> = points
        .par_iter()
        .map(|p| {
            let neighbours = tree.nearest(p, k + 1);
            let mean = neighbours.iter().fold(Vector3::zeros(), |acc, &i| acc + points[i].coords)
                / neighbours.len() as f64;
            let cov = neighbours.iter().fold(Matrix3::zeros(), |acc, &i| {
                let d = points[i].coords - mean;
                acc + d * d.transpose()
            });
            let eig = SymmetricEigen::new(cov);
            let min = eig.eigenvalues.imin();
            let mut n = eig.eigenvectors.column(min).normalize();
            if n.dot(&(p.coords - centroid)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect();

    PointCloud::with_normals(points.to_vec(), normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_nearest(points: &[Point3<f64>], q: &Point3<f64>, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> =
            points.iter().enumerate().map(|(i, p)| ((p - q).norm_squared(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn kd_tree_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<_> = (0..500)
            .map(|_| Point3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let tree = KdTree::new(&points);
        for _ in 0..100 {
            let q = Point3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            for k in [1, 5, 11, 40] {
                assert_eq!(tree.nearest(&q, k), brute_force_nearest(&points, &q, k));
            }
        }
    }

    #[test]
    fn kd_tree_handles_duplicates_and_ties() {
        // lattice with many shared coordinates and exact distance ties
        let mut points = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                points.push(Point3::new(i as f64, j as f64, 0.0));
                points.push(Point3::new(i as f64, j as f64, 0.0));
            }
        }
        let tree = KdTree::new(&points);
        for q in [Point3::new(3.0, 3.0, 0.0), Point3::new(3.5, 3.5, 0.0), Point3::new(0.0, 7.0, 1.0)]
        {
            for k in [1, 4, 9, 17] {
                assert_eq!(tree.nearest(&q, k), brute_force_nearest(&points, &q, k));
            }
        }
    }

    #[test]
    fn planar_grid_normals() {
        let mut points = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                points.push(Point3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        // lift the centroid below the plane so orientation is well defined
        points.push(Point3::new(0.095, 0.095, -5.0));
        let with = estimate_normals(&PointCloud::new(points), 10).unwrap();
        let normals = with.normals().unwrap();
        for n in &normals[..400] {
            assert!((n.z - 1.0).abs() < 1e-9, "{n:?}");
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<_> = (0..2000)
            .map(|_| {
                let v = Vector3::new(
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                );
                Point3::from(v.normalize() * 0.1)
            })
            .collect();
        let with = estimate_normals(&PointCloud::new(points.clone()), 10).unwrap();
        for (p, n) in points.iter().zip(with.normals().unwrap()) {
            assert!((n.norm() - 1.0).abs() < 1e-6);
            assert!(n.dot(&p.coords.normalize()) > 0.99);
        }
    }

    #[test]
    fn too_few_points() {
        let cloud = PointCloud::new(vec![Point3::origin(); 5]);
        assert!(estimate_normals(&cloud, 10).is_err());
        assert!(estimate_normals(&cloud, 2).is_err());
    }
}
