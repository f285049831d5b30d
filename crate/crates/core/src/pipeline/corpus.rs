//! Synthetic object corpora with controlled duplication.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model_io::{write_file, write_obj, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFamily {
    Boxes,
    Cylinders,
    Mixed,
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boxes" => Ok(ShapeFamily::Boxes),
            "cylinders" => Ok(ShapeFamily::Cylinders),
            "mixed" => Ok(ShapeFamily::Mixed),
            other => Err(Error::Config(format!(
                "unknown shape family `{other}` (expected boxes, cylinders or mixed)"
            ))),
        }
    }
}

/// Closed 12-triangle cuboid centered at the origin, outward-facing winding.
pub fn box_mesh(size: Vector3<f64>) -> Mesh {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 2, 3], [0, 3, 1], // z-
        [4, 5, 7], [4, 7, 6], // z+
        [0, 1, 5], [0, 5, 4], // y-
        [2, 6, 7], [2, 7, 3], // y+
        [0, 4, 6], [0, 6, 2], // x-
        [1, 3, 7], [1, 7, 5], // x+
    ];
    Mesh::new(vertices, triangles).expect("static cuboid topology")
}

/// Closed cylinder along z, centered at the origin, with `segments` side facets.
pub fn cylinder_mesh(radius: f64, height: f64, segments: u32) -> Mesh {
    let s = segments.max(3);
    let mut vertices = Vec::with_capacity(2 * s as usize + 2);
    for z in [-height / 2.0, height / 2.0] {
        for i in 0..s {
            let a = std::f64::consts::TAU * i as f64 / s as f64;
            vertices.push(Point3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let (bottom, top) = (2 * s, 2 * s + 1);
    vertices.push(Point3::new(0.0, 0.0, -height / 2.0));
    vertices.push(Point3::new(0.0, 0.0, height / 2.0));
    let mut triangles = Vec::with_capacity(4 * s as usize);
    for i in 0..s {
        let j = (i + 1) % s;
        triangles.push([i, j, s + j]);
        triangles.push([i, s + j, s + i]);
        triangles.push([bottom, j, i]);
        triangles.push([top, s + i, s + j]);
    }
    Mesh::new(vertices, triangles).expect("static cylinder topology")
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
enum Shape {
    Box([u32; 3]),
    Cylinder { radius: u32, height: u32 },
}

const MM: f64 = 0.001;

impl Shape {
    fn random(rng: &mut ChaCha8Rng, cylinder: bool) -> Shape {
        if cylinder {
            Shape::Cylinder { radius: rng.gen_range(15..=50), height: rng.gen_range(40..=160) }
        } else {
            Shape::Box([rng.gen_range(30..=150), rng.gen_range(30..=150), rng.gen_range(30..=150)])
        }
    }

    fn key(&self) -> (u8, [u32; 3]) {
        match *self {
            Shape::Box(d) => (0, d),
            Shape::Cylinder { radius, height } => (1, [radius, height, 0]),
        }
    }

    fn mesh(&self) -> Mesh {
        match *self {
            Shape::Box([x, y, z]) => {
                box_mesh(Vector3::new(x as f64 * MM, y as f64 * MM, z as f64 * MM))
            }
            Shape::Cylinder { radius, height } => {
                cylinder_mesh(radius as f64 * MM, height as f64 * MM, 24)
            }
        }
    }

    fn stem(&self) -> &'static str {
        match self {
            Shape::Box(_) => "box",
            Shape::Cylinder { .. } => "cylinder",
        }
    }
}

/// Writes `unique × copies` OBJ files into `dir`: `unique` distinct parametric shapes (whole
/// millimetre dimensions), each saved `copies` times with identical bytes under distinct names.
/// Returns the paths in name order.
pub fn gen_synthetic_corpus(
    dir: &Path,
    family: ShapeFamily,
    unique: usize,
    copies: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    if unique == 0 || copies == 0 {
        return Err(Error::Config("unique and copies must both be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut shapes = Vec::with_capacity(unique);
    while shapes.len() < unique {
        let cylinder = match family {
            ShapeFamily::Boxes => false,
            ShapeFamily::Cylinders => true,
            ShapeFamily::Mixed => shapes.len() % 2 == 1,
        };
        let shape = Shape::random(&mut rng, cylinder);
        if seen.insert(shape.key()) {
            shapes.push(shape);
        }
    }

    let mut paths = Vec::with_capacity(unique * copies);
    for (k, shape) in shapes.iter().enumerate() {
        let text = write_obj(&shape.mesh());
        for m in 0..copies {
            let path = dir.join(format!("{}_{k:03}_copy_{m:02}.obj", shape.stem()));
            write_file(&path, &text)?;
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::load_mesh;

    fn volume(mesh: &Mesh) -> f64 {
        (0..mesh.triangles().len())
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    #[test]
    fn primitives_are_closed_and_outward() {
        let b = box_mesh(Vector3::new(0.1, 0.2, 0.3));
        assert_eq!(b.triangles().len(), 12);
        assert!((volume(&b) - 0.006).abs() < 1e-12);
        let c = cylinder_mesh(0.05, 0.1, 24);
        let prism = 0.5 * 24.0 * 0.05f64.powi(2) * (std::f64::consts::TAU / 24.0).sin() * 0.1;
        assert!((volume(&c) - prism).abs() < 1e-12);
    }

    #[test]
    fn corpus_layout_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let paths = gen_synthetic_corpus(dir.path(), ShapeFamily::Mixed, 3, 4, 9).unwrap();
        assert_eq!(paths.len(), 12);
        let texts: BTreeSet<String> =
            paths.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect();
        assert_eq!(texts.len(), 3);

        let again = tempfile::tempdir().unwrap();
        let paths2 = gen_synthetic_corpus(again.path(), ShapeFamily::Mixed, 3, 4, 9).unwrap();
        for (a, b) in paths.iter().zip(&paths2) {
            assert_eq!(a.file_name(), b.file_name());
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
    }

    #[test]
    fn boxes_are_cuboids() {
        let dir = tempfile::tempdir().unwrap();
        for p in gen_synthetic_corpus(dir.path(), ShapeFamily::Boxes, 4, 1, 1).unwrap() {
            let mesh = load_mesh(&p).unwrap();
            assert_eq!(mesh.triangles().len(), 12);
            assert_eq!(mesh.vertices().len(), 8);
            assert!(volume(&mesh) > 0.0);
        }
    }

    #[test]
    fn family_names() {
        assert_eq!("boxes".parse::<ShapeFamily>().unwrap(), ShapeFamily::Boxes);
        assert!("spheres".parse::<ShapeFamily>().is_err());
    }
}
