use std::fmt::Write;

use nalgebra::Point3;

use super::Mesh;
use crate::error::{Error, Result};

/// Parses the `v`/`f` subset of Wavefront OBJ. Face corners may carry `/vt/vn` suffixes, which
/// are ignored; polygons are fan-triangulated around their first corner.
pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let coords = fields
                    .map(|f| {
                        f.parse::<f64>()
                            .map_err(|_| Error::parse(line_no, format!("bad coordinate `{f}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                // a fourth (w) component is allowed by OBJ and ignored here
                if coords.len() != 3 && coords.len() != 4 {
                    return Err(Error::parse(line_no, "vertex needs 3 coordinates"));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(Error::parse(line_no, "non-finite vertex coordinate"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let corners = fields
                    .map(|f| {
                        let head = f.split('/').next().unwrap_or("");
                        head.parse::<i64>()
                            .map_err(|_| Error::parse(line_no, format!("bad face index `{f}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if corners.len() < 3 {
                    return Err(Error::parse(line_no, "face needs at least 3 vertices"));
                }
                faces.push((line_no, corners));
            }
            Some(other) => {
                return Err(Error::parse(line_no, format!("unsupported statement `{other}`")));
            }
            None => {}
        }
    }

    let n = vertices.len();
    let mut triangles = Vec::new();
    for (line_no, corners) in faces {
        let resolved = corners
            .iter()
            .map(|&i| {
                if i >= 1 && (i as usize) <= n {
                    Ok((i - 1) as u32)
                } else {
                    Err(Error::parse(
                        line_no,
                        format!("face index {i} out of range (vertex count {n})"),
                    ))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for k in 1..resolved.len() - 1 {
            let tri = [resolved[0], resolved[k], resolved[k + 1]];
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::parse(line_no, "degenerate face (repeated vertex)"));
            }
            triangles.push(tri);
        }
    }
    Mesh::new(vertices, triangles)
}

/// Writes `v` and `f` lines. Coordinates use the shortest representation that parses back to
/// the same `f64`.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}
