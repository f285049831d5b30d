use std::fmt::Write;

use nalgebra::{Point3, Vector3};

use super::PointCloud;
use crate::error::{Error, Result};

struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, String)>,
}

const FLOAT_TYPES: [&str; 4] = ["float", "double", "float32", "float64"];

/// Parses an ASCII PLY file into a point cloud. Only the `vertex` element is read; `x y z` are
/// required and `nx ny nz` are used when all three are present. Other elements are skipped
/// line by line.
pub fn parse_ply_ascii(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(1, "missing `ply` magic line")),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((line_no, line)) = lines.next() else {
            return Err(Error::parse(0, "header not terminated by `end_header`"));
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => saw_format = true,
            ["format", kind, _] => {
                return Err(Error::parse(
                    line_no,
                    format!("unsupported PLY format `{kind}` (only ascii is supported)"),
                ));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad element count `{count}`")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            ["property", "list", ..] => {
                let Some(el) = elements.last_mut() else {
                    return Err(Error::parse(line_no, "property before any element"));
                };
                el.properties.push(("list".into(), fields.last().unwrap().to_string()));
            }
            ["property", ty, name] => {
                let Some(el) = elements.last_mut() else {
                    return Err(Error::parse(line_no, "property before any element"));
                };
                el.properties.push((ty.to_string(), name.to_string()));
            }
            _ => return Err(Error::parse(line_no, format!("unrecognized header line `{line}`"))),
        }
    }
    if !saw_format {
        return Err(Error::parse(1, "missing `format` line"));
    }

    let mut cloud = None;
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                next_body_line(&mut lines, &el.name, el.count)?;
            }
            continue;
        }
        let find = |name: &str| -> Result<Option<usize>> {
            match el.properties.iter().position(|(_, n)| n == name) {
                Some(i) if FLOAT_TYPES.contains(&el.properties[i].0.as_str()) => Ok(Some(i)),
                Some(i) => Err(Error::parse(
                    0,
                    format!("property `{name}` has non-float type `{}`", el.properties[i].0),
                )),
                None => Ok(None),
            }
        };
        let (Some(ix), Some(iy), Some(iz)) = (find("x")?, find("y")?, find("z")?) else {
            return Err(Error::parse(0, "vertex element lacks x/y/z properties"));
        };
        let normal_idx = match (find("nx")?, find("ny")?, find("nz")?) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            (None, None, None) => None,
            _ => return Err(Error::parse(0, "partial normal properties (need nx, ny, nz)")),
        };

        let mut points = Vec::with_capacity(el.count);
        let mut normals = normal_idx.map(|_| Vec::with_capacity(el.count));
        for _ in 0..el.count {
            let (line_no, line) = next_body_line(&mut lines, "vertex", el.count)?;
            let values = line
                .split_whitespace()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::parse(line_no, format!("bad number `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != el.properties.len() {
                return Err(Error::parse(
                    line_no,
                    format!("expected {} values, found {}", el.properties.len(), values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(line_no, "non-finite value"));
            }
            points.push(Point3::new(values[ix], values[iy], values[iz]));
            if let (Some(ns), Some([a, b, c])) = (normals.as_mut(), normal_idx) {
                ns.push(Vector3::new(values[a], values[b], values[c]));
            }
        }
        cloud = Some(match normals {
            Some(ns) => PointCloud::with_normals(points, ns)?,
            None => PointCloud::new(points),
        });
    }

    if let Some((line_no, _)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(Error::parse(line_no, "more body lines than the header declares"));
    }
    cloud.ok_or_else(|| Error::parse(0, "no vertex element"))
}

fn next_body_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    element: &str,
    declared: usize,
) -> Result<(usize, &'a str)> {
    lines.find(|(_, l)| !l.is_empty()).ok_or_else(|| {
        Error::parse(0, format!("body ends early: header declares {declared} `{element}` entries"))
    })
}

/// Writes an ASCII PLY file. Values are printed in shortest round-trip form, so parsing the
/// output yields bit-identical coordinates.
pub fn write_ply_ascii(cloud: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals().is_some() {
        out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    out.push_str("end_header\n");
    match cloud.normals() {
        Some(normals) => {
            for (p, n) in cloud.points().iter().zip(normals) {
                let _ = writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z);
            }
        }
        None => {
            for p in cloud.points() {
                let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
            }
        }
    }
    out
}
