//! Wavefront OBJ, ASCII.
//!
//! Reads `v`, `vt` (ignored) and `f` records. A vertex line may carry three
//! extra floats `v x y z r g b` as per-vertex color; values all within
//! `[0, 1]` are treated as normalized, otherwise as `[0, 255]`. Polygons with
//! more than three corners are fan-triangulated.

use std::fmt::Write as _;

use nalgebra::Point3;

use super::{Rgb, TriMesh};
use crate::error::{Error, Result};

pub fn read_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut raw_colors: Vec<Option<[f64; 3]>> = Vec::new();
    let mut faces = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let Some(tag) = tok.next() else { continue };
        match tag {
            "v" => {
                let vals = tok
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::parse(lineno, format!("bad number '{t}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                match vals.len() {
                    3 | 4 => raw_colors.push(None),
                    6 => raw_colors.push(Some([vals[3], vals[4], vals[5]])),
                    k => {
                        return Err(Error::parse(
                            lineno,
                            format!("vertex record has {k} values, expected 3, 4 or 6"),
                        ))
                    }
                }
                vertices.push(Point3::new(vals[0], vals[1], vals[2]));
            }
            "f" => {
                let mut idx = Vec::with_capacity(4);
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| Error::parse(lineno, format!("bad face index '{t}'")))?;
                    let resolved = if i > 0 {
                        i as usize - 1
                    } else if i < 0 {
                        let back = (-i) as usize;
                        if back > vertices.len() {
                            return Err(Error::parse(lineno, format!("relative index {i} out of range")));
                        }
                        vertices.len() - back
                    } else {
                        return Err(Error::parse(lineno, "face index 0 is invalid (OBJ is 1-based)"));
                    };
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(Error::parse(lineno, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push((lineno, [idx[0], idx[k], idx[k + 1]]));
                }
            }
            "vt" | "vn" | "vp" | "o" | "g" | "s" | "mtllib" | "usemtl" | "l" => {}
            other => log::debug!("obj line {lineno}: ignoring record '{other}'"),
        }
    }

    let n = vertices.len();
    for &(lineno, face) in &faces {
        if let Some(&bad) = face.iter().find(|&&v| v >= n) {
            return Err(Error::parse(
                lineno,
                format!("face references vertex {} but only {n} are defined", bad + 1),
            ));
        }
    }

    let colors = if !raw_colors.is_empty() && raw_colors.iter().all(Option::is_some) {
        let vals: Vec<[f64; 3]> = raw_colors.into_iter().flatten().collect();
        let normalized = vals.iter().flatten().all(|&c| (0.0..=1.0).contains(&c));
        let scale = if normalized { 255.0 } else { 1.0 };
        Some(
            vals.iter()
                .map(|c| c.map(|x| (x * scale).round().clamp(0.0, 255.0) as u8))
                .collect::<Vec<Rgb>>(),
        )
    } else {
        if raw_colors.iter().any(Option::is_some) {
            log::warn!("only some OBJ vertices carry colors; ignoring colors");
        }
        None
    };

    TriMesh::new(vertices, faces.into_iter().map(|(_, f)| f).collect(), colors)
}

/// Serialize as OBJ. Positions use the shortest decimal form that parses
/// back to the same `f64`; colors are written normalized to `[0, 1]`.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.num_vertices() * 40 + mesh.num_faces() * 20);
    for (i, p) in mesh.vertices().iter().enumerate() {
        match mesh.colors() {
            Some(c) => {
                let [r, g, b] = c[i].map(|x| x as f64 / 255.0);
                writeln!(out, "v {} {} {} {} {} {}", p.x, p.y, p.z, r, g, b).unwrap();
            }
            None => writeln!(out, "v {} {} {}", p.x, p.y, p.z).unwrap(),
        }
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    out
}
