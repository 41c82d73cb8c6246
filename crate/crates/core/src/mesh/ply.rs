//! Stanford PLY, ASCII only.

use std::fmt::Write as _;

use nalgebra::Point3;

use super::{Rgb, TriMesh};
use crate::error::{Error, Result};

#[derive(Debug)]
enum Property {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub fn read_ply(text: &str) -> Result<TriMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((ln, line)) = lines.next() else {
            return Err(Error::parse(0, "header not terminated by end_header"));
        };
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => saw_format = true,
            ["format", other, ..] => {
                return Err(Error::parse(ln, format!("unsupported PLY format '{other}'")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(ln, format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse(ln, "property before element"))?
                .props
                .push(Property::List(name.to_string())),
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse(ln, "property before element"))?
                .props
                .push(Property::Scalar(name.to_string())),
            ["end_header"] => break,
            _ => return Err(Error::parse(ln, format!("unexpected header line '{line}'"))),
        }
    }
    if !saw_format {
        return Err(Error::parse(1, "missing format line"));
    }

    let mut vertices = Vec::new();
    let mut colors: Vec<Rgb> = Vec::new();
    let mut has_color = false;
    let mut faces = Vec::new();

    for el in &elements {
        let scalar_pos = |want: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(n) if n == want))
        };
        let (xi, yi, zi) = (scalar_pos("x"), scalar_pos("y"), scalar_pos("z"));
        let (ri, gi, bi) = (scalar_pos("red"), scalar_pos("green"), scalar_pos("blue"));
        if el.name == "vertex" {
            has_color = ri.is_some() && gi.is_some() && bi.is_some();
        }
        for _ in 0..el.count {
            let Some((ln, line)) = lines.next() else {
                return Err(Error::parse(0, format!("file ends inside element '{}'", el.name)));
            };
            let vals = parse_record(ln, line, &el.props)?;
            match el.name.as_str() {
                "vertex" => {
                    let get = |i: Option<usize>, what: &str| -> Result<f64> {
                        match i {
                            Some(i) => Ok(vals[i][0]),
                            None => Err(Error::parse(ln, format!("vertex lacks '{what}'"))),
                        }
                    };
                    vertices.push(Point3::new(get(xi, "x")?, get(yi, "y")?, get(zi, "z")?));
                    if has_color {
                        let c = |i: Option<usize>| vals[i.unwrap()][0].round().clamp(0.0, 255.0) as u8;
                        colors.push([c(ri), c(gi), c(bi)]);
                    }
                }
                "face" => {
                    let list = el
                        .props
                        .iter()
                        .position(|p| {
                            matches!(p, Property::List(n) if n == "vertex_indices" || n == "vertex_index")
                        })
                        .ok_or_else(|| Error::parse(ln, "face element lacks vertex_indices"))?;
                    let idx = &vals[list];
                    if idx.len() < 3 {
                        return Err(Error::parse(ln, "face needs at least 3 vertices"));
                    }
                    let mut ids = Vec::with_capacity(idx.len());
                    for &v in idx {
                        if v < 0.0 || v.fract() != 0.0 {
                            return Err(Error::parse(ln, format!("bad vertex index {v}")));
                        }
                        ids.push(v as usize);
                    }
                    for k in 1..ids.len() - 1 {
                        faces.push((ln, [ids[0], ids[k], ids[k + 1]]));
                    }
                }
                _ => {}
            }
        }
    }

    let n = vertices.len();
    for &(ln, face) in &faces {
        if let Some(&bad) = face.iter().find(|&&v| v >= n) {
            return Err(Error::parse(
                ln,
                format!("face references vertex {bad} but only {n} are defined"),
            ));
        }
    }
    TriMesh::new(
        vertices,
        faces.into_iter().map(|(_, f)| f).collect(),
        has_color.then_some(colors),
    )
}

fn parse_record(ln: usize, line: &str, props: &[Property]) -> Result<Vec<Vec<f64>>> {
    let mut tok = line.split_whitespace();
    let mut next = || -> Result<f64> {
        let t = tok
            .next()
            .ok_or_else(|| Error::parse(ln, "record has too few values"))?;
        t.parse::<f64>()
            .map_err(|_| Error::parse(ln, format!("bad number '{t}'")))
    };
    let mut out = Vec::with_capacity(props.len());
    for p in props {
        match p {
            Property::Scalar(_) => out.push(vec![next()?]),
            Property::List(_) => {
                let k = next()?;
                if k < 0.0 || k.fract() != 0.0 {
                    return Err(Error::parse(ln, format!("bad list length {k}")));
                }
                let mut v = Vec::with_capacity(k as usize);
                for _ in 0..k as usize {
                    v.push(next()?);
                }
                out.push(v);
            }
        }
    }
    Ok(out)
}

pub fn write_ply(mesh: &TriMesh) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", mesh.num_vertices()).unwrap();
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.colors().is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    writeln!(out, "element face {}", mesh.num_faces()).unwrap();
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, p) in mesh.vertices().iter().enumerate() {
        match mesh.colors() {
            Some(c) => {
                let [r, g, b] = c[i];
                writeln!(out, "{} {} {} {r} {g} {b}", p.x, p.y, p.z).unwrap()
            }
            None => writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap(),
        }
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    out
}
