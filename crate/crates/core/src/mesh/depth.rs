//! Structured depth grids and their triangulation.

use nalgebra::Point3;

use super::{Rgb, TriMesh};
use crate::error::{Error, Result};

/// A regular grid of depth samples, row-major, with optional per-pixel color.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthGrid {
    width: usize,
    height: usize,
    spacing: f64,
    depths: Vec<Option<f64>>,
    colors: Option<Vec<Rgb>>,
}

impl DepthGrid {
    pub fn new(
        width: usize,
        height: usize,
        spacing: f64,
        depths: Vec<Option<f64>>,
        colors: Option<Vec<Rgb>>,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidArgument(format!(
                "depth grid must be at least 2x2, got {width}x{height}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidArgument(format!("bad pixel spacing {spacing}")));
        }
        if depths.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "depth samples",
                expected: width * height,
                found: depths.len(),
            });
        }
        if let Some(c) = &colors {
            if c.len() != width * height {
                return Err(Error::DimensionMismatch {
                    what: "depth grid colors",
                    expected: width * height,
                    found: c.len(),
                });
            }
        }
        if let Some(i) = depths.iter().position(|d| matches!(d, Some(z) if !z.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "depth at pixel ({}, {}) is not finite",
                i % width,
                i / width
            )));
        }
        Ok(DepthGrid {
            width,
            height,
            spacing,
            depths,
            colors,
        })
    }

    /// Build a fully populated grid by sampling `f(x, y)` at pixel positions.
    pub fn from_fn(
        width: usize,
        height: usize,
        spacing: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut depths = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                depths.push(Some(f(col as f64 * spacing, row as f64 * spacing)));
            }
        }
        Self::new(width, height, spacing, depths, None)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn depth(&self, col: usize, row: usize) -> Option<f64> {
        self.depths[row * self.width + col]
    }

    pub fn with_colors(mut self, colors: Vec<Rgb>) -> Result<Self> {
        if colors.len() != self.width * self.height {
            return Err(Error::DimensionMismatch {
                what: "depth grid colors",
                expected: self.width * self.height,
                found: colors.len(),
            });
        }
        self.colors = Some(colors);
        Ok(self)
    }
}

/// Triangulate a depth grid: one vertex per present pixel at
/// `(col * spacing, row * spacing, depth)`, two triangles per fully present
/// 2x2 block split along the NW-SE diagonal, wound counter-clockwise in the
/// xy-plane.
pub fn mesh_from_depth(grid: &DepthGrid) -> Result<TriMesh> {
    let (w, h) = (grid.width, grid.height);
    let mut index = vec![usize::MAX; w * h];
    let mut vertices = Vec::new();
    let mut colors = grid.colors.as_ref().map(|_| Vec::new());
    for row in 0..h {
        for col in 0..w {
            let k = row * w + col;
            if let Some(z) = grid.depths[k] {
                index[k] = vertices.len();
                vertices.push(Point3::new(
                    col as f64 * grid.spacing,
                    row as f64 * grid.spacing,
                    z,
                ));
                if let (Some(out), Some(src)) = (colors.as_mut(), grid.colors.as_ref()) {
                    out.push(src[k]);
                }
            }
        }
    }
    let mut faces = Vec::new();
    for row in 0..h - 1 {
        for col in 0..w - 1 {
            let nw = index[row * w + col];
            let ne = index[row * w + col + 1];
            let sw = index[(row + 1) * w + col];
            let se = index[(row + 1) * w + col + 1];
            if [nw, ne, sw, se].contains(&usize::MAX) {
                continue;
            }
            faces.push([nw, ne, se]);
            faces.push([nw, se, sw]);
        }
    }
    if vertices.is_empty() {
        return Err(Error::Topology("depth grid has no samples".into()));
    }
    TriMesh::new(vertices, faces, colors)
}

/// Read a PGM (P2 or P5) depth image. The maximum gray value marks a
/// missing sample; every other value is taken as the depth.
pub fn read_depth_pgm(bytes: &[u8], spacing: f64) -> Result<DepthGrid> {
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::parse(0, "unexpected end of PGM data"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let num = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::parse(0, format!("bad PGM number '{s}'")))
    };
    let magic = token(&mut pos)?;
    let width = num(token(&mut pos)?)?;
    let height = num(token(&mut pos)?)?;
    let maxval = num(token(&mut pos)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(0, format!("bad PGM maxval {maxval}")));
    }
    let count = width * height;
    let mut raw = Vec::with_capacity(count);
    match magic.as_str() {
        "P2" => {
            for _ in 0..count {
                raw.push(num(token(&mut pos)?)?);
            }
        }
        "P5" => {
            pos += 1; // single whitespace after maxval
            let bpp = if maxval < 256 { 1 } else { 2 };
            let data = bytes
                .get(pos..pos + count * bpp)
                .ok_or_else(|| Error::parse(0, "PGM raster truncated"))?;
            if bpp == 1 {
                raw.extend(data.iter().map(|&b| b as usize));
            } else {
                raw.extend(
                    data.chunks_exact(2)
                        .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize),
                );
            }
        }
        other => return Err(Error::parse(0, format!("unsupported PGM magic '{other}'"))),
    }
    let depths = raw
        .into_iter()
        .map(|g| (g != maxval).then_some(g as f64))
        .collect();
    DepthGrid::new(width, height, spacing, depths, None)
}

/// Read a CSV depth grid: one row of comma-separated depths per line, an
/// empty cell marks a missing sample.
pub fn read_depth_csv(text: &str, spacing: f64) -> Result<DepthGrid> {
    let mut width = None;
    let mut depths = Vec::new();
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::parse(
                    i + 1,
                    format!("row has {} cells, expected {w}", cells.len()),
                ))
            }
            _ => {}
        }
        for c in cells {
            let c = c.trim();
            if c.is_empty() {
                depths.push(None);
            } else {
                let z = c
                    .parse::<f64>()
                    .map_err(|_| Error::parse(i + 1, format!("bad depth '{c}'")))?;
                depths.push(Some(z));
            }
        }
        height += 1;
    }
    DepthGrid::new(width.unwrap_or(0), height, spacing, depths, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_block() {
        let g = DepthGrid::new(2, 2, 1.0, vec![Some(0.0); 4], None).unwrap();
        let m = mesh_from_depth(&g).unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (4, 2));
        assert_eq!(m.euler_characteristic(), 1);
        assert!(m.vertices().iter().all(|p| p.z == 0.0));
    }

    #[test]
    fn hole_is_rejected() {
        let mut d = vec![Some(1.0); 9];
        d[4] = None;
        let g = DepthGrid::new(3, 3, 1.0, d, None).unwrap();
        assert!(matches!(mesh_from_depth(&g).unwrap_err(), Error::Topology(_)));
    }

    #[test]
    fn parabola_counts() {
        let g = DepthGrid::from_fn(10, 10, 1.0, |x, _| x * x / 50.0).unwrap();
        let m = mesh_from_depth(&g).unwrap();
        assert_eq!(m.num_vertices(), 100);
        assert_eq!(m.num_faces(), 2 * 9 * 9);
        // 90 horizontal + 90 vertical + 81 diagonal edges.
        assert_eq!(m.num_edges(), 261);
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.boundary_loop().len(), 4 * 9);
    }

    #[test]
    fn rectangular_face_count() {
        let g = DepthGrid::from_fn(7, 4, 0.5, |_, _| 2.0).unwrap();
        assert_eq!(mesh_from_depth(&g).unwrap().num_faces(), 2 * 6 * 3);
    }

    #[test]
    fn grid_invariants() {
        assert!(DepthGrid::new(1, 5, 1.0, vec![Some(0.0); 5], None).is_err());
        assert!(DepthGrid::new(2, 2, 1.0, vec![Some(f64::NAN); 4], None).is_err());
        assert!(DepthGrid::new(2, 2, 1.0, vec![Some(0.0); 3], None).is_err());
    }

    #[test]
    fn pgm_ascii_and_binary() {
        let g = read_depth_pgm(b"P2\n# depth\n3 2\n255\n1 2 3\n4 255 6\n", 1.0).unwrap();
        assert_eq!((g.width(), g.height()), (3, 2));
        assert_eq!(g.depth(1, 1), None);
        assert_eq!(g.depth(2, 1), Some(6.0));

        let mut bin = b"P5\n2 2\n255\n".to_vec();
        bin.extend_from_slice(&[10, 20, 255, 40]);
        let g = read_depth_pgm(&bin, 2.0).unwrap();
        assert_eq!(g.depth(0, 1), None);
        assert_eq!(g.depth(1, 1), Some(40.0));
        assert_eq!(g.spacing(), 2.0);

        let mut wide = b"P5 2 2 1000\n".to_vec();
        for v in [1u16, 2, 1000, 999] {
            wide.extend_from_slice(&v.to_be_bytes());
        }
        let g = read_depth_pgm(&wide, 1.0).unwrap();
        assert_eq!(g.depth(0, 1), None);
        assert_eq!(g.depth(1, 1), Some(999.0));

        assert!(read_depth_pgm(b"P5\n2 2\n255\n\x01", 1.0).is_err());
    }

    #[test]
    fn csv_missing_cells() {
        let g = read_depth_csv("1,2,3\n4,,6\n", 1.0).unwrap();
        assert_eq!(g.depth(1, 1), None);
        assert_eq!(g.depth(0, 1), Some(4.0));
        assert!(read_depth_csv("1,2\n3\n", 1.0).is_err());
    }

    #[test]
    fn colors_follow_vertices() {
        let mut d = vec![Some(0.0); 6];
        d[2] = None;
        let colors: Vec<Rgb> = (0..6u8).map(|i| [i, i, i]).collect();
        let g = DepthGrid::new(3, 2, 1.0, d, Some(colors)).unwrap();
        let m = mesh_from_depth(&g);
        // Pixel (2,0) missing leaves pixel (2,1) dangling: disconnected.
        assert!(m.is_err());

        let mut d = vec![Some(0.0); 6];
        d[5] = Some(1.0);
        let colors: Vec<Rgb> = (0..6u8).map(|i| [i, 0, 0]).collect();
        let g = DepthGrid::new(3, 2, 1.0, d, Some(colors)).unwrap();
        let m = mesh_from_depth(&g).unwrap();
        assert_eq!(m.colors().unwrap()[5], [5, 0, 0]);
    }
}
