//! Indexed triangle meshes with disk topology.
//!
//! A [`TriMesh`] is validated on construction: faces reference distinct,
//! in-range vertices, every edge has positive length, orientation is
//! consistent, and the surface is a connected topological disk with exactly
//! one boundary loop. Everything downstream (curvature, Ricci flow, layout)
//! relies on these guarantees, so there is no way to build an unchecked mesh.
//!
//! Face winding is counter-clockwise when viewed from the side the normals
//! point to; the boundary loop is traversed in the same sense.

mod depth;
mod obj;
mod ply;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};

pub use depth::{mesh_from_depth, read_depth_csv, read_depth_pgm, DepthGrid};
pub use obj::{read_obj, write_obj};
pub use ply::{read_ply, write_ply};

/// Supported mesh file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Vertex color, 8 bits per channel.
pub type Rgb = [u8; 3];

/// A validated triangle mesh with disk topology.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    colors: Option<Vec<Rgb>>,
    boundary: Vec<bool>,
    edges: Vec<[usize; 2]>,
    /// `face_edges[f][c]` is the edge opposite corner `c` of face `f`.
    face_edges: Vec<[usize; 3]>,
    edge_faces: Vec<[Option<usize>; 2]>,
    vf_offsets: Vec<usize>,
    vf_faces: Vec<usize>,
    boundary_loop: Vec<usize>,
}

impl TriMesh {
    /// Build a mesh, checking every topological invariant.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
        colors: Option<Vec<Rgb>>,
    ) -> Result<Self> {
        let n = vertices.len();
        if let Some(c) = &colors {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "vertex colors",
                    expected: n,
                    found: c.len(),
                });
            }
        }
        if faces.is_empty() {
            return Err(Error::Topology("mesh has no faces".into()));
        }
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= n {
                    return Err(Error::Topology(format!(
                        "face {f} references vertex {v}, but only {n} vertices exist"
                    )));
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::Topology(format!(
                    "face {f} repeats a vertex: {face:?}"
                )));
            }
        }
        for (i, p) in vertices.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::Topology(format!("vertex {i} is not finite")));
            }
        }

        // Directed half-edges: each may appear once. A repeat means two faces
        // traverse the shared edge in the same direction (inconsistent
        // winding) or more than two faces meet at the edge.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
        for (f, face) in faces.iter().enumerate() {
            for c in 0..3 {
                let a = face[c];
                let b = face[(c + 1) % 3];
                if let Some(&g) = directed.get(&(a, b)) {
                    let reason = if directed.contains_key(&(b, a)) {
                        "more than two faces share it"
                    } else {
                        "faces have inconsistent orientation"
                    };
                    return Err(Error::Topology(format!(
                        "edge ({a}, {b}) is traversed in the same direction by faces {g} and {f}: {reason}"
                    )));
                }
                directed.insert((a, b), f);
            }
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 2);
        let mut edges = Vec::new();
        let mut edge_faces: Vec<[Option<usize>; 2]> = Vec::new();
        let mut face_edges = Vec::with_capacity(faces.len());
        for (f, face) in faces.iter().enumerate() {
            let mut fe = [0usize; 3];
            for c in 0..3 {
                let a = face[(c + 1) % 3];
                let b = face[(c + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_faces.push([None, None]);
                    edges.len() - 1
                });
                let slot = &mut edge_faces[e];
                if slot[0].is_none() {
                    slot[0] = Some(f);
                } else {
                    slot[1] = Some(f);
                }
                fe[c] = e;
            }
            face_edges.push(fe);
        }

        for &[a, b] in &edges {
            if vertices[a] == vertices[b] {
                return Err(Error::Topology(format!(
                    "edge ({a}, {b}) has zero length"
                )));
            }
        }

        let mut valence = vec![0usize; n];
        for face in &faces {
            for &v in face {
                valence[v] += 1;
            }
        }
        if let Some(v) = valence.iter().position(|&k| k == 0) {
            return Err(Error::Topology(format!(
                "vertex {v} is not referenced by any face (mesh is disconnected)"
            )));
        }
        let mut vf_offsets = Vec::with_capacity(n + 1);
        vf_offsets.push(0);
        for k in &valence {
            vf_offsets.push(vf_offsets.last().unwrap() + k);
        }
        let mut fill = vf_offsets.clone();
        let mut vf_faces = vec![0usize; vf_offsets[n]];
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                vf_faces[fill[v]] = f;
                fill[v] += 1;
            }
        }

        // Connectivity through shared edges.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &[a, b] in &edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let root = find(&mut parent, 0);
        for v in 1..n {
            if find(&mut parent, v) != root {
                return Err(Error::Topology(format!(
                    "vertex {v} is not connected to vertex 0"
                )));
            }
        }

        // Boundary half-edges have no twin.
        let mut next_on_boundary: Vec<Option<usize>> = vec![None; n];
        let mut boundary = vec![false; n];
        let mut boundary_edges = 0usize;
        for face in &faces {
            for c in 0..3 {
                let a = face[c];
                let b = face[(c + 1) % 3];
                if !directed.contains_key(&(b, a)) {
                    if next_on_boundary[a].is_some() {
                        return Err(Error::Topology(format!(
                            "vertex {a} is a non-manifold boundary pinch"
                        )));
                    }
                    next_on_boundary[a] = Some(b);
                    boundary[a] = true;
                    boundary_edges += 1;
                }
            }
        }
        let start = boundary
            .iter()
            .position(|&b| b)
            .ok_or_else(|| Error::Topology("mesh is closed (no boundary)".into()))?;
        let mut boundary_loop = vec![start];
        let mut cur = start;
        loop {
            let nxt = next_on_boundary[cur].expect("boundary vertex has an outgoing edge");
            if nxt == start {
                break;
            }
            if boundary_loop.len() > boundary_edges {
                return Err(Error::Topology("boundary does not close".into()));
            }
            boundary_loop.push(nxt);
            cur = nxt;
        }
        if boundary_loop.len() != boundary_edges {
            let other = (0..n)
                .find(|&v| boundary[v] && !boundary_loop.contains(&v))
                .unwrap_or(start);
            return Err(Error::Topology(format!(
                "mesh has more than one boundary loop (vertex {other} lies on a second loop)"
            )));
        }

        let chi = n as i64 - edges.len() as i64 + faces.len() as i64;
        if chi != 1 {
            return Err(Error::Topology(format!(
                "Euler characteristic is {chi}, a disk requires 1"
            )));
        }

        Ok(TriMesh {
            vertices,
            faces,
            colors,
            boundary,
            edges,
            face_edges,
            edge_faces,
            vf_offsets,
            vf_faces,
            boundary_loop,
        })
    }

    /// Load a mesh from disk in the given format.
    pub fn load(path: impl AsRef<Path>, format: MeshFormat) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match format {
            MeshFormat::Obj => read_obj(&text),
            MeshFormat::Ply => read_ply(&text),
        }
    }

    /// Write the mesh to disk in the given format.
    pub fn save(&self, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
        let path = path.as_ref();
        let text = match format {
            MeshFormat::Obj => write_obj(self),
            MeshFormat::Ply => write_ply(self),
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Undirected edges as `[low, high]` vertex pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Edge indices of a face; entry `c` is the edge opposite corner `c`.
    pub fn face_edges(&self, f: usize) -> [usize; 3] {
        self.face_edges[f]
    }

    /// The one or two faces incident to an edge.
    pub fn edge_faces(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_faces[e]
    }

    /// Faces incident to a vertex, in increasing index order.
    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vf_faces[self.vf_offsets[v]..self.vf_offsets[v + 1]]
    }

    /// The single boundary loop, starting at its lowest vertex index and
    /// following face orientation.
    pub fn boundary_loop(&self) -> &[usize] {
        &self.boundary_loop
    }

    /// Indices of vertices not on the boundary, ascending.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.boundary[v]).collect()
    }

    /// Euclidean lengths of all edges, indexed like [`TriMesh::edges`].
    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges
            .iter()
            .map(|&[a, b]| (self.vertices[a] - self.vertices[b]).norm())
            .collect()
    }

    /// Mean edge length.
    pub fn mean_edge_length(&self) -> f64 {
        let l = self.edge_lengths();
        l.iter().sum::<f64>() / l.len() as f64
    }

    pub fn centroid(&self) -> Point3<f64> {
        let sum = self
            .vertices
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / self.vertices.len() as f64)
    }

    /// A copy with vertex positions replaced; connectivity and colors kept.
    pub fn with_positions(&self, vertices: Vec<Point3<f64>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                what: "vertex positions",
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        for &[a, b] in &self.edges {
            if vertices[a] == vertices[b] {
                return Err(Error::Topology(format!("edge ({a}, {b}) has zero length")));
            }
        }
        let mut out = self.clone();
        out.vertices = vertices;
        Ok(out)
    }

    /// A copy with new vertex colors.
    pub fn with_colors(&self, colors: Option<Vec<Rgb>>) -> Result<Self> {
        if let Some(c) = &colors {
            if c.len() != self.vertices.len() {
                return Err(Error::DimensionMismatch {
                    what: "vertex colors",
                    expected: self.vertices.len(),
                    found: c.len(),
                });
            }
        }
        let mut out = self.clone();
        out.colors = colors;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    fn grid(n: usize) -> TriMesh {
        let mut verts = Vec::new();
        for r in 0..n {
            for c in 0..n {
                verts.push(p(c as f64, r as f64, 0.0));
            }
        }
        let mut faces = Vec::new();
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                let nw = r * n + c;
                let (ne, sw, se) = (nw + 1, nw + n, nw + n + 1);
                faces.push([nw, ne, se]);
                faces.push([nw, se, sw]);
            }
        }
        TriMesh::new(verts, faces, None).unwrap()
    }

    #[test]
    fn single_triangle() {
        let m = TriMesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap();
        assert_eq!((m.num_vertices(), m.num_edges(), m.num_faces()), (3, 3, 1));
        assert!(m.boundary_flags().iter().all(|&b| b));
        assert_eq!(m.boundary_loop(), &[0, 1, 2]);
    }

    #[test]
    fn grid_boundary_loop_skips_interior() {
        let m = grid(3);
        assert_eq!(m.boundary_loop(), &[0, 1, 2, 5, 8, 7, 6, 3]);
        assert!(!m.is_boundary(4));
        assert_eq!(m.interior_vertices(), vec![4]);
        for &v in m.boundary_loop() {
            assert!(m.is_boundary(v));
        }
    }

    #[test]
    fn inconsistent_orientation_rejected() {
        let err = TriMesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(1., 1., 0.)],
            vec![[0, 1, 2], [1, 2, 3]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Topology(ref m) if m.contains("inconsistent")), "{err}");
    }

    #[test]
    fn non_manifold_edge_rejected() {
        let err = TriMesh::new(
            vec![
                p(0., 0., 0.),
                p(1., 0., 0.),
                p(0., 1., 0.),
                p(0., -1., 0.),
                p(0., 0., 1.),
            ],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Topology(_)), "{err}");
    }

    #[test]
    fn disconnected_rejected() {
        let err = TriMesh::new(
            vec![
                p(0., 0., 0.),
                p(1., 0., 0.),
                p(0., 1., 0.),
                p(5., 0., 0.),
                p(6., 0., 0.),
                p(5., 1., 0.),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Topology(_)), "{err}");
    }

    #[test]
    fn isolated_vertex_rejected() {
        let err = TriMesh::new(
            vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(3., 3., 3.)],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Topology(ref m) if m.contains("vertex 3")), "{err}");
    }

    #[test]
    fn annulus_rejected() {
        // 3x3 grid with the two faces of each block around the center removed
        // is awkward to build by hand; a ring of 8 quads around a hole does it.
        let mut verts = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                verts.push(p(c as f64, r as f64, 0.0));
            }
        }
        let mut faces = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                if r == 1 && c == 1 {
                    continue;
                }
                let nw = r * 4 + c;
                faces.push([nw, nw + 1, nw + 5]);
                faces.push([nw, nw + 5, nw + 4]);
            }
        }
        let err = TriMesh::new(verts, faces, None).unwrap_err();
        assert!(matches!(err, Error::Topology(_)), "{err}");
    }

    #[test]
    fn closed_surface_rejected() {
        let verts = vec![p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0., 0., 1.)];
        let faces = vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]];
        let err = TriMesh::new(verts, faces, None).unwrap_err();
        assert!(matches!(err, Error::Topology(_)), "{err}");
    }

    #[test]
    fn zero_length_edge_rejected() {
        let err = TriMesh::new(
            vec![p(0., 0., 0.), p(0., 0., 0.), p(0., 1., 0.)],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Topology(ref m) if m.contains("zero length")), "{err}");
    }

    #[test]
    fn adjacency_queries() {
        let m = grid(3);
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.vertex_faces(4).len(), 6);
        assert_eq!(m.vertex_faces(0).len(), 2);
        for f in 0..m.num_faces() {
            let face = m.faces()[f];
            for c in 0..3 {
                let [a, b] = m.edges()[m.face_edges(f)[c]];
                let (x, y) = (face[(c + 1) % 3], face[(c + 2) % 3]);
                assert_eq!([a, b], [x.min(y), x.max(y)]);
            }
        }
        let interior_edges = (0..m.num_edges())
            .filter(|&e| m.edge_faces(e)[1].is_some())
            .count();
        assert_eq!(interior_edges, m.num_edges() - 8);
    }
}
