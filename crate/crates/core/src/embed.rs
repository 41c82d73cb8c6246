//! Planar embeddings: breadth-first layout of a flat metric, and the
//! orthographic projection baseline.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{signed_area_2d, triangle_angles};
use crate::mesh::TriMesh;
use crate::ricci::{edge_lengths, metric_curvature, CirclePackingMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Conformal,
    Orthographic,
}

impl std::str::FromStr for Projection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "conformal" => Ok(Projection::Conformal),
            "orthographic" => Ok(Projection::Orthographic),
            _ => Err(format!(
                "unknown projection '{s}' (expected conformal or orthographic)"
            )),
        }
    }
}

/// Planar coordinates for every vertex of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarEmbedding {
    uv: Vec<Point2<f64>>,
    projection: Projection,
    seed_face: Option<usize>,
    max_edge_residual: Option<f64>,
}

impl PlanarEmbedding {
    /// Wrap raw coordinates.
    pub fn from_uv(uv: Vec<Point2<f64>>, projection: Projection) -> Self {
        PlanarEmbedding {
            uv,
            projection,
            seed_face: None,
            max_edge_residual: None,
        }
    }

    pub fn uv(&self) -> &[Point2<f64>] {
        &self.uv
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    /// Face the breadth-first layout started from.
    pub fn seed_face(&self) -> Option<usize> {
        self.seed_face
    }

    /// Largest relative mismatch between an embedded edge and its metric
    /// length (conformal layouts only).
    pub fn max_edge_residual(&self) -> Option<f64> {
        self.max_edge_residual
    }

    /// Number of faces with negative signed area.
    pub fn flipped_faces(&self, mesh: &TriMesh) -> usize {
        mesh.faces()
            .iter()
            .filter(|&&[a, b, c]| signed_area_2d(self.uv[a], self.uv[b], self.uv[c]) < 0.0)
            .count()
    }

    /// Number of faces with zero signed area.
    pub fn degenerate_faces(&self, mesh: &TriMesh) -> usize {
        mesh.faces()
            .iter()
            .filter(|&&[a, b, c]| signed_area_2d(self.uv[a], self.uv[b], self.uv[c]) == 0.0)
            .count()
    }

    /// OBJ text with the planar coordinates as positions at `z = 0`.
    pub fn to_obj(&self, mesh: &TriMesh) -> String {
        let mut out = String::new();
        for p in &self.uv {
            writeln!(out, "v {} {} 0", p.x, p.y).unwrap();
        }
        for f in mesh.faces() {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
        }
        out
    }
}

/// Drop the z coordinate.
pub fn orthographic(mesh: &TriMesh) -> PlanarEmbedding {
    PlanarEmbedding::from_uv(
        mesh.vertices().iter().map(|p| Point2::new(p.x, p.y)).collect(),
        Projection::Orthographic,
    )
}

/// The face whose centroid is nearest the vertex centroid; lowest index on ties.
pub fn central_face(mesh: &TriMesh) -> usize {
    let c = mesh.centroid();
    let v = mesh.vertices();
    let mut best = (f64::INFINITY, 0);
    for (f, &[a, b, d]) in mesh.faces().iter().enumerate() {
        let fc = (v[a].coords + v[b].coords + v[d].coords) / 3.0;
        let dist = (fc - c.coords).norm_squared();
        if dist < best.0 {
            best = (dist, f);
        }
    }
    best.1
}

/// Lay out a flat circle packing metric in the plane.
///
/// The seed face goes to `(0,0)`, `(l_ij, 0)`, `(l_ki cos θ_i, l_ki sin θ_i)`;
/// every other vertex is placed once, breadth first across face
/// adjacency, at the intersection of the two circles around an already
/// placed edge that keeps the new face counter-clockwise.
///
/// `flatness` bounds the interior curvature the metric may carry.
pub fn layout(
    mesh: &TriMesh,
    metric: &CirclePackingMetric,
    flatness: f64,
) -> Result<PlanarEmbedding> {
    let k = metric_curvature(mesh, metric)?;
    let residual = (0..mesh.num_vertices())
        .filter(|&v| !mesh.is_boundary(v))
        .map(|v| k[v].abs())
        .fold(0.0, f64::max);
    if residual > flatness {
        return Err(Error::NonConvergedMetric {
            residual,
            tolerance: flatness,
        });
    }
    let lengths = edge_lengths(mesh, metric);
    layout_lengths(mesh, &lengths, central_face(mesh))
}

/// Breadth-first layout of an arbitrary edge-length assignment from a
/// given seed face. Curvature is not checked.
pub fn layout_lengths(mesh: &TriMesh, lengths: &[f64], seed: usize) -> Result<PlanarEmbedding> {
    let n = mesh.num_vertices();
    let mut uv: Vec<Option<Point2<f64>>> = vec![None; n];

    let [i, j, k] = mesh.faces()[seed];
    let fe = mesh.face_edges(seed);
    let l = fe.map(|e| lengths[e]);
    let theta = triangle_angles(l).ok_or_else(|| Error::Layout {
        face: seed,
        reason: "seed face violates the triangle inequality".into(),
    })?;
    let (l_ij, l_ki) = (l[2], l[1]);
    uv[i] = Some(Point2::new(0.0, 0.0));
    uv[j] = Some(Point2::new(l_ij, 0.0));
    uv[k] = Some(Point2::new(l_ki * theta[0].cos(), l_ki * theta[0].sin()));

    let mut visited = vec![false; mesh.num_faces()];
    visited[seed] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(f) = queue.pop_front() {
        for e in mesh.face_edges(f) {
            let Some(g) = mesh.edge_faces(e).into_iter().flatten().find(|&g| g != f) else {
                continue;
            };
            if visited[g] {
                continue;
            }
            visited[g] = true;
            queue.push_back(g);
            let gf = mesh.faces()[g];
            let ge = mesh.face_edges(g);
            let cw = (0..3).find(|&c| ge[c] == e).expect("shared edge");
            let w = gf[cw];
            if uv[w].is_some() {
                continue;
            }
            let (a, b) = (gf[(cw + 1) % 3], gf[(cw + 2) % 3]);
            let (pa, pb) = (uv[a].expect("placed"), uv[b].expect("placed"));
            let ra = lengths[ge[(cw + 2) % 3]];
            let rb = lengths[ge[(cw + 1) % 3]];
            uv[w] = Some(circle_intersection(pa, pb, ra, rb).ok_or_else(|| Error::Layout {
                face: g,
                reason: format!(
                    "circles of radius {ra} and {rb} around points {} apart do not intersect",
                    (pb - pa).norm()
                ),
            })?);
        }
    }

    let uv: Vec<Point2<f64>> = uv
        .into_iter()
        .enumerate()
        .map(|(v, p)| {
            p.ok_or_else(|| Error::Layout {
                face: mesh.vertex_faces(v)[0],
                reason: format!("vertex {v} was never reached"),
            })
        })
        .collect::<Result<_>>()?;

    let max_edge_residual = mesh
        .edges()
        .iter()
        .zip(lengths)
        .map(|(&[a, b], &l)| ((uv[a] - uv[b]).norm() - l).abs() / l)
        .fold(0.0, f64::max);

    Ok(PlanarEmbedding {
        uv,
        projection: Projection::Conformal,
        seed_face: Some(seed),
        max_edge_residual: Some(max_edge_residual),
    })
}

/// Point at distance `ra` from `pa` and `rb` from `pb`, on the left of the
/// directed line `pa -> pb`. Near-tangent circles (gap below `1e-6` of the
/// radii sum) snap to the tangency point.
fn circle_intersection(pa: Point2<f64>, pb: Point2<f64>, ra: f64, rb: f64) -> Option<Point2<f64>> {
    let dv = pb - pa;
    let d = dv.norm();
    if !(d > 0.0) {
        return None;
    }
    let ex = dv / d;
    let ey = Vector2::new(-ex.y, ex.x);
    let x = (d * d + ra * ra - rb * rb) / (2.0 * d);
    let h2 = ra * ra - x * x;
    let h = if h2 >= 0.0 {
        h2.sqrt()
    } else {
        let gap = (d - (ra + rb)).max((ra - rb).abs() - d);
        if gap > 1e-6 * (ra + rb) {
            return None;
        }
        0.0
    };
    Some(pa + ex * x + ey * h)
}

/// Relative RMS residual after the best planar similarity (rotation, uniform
/// scale, translation) mapping `a` onto `b`, normalized by the RMS radius of
/// `b` about its centroid.
pub fn similarity_residual(a: &[Point2<f64>], b: &[Point2<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ca = a.iter().fold(Vector2::zeros(), |s, p| s + p.coords) / n;
    let cb = b.iter().fold(Vector2::zeros(), |s, p| s + p.coords) / n;
    // Complex least squares: b ≈ z a with z = Σ conj(a) b / Σ |a|².
    let (mut re, mut im, mut norm_a, mut norm_b) = (0.0, 0.0, 0.0, 0.0);
    for (p, q) in a.iter().zip(b) {
        let (x, y) = (p.coords - ca, q.coords - cb);
        re += x.x * y.x + x.y * y.y;
        im += x.x * y.y - x.y * y.x;
        norm_a += x.norm_squared();
        norm_b += y.norm_squared();
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return if norm_a == norm_b { 0.0 } else { 1.0 };
    }
    let (zr, zi) = (re / norm_a, im / norm_a);
    let mut err = 0.0;
    for (p, q) in a.iter().zip(b) {
        let (x, y) = (p.coords - ca, q.coords - cb);
        let mapped = Vector2::new(zr * x.x - zi * x.y, zi * x.x + zr * x.y);
        err += (mapped - y).norm_squared();
    }
    (err / norm_b).sqrt()
}
