//! Discrete differential quantities on a [`TriMesh`].
//!
//! Two curvature estimators live here. [`angle_deficit_curvature`] is the
//! plain angle deficit (`2π - Σθ` inside, `π - Σθ` on the boundary) and is
//! the quantity the Ricci flow drives to zero. [`weighted_curvature`] scales
//! the same deficit by `3 / (2 ΣA)` over the one-ring and feeds the image
//! channel.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::embed::PlanarEmbedding;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarQuantity {
    GaussCurvatureDeficit,
    GaussCurvatureWeighted,
    ConformalFactor,
    Depth,
}

/// One real number per mesh vertex, tagged with what it measures.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexScalars {
    pub quantity: ScalarQuantity,
    pub values: Vec<f64>,
}

impl VertexScalars {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `vertex_index,value` rows with a header line.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "vertex_index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }
}

/// Unit vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexVectors {
    pub values: Vec<Vector3<f64>>,
}

impl VertexVectors {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "vertex_index,x,y,z")?;
        for (i, n) in self.values.iter().enumerate() {
            writeln!(out, "{i},{},{},{}", n.x, n.y, n.z)?;
        }
        Ok(())
    }
}

/// Interior angles of a triangle given its side lengths, `lengths[c]` being
/// the side opposite corner `c`. Uses the half-angle tangent form, which
/// stays accurate for needle-shaped triangles. `None` if the triangle
/// inequality fails (strictly).
pub fn triangle_angles(lengths: [f64; 3]) -> Option<[f64; 3]> {
    let [a, b, c] = lengths;
    let s = [b + c - a, c + a - b, a + b - c];
    let p = a + b + c;
    if !(s[0] > 0.0 && s[1] > 0.0 && s[2] > 0.0) || !p.is_finite() {
        return None;
    }
    // tan(A/2) = sqrt((s-b)(s-c) / (s(s-a))) with s the semi-perimeter.
    let half = |opp: usize| {
        let (o1, o2) = ((opp + 1) % 3, (opp + 2) % 3);
        2.0 * ((s[o1] * s[o2]) / (p * s[opp])).sqrt().atan()
    };
    Some([half(0), half(1), half(2)])
}

/// Triangle area from side lengths (Kahan's stable Heron).
pub fn triangle_area(lengths: [f64; 3]) -> f64 {
    let mut l = lengths;
    l.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = l;
    let t = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * t.max(0.0).sqrt()
}

/// Side lengths of face `f`, opposite each corner, from per-edge lengths.
pub(crate) fn face_lengths(mesh: &TriMesh, lengths: &[f64], f: usize) -> [f64; 3] {
    mesh.face_edges(f).map(|e| lengths[e])
}

/// Corner angles from an arbitrary edge-length assignment.
pub fn corner_angles_from_lengths(mesh: &TriMesh, lengths: &[f64]) -> Result<Vec<[f64; 3]>> {
    (0..mesh.num_faces())
        .map(|f| {
            triangle_angles(face_lengths(mesh, lengths, f))
                .ok_or_else(|| Error::degenerate(f, "triangle inequality violated"))
        })
        .collect()
}

/// Corner angles of every face, in radians, indexed `[face][corner]`.
pub fn corner_angles(mesh: &TriMesh) -> Result<Vec<[f64; 3]>> {
    corner_angles_from_lengths(mesh, &mesh.edge_lengths())
}

fn angle_sums(mesh: &TriMesh, angles: &[[f64; 3]]) -> Vec<f64> {
    let mut sums = vec![0.0; mesh.num_vertices()];
    for (face, a) in mesh.faces().iter().zip(angles) {
        for c in 0..3 {
            sums[face[c]] += a[c];
        }
    }
    sums
}

pub(crate) fn deficits(mesh: &TriMesh, angles: &[[f64; 3]]) -> Vec<f64> {
    angle_sums(mesh, angles)
        .into_iter()
        .enumerate()
        .map(|(v, s)| if mesh.is_boundary(v) { PI - s } else { 2.0 * PI - s })
        .collect()
}

/// Angle-deficit Gaussian curvature of an arbitrary discrete metric.
pub fn deficit_curvature_from_lengths(mesh: &TriMesh, lengths: &[f64]) -> Result<Vec<f64>> {
    Ok(deficits(mesh, &corner_angles_from_lengths(mesh, lengths)?))
}

pub fn angle_deficit_curvature(mesh: &TriMesh) -> Result<VertexScalars> {
    Ok(VertexScalars {
        quantity: ScalarQuantity::GaussCurvatureDeficit,
        values: deficit_curvature_from_lengths(mesh, &mesh.edge_lengths())?,
    })
}

fn face_areas_3d(mesh: &TriMesh) -> Vec<f64> {
    let v = mesh.vertices();
    mesh.faces()
        .iter()
        .map(|&[a, b, c]| 0.5 * (v[b] - v[a]).cross(&(v[c] - v[a])).norm())
        .collect()
}

fn one_ring_sums(mesh: &TriMesh, per_face: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; mesh.num_vertices()];
    for (face, &x) in mesh.faces().iter().zip(per_face) {
        for &v in face {
            sums[v] += x;
        }
    }
    sums
}

/// Area-weighted angle deficit: `3 / (2 ΣA) · deficit`, with `ΣA` the total
/// area of the faces around the vertex.
pub fn weighted_curvature(mesh: &TriMesh) -> Result<VertexScalars> {
    let angles = corner_angles(mesh)?;
    let areas = face_areas_3d(mesh);
    if let Some(f) = areas.iter().position(|&a| a <= 0.0) {
        return Err(Error::degenerate(f, "zero area"));
    }
    let ring = one_ring_sums(mesh, &areas);
    let values = deficits(mesh, &angles)
        .into_iter()
        .zip(ring)
        .map(|(d, a)| 3.0 / (2.0 * a) * d)
        .collect();
    Ok(VertexScalars {
        quantity: ScalarQuantity::GaussCurvatureWeighted,
        values,
    })
}

/// Vertex normals as the average of incident face normals weighted by
/// corner angle times face area, normalized.
pub fn vertex_normals(mesh: &TriMesh) -> Result<VertexVectors> {
    let angles = corner_angles(mesh)?;
    let v = mesh.vertices();
    let mut acc = vec![Vector3::zeros(); mesh.num_vertices()];
    for (f, (&[a, b, c], ang)) in mesh.faces().iter().zip(&angles).enumerate() {
        let cross = (v[b] - v[a]).cross(&(v[c] - v[a]));
        let twice_area = cross.norm();
        if twice_area <= 0.0 {
            return Err(Error::degenerate(f, "zero area"));
        }
        let unit = cross / twice_area;
        let area = 0.5 * twice_area;
        for (k, &vi) in [a, b, c].iter().enumerate() {
            acc[vi] += unit * (ang[k] * area);
        }
    }
    let values = acc
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = n.norm();
            if len < 1e-12 {
                Err(Error::ZeroNormal { vertex: i })
            } else {
                Ok(n / len)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VertexVectors { values })
}

/// Signed area of a planar triangle, positive when counter-clockwise.
pub fn signed_area_2d(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

fn face_areas_2d(mesh: &TriMesh, embedding: &PlanarEmbedding) -> Vec<f64> {
    let uv = embedding.uv();
    mesh.faces()
        .iter()
        .map(|&[a, b, c]| signed_area_2d(uv[a], uv[b], uv[c]))
        .collect()
}

fn check_embedding(mesh: &TriMesh, embedding: &PlanarEmbedding) -> Result<()> {
    if embedding.uv().len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            what: "embedding coordinates",
            expected: mesh.num_vertices(),
            found: embedding.uv().len(),
        });
    }
    Ok(())
}

/// Ratio of one-ring area in 3D to one-ring area in the plane.
pub fn conformal_factors(mesh: &TriMesh, embedding: &PlanarEmbedding) -> Result<VertexScalars> {
    check_embedding(mesh, embedding)?;
    let ring3 = one_ring_sums(mesh, &face_areas_3d(mesh));
    let areas2 = face_areas_2d(mesh, embedding);
    let ring2 = one_ring_sums(mesh, &areas2);
    let mut values = Vec::with_capacity(ring3.len());
    for (v, (a3, a2)) in ring3.into_iter().zip(ring2).enumerate() {
        if !(a2 > 0.0) {
            return Err(Error::degenerate(
                mesh.vertex_faces(v)[0],
                format!("planar one-ring of vertex {v} has non-positive area {a2:e}"),
            ));
        }
        values.push(a3 / a2);
    }
    Ok(VertexScalars {
        quantity: ScalarQuantity::ConformalFactor,
        values,
    })
}

/// Per-face quasi-conformal distortion and its summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    /// `σ1/σ2` per face; infinite for faces collapsed to a segment or point.
    #[serde(skip)]
    pub per_face: Vec<f64>,
    /// Mean over non-collapsed faces.
    pub mean: f64,
    /// Max over non-collapsed faces.
    pub max: f64,
    /// Faces whose planar image is clockwise.
    pub flipped: usize,
    /// Faces whose planar image has (numerically) zero area.
    pub collapsed: usize,
}

/// Singular values of a 2x2 matrix `[[a, b], [c, d]]`, largest first.
fn singular_values_2x2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let e = 0.5 * (a + d);
    let f = 0.5 * (a - d);
    let g = 0.5 * (c + b);
    let h = 0.5 * (c - b);
    let q = e.hypot(h);
    let r = f.hypot(g);
    (q + r, (q - r).abs())
}

/// Quasi-conformal distortion of the map from each 3D triangle (laid flat
/// isometrically) to its image under `embedding`.
pub fn qc_distortion(mesh: &TriMesh, embedding: &PlanarEmbedding) -> Result<Distortion> {
    check_embedding(mesh, embedding)?;
    let v = mesh.vertices();
    let uv = embedding.uv();
    let mut per_face = Vec::with_capacity(mesh.num_faces());
    let (mut flipped, mut collapsed) = (0, 0);
    let (mut sum, mut max, mut counted) = (0.0, 0.0f64, 0usize);
    for (f, &[i, j, k]) in mesh.faces().iter().enumerate() {
        let e1 = v[j] - v[i];
        let e2 = v[k] - v[i];
        let l1 = e1.norm();
        let n = e1.cross(&e2);
        let twice_area = n.norm();
        if l1 <= 0.0 || twice_area <= 1e-14 * l1 * l1 {
            return Err(Error::degenerate(f, "zero area in 3D"));
        }
        let x_axis = e1 / l1;
        let y_axis = (n / twice_area).cross(&x_axis);
        // Source triangle in its own plane: (0,0), (l1,0), (sx,sy) with sy > 0.
        let (sx, sy) = (e2.dot(&x_axis), e2.dot(&y_axis));
        let d1 = uv[j] - uv[i];
        let d2 = uv[k] - uv[i];
        // J * [[l1, sx], [0, sy]] = [d1 d2]
        let inv = 1.0 / (l1 * sy);
        let m00 = d1.x / l1;
        let m10 = d1.y / l1;
        let m01 = (d2.x * l1 - d1.x * sx) * inv;
        let m11 = (d2.y * l1 - d1.y * sx) * inv;
        let det = m00 * m11 - m01 * m10;
        let (s1, s2) = singular_values_2x2(m00, m01, m10, m11);
        if det < 0.0 {
            flipped += 1;
        }
        if s2 <= 1e-12 * s1 || s1 == 0.0 {
            collapsed += 1;
            per_face.push(f64::INFINITY);
            continue;
        }
        let ratio = s1 / s2;
        sum += ratio;
        max = max.max(ratio);
        counted += 1;
        per_face.push(ratio);
    }
    Ok(Distortion {
        per_face,
        mean: if counted > 0 { sum / counted as f64 } else { f64::NAN },
        max,
        flipped,
        collapsed,
    })
}
