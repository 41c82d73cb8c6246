//! Rigid registration of a scan onto a reference scan.
//!
//! Classical point-to-point ICP: match every source vertex to its nearest
//! reference vertex, solve the orthogonal Procrustes problem for the best
//! rotation and translation, repeat. Nearest neighbors come from a uniform
//! grid over the reference vertices with cells twice the mean edge length.

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// `p ↦ R p + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Checks orthonormality and unit determinant within `1e-9`.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let t = RigidTransform {
            rotation,
            translation,
        };
        if !t.is_valid(1e-9) {
            return Err(Error::InvalidArgument(
                "rotation is not orthonormal with determinant +1".into(),
            ));
        }
        Ok(t)
    }

    /// Rotation by `angle` radians about a unit `axis`, then translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        RigidTransform {
            rotation: *r.matrix(),
            translation,
        }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).amax() <= tol
            && (r.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|x| x.is_finite())
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in radians.
    pub fn rotation_angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TransformJson::from(self)).expect("transform serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: TransformJson =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        RigidTransform::new(
            Matrix3::from_row_slice(&j.rotation),
            Vector3::from_row_slice(&j.translation),
        )
    }
}

/// Serialized form: row-major rotation and translation.
#[derive(Debug, Serialize, Deserialize)]
struct TransformJson {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl From<&RigidTransform> for TransformJson {
    fn from(t: &RigidTransform) -> Self {
        let r = &t.rotation;
        TransformJson {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

/// Map every vertex through `t`; connectivity, colors and flags unchanged.
pub fn apply_transform(mesh: &TriMesh, t: &RigidTransform) -> TriMesh {
    let moved = mesh.vertices().iter().map(|p| t.apply(p)).collect();
    mesh.with_positions(moved)
        .expect("rigid motion keeps edges non-degenerate")
}

/// Uniform grid over a point set for nearest-neighbor queries.
struct PointGrid<'a> {
    points: &'a [Point3<f64>],
    cell: f64,
    origin: Point3<f64>,
    cells: HashMap<[i64; 3], Vec<usize>>,
    extent: [i64; 3],
}

impl<'a> PointGrid<'a> {
    fn new(points: &'a [Point3<f64>], cell: f64) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let key = |p: &Point3<f64>| -> [i64; 3] {
            let d = (p - lo) / cell;
            [d.x.floor() as i64, d.y.floor() as i64, d.z.floor() as i64]
        };
        for (i, p) in points.iter().enumerate() {
            cells.entry(key(p)).or_default().push(i);
        }
        let top = key(&hi);
        PointGrid {
            points,
            cell,
            origin: lo,
            cells,
            extent: top,
        }
    }

    fn key(&self, p: &Point3<f64>) -> [i64; 3] {
        let d = (p - self.origin) / self.cell;
        [d.x.floor() as i64, d.y.floor() as i64, d.z.floor() as i64]
    }

    /// Index and squared distance of the nearest point; ties go to the
    /// lowest index.
    fn nearest(&self, q: &Point3<f64>) -> (usize, f64) {
        let c = self.key(q);
        let mut best = (usize::MAX, f64::INFINITY);
        // Shells of cells at Chebyshev distance r; a point in shell r is at
        // least (r - 1) * cell away, so stop once that exceeds the best.
        let max_r = (0..3)
            .map(|a| (c[a]).abs().max((c[a] - self.extent[a]).abs()))
            .max()
            .unwrap_or(0)
            + 1;
        for r in 0..=max_r {
            if best.0 != usize::MAX {
                let bound = (r - 1).max(0) as f64 * self.cell;
                if bound * bound > best.1 {
                    break;
                }
            }
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        let Some(ids) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                            continue;
                        };
                        for &i in ids {
                            let d2 = (self.points[i] - q).norm_squared();
                            if d2 < best.1 || (d2 == best.1 && i < best.0) {
                                best = (i, d2);
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Optimal rotation and translation taking `src[i]` onto `dst[i]`.
pub fn procrustes(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Result<RigidTransform> {
    if src.len() != dst.len() || src.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "correspondences",
            expected: src.len(),
            found: dst.len(),
        });
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (p, q) in src.iter().zip(dst) {
        h += (p.coords - cs) * (q.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0] {
        return Err(Error::DegenerateConfiguration(format!(
            "cross-covariance has rank below 2 (singular values {sv:?})"
        )));
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = vt.transpose() * d * u.transpose();
    Ok(RigidTransform {
        rotation,
        translation: cd - rotation * cs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps the source onto the reference.
    pub transform: RigidTransform,
    /// RMS closest-point distance after the final transform.
    pub rms: f64,
    /// RMS at the start of each iteration (after re-matching).
    pub rms_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Closest point to `p` on triangle `abc`.
fn closest_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Closest point to `p` on the reference surface, searched over the faces
/// around the nearest reference vertex. Returns the nearest vertex too.
fn closest_on_surface(grid: &PointGrid, reference: &TriMesh, p: &Point3<f64>) -> (usize, Point3<f64>) {
    let (i, _) = grid.nearest(p);
    let v = reference.vertices();
    let mut best = (v[i], (v[i] - p).norm_squared());
    for &f in reference.vertex_faces(i) {
        let [a, b, c] = reference.faces()[f];
        let q = closest_on_triangle(p, &v[a], &v[b], &v[c]);
        let d2 = (q - p).norm_squared();
        if d2 < best.1 {
            best = (q, d2);
        }
    }
    (i, best.0)
}

/// Closest-point pairs and their RMS distance. Pairs whose nearest
/// reference vertex is on the boundary are dropped, since source points
/// outside the overlap all pile up there; if fewer than three pairs
/// survive, all are kept.
fn correspondences(
    grid: &PointGrid,
    reference: &TriMesh,
    moved: &[Point3<f64>],
) -> (Vec<Point3<f64>>, Vec<Point3<f64>>, f64) {
    let mut from = Vec::with_capacity(moved.len());
    let mut to = Vec::with_capacity(moved.len());
    let mut rejected = Vec::new();
    for p in moved {
        let (i, q) = closest_on_surface(grid, reference, p);
        if reference.is_boundary(i) {
            rejected.push((*p, q));
        } else {
            from.push(*p);
            to.push(q);
        }
    }
    if from.len() < 3 {
        for (p, q) in rejected {
            from.push(p);
            to.push(q);
        }
    }
    let sum: f64 = from.iter().zip(&to).map(|(p, q)| (p - q).norm_squared()).sum();
    let rms = (sum / from.len() as f64).sqrt();
    (from, to, rms)
}

/// Rotation vector and translation of a transform.
fn state_vector(t: &RigidTransform) -> [f64; 6] {
    let r = Rotation3::from_matrix_unchecked(t.rotation).scaled_axis();
    [r.x, r.y, r.z, t.translation.x, t.translation.y, t.translation.z]
}

fn from_state_vector(q: &[f64; 6]) -> RigidTransform {
    RigidTransform {
        rotation: *Rotation3::new(Vector3::new(q[0], q[1], q[2])).matrix(),
        translation: Vector3::new(q[3], q[4], q[5]),
    }
}

/// Extrapolation distance along the last step, from the errors at the last
/// three states placed at `0`, `-d1` and `-d1 - d2` along the path: the
/// vertex of the interpolating parabola if it lies ahead, otherwise the
/// zero of the line through the first and last point, capped at `25 d1`.
fn extrapolation(e: [f64; 3], d1: f64, d2: f64) -> Option<f64> {
    let (v0, v1, v2) = (0.0, -d1, -d1 - d2);
    let cap = 25.0 * d1;
    // Divided differences of e(v).
    let f01 = (e[0] - e[1]) / (v0 - v1);
    let f12 = (e[1] - e[2]) / (v1 - v2);
    let a = (f01 - f12) / (v0 - v2);
    let b = f01 - a * (v0 + v1);
    let parabola = (a > 0.0).then(|| -b / (2.0 * a)).filter(|&v| v > 0.0);
    let slope = (e[0] - e[2]) / (v0 - v2);
    let line = (slope < 0.0).then(|| -e[0] / slope).filter(|&v| v > 0.0);
    parabola.or(line).map(|v| v.min(cap))
}

/// Align `source` to `reference`.
///
/// Each source vertex is paired with the closest point on the reference
/// surface, and the best rigid motion for those pairs is applied. When the
/// last two steps of the transform point the same way (within 10 degrees)
/// the transform is extrapolated along them, and the extrapolation is kept
/// only if it lowers the RMS. Stops when the RMS changes by less than `tol`.
pub fn icp_align(
    source: &TriMesh,
    reference: &TriMesh,
    max_iters: usize,
    tol: f64,
) -> Result<IcpResult> {
    let grid = PointGrid::new(reference.vertices(), 2.0 * reference.mean_edge_length());
    let src = source.vertices();
    let place = |t: &RigidTransform| -> Vec<Point3<f64>> { src.iter().map(|p| t.apply(p)).collect() };
    let mut transform = RigidTransform::identity();
    let mut rms_history = Vec::new();
    let mut states: Vec<([f64; 6], f64)> = Vec::new();
    let mut converged = false;
    let mut moved: Vec<Point3<f64>> = src.to_vec();
    let mut iterations = 0;

    for _ in 0..max_iters {
        let (mut from, mut to, mut rms) = correspondences(&grid, reference, &moved);
        states.push((state_vector(&transform), rms));
        if let [.., (q2, e2), (q1, e1), (q0, e0)] = states.as_slice() {
            let step0: Vec<f64> = (0..6).map(|i| q0[i] - q1[i]).collect();
            let step1: Vec<f64> = (0..6).map(|i| q1[i] - q2[i]).collect();
            let d1 = step0.iter().map(|x| x * x).sum::<f64>().sqrt();
            let d2 = step1.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cos = step0.iter().zip(&step1).map(|(a, b)| a * b).sum::<f64>() / (d1 * d2);
            if d1 > 0.0 && d2 > 0.0 && cos > 10f64.to_radians().cos() {
                if let Some(v) = extrapolation([*e0, *e1, *e2], d1, d2) {
                    let q: [f64; 6] = std::array::from_fn(|i| q0[i] + v * step0[i] / d1);
                    let trial = from_state_vector(&q);
                    let trial_moved = place(&trial);
                    let (f, t, r) = correspondences(&grid, reference, &trial_moved);
                    if r < rms {
                        transform = trial;
                        moved = trial_moved;
                        (from, to, rms) = (f, t, r);
                        *states.last_mut().expect("just pushed") = (q, r);
                    }
                }
            }
        }
        let prev = rms_history.last().copied();
        rms_history.push(rms);
        if let Some(prev) = prev {
            if (prev - rms).abs() < tol {
                converged = true;
                break;
            }
        }
        if rms == 0.0 {
            converged = true;
            break;
        }
        let step = procrustes(&from, &to)?;
        transform = step.compose(&transform);
        moved = place(&transform);
        iterations += 1;
    }

    let (_, _, rms) = correspondences(&grid, reference, &moved);
    Ok(IcpResult {
        transform,
        rms,
        rms_history,
        iterations: iterations.max(1),
        converged,
    })
}
