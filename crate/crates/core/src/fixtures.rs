//! Deterministic test meshes.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{mesh_from_depth, write_obj, DepthGrid, Rgb, TriMesh};

/// Ring counts and extent of the caps written by [`write_all`].
pub const CAP_RINGS: usize = 18;
pub const CAP_COARSE_RINGS: usize = 12;
pub const CAP_POLAR_ANGLE_DEG: f64 = 60.0;

/// `n x n` vertices in the plane `z = 0`, spaced `spacing` apart, with
/// vertex `row * n + col` at `(col, row) * spacing`.
pub fn flat_grid(n: usize, spacing: f64) -> TriMesh {
    let grid = DepthGrid::from_fn(n, n, spacing, |_, _| 0.0).expect("valid grid");
    mesh_from_depth(&grid).expect("grid is a disk")
}

/// Patch of the unit sphere around the north pole, reaching `polar_angle`.
///
/// A hexagonal triangulation with `rings` rings: ring `k` holds `6k`
/// vertices at polar angle `polar_angle * k / rings`, for
/// `1 + 3 rings (rings + 1)` vertices in total. Faces are counter-clockwise
/// seen from outside.
pub fn spherical_cap(rings: usize, polar_angle: f64) -> TriMesh {
    assert!(rings >= 1 && polar_angle > 0.0 && polar_angle <= PI / 2.0);
    let n = rings as i64;
    let ring_of = |q: i64, r: i64| q.abs().max(r.abs()).max((q + r).abs());
    let lattice = |q: i64, r: i64| (q as f64 + 0.5 * r as f64, 3f64.sqrt() / 2.0 * r as f64);

    let mut points: Vec<(i64, f64, i64, i64)> = Vec::new();
    for q in -n..=n {
        for r in -n..=n {
            let k = ring_of(q, r);
            if k <= n {
                let (x, y) = lattice(q, r);
                let azimuth = if k == 0 { 0.0 } else { y.atan2(x).rem_euclid(2.0 * PI) };
                points.push((k, azimuth, q, r));
            }
        }
    }
    points.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let span = (2 * n + 1) as usize;
    let key = |q: i64, r: i64| ((q + n) as usize) * span + (r + n) as usize;
    let mut index = vec![usize::MAX; span * span];
    let mut vertices = Vec::with_capacity(points.len());
    for (i, &(k, azimuth, q, r)) in points.iter().enumerate() {
        index[key(q, r)] = i;
        let theta = polar_angle * k as f64 / n as f64;
        vertices.push(Point3::new(
            theta.sin() * azimuth.cos(),
            theta.sin() * azimuth.sin(),
            theta.cos(),
        ));
    }

    let inside = |q: i64, r: i64| ring_of(q, r) <= n;
    let mut faces = Vec::new();
    for q in -n..=n {
        for r in -n..=n {
            // Up and down triangles anchored at (q, r), counter-clockwise.
            for tri in [[(q, r), (q + 1, r), (q, r + 1)], [(q + 1, r), (q + 1, r + 1), (q, r + 1)]] {
                if tri.iter().all(|&(a, b)| inside(a, b)) {
                    faces.push(tri.map(|(a, b)| index[key(a, b)]));
                }
            }
        }
    }
    TriMesh::new(vertices, faces, None).expect("cap is a disk")
}

/// Upper unit hemisphere.
pub fn hemisphere(rings: usize) -> TriMesh {
    spherical_cap(rings, PI / 2.0)
}

/// Four equilateral triangles around an apex: unit base square, apex at
/// height `1/sqrt(2)`. Vertex 4 is the apex.
pub fn square_pyramid() -> TriMesh {
    let h = 0.5f64.sqrt();
    TriMesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.5, 0.5, h),
        ],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        None,
    )
    .expect("pyramid is a disk")
}

fn gaussian(x: f64, y: f64, cx: f64, cy: f64, sx: f64, sy: f64) -> f64 {
    (-((x - cx).powi(2) / (2.0 * sx * sx) + (y - cy).powi(2) / (2.0 * sy * sy))).exp()
}

/// Height of the synthetic face at normalized coordinates in `[-1, 1]²`
/// (`y` up), in units of the half width.
fn face_height(x: f64, y: f64) -> f64 {
    let dome = 0.45 * (1.0 - 0.3 * x * x - 0.2 * y * y);
    let nose = 0.22 * gaussian(x, y, 0.0, -0.05, 0.09, 0.22);
    let tip = 0.05 * gaussian(x, y, 0.0, -0.25, 0.08, 0.07);
    let brows = 0.05 * (gaussian(x, y, -0.35, 0.38, 0.18, 0.07) + gaussian(x, y, 0.35, 0.38, 0.18, 0.07));
    let eyes = 0.07 * (gaussian(x, y, -0.35, 0.2, 0.13, 0.08) + gaussian(x, y, 0.35, 0.2, 0.13, 0.08));
    let mouth = 0.02 * gaussian(x, y, 0.0, -0.55, 0.2, 0.04);
    let chin = 0.04 * gaussian(x, y, 0.0, -0.8, 0.2, 0.12);
    dome + nose + tip + brows - eyes - mouth + chin
}

fn face_color(x: f64, y: f64) -> Rgb {
    let lip = gaussian(x, y, 0.0, -0.55, 0.2, 0.05);
    let iris = gaussian(x, y, -0.35, 0.2, 0.05, 0.04) + gaussian(x, y, 0.35, 0.2, 0.05, 0.04);
    let shade = 1.0 - 0.15 * (x * x + y * y);
    let r = (220.0 * shade - 40.0 * iris + 20.0 * lip).clamp(0.0, 255.0);
    let g = (180.0 * shade - 60.0 * iris - 60.0 * lip).clamp(0.0, 255.0);
    let b = (150.0 * shade - 50.0 * iris - 40.0 * lip).clamp(0.0, 255.0);
    [r.round() as u8, g.round() as u8, b.round() as u8]
}

/// Smooth face-like height field on a `cols x rows` grid, centered at the
/// origin with the face looking along `+z`, with per-vertex colors.
pub fn synthetic_face(cols: usize, rows: usize, spacing: f64) -> TriMesh {
    let half_w = 0.5 * (cols - 1) as f64 * spacing;
    let half_h = 0.5 * (rows - 1) as f64 * spacing;
    let norm = |c: usize, r: usize| {
        (
            (c as f64 * spacing - half_w) / half_w,
            (r as f64 * spacing - half_h) / half_h,
        )
    };
    let grid = DepthGrid::from_fn(cols, rows, spacing, |x, y| {
        half_w * face_height((x - half_w) / half_w, (y - half_h) / half_h)
    })
    .expect("valid grid");
    let colors = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c, r)))
        .map(|(c, r)| {
            let (x, y) = norm(c, r);
            face_color(x, y)
        })
        .collect();
    let grid = grid.with_colors(colors).expect("one color per sample");
    let mesh = mesh_from_depth(&grid).expect("grid is a disk");
    let shift = Vector3::new(half_w, half_h, 0.0);
    mesh.with_positions(mesh.vertices().iter().map(|p| p - shift).collect())
        .expect("translation keeps the mesh valid")
}

/// Rotate every vertex by `angle` radians about `axis` through the origin.
pub fn rotated(mesh: &TriMesh, axis: Vector3<f64>, angle: f64) -> TriMesh {
    let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
    mesh.with_positions(mesh.vertices().iter().map(|p| r * p).collect())
        .expect("rotation keeps the mesh valid")
}

pub fn rotate_about_x(mesh: &TriMesh, angle: f64) -> TriMesh {
    rotated(mesh, Vector3::x(), angle)
}

/// Turn to a side view: 90 degrees about the vertical axis.
pub fn profile(mesh: &TriMesh) -> TriMesh {
    rotated(mesh, Vector3::y(), PI / 2.0)
}

/// Every fixture with its file stem.
pub fn all() -> Vec<(&'static str, TriMesh)> {
    let cap = spherical_cap(CAP_RINGS, CAP_POLAR_ANGLE_DEG.to_radians());
    let face = synthetic_face(61, 73, 2.5);
    vec![
        ("flat_5x5", flat_grid(5, 1.0)),
        ("flat_50x50", flat_grid(50, 1.0)),
        ("cap_coarse", spherical_cap(CAP_COARSE_RINGS, CAP_POLAR_ANGLE_DEG.to_radians())),
        ("cap_profile", profile(&cap)),
        ("cap", cap),
        ("hemisphere", hemisphere(CAP_COARSE_RINGS)),
        ("pyramid", square_pyramid()),
        ("face_profile", profile(&face)),
        ("face", face),
    ]
}

/// Write every fixture as OBJ into `dir`, creating it if needed.
pub fn write_all(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, mesh) in all() {
        let path = dir.join(format!("{name}.obj"));
        std::fs::write(&path, write_obj(&mesh)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
