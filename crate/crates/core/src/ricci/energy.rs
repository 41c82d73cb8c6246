//! Curvature as a function of log-radii, its Jacobian, and the Ricci energy.
//!
//! The Ricci energy is `E(u) = ∫ Σ (K_i - K̄_i) du_i` from the origin metric
//! to `u`. Its gradient is the curvature error and its Hessian is the
//! Jacobian `∂K/∂u`, which is symmetric because the integrand is closed.
//! Only vertices with a target contribute; vertices without one (the free
//! boundary) are constants of the energy.

use std::sync::OnceLock;

use super::metric::{lengths_from_radii, CirclePackingMetric};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::geom::{self, triangle_angles, triangle_area};
use crate::mesh::TriMesh;

/// Target curvature per vertex; `None` leaves the vertex unconstrained.
pub type CurvatureTargets = Vec<Option<f64>>;

/// Zero curvature inside, free boundary.
pub fn flat_interior_targets(mesh: &TriMesh) -> CurvatureTargets {
    (0..mesh.num_vertices())
        .map(|v| (!mesh.is_boundary(v)).then_some(0.0))
        .collect()
}

pub(crate) fn lengths_at(mesh: &TriMesh, weights: &[f64], u: &[f64]) -> Vec<f64> {
    let radii: Vec<f64> = u.iter().map(|x| x.exp()).collect();
    lengths_from_radii(mesh, &radii, weights)
}

/// Angle-deficit curvature at log-radii `u`.
pub(crate) fn curvature_at(mesh: &TriMesh, weights: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    geom::deficit_curvature_from_lengths(mesh, &lengths_at(mesh, weights, u))
}

/// Angle-deficit curvature induced by a circle packing metric.
pub fn metric_curvature(mesh: &TriMesh, metric: &CirclePackingMetric) -> Result<Vec<f64>> {
    geom::deficit_curvature_from_lengths(mesh, &super::edge_lengths(mesh, metric))
}

/// `∂θ_corner / ∂u_vertex` for one face, `d[i][p]` with `i`, `p` corners.
///
/// Chain rule through the edge lengths: `∂θ_i/∂l_i = l_i / 2A` for the
/// opposite side and `-l_i cos θ_o / 2A` for an adjacent side (`o` the
/// remaining corner); `∂l/∂u_p = γ_p (γ_p + γ_q w) / l` for an edge `pq`.
pub(crate) fn face_angle_jacobian(
    lengths: [f64; 3],
    radii: [f64; 3],
    weights: [f64; 3],
) -> Option<[[f64; 3]; 3]> {
    let theta = triangle_angles(lengths)?;
    let twice_area = 2.0 * triangle_area(lengths);
    if !(twice_area > 0.0) {
        return None;
    }
    let mut dtheta_dl = [[0.0; 3]; 3];
    for i in 0..3 {
        for m in 0..3 {
            dtheta_dl[i][m] = if m == i {
                lengths[i] / twice_area
            } else {
                let o = 3 - i - m;
                -lengths[i] * theta[o].cos() / twice_area
            };
        }
    }
    let mut dl_du = [[0.0; 3]; 3];
    for m in 0..3 {
        let (p, q) = ((m + 1) % 3, (m + 2) % 3);
        let l = lengths[m];
        dl_du[m][p] = radii[p] * (radii[p] + radii[q] * weights[m]) / l;
        dl_du[m][q] = radii[q] * (radii[q] + radii[p] * weights[m]) / l;
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for p in 0..3 {
            out[i][p] = (0..3).map(|m| dtheta_dl[i][m] * dl_du[m][p]).sum();
        }
    }
    Some(out)
}

/// Hessian of the Ricci energy restricted to the `active` vertices, in the
/// compact numbering given by `slot` (`usize::MAX` for inactive vertices).
pub(crate) fn energy_hessian(
    mesh: &TriMesh,
    weights: &[f64],
    u: &[f64],
    slot: &[usize],
    n_active: usize,
) -> Result<CsrMatrix> {
    let radii: Vec<f64> = u.iter().map(|x| x.exp()).collect();
    let lengths = lengths_from_radii(mesh, &radii, weights);
    let mut triplets = Vec::with_capacity(mesh.num_faces() * 9);
    for (f, face) in mesh.faces().iter().enumerate() {
        let edges = mesh.face_edges(f);
        let jac = face_angle_jacobian(
            edges.map(|e| lengths[e]),
            face.map(|v| radii[v]),
            edges.map(|e| weights[e]),
        )
        .ok_or_else(|| Error::degenerate(f, "triangle inequality violated"))?;
        for i in 0..3 {
            let si = slot[face[i]];
            if si == usize::MAX {
                continue;
            }
            for p in 0..3 {
                let sp = slot[face[p]];
                if sp != usize::MAX {
                    // K = const - Σθ, so ∂K/∂u = -Σ ∂θ/∂u.
                    triplets.push((si, sp, -jac[i][p]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n_active, triplets).symmetrized())
}

fn gauss_legendre_8() -> &'static ([f64; 8], [f64; 8]) {
    static RULE: OnceLock<([f64; 8], [f64; 8])> = OnceLock::new();
    RULE.get_or_init(|| {
        // Newton iteration on P_8, nodes mapped from [-1, 1] to [0, 1].
        const N: usize = 8;
        let mut nodes = [0.0; N];
        let mut weights = [0.0; N];
        for k in 0..N {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for n in 2..=N {
                    let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[k] = 0.5 * (1.0 - x);
            weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// `∫ Σ_i (K_i - K̄_i) du_i` along the segment from `from` to `to`, by
/// composite Gauss-Legendre quadrature.
pub(crate) fn energy_increment(
    mesh: &TriMesh,
    weights: &[f64],
    targets: &[Option<f64>],
    from: &[f64],
    to: &[f64],
) -> Result<f64> {
    let (nodes, wts) = gauss_legendre_8();
    let delta: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
    let span = targets
        .iter()
        .zip(&delta)
        .filter(|(t, _)| t.is_some())
        .map(|(_, d)| d.abs())
        .fold(0.0, f64::max);
    if span == 0.0 {
        return Ok(0.0);
    }
    let pieces = ((span / 0.05).ceil() as usize).clamp(1, 1000);
    let h = 1.0 / pieces as f64;
    let mut total = 0.0;
    let mut u = vec![0.0; from.len()];
    for piece in 0..pieces {
        for (&s, &w) in nodes.iter().zip(wts) {
            let t = (piece as f64 + s) * h;
            for i in 0..u.len() {
                u[i] = from[i] + t * delta[i];
            }
            let k = curvature_at(mesh, weights, &u)?;
            let integrand: f64 = targets
                .iter()
                .zip(&k)
                .zip(&delta)
                .filter_map(|((t, k), d)| t.map(|target| (k - target) * d))
                .sum();
            total += w * h * integrand;
        }
    }
    Ok(total)
}

/// Ricci energy of `metric`, measured from its origin metric.
pub fn ricci_energy(
    mesh: &TriMesh,
    metric: &CirclePackingMetric,
    targets: &[Option<f64>],
) -> Result<f64> {
    if targets.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            what: "curvature targets",
            expected: mesh.num_vertices(),
            found: targets.len(),
        });
    }
    energy_increment(
        mesh,
        metric.weight_cosines(),
        targets,
        metric.origin_log_radii(),
        metric.log_radii(),
    )
}

/// Gradient of the Ricci energy: `K_i - K̄_i` where a target exists, 0 elsewhere.
pub fn ricci_energy_gradient(
    mesh: &TriMesh,
    metric: &CirclePackingMetric,
    targets: &[Option<f64>],
) -> Result<Vec<f64>> {
    let k = metric_curvature(mesh, metric)?;
    Ok(k.iter()
        .zip(targets)
        .map(|(k, t)| t.map_or(0.0, |t| k - t))
        .collect())
}
