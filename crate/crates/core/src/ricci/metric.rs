use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geom;
use crate::mesh::TriMesh;

/// How edge weights are derived from the input edge lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightPolicy {
    /// Keep the exact weight `(l² - γi² - γj²) / (2 γi γj)`, even when it
    /// exceeds 1 (disjoint circles). The initial metric then reproduces the
    /// input lengths on every edge.
    #[default]
    Exact,
    /// Clamp the weight cosine into `[0, 1]`, i.e. intersection angles in
    /// `[0, π/2]`. Lengths change on every clamped edge.
    Clamped,
}

/// Per-vertex circle radii and per-edge weights of a circle packing metric.
///
/// Edge weights are stored as the cosine of the intersection angle `φ`; an
/// edge length is `l² = γi² + γj² + 2 γi γj cos φ`. A cosine above 1 means
/// the two circles are disjoint and is kept as an inversive distance.
///
/// The metric also remembers the log-radii it was initialized with, which
/// anchor the Ricci energy.
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePackingMetric {
    radii: Vec<f64>,
    log_radii: Vec<f64>,
    weights: Vec<f64>,
    origin: Vec<f64>,
    clamped_edges: usize,
}

impl CirclePackingMetric {
    /// Build from radii and edge weight cosines.
    pub fn new(radii: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = radii.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "radius of vertex {i} is {}, must be positive",
                radii[i]
            )));
        }
        if let Some(e) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("edge weight {e} is not finite")));
        }
        let log_radii: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        Ok(CirclePackingMetric {
            origin: log_radii.clone(),
            radii,
            log_radii,
            weights,
            clamped_edges: 0,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn log_radii(&self) -> &[f64] {
        &self.log_radii
    }

    /// Log-radii of the initial metric the Ricci energy is measured from.
    pub fn origin_log_radii(&self) -> &[f64] {
        &self.origin
    }

    /// Edge weights as intersection-angle cosines.
    pub fn weight_cosines(&self) -> &[f64] {
        &self.weights
    }

    /// Intersection angle `φ` of an edge, if its circles intersect
    /// (cosine within `[-1, 1]`).
    pub fn intersection_angle(&self, e: usize) -> Option<f64> {
        let c = self.weights[e];
        (-1.0..=1.0).contains(&c).then(|| c.acos())
    }

    /// Whether every edge weight lies within `[0, π/2]`.
    pub fn weights_in_acute_range(&self) -> bool {
        (0..self.weights.len())
            .all(|e| matches!(self.intersection_angle(e), Some(phi) if (0.0..=FRAC_PI_2).contains(&phi)))
    }

    /// Number of edges whose weight was clamped at initialization.
    pub fn clamped_edges(&self) -> usize {
        self.clamped_edges
    }

    /// Same weights and origin, new log-radii.
    pub fn with_log_radii(&self, log_radii: Vec<f64>) -> Self {
        assert_eq!(log_radii.len(), self.log_radii.len());
        CirclePackingMetric {
            radii: log_radii.iter().map(|u| u.exp()).collect(),
            log_radii,
            weights: self.weights.clone(),
            origin: self.origin.clone(),
            clamped_edges: self.clamped_edges,
        }
    }

    /// Every radius and weight has the right count and the induced lengths
    /// satisfy every triangle inequality.
    pub fn validate(&self, mesh: &TriMesh) -> Result<()> {
        if self.radii.len() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch {
                what: "circle radii",
                expected: mesh.num_vertices(),
                found: self.radii.len(),
            });
        }
        if self.weights.len() != mesh.num_edges() {
            return Err(Error::DimensionMismatch {
                what: "edge weights",
                expected: mesh.num_edges(),
                found: self.weights.len(),
            });
        }
        geom::corner_angles_from_lengths(mesh, &edge_lengths(mesh, self)).map(|_| ())
    }
}

/// Edge lengths from the cosine law `l² = γi² + γj² + 2 γi γj cos φ`.
pub fn edge_lengths(mesh: &TriMesh, metric: &CirclePackingMetric) -> Vec<f64> {
    lengths_from_radii(mesh, metric.radii(), metric.weight_cosines())
}

pub(crate) fn lengths_from_radii(mesh: &TriMesh, radii: &[f64], weights: &[f64]) -> Vec<f64> {
    mesh.edges()
        .iter()
        .zip(weights)
        .map(|(&[i, j], &w)| cosine_law(radii[i], radii[j], w))
        .collect()
}

#[inline]
pub(crate) fn cosine_law(ri: f64, rj: f64, cos_phi: f64) -> f64 {
    (ri * ri + rj * rj + 2.0 * ri * rj * cos_phi).sqrt()
}

/// Initial circle packing metric with exact weights.
pub fn init_circle_packing(mesh: &TriMesh) -> Result<CirclePackingMetric> {
    init_circle_packing_with(mesh, WeightPolicy::Exact)
}

/// Initial circle packing metric from the mesh edge lengths.
///
/// Each radius is the smallest half perimeter excess `(l_ij + l_ki - l_jk) / 2`
/// over the faces around the vertex; weights invert the cosine law.
pub fn init_circle_packing_with(mesh: &TriMesh, policy: WeightPolicy) -> Result<CirclePackingMetric> {
    let lengths = mesh.edge_lengths();
    let mut radii = vec![f64::INFINITY; mesh.num_vertices()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let l = geom::face_lengths(mesh, &lengths, f);
        for c in 0..3 {
            // Corner c touches the two edges not opposite it.
            let excess = 0.5 * (l[(c + 1) % 3] + l[(c + 2) % 3] - l[c]);
            if !(excess > 0.0) {
                return Err(Error::degenerate(
                    f,
                    format!("non-positive radius {excess:e} at vertex {}", face[c]),
                ));
            }
            radii[face[c]] = radii[face[c]].min(excess);
        }
    }
    let mut clamped = 0;
    let weights = mesh
        .edges()
        .iter()
        .zip(&lengths)
        .map(|(&[i, j], &l)| {
            let (ri, rj) = (radii[i], radii[j]);
            let c = (l * l - ri * ri - rj * rj) / (2.0 * ri * rj);
            match policy {
                WeightPolicy::Exact => c,
                WeightPolicy::Clamped => {
                    let k = c.clamp(0.0, 1.0);
                    if k != c {
                        clamped += 1;
                    }
                    k
                }
            }
        })
        .collect();
    let mut metric = CirclePackingMetric::new(radii, weights)?;
    metric.clamped_edges = clamped;
    if clamped > 0 {
        log::warn!(
            "{clamped} of {} edge weights clamped into [0, pi/2]; initial lengths differ from the input",
            mesh.num_edges()
        );
    }
    Ok(metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;
    use nalgebra::Point3;

    #[test]
    fn cosine_law_cases() {
        assert_relative_eq!(cosine_law(1.0, 1.0, 1.0), 2.0);
        assert_relative_eq!(cosine_law(1.0, 1.0, 0.0), 2f64.sqrt());
        assert_relative_eq!(cosine_law(3.0, 4.0, 1.0), 7.0);
    }

    #[test]
    fn equilateral_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let m = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.5, h, 0.0),
            ],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap();
        let cp = init_circle_packing(&m).unwrap();
        for &r in cp.radii() {
            assert_relative_eq!(r, 0.5, epsilon = 1e-15);
        }
        for &w in cp.weight_cosines() {
            assert_relative_eq!(w, 1.0, epsilon = 1e-14);
        }
        for l in edge_lengths(&m, &cp) {
            assert_relative_eq!(l, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn exact_weights_reproduce_lengths() {
        for mesh in [fixtures::flat_grid(5, 1.0), fixtures::spherical_cap(6, 60f64.to_radians())] {
            let cp = init_circle_packing(&mesh).unwrap();
            assert_eq!(cp.clamped_edges(), 0);
            for (a, b) in edge_lengths(&mesh, &cp).iter().zip(mesh.edge_lengths()) {
                assert_relative_eq!(*a, b, max_relative = 1e-12);
            }
            for (u, r) in cp.log_radii().iter().zip(cp.radii()) {
                assert_relative_eq!(u.exp(), *r, max_relative = 1e-12);
            }
            cp.validate(&mesh).unwrap();
        }
    }

    #[test]
    fn clamped_policy_stays_acute_and_matches_unclamped_edges() {
        let mesh = fixtures::spherical_cap(6, 60f64.to_radians());
        let exact = init_circle_packing(&mesh).unwrap();
        let cp = init_circle_packing_with(&mesh, WeightPolicy::Clamped).unwrap();
        assert!(cp.weights_in_acute_range());
        let lengths = edge_lengths(&mesh, &cp);
        let input = mesh.edge_lengths();
        for e in 0..mesh.num_edges() {
            if (0.0..=1.0).contains(&exact.weight_cosines()[e]) {
                assert_relative_eq!(lengths[e], input[e], max_relative = 1e-9);
            }
        }
        cp.validate(&mesh).unwrap();
    }

    #[test]
    fn with_log_radii_keeps_weights_and_origin() {
        let mesh = fixtures::flat_grid(3, 1.0);
        let cp = init_circle_packing(&mesh).unwrap();
        let moved = cp.with_log_radii(cp.log_radii().iter().map(|u| u + 0.5).collect());
        assert_eq!(moved.weight_cosines(), cp.weight_cosines());
        assert_eq!(moved.origin_log_radii(), cp.log_radii());
        for (a, b) in moved.radii().iter().zip(cp.radii()) {
            assert_relative_eq!(*a, b * 0.5f64.exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_radii() {
        assert!(CirclePackingMetric::new(vec![1.0, 0.0], vec![]).is_err());
        assert!(CirclePackingMetric::new(vec![1.0, -1.0], vec![]).is_err());
    }
}
