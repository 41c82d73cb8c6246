//! Circle packing metrics and discrete surface Ricci flow with a free
//! boundary.
//!
//! The flow integrates `du_i/dt = K̄_i - K_i` on the log-radii of interior
//! vertices, targeting zero curvature inside while the boundary log-radii
//! stay fixed. Two discretizations are available: an explicit gradient step
//! with backtracking, and Newton's method on the convex Ricci energy with a
//! conjugate-gradient inner solve. Both only accept steps that keep every
//! triangle inequality and do not increase the energy.

mod energy;
mod metric;
mod sparse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, PartialFlow, Result};
use crate::mesh::TriMesh;

pub use energy::{
    flat_interior_targets, metric_curvature, ricci_energy, ricci_energy_gradient,
    CurvatureTargets,
};
pub use metric::{
    edge_lengths, init_circle_packing, init_circle_packing_with, CirclePackingMetric,
    WeightPolicy,
};

use sparse::{conjugate_gradient, CgOutcome};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_STEP: f64 = 0.05;
pub const DEFAULT_GRADIENT_ITERS: usize = 50_000;
pub const DEFAULT_NEWTON_ITERS: usize = 100;

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    Gradient,
    Newton,
}

impl std::str::FromStr for FlowMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gradient" => Ok(FlowMode::Gradient),
            "newton" => Ok(FlowMode::Newton),
            _ => Err(format!("unknown solver mode '{s}' (expected gradient or newton)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub mode: FlowMode,
    /// Stop once every interior `|K_i|` is below this.
    pub epsilon: f64,
    /// Iteration budget; `None` picks the mode's default.
    pub max_iters: Option<usize>,
    /// Initial step length of the gradient scheme.
    pub step: f64,
}

impl FlowOptions {
    pub fn new(mode: FlowMode) -> Self {
        FlowOptions {
            mode,
            epsilon: DEFAULT_EPSILON,
            max_iters: None,
            step: DEFAULT_STEP,
        }
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.max_iters = Some(n);
        self
    }

    fn iteration_budget(&self) -> usize {
        self.max_iters.unwrap_or(match self.mode {
            FlowMode::Gradient => DEFAULT_GRADIENT_ITERS,
            FlowMode::Newton => DEFAULT_NEWTON_ITERS,
        })
    }
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self::new(FlowMode::Newton)
    }
}

/// Convergence record of one flow run. Entry 0 of each history describes
/// the input metric; entry `k` the metric after `k` accepted steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub mode: FlowMode,
    pub epsilon: f64,
    pub iterations: usize,
    pub max_residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub converged: bool,
    /// Edge weights clamped when the metric was initialized.
    pub clamped_edges: usize,
}

impl FlowReport {
    pub fn final_residual(&self) -> f64 {
        *self.max_residual_history.last().unwrap_or(&f64::NAN)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn max_interior_residual(k: &[f64], targets: &[Option<f64>]) -> f64 {
    k.iter()
        .zip(targets)
        .filter_map(|(k, t)| t.map(|t| (k - t).abs()))
        .fold(0.0, f64::max)
}

/// Flow `metric` until every interior vertex is flat within `epsilon`.
///
/// Boundary log-radii and all edge weights are left untouched. On running
/// out of iterations the partial metric and report come back inside
/// [`Error::MaxItersExceeded`].
pub fn ricci_flow(
    mesh: &TriMesh,
    metric: &CirclePackingMetric,
    options: &FlowOptions,
) -> Result<(CirclePackingMetric, FlowReport)> {
    if !(options.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {}",
            options.epsilon
        )));
    }
    metric.validate(mesh)?;
    let targets = flat_interior_targets(mesh);
    let weights = metric.weight_cosines();

    let active: Vec<usize> = mesh.interior_vertices();
    let mut slot = vec![usize::MAX; mesh.num_vertices()];
    for (k, &v) in active.iter().enumerate() {
        slot[v] = k;
    }

    let mut u = metric.log_radii().to_vec();
    let mut k = energy::curvature_at(mesh, weights, &u)?;
    let mut residual = max_interior_residual(&k, &targets);
    let mut energy_now = ricci_energy(mesh, metric, &targets)?;

    let mut report = FlowReport {
        mode: options.mode,
        epsilon: options.epsilon,
        iterations: 0,
        max_residual_history: vec![residual],
        energy_history: vec![energy_now],
        converged: residual < options.epsilon,
        clamped_edges: metric.clamped_edges(),
    };
    let budget = options.iteration_budget();

    while !report.converged {
        if report.iterations >= budget {
            log::warn!(
                "ricci flow stopped after {} iterations, residual {residual:e}",
                report.iterations
            );
            return Err(Error::MaxItersExceeded(Box::new(PartialFlow {
                metric: metric.with_log_radii(u),
                report,
            })));
        }
        let gradient: Vec<f64> = active.iter().map(|&v| k[v]).collect();
        let direction = match options.mode {
            FlowMode::Gradient => gradient.iter().map(|g| -options.step * g).collect(),
            FlowMode::Newton => newton_direction(mesh, weights, &u, &slot, &gradient)?,
        };

        let iteration = report.iterations + 1;
        let mut t = 1.0;
        let mut accepted = None;
        let mut last_failure = "triangle inequality violated";
        for _ in 0..MAX_HALVINGS {
            let mut trial = u.clone();
            for (d, &v) in direction.iter().zip(&active) {
                trial[v] += t * d;
            }
            match energy::curvature_at(mesh, weights, &trial) {
                Ok(k_trial) => {
                    let delta = energy::energy_increment(mesh, weights, &targets, &u, &trial);
                    match delta {
                        Ok(de) if de <= 0.0 => {
                            accepted = Some((trial, k_trial, de));
                            break;
                        }
                        Ok(_) => last_failure = "energy did not decrease",
                        Err(_) => last_failure = "triangle inequality violated along the step",
                    }
                }
                Err(_) => last_failure = "triangle inequality violated",
            }
            t *= 0.5;
        }
        let Some((next_u, next_k, de)) = accepted else {
            return Err(Error::MetricCollapse {
                iteration,
                reason: format!("line search failed: {last_failure}"),
            });
        };
        u = next_u;
        k = next_k;
        energy_now += de;
        residual = max_interior_residual(&k, &targets);
        report.iterations = iteration;
        report.max_residual_history.push(residual);
        report.energy_history.push(energy_now);
        report.converged = residual < options.epsilon;
        log::debug!("ricci flow iteration {iteration}: residual {residual:e}, step {t}");
    }

    Ok((metric.with_log_radii(u), report))
}

fn newton_direction(
    mesh: &TriMesh,
    weights: &[f64],
    u: &[f64],
    slot: &[usize],
    gradient: &[f64],
) -> Result<Vec<f64>> {
    let hessian = energy::energy_hessian(mesh, weights, u, slot, gradient.len())?;
    let rhs: Vec<f64> = gradient.iter().map(|g| -g).collect();
    let cap = (10 * gradient.len()).max(100);
    let (dx, outcome) = conjugate_gradient(&hessian, &rhs, 1e-10, cap);
    match outcome {
        CgOutcome::Converged { .. } | CgOutcome::Stopped { .. } => Ok(dx),
        CgOutcome::Indefinite => {
            log::warn!("energy Hessian not positive definite; using a gradient step");
            Ok(rhs.iter().map(|g| DEFAULT_STEP * g).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn flat_grid_is_already_converged() {
        let mesh = fixtures::flat_grid(5, 1.0);
        let cp = init_circle_packing(&mesh).unwrap();
        for mode in [FlowMode::Gradient, FlowMode::Newton] {
            let (out, report) = ricci_flow(&mesh, &cp, &FlowOptions::new(mode)).unwrap();
            assert!(report.converged);
            assert!(report.iterations <= 1);
            assert_eq!(report.max_residual_history.len(), report.energy_history.len());
            assert_eq!(out.weight_cosines(), cp.weight_cosines());
        }
    }

    #[test]
    fn newton_flattens_small_cap() {
        let mesh = fixtures::spherical_cap(5, 60f64.to_radians());
        let cp = init_circle_packing(&mesh).unwrap();
        let (out, report) = ricci_flow(&mesh, &cp, &FlowOptions::new(FlowMode::Newton)).unwrap();
        assert!(report.converged, "{report:?}");
        let k = metric_curvature(&mesh, &out).unwrap();
        for v in mesh.interior_vertices() {
            assert!(k[v].abs() < 1e-6);
        }
        for &v in mesh.boundary_loop() {
            assert_eq!(out.log_radii()[v].to_bits(), cp.log_radii()[v].to_bits());
        }
        for w in report.energy_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn max_iters_returns_partial_report() {
        let mesh = fixtures::spherical_cap(5, 60f64.to_radians());
        let cp = init_circle_packing(&mesh).unwrap();
        let opts = FlowOptions::new(FlowMode::Gradient).max_iters(3);
        match ricci_flow(&mesh, &cp, &opts) {
            Err(Error::MaxItersExceeded(partial)) => {
                assert!(!partial.report.converged);
                assert_eq!(partial.report.iterations, 3);
                assert_eq!(partial.report.max_residual_history.len(), 4);
            }
            other => panic!("expected MaxItersExceeded, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_epsilon() {
        let mesh = fixtures::flat_grid(3, 1.0);
        let cp = init_circle_packing(&mesh).unwrap();
        let opts = FlowOptions::new(FlowMode::Newton).epsilon(0.0);
        assert!(matches!(ricci_flow(&mesh, &cp, &opts), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn report_json_round_trip() {
        let report = FlowReport {
            mode: FlowMode::Gradient,
            epsilon: 1e-6,
            iterations: 1,
            max_residual_history: vec![0.5, 1e-7],
            energy_history: vec![0.0, -0.01],
            converged: true,
            clamped_edges: 0,
        };
        let back: FlowReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
        assert!(report.to_json().contains("\"mode\": \"gradient\""));
    }
}
