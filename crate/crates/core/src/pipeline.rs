//! One mesh in, one nine-channel image out.

use serde::{Deserialize, Serialize};

use crate::align::{apply_transform, icp_align, IcpResult};
use crate::channels::{self, ChannelImage, DEFAULT_SIZE};
use crate::embed::{self, PlanarEmbedding, Projection};
use crate::error::Result;
use crate::geom::{self, Distortion};
use crate::mesh::TriMesh;
use crate::ricci::{self, FlowOptions, FlowReport};

pub const DEFAULT_ICP_ITERS: usize = 300;
pub const DEFAULT_ICP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub projection: Projection,
    pub flow: FlowOptions,
    pub width: usize,
    pub height: usize,
    pub icp_iters: usize,
    pub icp_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            projection: Projection::Conformal,
            flow: FlowOptions::default(),
            width: DEFAULT_SIZE,
            height: DEFAULT_SIZE,
            icp_iters: DEFAULT_ICP_ITERS,
            icp_tol: DEFAULT_ICP_TOL,
        }
    }
}

/// Summary numbers written next to each image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub projection: Projection,
    pub vertices: usize,
    pub faces: usize,
    pub distortion: Distortion,
    /// Largest relative edge-length error of a conformal layout.
    pub max_edge_residual: Option<f64>,
    pub conformal_factor_range: Option<(f64, f64)>,
    pub mask_pixels: usize,
    pub icp_rms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// The mesh after optional alignment.
    pub mesh: TriMesh,
    pub embedding: PlanarEmbedding,
    pub image: ChannelImage,
    pub flow: Option<FlowReport>,
    pub icp: Option<IcpResult>,
    pub stats: PipelineStats,
}

/// Optional ICP onto `reference`, then flatten and rasterize.
pub fn run(mesh: &TriMesh, reference: Option<&TriMesh>, options: &PipelineOptions) -> Result<PipelineOutput> {
    let (mesh, icp) = match reference {
        Some(r) => {
            let result = icp_align(mesh, r, options.icp_iters, options.icp_tol)?;
            log::info!(
                "icp: rms {:.6} after {} iterations",
                result.rms,
                result.iterations
            );
            (apply_transform(mesh, &result.transform), Some(result))
        }
        None => (mesh.clone(), None),
    };
    let normals = geom::vertex_normals(&mesh)?;
    let curvature = channels::curvature_channel(&mesh)?;

    let (embedding, factors, flow) = match options.projection {
        Projection::Conformal => {
            let metric = ricci::init_circle_packing(&mesh)?;
            let (flat, report) = ricci::ricci_flow(&mesh, &metric, &options.flow)?;
            log::info!(
                "ricci flow: {} iterations, residual {:e}",
                report.iterations,
                report.final_residual()
            );
            let embedding = embed::layout(&mesh, &flat, options.flow.epsilon)?;
            let factors = geom::conformal_factors(&mesh, &embedding)?;
            (embedding, Some(factors), Some(report))
        }
        Projection::Orthographic => (embed::orthographic(&mesh), None, None),
    };

    let distortion = geom::qc_distortion(&mesh, &embedding)?;
    let table = channels::assemble_channels(&mesh, &embedding, &normals, &curvature, factors.as_ref())?;
    let image = channels::rasterize(&table, &embedding, &mesh, options.width, options.height)?;
    let stats = PipelineStats {
        projection: options.projection,
        vertices: mesh.num_vertices(),
        faces: mesh.num_faces(),
        distortion,
        max_edge_residual: embedding.max_edge_residual(),
        conformal_factor_range: factors.as_ref().map(|f| {
            f.values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
        }),
        mask_pixels: image.mask_count(),
        icp_rms: icp.as_ref().map(|r| r.rms),
    };
    Ok(PipelineOutput {
        mesh,
        embedding,
        image,
        flow,
        icp,
        stats,
    })
}
