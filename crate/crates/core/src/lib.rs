//! Conformal flattening of 3D face scans into nine-channel images.
//!
//! A scan is loaded as a [`mesh::TriMesh`] (a triangulated topological
//! disk), flattened to the plane by discrete surface Ricci flow on a circle
//! packing metric ([`ricci`]) and laid out breadth first ([`embed`]), then
//! rasterized into color, normal, curvature, conformal factor and depth
//! planes ([`channels`]). An orthographic projection after rigid ICP
//! alignment ([`align`]) serves as the baseline.
//!
//! [`pipeline`] chains the steps for one mesh.

pub mod align;
pub mod channels;
pub mod embed;
mod error;
pub mod fixtures;
pub mod geom;
pub mod mesh;
pub mod pipeline;
pub mod ricci;

pub use error::{Error, PartialFlow, Result};
