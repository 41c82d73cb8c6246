//! Nine-channel face images: per-vertex channel tables, rasterization, and
//! the MCI file format.
//!
//! Channels are, in order, `R, G, B, Nx, Ny, Nz, K, CF, D`.
//!
//! MCI layout (little-endian): magic `MCI1`; `u32` width, height and channel
//! count; `u8` mask flag and three zero bytes; `channels * width * height`
//! `f32` samples, one plane per channel, rows top to bottom; `width * height`
//! mask bytes (0 or 1) when the flag is set; `channels` pairs of `f32`
//! (min, max) normalization bounds.

use std::io::Write as _;
use std::path::Path;

use nalgebra::Point2;

use crate::embed::{PlanarEmbedding, Projection};
use crate::error::{Error, Result};
use crate::geom::{self, VertexScalars, VertexVectors};
use crate::mesh::TriMesh;

pub const NUM_CHANNELS: usize = 9;
pub const CHANNEL_NAMES: [&str; NUM_CHANNELS] = ["R", "G", "B", "Nx", "Ny", "Nz", "K", "CF", "D"];
pub const DEFAULT_SIZE: usize = 182;

const MISSING_COLOR: f64 = 128.0;
const MARGIN: f64 = 2.0;
const MAGIC: &[u8; 4] = b"MCI1";
const HEADER_LEN: usize = 20;

/// Per-vertex channel values before rasterization.
pub type ChannelTable = Vec<[f64; NUM_CHANNELS]>;

/// Weighted curvature for the K channel. Boundary deficits measure how the
/// boundary curve turns rather than surface curvature, so boundary vertices
/// take the mean over their interior neighbors (0 if they have none).
pub fn curvature_channel(mesh: &TriMesh) -> Result<VertexScalars> {
    let mut k = geom::weighted_curvature(mesh)?;
    let mut sum = vec![0.0; mesh.num_vertices()];
    let mut count = vec![0usize; mesh.num_vertices()];
    for &[a, b] in mesh.edges() {
        for (p, q) in [(a, b), (b, a)] {
            if mesh.is_boundary(p) && !mesh.is_boundary(q) {
                sum[p] += k.values[q];
                count[p] += 1;
            }
        }
    }
    for &v in mesh.boundary_loop() {
        k.values[v] = if count[v] > 0 { sum[v] / count[v] as f64 } else { 0.0 };
    }
    Ok(k)
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// Collect the nine channels per vertex.
///
/// Depth is `z` minus the mean `z`. Meshes without colors get gray 128.
/// `factors` may be `None` only for orthographic embeddings, which then
/// carry a conformal factor of 1.
pub fn assemble_channels(
    mesh: &TriMesh,
    embedding: &PlanarEmbedding,
    normals: &VertexVectors,
    curvature: &VertexScalars,
    factors: Option<&VertexScalars>,
) -> Result<ChannelTable> {
    let n = mesh.num_vertices();
    check_len("embedding coordinates", n, embedding.uv().len())?;
    check_len("vertex normals", n, normals.len())?;
    check_len("curvature values", n, curvature.len())?;
    if let Some(f) = factors {
        check_len("conformal factors", n, f.len())?;
    } else if embedding.projection() == Projection::Conformal {
        return Err(Error::InvalidArgument(
            "conformal factors are required for a conformal embedding".into(),
        ));
    }
    let zc = mesh.centroid().z;
    let colors = mesh.colors();
    Ok((0..n)
        .map(|v| {
            let rgb = colors.map_or([MISSING_COLOR; 3], |c| c[v].map(f64::from));
            let nrm = normals.values[v];
            [
                rgb[0],
                rgb[1],
                rgb[2],
                nrm.x,
                nrm.y,
                nrm.z,
                curvature.values[v],
                factors.map_or(1.0, |f| f.values[v]),
                mesh.vertices()[v].z - zc,
            ]
        })
        .collect())
}

/// A `width x height x 9` image with a coverage mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImage {
    width: usize,
    height: usize,
    /// Planar, `data[c * width * height + row * width + col]`.
    data: Vec<f32>,
    mask: Vec<bool>,
    /// Per-channel (min, max) mapped to 0 and 255.
    normalization: Vec<(f32, f32)>,
}

impl ChannelImage {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f32>,
        mask: Vec<bool>,
        normalization: Vec<(f32, f32)>,
    ) -> Result<Self> {
        let channels = normalization.len();
        if channels == 0 {
            return Err(Error::Format("image has no channels".into()));
        }
        check_len("image samples", channels * width * height, data.len())?;
        check_len("mask pixels", width * height, mask.len())?;
        Ok(ChannelImage {
            width,
            height,
            data,
            mask,
            normalization,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.normalization.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn normalization(&self) -> &[(f32, f32)] {
        &self.normalization
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> Result<&[f32]> {
        if c >= self.channels() {
            return Err(Error::ChannelIndex {
                index: c,
                count: self.channels(),
            });
        }
        let plane = self.width * self.height;
        Ok(&self.data[c * plane..(c + 1) * plane])
    }

    pub fn get(&self, c: usize, col: usize, row: usize) -> f32 {
        self.data[c * self.width * self.height + row * self.width + col]
    }

    /// Sample value mapped back to the pre-normalization range.
    pub fn denormalized(&self, c: usize, col: usize, row: usize) -> f64 {
        let (lo, hi) = self.normalization[c];
        lo as f64 + self.get(c, col, row) as f64 / 255.0 * (hi as f64 - lo as f64)
    }
}

/// Maps embedding coordinates to pixel coordinates: uniform scale into the
/// rectangle minus a 2-pixel margin, centered, `v` pointing up.
#[derive(Debug, Clone, Copy)]
struct PixelMap {
    scale: f64,
    center_uv: Point2<f64>,
    center_px: Point2<f64>,
}

impl PixelMap {
    fn fit(uv: &[Point2<f64>], width: usize, height: usize) -> Result<Self> {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in uv {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::InvalidArgument("embedding has non-finite coordinates".into()));
            }
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let (du, dv) = (hi.x - lo.x, hi.y - lo.y);
        let avail_w = width as f64 - 2.0 * MARGIN;
        let avail_h = height as f64 - 2.0 * MARGIN;
        let scale = match (du > 0.0, dv > 0.0) {
            (true, true) => (avail_w / du).min(avail_h / dv),
            (true, false) => avail_w / du,
            (false, true) => avail_h / dv,
            (false, false) => return Err(Error::EmptyFootprint),
        };
        if !(avail_w > 0.0 && avail_h > 0.0) {
            return Err(Error::EmptyFootprint);
        }
        Ok(PixelMap {
            scale,
            center_uv: Point2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)),
            center_px: Point2::new(0.5 * width as f64, 0.5 * height as f64),
        })
    }

    fn to_pixel(&self, p: &Point2<f64>) -> Point2<f64> {
        Point2::new(
            self.center_px.x + self.scale * (p.x - self.center_uv.x),
            self.center_px.y - self.scale * (p.y - self.center_uv.y),
        )
    }
}

/// Rasterize a channel table over an embedding and normalize each channel
/// to `[0, 255]` over the covered pixels.
pub fn rasterize(
    table: &[[f64; NUM_CHANNELS]],
    embedding: &PlanarEmbedding,
    mesh: &TriMesh,
    width: usize,
    height: usize,
) -> Result<ChannelImage> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidArgument(format!(
            "image must be at least 2x2, got {width}x{height}"
        )));
    }
    check_len("channel table rows", mesh.num_vertices(), table.len())?;
    check_len("embedding coordinates", mesh.num_vertices(), embedding.uv().len())?;
    let map = PixelMap::fit(embedding.uv(), width, height)?;
    let px: Vec<Point2<f64>> = embedding.uv().iter().map(|p| map.to_pixel(p)).collect();

    let plane = width * height;
    let mut raw = vec![0.0f64; NUM_CHANNELS * plane];
    let mut mask = vec![false; plane];
    // Faces in index order; a covered pixel is never overwritten, so the
    // lowest face index wins on shared edges.
    for &[a, b, c] in mesh.faces() {
        let (pa, pb, pc) = (px[a], px[b], px[c]);
        let area = geom::signed_area_2d(pa, pb, pc);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let tol = -1e-9;
        let col0 = (pa.x.min(pb.x).min(pc.x) - 0.5).floor().max(0.0) as usize;
        let col1 = ((pa.x.max(pb.x).max(pc.x) - 0.5).ceil().max(0.0) as usize).min(width - 1);
        let row0 = (pa.y.min(pb.y).min(pc.y) - 0.5).floor().max(0.0) as usize;
        let row1 = ((pa.y.max(pb.y).max(pc.y) - 0.5).ceil().max(0.0) as usize).min(height - 1);
        for row in row0..=row1 {
            for col in col0..=col1 {
                let idx = row * width + col;
                if mask[idx] {
                    continue;
                }
                let q = Point2::new(col as f64 + 0.5, row as f64 + 0.5);
                let wa = geom::signed_area_2d(q, pb, pc) / area;
                let wb = geom::signed_area_2d(pa, q, pc) / area;
                let wc = geom::signed_area_2d(pa, pb, q) / area;
                if wa < tol || wb < tol || wc < tol {
                    continue;
                }
                mask[idx] = true;
                // Relative to corner a, so constant channels stay exact.
                let (ta, tb, tc) = (&table[a], &table[b], &table[c]);
                for ch in 0..NUM_CHANNELS {
                    raw[ch * plane + idx] = ta[ch] + wb * (tb[ch] - ta[ch]) + wc * (tc[ch] - ta[ch]);
                }
            }
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyFootprint);
    }

    let mut data = vec![0.0f32; NUM_CHANNELS * plane];
    let mut normalization = Vec::with_capacity(NUM_CHANNELS);
    for ch in 0..NUM_CHANNELS {
        let values = &raw[ch * plane..(ch + 1) * plane];
        let (lo, hi) = values
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&x, _)| (lo.min(x), hi.max(x)));
        let out = &mut data[ch * plane..(ch + 1) * plane];
        if hi > lo {
            for ((o, &x), &m) in out.iter_mut().zip(values).zip(&mask) {
                if m {
                    *o = ((x - lo) / (hi - lo) * 255.0).clamp(0.0, 255.0) as f32;
                }
            }
        }
        normalization.push((lo as f32, hi as f32));
    }
    ChannelImage::new(width, height, data, mask, normalization)
}

/// Serialize to MCI bytes.
pub fn encode_mci(image: &ChannelImage) -> Vec<u8> {
    let plane = image.width * image.height;
    let channels = image.channels();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * channels * plane + plane + 8 * channels);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(image.width as u32).to_le_bytes());
    out.extend_from_slice(&(image.height as u32).to_le_bytes());
    out.extend_from_slice(&(channels as u32).to_le_bytes());
    out.extend_from_slice(&[1, 0, 0, 0]);
    for x in &image.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend(image.mask.iter().map(|&m| m as u8));
    for (lo, hi) in &image.normalization {
        out.extend_from_slice(&lo.to_le_bytes());
        out.extend_from_slice(&hi.to_le_bytes());
    }
    out
}

/// Parse MCI bytes. An image stored without a mask gets a full mask.
pub fn decode_mci(bytes: &[u8]) -> Result<ChannelImage> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("file too short for a header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected MCI1".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (width, height, channels) = (u32_at(4), u32_at(8), u32_at(12));
    let has_mask = match bytes[16] {
        0 => false,
        1 => true,
        f => return Err(Error::Format(format!("bad mask flag {f}"))),
    };
    let plane = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let expected = plane
        .checked_mul(channels)
        .and_then(|s| s.checked_mul(4))
        .and_then(|s| s.checked_add(HEADER_LEN + 8 * channels + if has_mask { plane } else { 0 }))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for {width}x{height}x{channels}, found {}",
            bytes.len()
        )));
    }
    let mut pos = HEADER_LEN;
    let mut f32_next = || {
        let x = f32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        pos += 4;
        x
    };
    let data: Vec<f32> = (0..channels * plane).map(|_| f32_next()).collect();
    let mask_start = HEADER_LEN + 4 * channels * plane;
    let mask = if has_mask {
        bytes[mask_start..mask_start + plane]
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::Format(format!("bad mask byte {b}"))),
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![true; plane]
    };
    let mut pos = mask_start + if has_mask { plane } else { 0 };
    let mut f32_next = || {
        let x = f32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        pos += 4;
        x
    };
    let normalization = (0..channels).map(|_| (f32_next(), f32_next())).collect();
    ChannelImage::new(width, height, data, mask, normalization).map_err(|e| Error::Format(e.to_string()))
}

/// Write to `path` through a temporary file in the same directory.
pub fn write_mci(image: &ChannelImage, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_mci(image))
}

pub fn read_mci(path: impl AsRef<Path>) -> Result<ChannelImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mci(&bytes)
}

/// Binary 8-bit PGM of one normalized channel.
pub fn channel_pgm(image: &ChannelImage, channel: usize) -> Result<Vec<u8>> {
    let plane = image.channel(channel)?;
    let mut out = Vec::with_capacity(plane.len() + 32);
    write!(out, "P5\n{} {}\n255\n", image.width, image.height).expect("write to Vec");
    out.extend(plane.iter().map(|&x| x.round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn export_channel_pgm(image: &ChannelImage, channel: usize, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &channel_pgm(image, channel)?)
}

/// Write `bytes` to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
