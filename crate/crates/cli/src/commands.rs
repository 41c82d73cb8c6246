use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use ricciface::align::icp_align;
use ricciface::channels::{export_channel_pgm, read_mci, write_atomic, write_mci, CHANNEL_NAMES, NUM_CHANNELS};
use ricciface::embed::{self, Projection};
use ricciface::geom::{self, Distortion};
use ricciface::mesh::{mesh_from_depth, read_depth_csv, read_depth_pgm, write_obj, MeshFormat, TriMesh};
use ricciface::pipeline::{self, PipelineOptions};
use ricciface::ricci::{self, FlowOptions};
use ricciface::{fixtures as fx, Error};
use serde::Serialize;

use crate::config::{expand_inputs, FileConfig, InputKind, RunConfig};
use crate::{BatchArgs, Tally, UsageError};

fn resolve(args: &BatchArgs) -> anyhow::Result<RunConfig> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    Ok(RunConfig::resolve(args, file)?)
}

fn load_input(path: &Path, kind: InputKind, spacing: f64) -> anyhow::Result<TriMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let mesh = match kind {
        InputKind::Mesh => {
            let format = MeshFormat::from_path(path)
                .ok_or_else(|| anyhow!("unknown mesh extension '{ext}' (expected obj or ply)"))?;
            TriMesh::load(path, format)?
        }
        InputKind::Depth => {
            let grid = match ext.as_str() {
                "pgm" => read_depth_pgm(&std::fs::read(path)?, spacing)?,
                "csv" => read_depth_csv(&std::fs::read_to_string(path)?, spacing)?,
                _ => bail!("unknown depth extension '{ext}' (expected pgm or csv)"),
            };
            mesh_from_depth(&grid)?
        }
    };
    Ok(mesh)
}

fn load_reference(cfg: &RunConfig) -> anyhow::Result<Option<TriMesh>> {
    cfg.reference
        .as_deref()
        .map(|p| {
            let format = MeshFormat::from_path(p)
                .ok_or_else(|| UsageError(format!("unknown reference mesh format: {}", p.display())))?;
            TriMesh::load(p, format).with_context(|| format!("loading reference {}", p.display()))
        })
        .transpose()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Run `task` over every input on `jobs` threads, logging failures.
fn batch(
    paths: &[PathBuf],
    jobs: usize,
    task: impl Fn(&Path) -> anyhow::Result<()> + Sync,
) -> anyhow::Result<Tally> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let results: Vec<anyhow::Result<()>> = pool.install(|| paths.par_iter().map(|p| task(p)).collect());
    let mut tally = Tally { ok: 0, failed: 0 };
    for (path, result) in paths.iter().zip(results) {
        match result {
            Ok(()) => {
                log::info!("{}: done", path.display());
                tally.ok += 1;
            }
            Err(e) => {
                log::error!("{}: {e:#}", path.display());
                tally.failed += 1;
            }
        }
    }
    Ok(tally)
}

fn summary(command: &str, tally: Tally, out: &Path) {
    println!(
        "{command}: {} of {} inputs succeeded, outputs in {}",
        tally.ok,
        tally.ok + tally.failed,
        out.display()
    );
}

fn prepare(args: &BatchArgs) -> anyhow::Result<(RunConfig, Vec<PathBuf>)> {
    let cfg = resolve(args)?;
    let paths = expand_inputs(&cfg.inputs)?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok((cfg, paths))
}

pub fn fixtures(out: &Path) -> anyhow::Result<Tally> {
    let written = fx::write_all(out)?;
    println!("fixtures: wrote {} meshes to {}", written.len(), out.display());
    Ok(Tally {
        ok: written.len(),
        failed: 0,
    })
}

pub fn flatten(args: &BatchArgs) -> anyhow::Result<Tally> {
    let (cfg, paths) = prepare(args)?;
    if cfg.projection == Projection::Orthographic {
        cfg.require_alignment_choice()?;
    }
    let reference = load_reference(&cfg)?;
    let options = PipelineOptions {
        projection: cfg.projection,
        flow: FlowOptions::new(cfg.mode).epsilon(cfg.epsilon),
        width: cfg.width,
        height: cfg.height,
        icp_iters: cfg.icp_iters,
        icp_tol: cfg.icp_tol,
    };
    let tally = batch(&paths, cfg.jobs, |path| {
        let mesh = load_input(path, cfg.kind, cfg.spacing)?;
        let name = stem(path);
        let flow_path = cfg.out.join(format!("{name}.flow.json"));
        let out = match pipeline::run(&mesh, reference.as_ref(), &options) {
            Ok(out) => out,
            Err(Error::MaxItersExceeded(partial)) => {
                write_json(&flow_path, &partial.report)?;
                bail!(
                    "ricci flow did not converge in {} iterations (residual {:e})",
                    partial.report.iterations,
                    partial.report.final_residual()
                );
            }
            Err(e) => return Err(e.into()),
        };
        write_mci(&out.image, cfg.out.join(format!("{name}.mci")))?;
        if let Some(report) = &out.flow {
            write_json(&flow_path, report)?;
        }
        write_json(&cfg.out.join(format!("{name}.stats.json")), &out.stats)?;
        Ok(())
    })?;
    summary("flatten", tally, &cfg.out);
    Ok(tally)
}

#[derive(Serialize)]
struct Comparison {
    input: String,
    aligned: bool,
    conformal: Distortion,
    orthographic: Distortion,
    /// Mean conformal distortion over mean orthographic distortion.
    ratio: f64,
}

pub fn compare(args: &BatchArgs) -> anyhow::Result<Tally> {
    let (cfg, paths) = prepare(args)?;
    cfg.require_alignment_choice()?;
    let reference = load_reference(&cfg)?;
    let flow_options = FlowOptions::new(cfg.mode).epsilon(cfg.epsilon);
    let tally = batch(&paths, cfg.jobs, |path| {
        let mut mesh = load_input(path, cfg.kind, cfg.spacing)?;
        if let Some(r) = &reference {
            let fit = icp_align(&mesh, r, cfg.icp_iters, cfg.icp_tol)?;
            mesh = ricciface::align::apply_transform(&mesh, &fit.transform);
        }
        let metric = ricci::init_circle_packing(&mesh)?;
        let (flat, _) = ricci::ricci_flow(&mesh, &metric, &flow_options)?;
        let conformal = geom::qc_distortion(&mesh, &embed::layout(&mesh, &flat, cfg.epsilon)?)?;
        let orthographic = geom::qc_distortion(&mesh, &embed::orthographic(&mesh))?;
        let report = Comparison {
            input: path.display().to_string(),
            aligned: reference.is_some(),
            ratio: conformal.mean / orthographic.mean,
            conformal,
            orthographic,
        };
        write_json(&cfg.out.join(format!("{}.compare.json", stem(path))), &report)
    })?;
    summary("compare", tally, &cfg.out);
    Ok(tally)
}

pub fn icp(args: &BatchArgs) -> anyhow::Result<Tally> {
    let (cfg, paths) = prepare(args)?;
    let reference = load_reference(&cfg)?.ok_or_else(|| UsageError("icp needs --reference".into()))?;
    let tally = batch(&paths, cfg.jobs, |path| {
        let mesh = load_input(path, cfg.kind, cfg.spacing)?;
        let fit = icp_align(&mesh, &reference, cfg.icp_iters, cfg.icp_tol)?;
        let name = stem(path);
        let transform: serde_json::Value = serde_json::from_str(&fit.transform.to_json())?;
        let report = serde_json::json!({
            "input": path.display().to_string(),
            "transform": transform,
            "rms": fit.rms,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "rms_history": fit.rms_history,
        });
        write_json(&cfg.out.join(format!("{name}.icp.json")), &report)?;
        let aligned = ricciface::align::apply_transform(&mesh, &fit.transform);
        write_atomic(&cfg.out.join(format!("{name}.aligned.obj")), write_obj(&aligned).as_bytes())?;
        Ok(())
    })?;
    summary("icp", tally, &cfg.out);
    Ok(tally)
}

#[derive(Serialize)]
struct MeshStats {
    input: String,
    vertices: usize,
    edges: usize,
    faces: usize,
    boundary_vertices: usize,
    euler_characteristic: i64,
    mean_edge_length: f64,
    /// Sum of angle deficits over all vertices.
    total_curvature: f64,
    boundary_curvature: f64,
    interior_curvature_range: Option<(f64, f64)>,
    weighted_curvature_range: Option<(f64, f64)>,
}

fn interior_range(mesh: &TriMesh, values: &[f64]) -> Option<(f64, f64)> {
    mesh.interior_vertices()
        .iter()
        .map(|&v| values[v])
        .fold(None, |acc, x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((f64::min(lo, x), f64::max(hi, x))),
        })
}

pub fn stats(args: &BatchArgs) -> anyhow::Result<Tally> {
    let (cfg, paths) = prepare(args)?;
    let tally = batch(&paths, cfg.jobs, |path| {
        let mesh = load_input(path, cfg.kind, cfg.spacing)?;
        let k = geom::angle_deficit_curvature(&mesh)?.values;
        let w = geom::weighted_curvature(&mesh)?.values;
        let report = MeshStats {
            input: path.display().to_string(),
            vertices: mesh.num_vertices(),
            edges: mesh.num_edges(),
            faces: mesh.num_faces(),
            boundary_vertices: mesh.boundary_loop().len(),
            euler_characteristic: mesh.euler_characteristic(),
            mean_edge_length: mesh.mean_edge_length(),
            total_curvature: k.iter().sum(),
            boundary_curvature: mesh.boundary_loop().iter().map(|&v| k[v]).sum(),
            interior_curvature_range: interior_range(&mesh, &k),
            weighted_curvature_range: interior_range(&mesh, &w),
        };
        write_json(&cfg.out.join(format!("{}.geom.json", stem(path))), &report)
    })?;
    summary("stats", tally, &cfg.out);
    Ok(tally)
}

fn parse_channel(s: &str) -> Result<usize, UsageError> {
    if let Ok(i) = s.parse::<usize>() {
        if i < NUM_CHANNELS {
            return Ok(i);
        }
        return Err(UsageError(format!("channel index {i} out of range 0..{NUM_CHANNELS}")));
    }
    CHANNEL_NAMES
        .iter()
        .position(|n| n.eq_ignore_ascii_case(s))
        .ok_or_else(|| UsageError(format!("unknown channel '{s}'")))
}

pub fn export_pgm(inputs: &[String], channel: Option<&str>, out: &Path) -> anyhow::Result<Tally> {
    let channels: Vec<usize> = match channel {
        Some(c) => vec![parse_channel(c)?],
        None => (0..NUM_CHANNELS).collect(),
    };
    let paths = expand_inputs(inputs)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let tally = batch(&paths, 1, |path| {
        let image = read_mci(path)?;
        let name = stem(path);
        for &c in &channels {
            export_channel_pgm(&image, c, out.join(format!("{name}.{}.pgm", CHANNEL_NAMES[c])))?;
        }
        Ok(())
    })?;
    summary("export-pgm", tally, out);
    Ok(tally)
}
