//! Run configuration: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use ricciface::embed::Projection;
use ricciface::pipeline::{DEFAULT_ICP_ITERS, DEFAULT_ICP_TOL};
use ricciface::ricci::{FlowMode, DEFAULT_EPSILON};
use serde::Deserialize;

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Mesh,
    Depth,
}

/// Keys accepted in a `--config` file. Names match the long flags, with
/// dashes written as underscores.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<Inputs>,
    pub kind: Option<InputKind>,
    pub out: Option<PathBuf>,
    pub size: Option<String>,
    pub epsilon: Option<f64>,
    pub mode: Option<FlowMode>,
    pub projection: Option<Projection>,
    pub reference: Option<PathBuf>,
    pub no_align: Option<bool>,
    pub jobs: Option<usize>,
    pub spacing: Option<f64>,
    pub icp_iters: Option<usize>,
    pub icp_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Inputs {
    One(String),
    Many(Vec<String>),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("bad config {}: {e}", path.display())))
    }

    pub fn inputs(&self) -> Vec<String> {
        match &self.input {
            None => Vec::new(),
            Some(Inputs::One(s)) => vec![s.clone()],
            Some(Inputs::Many(v)) => v.clone(),
        }
    }
}

/// Fully resolved settings shared by the batch subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<String>,
    pub kind: InputKind,
    pub out: PathBuf,
    pub width: usize,
    pub height: usize,
    pub epsilon: f64,
    pub mode: FlowMode,
    pub projection: Projection,
    pub reference: Option<PathBuf>,
    pub no_align: bool,
    pub jobs: usize,
    pub spacing: f64,
    pub icp_iters: usize,
    pub icp_tol: f64,
}

/// `WxH` with both sides at least 2.
pub fn parse_size(s: &str) -> Result<(usize, usize), UsageError> {
    let bad = || UsageError(format!("bad size '{s}', expected WxH with W, H >= 2"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w < 2 || h < 2 {
        return Err(bad());
    }
    Ok((w, h))
}

impl RunConfig {
    /// Merge flags over the file over defaults, then validate.
    pub fn resolve(flags: &crate::BatchArgs, file: FileConfig) -> Result<Self, UsageError> {
        let inputs = if flags.input.is_empty() {
            file.inputs()
        } else {
            flags.input.clone()
        };
        let size = flags.size.clone().or(file.size);
        let (width, height) = match size {
            Some(s) => parse_size(&s)?,
            None => (ricciface::channels::DEFAULT_SIZE, ricciface::channels::DEFAULT_SIZE),
        };
        let config = RunConfig {
            inputs,
            kind: flags.kind.or(file.kind).unwrap_or(InputKind::Mesh),
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            width,
            height,
            epsilon: flags.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON),
            mode: flags.mode.or(file.mode).unwrap_or(FlowMode::Newton),
            projection: flags.projection.or(file.projection).unwrap_or(Projection::Conformal),
            reference: flags.reference.clone().or(file.reference),
            no_align: flags.no_align || file.no_align.unwrap_or(false),
            jobs: flags.jobs.or(file.jobs).unwrap_or(1),
            spacing: flags.spacing.or(file.spacing).unwrap_or(1.0),
            icp_iters: flags.icp_iters.or(file.icp_iters).unwrap_or(DEFAULT_ICP_ITERS),
            icp_tol: flags.icp_tol.or(file.icp_tol).unwrap_or(DEFAULT_ICP_TOL),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), UsageError> {
        if self.inputs.is_empty() {
            return Err(UsageError("no --input given".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(UsageError(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(UsageError(format!("spacing must be positive, got {}", self.spacing)));
        }
        if self.jobs == 0 {
            return Err(UsageError("jobs must be at least 1".into()));
        }
        if self.reference.is_some() && self.no_align {
            return Err(UsageError("--reference and --no-align are mutually exclusive".into()));
        }
        Ok(())
    }

    /// The orthographic baseline needs an alignment decision.
    pub fn require_alignment_choice(&self) -> Result<(), UsageError> {
        if self.reference.is_none() && !self.no_align {
            return Err(UsageError(
                "orthographic projection needs --reference or an explicit --no-align".into(),
            ));
        }
        Ok(())
    }
}

/// Expand input patterns into existing files; sorted, without duplicates,
/// and with distinct file stems since outputs are named after them.
pub fn expand_inputs(patterns: &[String]) -> Result<Vec<PathBuf>, UsageError> {
    let mut paths = Vec::new();
    for pattern in patterns {
        let matches = glob::glob(pattern)
            .map_err(|e| UsageError(format!("bad input pattern '{pattern}': {e}")))?;
        for entry in matches {
            match entry {
                Ok(p) if p.is_file() => paths.push(p),
                Ok(_) => {}
                Err(e) => log::warn!("skipping unreadable match: {e}"),
            }
        }
    }
    paths.sort();
    paths.dedup();
    if paths.is_empty() {
        return Err(UsageError("no inputs matched".into()));
    }
    let mut stems: Vec<_> = paths.iter().map(|p| p.file_stem().map(|s| s.to_os_string())).collect();
    stems.sort();
    if let Some(w) = stems.windows(2).find(|w| w[0] == w[1]) {
        return Err(UsageError(format!(
            "two inputs share the output name {:?}",
            w[0].as_deref().unwrap_or_default()
        )));
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("182x182").unwrap(), (182, 182));
        assert_eq!(parse_size("64X32").unwrap(), (64, 32));
        assert!(parse_size("1x5").is_err());
        assert!(parse_size("182").is_err());
        assert!(parse_size("ax3").is_err());
    }

    #[test]
    fn file_config_parses() {
        let cfg: FileConfig = toml::from_str(
            "input = [\"a/*.obj\", \"b.ply\"]\nmode = \"gradient\"\nprojection = \"orthographic\"\nno_align = true\nsize = \"64x48\"\n",
        )
        .unwrap();
        assert_eq!(cfg.inputs(), vec!["a/*.obj", "b.ply"]);
        assert_eq!(cfg.mode, Some(FlowMode::Gradient));
        assert_eq!(cfg.projection, Some(Projection::Orthographic));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}
