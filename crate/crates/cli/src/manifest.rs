use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vehval_core::plant::read_trajectory;

use crate::config::ExperimentConfig;
use crate::{io_error, CliError};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRAJECTORY_DIR: &str = "trajectories";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub name: String,
    pub source: String,
    pub maneuver_seed: Option<u64>,
    pub noise_seed: Option<u64>,
    pub target_ay_max: Option<f64>,
    pub realized_ay_max: f64,
    pub target_reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub trajectories: Vec<TrajectoryEntry>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(out: &Path) -> Result<Self, CliError> {
        let path = out.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        toml::from_str(&text).map_err(|e| io_error(&path, e))
    }

    /// Listed files that are missing or whose content changed.
    pub fn verify(&self, out: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match fs::read(out.join(&f.path)) {
                Ok(bytes) => hex::encode(Sha256::digest(&bytes)) != f.sha256,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| io_error(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p.strip_prefix(root).ok() != Some(Path::new(MANIFEST_FILE)) {
            out.push(p);
        }
    }
    Ok(())
}

/// Sorted bundle directories under `out/trajectories`.
pub fn bundle_dirs(out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let dir = out.join(TRAJECTORY_DIR);
    if !dir.is_dir() {
        return Err(CliError::Data(format!(
            "no trajectory bundles: {} does not exist",
            dir.display()
        )));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| io_error(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Rewrites the manifest from the current contents of `out`.
pub fn write_manifest(out: &Path, config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let mut trajectories = Vec::new();
    if out.join(TRAJECTORY_DIR).is_dir() {
        for dir in bundle_dirs(out)? {
            let m = read_trajectory(&dir)?.meta;
            trajectories.push(TrajectoryEntry {
                name: m.name,
                source: m.source,
                maneuver_seed: m.maneuver_seed,
                noise_seed: m.noise_seed,
                target_ay_max: m.target_ay_max,
                realized_ay_max: m.realized_ay_max,
                target_reached: m.target_reached,
            });
        }
    }
    let mut paths = Vec::new();
    collect_files(out, out, &mut paths)?;
    let files = paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| io_error(p, e))?;
            let rel = p.strip_prefix(out).expect("inside out");
            Ok(FileEntry {
                path: rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.hash(),
        seed: config.seed,
        trajectories,
        files,
    };
    let path = out.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| io_error(&path, e))?;
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(manifest)
}

/// Drops a manifest left by an earlier run so a failing command never
/// leaves one that describes stale outputs.
pub fn remove_manifest(out: &Path) -> Result<(), CliError> {
    let path = out.join(MANIFEST_FILE);
    match fs::remove_file(&path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(io_error(&path, e)),
    }
}
