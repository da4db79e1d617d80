//! Atomic output files and the checksummed run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::geometry::MappedGrid;
use crate::solver::{RunSummary, Snapshot, SnapshotSink};

use super::checkpoint::{encode, Checkpoint, VERSION_HISTORY};
use super::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ENERGY_FILE: &str = "energy.csv";
pub const CHECKPOINT_FILE: &str = "final.tcf";

/// Write through a sibling temp file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Wall-trace CSV text per snapshot, in emission order.
#[derive(Debug, Clone, Default)]
pub struct TraceSink {
    x1: Vec<f64>,
    pub traces: Vec<String>,
}

impl TraceSink {
    pub fn new(grid: &MappedGrid) -> Self {
        Self {
            x1: (0..grid.nq).map(|i| grid.x1(i)).collect(),
            traces: Vec::new(),
        }
    }
}

impl SnapshotSink for TraceSink {
    fn snapshot(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        let mut s = String::from("x1,slip,stress,comp\n");
        for (i, x) in self.x1.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                x, snap.slip.values[i], snap.stress.values[i], snap.comp[i]
            );
        }
        self.traces.push(s);
        Ok(())
    }
}

pub fn trace_name(n: usize) -> String {
    format!("traces/trace_{n:06}.csv")
}

pub fn energy_csv(records: &[EnergyRecord]) -> String {
    let mut s = String::from(EnergyRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Start and end of a run, seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub started_unix: f64,
    pub finished_unix: f64,
}

impl RunTiming {
    pub fn now() -> f64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config_hash: String,
    /// Canonical config with every effective parameter.
    pub config: String,
    pub timing: RunTiming,
    pub wall_seconds: f64,
    pub steps: usize,
    /// `None` for a run without steps.
    pub max_energy_residual: Option<f64>,
    pub max_picard_iterations: usize,
    pub picard_nonmonotone_steps: usize,
    pub max_divergence: f64,
    pub files: Vec<FileEntry>,
}

/// Write the energy series, wall traces, optional checkpoint and the manifest.
///
/// On failure every file written by this call is removed again.
pub fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    summary: &RunSummary,
    traces: &TraceSink,
    checkpoint: Option<&Checkpoint>,
    timing: RunTiming,
) -> Result<RunManifest> {
    let mut payload: Vec<(String, Vec<u8>)> = vec![(ENERGY_FILE.into(), energy_csv(&summary.records).into_bytes())];
    for (n, t) in traces.traces.iter().enumerate() {
        payload.push((trace_name(n), t.clone().into_bytes()));
    }
    if let Some(cp) = checkpoint {
        payload.push((CHECKPOINT_FILE.into(), encode(cp, VERSION_HISTORY)?));
    }
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        let mut files = Vec::with_capacity(payload.len());
        for (name, bytes) in &payload {
            let path = dir.join(name);
            write_atomic(&path, bytes)?;
            written.push(path);
            files.push(FileEntry {
                path: name.clone(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(bytes),
            });
        }
        let config = cfg.to_text();
        let manifest = RunManifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(config.as_bytes()),
            config,
            timing,
            wall_seconds: summary.wall_seconds,
            steps: summary.steps,
            max_energy_residual: summary.max_residual.is_finite().then_some(summary.max_residual),
            max_picard_iterations: summary.max_picard_iterations,
            picard_nonmonotone_steps: summary.picard_nonmonotone_steps,
            max_divergence: summary.max_divergence,
            files,
        };
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Manifest(e.to_string()))?;
        let path = dir.join(MANIFEST_FILE);
        write_atomic(&path, &json)?;
        written.push(path);
        Ok(manifest)
    })();
    if result.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
    }
    result
}

fn listed_files(dir: &Path, rel: &Path, out: &mut Vec<String>) -> Result<()> {
    let here = dir.join(rel);
    let entries = fs::read_dir(&here).map_err(|e| Error::io(&here, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&here, e))?;
        let name = rel.join(entry.file_name());
        let ty = entry.file_type().map_err(|e| Error::io(entry.path(), e))?;
        if ty.is_dir() {
            listed_files(dir, &name, out)?;
        } else {
            out.push(name.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

/// Re-hash every listed file and reject missing, altered or unlisted files.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: RunManifest =
        serde_json::from_slice(&text).map_err(|e| Error::Manifest(format!("unreadable manifest: {e}")))?;
    if sha256_hex(manifest.config.as_bytes()) != manifest.config_hash {
        return Err(Error::Manifest("config hash does not match the recorded config".into()));
    }
    for f in &manifest.files {
        let p = dir.join(&f.path);
        let bytes = fs::read(&p).map_err(|_| Error::Manifest(format!("listed file `{}` is missing", f.path)))?;
        if bytes.len() as u64 != f.bytes {
            return Err(Error::Manifest(format!(
                "`{}` has {} bytes, manifest says {}",
                f.path,
                bytes.len(),
                f.bytes
            )));
        }
        if sha256_hex(&bytes) != f.sha256 {
            return Err(Error::Manifest(format!("checksum mismatch for `{}`", f.path)));
        }
    }
    let mut present = Vec::new();
    listed_files(dir, Path::new(""), &mut present)?;
    for name in present {
        if name != MANIFEST_FILE && !manifest.files.iter().any(|f| f.path == name) {
            return Err(Error::Manifest(format!("file `{name}` is not listed in the manifest")));
        }
    }
    Ok(manifest)
}
