//! Run directories and their manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use co2risk_core::geomodel::{write_grid_file, Ensemble};
use co2risk_core::pipeline::{RiskReport, ScenarioConfig, StageReport, SuiteSummary};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";
pub const CONFIG: &str = "config.json";
pub const RUN_LOG: &str = "run.log";
pub const OBSERVATIONS: &str = "observations.csv";
pub const COMPARISON: &str = "comparison.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    /// Resolved configuration; absent for suites, whose scenarios each
    /// carry their own manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ScenarioConfig>,
    /// Scenario name to config hash, for suites.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scenarios: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Unix time the run started [s].
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    /// Component timings [s].
    pub timings: BTreeMap<String, f64>,
    /// Every other file in the run directory.
    pub files: Vec<FileRecord>,
}

/// An output directory being filled by one command.
pub struct RunDir {
    pub root: PathBuf,
    started: Instant,
    started_unix: u64,
    pub timings: BTreeMap<String, f64>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(format!("creating {}", root.display()), e))?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Ok(Self { root: root.to_path_buf(), started: Instant::now(), started_unix, timings: BTreeMap::new() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Runs `f`, recording its duration under `name`.
    pub fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.timings.entry(name.to_string()).or_insert(0.0) += t.elapsed().as_secs_f64();
        out
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        write_json(&self.path(rel), value)
    }

    pub fn write_with(&self, rel: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
        write_with(&self.path(rel), f)
    }

    pub fn write_ensemble(&self, label: &str, ensemble: &Ensemble) -> Result<()> {
        write_ensemble(&self.root, label, ensemble)
    }

    /// Writes the manifest last; the run is complete once it exists.
    pub fn finish(self, command: &str, config: Option<&ScenarioConfig>, scenarios: BTreeMap<String, String>, config_hash: String) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash,
            config: config.cloned(),
            scenarios,
            seeds: config.map(|c| c.seed_streams()).unwrap_or_default(),
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            timings: self.timings,
            files: inventory(&self.root)?,
        };
        write_json(&self.root.join(MANIFEST), &manifest)?;
        Ok(manifest)
    }
}

/// Log-permeability of every member: `ensembles/<label>.grid`.
pub fn write_ensemble(dir: &Path, label: &str, ensemble: &Ensemble) -> Result<()> {
    let path = dir.join(format!("ensembles/{label}.grid"));
    ensure_parent(&path)?;
    let names: Vec<String> = ensemble.members.iter().map(|m| format!("member{}", m.id)).collect();
    let fields: Vec<(String, &[f64])> = names.iter().cloned().zip(ensemble.members.iter().map(|m| m.log_perm.as_slice())).collect();
    write_grid_file(&path, &ensemble.geometry, &fields).map_err(|e| CliError::io(format!("writing {}", path.display()), std::io::Error::other(e)))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).map_err(|e| CliError::io(format!("creating {}", p.display()), e))?;
    }
    Ok(())
}

pub fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    ensure_parent(path)?;
    let ctx = || format!("writing {}", path.display());
    let file = fs::File::create(path).map_err(|e| CliError::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| std::io::Write::flush(&mut w)).map_err(|e| CliError::io(ctx(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        std::io::Write::write_all(w, b"\n")
    })
}

/// Band CSVs of one stage: `bands/<label>.csv` and `bands/<label>_onset.csv`.
pub fn write_stage_csvs(dir: &Path, stage: &StageReport) -> Result<()> {
    write_with(&dir.join(format!("bands/{}.csv", stage.label)), |w| stage.write_bands_csv(w))?;
    write_with(&dir.join(format!("bands/{}_onset.csv", stage.label)), |w| stage.write_onset_csv(w))
}

pub fn write_report_csvs(dir: &Path, report: &RiskReport) -> Result<()> {
    report.stages.iter().try_for_each(|s| write_stage_csvs(dir, s))
}

pub fn write_suite_csvs(dir: &Path, suite: &SuiteSummary) -> Result<()> {
    write_with(&dir.join(COMPARISON), |w| suite.write_comparison_csv(w))?;
    for r in suite.reports() {
        write_report_csvs(&dir.join(safe_name(&r.scenario)), r)?;
    }
    Ok(())
}

/// File-system-safe form of a scenario name.
pub fn safe_name(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "scenario".into()
    } else {
        s
    }
}

/// Files under `root` except the manifest, sorted by path.
pub fn inventory(root: &Path) -> Result<Vec<FileRecord>> {
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<FileRecord>) -> Result<()> {
    let ctx = |p: &Path| format!("listing {}", p.display());
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(ctx(dir), e))? {
        let path = entry.map_err(|e| CliError::io(ctx(dir), e))?.path();
        if path.is_dir() {
            walk(root, &path, out)?;
            continue;
        }
        let rel: Vec<String> = path.strip_prefix(root).expect("walk stays under root").components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        let rel = rel.join("/");
        if rel == MANIFEST {
            continue;
        }
        let bytes = fs::read(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        out.push(FileRecord { path: rel, bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(&bytes)) });
    }
    Ok(())
}

/// Reads the manifest of a finished run.
pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let missing = |reason: String| CliError::MissingRunDir { path: dir.to_path_buf(), reason };
    if !dir.is_dir() {
        return Err(missing("no such directory".into()));
    }
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| missing(format!("{MANIFEST}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| missing(format!("{MANIFEST}: {e}")))
}

pub fn read_json<T: serde::de::DeserializeOwned>(dir: &Path, rel: &str) -> Result<T> {
    let missing = |reason: String| CliError::MissingRunDir { path: dir.to_path_buf(), reason };
    let text = fs::read_to_string(dir.join(rel)).map_err(|e| missing(format!("{rel}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| missing(format!("{rel}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn safe_names() {
        assert_eq!(safe_name("M2 + M4"), "M2___M4");
        assert_eq!(safe_name(".."), "scenario");
        assert_eq!(safe_name("rsu-3yr"), "rsu-3yr");
    }

    #[test]
    fn manifest_lists_every_file_but_itself() {
        let tmp = tempfile::tempdir().unwrap();
        let run = RunDir::create(tmp.path()).unwrap();
        run.write_json("a.json", &1).unwrap();
        run.write_with("bands/x.csv", |w| std::io::Write::write_all(w, b"t\n")).unwrap();
        let cfg = ScenarioConfig::example1().desk_scaled();
        let m = run.finish("assess", Some(&cfg), BTreeMap::new(), cfg.hash()).unwrap();
        let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["a.json", "bands/x.csv"]);
        assert_eq!(m.files[1].sha256, hex::encode(Sha256::digest(b"t\n")));
        let back = read_manifest(tmp.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.config.unwrap().hash(), m.config_hash);
    }

    #[test]
    fn missing_dir_and_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(read_manifest(&tmp.path().join("nope")), Err(CliError::MissingRunDir { .. })));
        assert!(matches!(read_manifest(tmp.path()), Err(CliError::MissingRunDir { .. })));
    }
}
