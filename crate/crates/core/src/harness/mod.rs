//! Experiment orchestration: parameter ladders, replicate fan-out, persisted
//! outputs with digests, and reports read back from disk.

pub mod ops;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ops::{
    lookup, registry, Bound, CellOutput, CheckResult, Context, Kind, OpSpec, OutputFile, ParamSpec,
    ParamValue, Params,
};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::sim::replicate_seed;

/// Environment variable naming the default root for experiment outputs.
pub const OUTPUT_ROOT_ENV: &str = "ANGBBM_OUTPUT_ROOT";

pub const MANIFEST: &str = "manifest.json";
const CELL_RECORD: &str = "cell.json";

pub fn artifact_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// `$ANGBBM_OUTPUT_ROOT`, or `angbbm-runs` under the working directory.
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("angbbm-runs"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn one() -> usize {
    1
}

/// One experiment file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub operation: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub params: BTreeMap<String, toml::Value>,
    /// Lists of values; the run covers their Cartesian product.
    #[serde(default)]
    pub ladder: BTreeMap<String, Vec<toml::Value>>,
}

/// One point of the ladder × replicate grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub replicate: usize,
    pub seed: u64,
    pub params: Params,
    /// Digest of everything that determines the outputs.
    pub key: String,
    pub dir: String,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Location-independent canonical form (sorted keys, no output directory).
    pub fn canonical(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.name,
            "operation": self.operation,
            "seed": self.seed,
            "replicates": self.replicates,
            "params": self.params,
            "ladder": self.ladder,
        })
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().to_string().as_bytes())
    }

    pub fn op(&self) -> Result<&'static OpSpec> {
        lookup(&self.operation)
    }

    /// Check every parameter and expand the grid. Fails before anything runs.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let op = self.op()?;
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config(format!(
                "experiment name {:?} must be a plain non-empty name",
                self.name
            )));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates must be at least 1"));
        }
        let mut base = BTreeMap::new();
        for (k, v) in &self.params {
            base.insert(k.clone(), op.param(k)?.from_toml(v)?);
        }
        let mut axes: Vec<(String, Vec<ParamValue>)> = Vec::new();
        for (k, values) in &self.ladder {
            let spec = op.param(k)?;
            if !matches!(spec.kind, Kind::Float | Kind::Int) {
                return Err(Error::config(format!(
                    "ladder parameter {k} is not numeric"
                )));
            }
            if values.is_empty() {
                return Err(Error::config(format!("ladder for {k} is empty")));
            }
            if base.contains_key(k) {
                return Err(Error::config(format!(
                    "{k} is given both as a parameter and as a ladder"
                )));
            }
            let parsed = values
                .iter()
                .map(|v| spec.from_toml(v))
                .collect::<Result<Vec<_>>>()?;
            axes.push((k.clone(), parsed));
        }
        let points: usize = axes.iter().map(|(_, v)| v.len()).product();
        let mut cells = Vec::with_capacity(points * self.replicates);
        for point in 0..points {
            let mut given = base.clone();
            let mut rest = point;
            for (k, values) in axes.iter().rev() {
                given.insert(k.clone(), values[rest % values.len()].clone());
                rest /= values.len();
            }
            let params = op.resolve(&given)?;
            for replicate in 0..self.replicates {
                let seed = if self.replicates == 1 {
                    self.seed
                } else {
                    replicate_seed(self.seed, replicate)
                };
                let index = cells.len();
                let identity = serde_json::json!({
                    "operation": op.name,
                    "params": params,
                    "seed": if op.stochastic { Some(seed) } else { None },
                    "version": artifact_version(),
                });
                let key = sha256_hex(identity.to_string().as_bytes());
                let dir = format!("cell-{index:04}-{}", &key[..12]);
                cells.push(Cell {
                    index,
                    replicate,
                    seed,
                    params: params.clone(),
                    key,
                    dir,
                });
            }
        }
        Ok(cells)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| default_output_root().join(&self.name))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the run directory, with '/' separators.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ran,
    Skipped,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    pub dir: String,
    pub key: String,
    pub replicate: usize,
    pub seed: u64,
    pub params: Params,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Exit status class of the failure (see [`Error::exit_code`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<i32>,
    pub files: Vec<FileDigest>,
    pub summary: serde_json::Value,
    pub checks: Vec<CheckResult>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

/// The manifest written last into a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub operation: String,
    pub anchor: String,
    pub spec_hash: String,
    pub spec: serde_json::Value,
    pub artifact_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub status: RunStatus,
    pub cells: Vec<CellRecord>,
}

impl RunRecord {
    pub fn ran(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::Ran)
            .count()
    }

    pub fn skipped(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::Skipped)
            .count()
    }

    pub fn checks_passed(&self) -> bool {
        self.cells.iter().all(|c| c.checks.iter().all(|k| k.passed))
    }

    /// Highest exit status among failed cells, if any.
    pub fn failure_code(&self) -> Option<i32> {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::Failed)
            .map(|c| c.error_code.unwrap_or(2))
            .max()
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Rerun cells whose outputs already exist.
    pub force: bool,
    pub exec: Execution,
}

/// Contents of a cell directory's own record (no run-dependent status).
#[derive(Serialize, Deserialize)]
struct StoredCell {
    key: String,
    seed: u64,
    params: Params,
    files: Vec<FileDigest>,
    summary: serde_json::Value,
    checks: Vec<CheckResult>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write a cell's files into `root/dir` through a temporary directory that is
/// renamed into place, and return the digests (including the cell record).
pub fn persist_cell(
    root: &Path,
    dir: &str,
    key: &str,
    seed: u64,
    params: &Params,
    output: &CellOutput,
) -> Result<Vec<FileDigest>> {
    let tmp = root.join(format!(".{dir}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    let mut files = Vec::new();
    for f in &output.files {
        if f.name.contains(['/', '\\']) || f.name == CELL_RECORD {
            return Err(Error::config(format!(
                "invalid output file name {:?}",
                f.name
            )));
        }
        fs::write(tmp.join(&f.name), &f.bytes)?;
        files.push(FileDigest {
            path: format!("{dir}/{}", f.name),
            sha256: sha256_hex(&f.bytes),
            bytes: f.bytes.len() as u64,
        });
    }
    let stored = StoredCell {
        key: key.to_string(),
        seed,
        params: params.clone(),
        files: files.clone(),
        summary: output.summary.clone(),
        checks: output.checks.clone(),
    };
    let mut record = serde_json::to_vec_pretty(&stored)?;
    record.push(b'\n');
    fs::write(tmp.join(CELL_RECORD), &record)?;
    files.push(FileDigest {
        path: format!("{dir}/{CELL_RECORD}"),
        sha256: sha256_hex(&record),
        bytes: record.len() as u64,
    });
    let target = root.join(dir);
    if target.exists() {
        fs::remove_dir_all(&target)?;
    }
    fs::rename(&tmp, &target)?;
    Ok(files)
}

/// Reuse a finished cell if its record matches the key and every digest verifies.
fn completed_cell(root: &Path, cell: &Cell) -> Option<StoredCell> {
    let record_path = root.join(&cell.dir).join(CELL_RECORD);
    let bytes = fs::read(&record_path).ok()?;
    let mut stored: StoredCell = serde_json::from_slice(&bytes).ok()?;
    if stored.key != cell.key {
        return None;
    }
    for f in &stored.files {
        if sha256_hex(&fs::read(root.join(&f.path)).ok()?) != f.sha256 {
            return None;
        }
    }
    stored.files.push(FileDigest {
        path: format!("{}/{CELL_RECORD}", cell.dir),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    });
    Some(stored)
}

pub fn write_manifest(root: &Path, record: &RunRecord) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(record)?;
    bytes.push(b'\n');
    write_atomic(&root.join(MANIFEST), &bytes)
}

/// Validate the whole spec, run every cell not already complete, write the manifest.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<RunRecord> {
    run_experiment_in(spec, &spec.output_dir(), opts)
}

pub fn run_experiment_in(
    spec: &ExperimentSpec,
    root: &Path,
    opts: &RunOptions,
) -> Result<RunRecord> {
    let cells = spec.cells()?;
    let op = spec.op()?;
    fs::create_dir_all(root)?;
    let probe = root.join(format!(".write-probe-{}", std::process::id()));
    fs::write(&probe, b"")
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| {
            Error::config(format!(
                "output directory {} is not writable: {e}",
                root.display()
            ))
        })?;
    let started = unix_now();
    let records: Vec<CellRecord> = map_indexed(cells.len(), opts.exec, |i| {
        let cell = &cells[i];
        let base = CellRecord {
            index: cell.index,
            dir: cell.dir.clone(),
            key: cell.key.clone(),
            replicate: cell.replicate,
            seed: cell.seed,
            params: cell.params.clone(),
            status: CellStatus::Ran,
            error: None,
            error_code: None,
            files: Vec::new(),
            summary: serde_json::Value::Null,
            checks: Vec::new(),
        };
        if !opts.force {
            if let Some(stored) = completed_cell(root, cell) {
                return CellRecord {
                    status: CellStatus::Skipped,
                    files: stored.files,
                    summary: stored.summary,
                    checks: stored.checks,
                    ..base
                };
            }
        }
        let ctx = Context {
            seed: cell.seed,
            exec: opts.exec,
        };
        let result = (op.run)(&cell.params, &ctx).and_then(|out| {
            persist_cell(root, &cell.dir, &cell.key, cell.seed, &cell.params, &out)
                .map(|f| (out, f))
        });
        match result {
            Ok((out, files)) => CellRecord {
                files,
                summary: out.summary,
                checks: out.checks,
                ..base
            },
            Err(e) => CellRecord {
                status: CellStatus::Failed,
                error: Some(e.to_string()),
                error_code: Some(e.exit_code()),
                ..base
            },
        }
    });
    let status = if records.iter().any(|c| c.status == CellStatus::Failed) {
        RunStatus::Failed
    } else {
        RunStatus::Complete
    };
    let record = RunRecord {
        name: spec.name.clone(),
        operation: op.name.to_string(),
        anchor: op.anchor.to_string(),
        spec_hash: spec.hash(),
        spec: spec.canonical(),
        artifact_version: artifact_version().to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        status,
        cells: records,
    };
    write_manifest(root, &record)?;
    Ok(record)
}

/// Outcome of reading run directories back.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub text: String,
    pub experiments: usize,
    /// Missing, tampered or unreadable outputs.
    pub integrity_issues: usize,
    pub failed_cells: usize,
    pub failed_checks: usize,
}

impl Report {
    /// 1 for an empty or damaged run, 2 for failed cells, 3 for failed checks, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.experiments == 0 || self.integrity_issues > 0 {
            1
        } else if self.failed_cells > 0 {
            2
        } else if self.failed_checks > 0 {
            3
        } else {
            0
        }
    }
}

fn manifests_under(dir: &Path) -> Vec<PathBuf> {
    let direct = dir.join(MANIFEST);
    if direct.is_file() {
        return vec![direct];
    }
    let mut found: Vec<PathBuf> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path().join(MANIFEST))
        .filter(|p| p.is_file())
        .collect();
    found.sort();
    found
}

fn short(text: &str, width: usize) -> String {
    if text.chars().count() <= width {
        text.to_string()
    } else {
        let mut s: String = text.chars().take(width.saturating_sub(1)).collect();
        s.push('…');
        s
    }
}

/// One table per manifest found in `dir` (or its immediate subdirectories),
/// with digests recomputed from the files on disk.
pub fn report(dir: &Path) -> Report {
    let mut rep = Report::default();
    let manifests = manifests_under(dir);
    if manifests.is_empty() {
        let _ = writeln!(
            rep.text,
            "no experiment manifests found in {}",
            dir.display()
        );
        return rep;
    }
    for path in manifests {
        let root = path.parent().unwrap_or(dir);
        let record: RunRecord = match fs::read(&path)
            .map_err(Error::from)
            .and_then(|b| Ok(serde_json::from_slice(&b)?))
        {
            Ok(r) => r,
            Err(e) => {
                rep.integrity_issues += 1;
                let _ = writeln!(
                    rep.text,
                    "== {} ==\n  CORRUPT MANIFEST: {e}\n",
                    path.display()
                );
                continue;
            }
        };
        rep.experiments += 1;
        let _ = writeln!(rep.text, "== {} ({}) ==", record.name, record.operation);
        let _ = writeln!(rep.text, "anchor:  {}", record.anchor);
        let _ = writeln!(
            rep.text,
            "spec:    {}  version {}  status {:?}  cells {} (ran {}, skipped {})",
            &record.spec_hash[..16.min(record.spec_hash.len())],
            record.artifact_version,
            record.status,
            record.cells.len(),
            record.ran(),
            record.skipped()
        );
        let _ = writeln!(
            rep.text,
            "{:<5} {:<34} {:<40} {:>13} {:<16} result",
            "cell", "parameters", "check", "value", "tolerance"
        );
        for cell in &record.cells {
            let mut flags = Vec::new();
            for f in &cell.files {
                match fs::read(root.join(&f.path)) {
                    Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
                    Ok(_) => flags.push(format!("DIGEST MISMATCH {}", f.path)),
                    Err(_) => flags.push(format!("MISSING {}", f.path)),
                }
            }
            rep.integrity_issues += flags.len();
            let params = ladder_label(&record, cell);
            if cell.status == CellStatus::Failed {
                rep.failed_cells += 1;
                let msg = cell.error.clone().unwrap_or_default();
                let _ = writeln!(
                    rep.text,
                    "{:<5} {:<34} {:<40} {:>13} {:<16} FAILED",
                    cell.index,
                    short(&params, 34),
                    short(&msg, 40),
                    "-",
                    "-"
                );
            } else if cell.checks.is_empty() {
                let values = short(&cell.summary.to_string(), 40);
                let _ = writeln!(
                    rep.text,
                    "{:<5} {:<34} {:<40} {:>13} {:<16} -",
                    cell.index,
                    short(&params, 34),
                    values,
                    "-",
                    "-"
                );
            }
            for c in &cell.checks {
                if !c.passed {
                    rep.failed_checks += 1;
                }
                let _ = writeln!(
                    rep.text,
                    "{:<5} {:<34} {:<40} {:>13.5e} {:<16} {}",
                    cell.index,
                    short(&params, 34),
                    short(&c.name, 40),
                    c.value,
                    short(&c.tolerance, 16),
                    if c.passed { "pass" } else { "FAIL" }
                );
            }
            for f in flags {
                let _ = writeln!(rep.text, "{:<5} {f}", cell.index);
            }
        }
        let _ = writeln!(rep.text);
    }
    rep
}

/// Parameters that vary along the ladder, or the replicate index.
fn ladder_label(record: &RunRecord, cell: &CellRecord) -> String {
    let ladder: Vec<String> = record
        .spec
        .get("ladder")
        .and_then(|l| l.as_object())
        .map(|l| l.keys().cloned().collect())
        .unwrap_or_default();
    let mut parts: Vec<String> = ladder
        .iter()
        .filter_map(|k| cell.params.0.get(k).map(|v| format!("{k}={v}")))
        .collect();
    if record.cells.iter().any(|c| c.replicate > 0) {
        parts.push(format!("rep={}", cell.replicate));
    }
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_resolves() {
        for op in registry() {
            op.resolve(&BTreeMap::new())
                .unwrap_or_else(|e| panic!("{}: {e}", op.name));
            op.smoke_params()
                .unwrap_or_else(|e| panic!("{}: {e}", op.name));
        }
    }

    #[test]
    fn ladder_expands_in_order() {
        let spec = ExperimentSpec::from_toml_str(
            "name = \"l\"\noperation = \"spectrum\"\nseed = 1\nreplicates = 2\n[ladder]\nalpha = [0.8, 1.5]\nlevels = [2, 3]\n",
        )
        .unwrap();
        let cells = spec.cells().unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0].params.f("alpha"), 0.8);
        assert_eq!(cells[2].params.n("levels"), 3);
        assert_eq!(cells[4].params.f("alpha"), 1.5);
        // A deterministic operation ignores the seed, so replicates share a key.
        assert_eq!(cells[0].key, cells[1].key);
    }

    #[test]
    fn bad_values_are_rejected() {
        let bad = "name = \"l\"\noperation = \"spectrum\"\nseed = 1\n[ladder]\nalpha = [0.8, -1]\n";
        assert!(ExperimentSpec::from_toml_str(bad).unwrap().cells().is_err());
        let unknown = "name = \"l\"\noperation = \"spectrum\"\nseed = 1\n[params]\ngamma = 1\n";
        assert!(ExperimentSpec::from_toml_str(unknown)
            .unwrap()
            .cells()
            .is_err());
        let mismatch =
            "name = \"l\"\noperation = \"spectrum\"\nseed = 1\n[params]\nalpha = \"one\"\n";
        assert!(ExperimentSpec::from_toml_str(mismatch)
            .unwrap()
            .cells()
            .is_err());
        assert!(ExperimentSpec::from_toml_str("name = \"l\"\noperation = \"spectrum\"\n").is_err());
    }

    #[test]
    fn spec_hash_ignores_key_order_and_location() {
        let a = ExperimentSpec::from_toml_str(
            "name = \"x\"\noperation = \"rate\"\nseed = 3\n[params]\nalpha = 1.5\ntheta = 0.2\n",
        )
        .unwrap();
        let mut b = ExperimentSpec::from_toml_str(
            "seed = 3\noperation = \"rate\"\nname = \"x\"\n[params]\ntheta = 0.2\nalpha = 1.5\n",
        )
        .unwrap();
        b.output_dir = Some("/elsewhere".into());
        assert_eq!(a.hash(), b.hash());
    }
}
