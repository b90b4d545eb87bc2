//! Run-directory persistence.
//!
//! Layout: `config.json` (verbatim copy), `meta.json`, `samples.csv`
//! (columns: sweep, then one raw spin column per site), `checkpoint.bin`
//! (flat little-endian f64 field) with `checkpoint.json` sidecar, and
//! optional `field_<sweep>.bin` snapshots. All writes go through a
//! write-temp-then-rename so partially written files never appear.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Samples;
use crate::sampler::{ChainState, SampleRecord, SpinField};

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("run directory io: {0}")]
    Io(#[from] std::io::Error),

    #[error("corrupt run data: {0}")]
    Corrupt(String),

    #[error("{0} already exists and is not empty (pass --force to overwrite)")]
    NotEmpty(PathBuf),

    #[error("metadata parse error: {0}")]
    Meta(#[from] serde_json::Error),
}

/// Sidecar for checkpoints and field snapshots.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub extents: Vec<i64>,
    pub sweep: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hash: Option<String>,
}

/// Run-level metadata (`meta.json`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub sweeps: u64,
    pub burnin: u64,
    pub thin: u64,
    pub order: String,
    pub model_hash: String,
    pub config_digest: String,
    pub n_sites: usize,
    pub extents: Vec<i64>,
    pub lambda: f64,
    /// Coupling below the uniqueness threshold? Sampling outside the region
    /// is allowed but flagged.
    pub unique: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunDirError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunDirError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Prepare an output directory; refuses to reuse a non-empty one unless
/// forced.
pub fn prepare_dir(path: &Path, force: bool) -> Result<(), RunDirError> {
    if path.exists() {
        let non_empty = fs::read_dir(path)?.next().is_some();
        if non_empty && !force {
            return Err(RunDirError::NotEmpty(path.to_path_buf()));
        }
    } else {
        fs::create_dir_all(path)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// samples.csv
// ---------------------------------------------------------------------------

/// Shortest round-trip float formatting keeps reruns byte-identical and
/// reparsing exact.
pub fn write_samples_csv(
    path: &Path,
    n_sites: usize,
    records: &[SampleRecord],
) -> Result<(), RunDirError> {
    let mut text = String::from("sweep");
    for i in 0..n_sites {
        text.push_str(&format!(",x_{i}"));
    }
    text.push('\n');
    for r in records {
        text.push_str(&r.sweep.to_string());
        for v in &r.field {
            text.push(',');
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_samples_csv(path: &Path) -> Result<(Samples, Vec<SampleRecord>), RunDirError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RunDirError::Corrupt("samples.csv is empty".into()))?;
    let n_sites = header.split(',').count().checked_sub(1).unwrap_or(0);
    if !header.starts_with("sweep") || n_sites == 0 {
        return Err(RunDirError::Corrupt(format!("bad samples.csv header {header:?}")));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let sweep: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RunDirError::Corrupt(format!("bad sweep on line {}", lineno + 2)))?;
        let field: Result<Vec<f64>, _> = parts.map(|p| p.parse::<f64>()).collect();
        let field = field
            .map_err(|e| RunDirError::Corrupt(format!("line {}: {e}", lineno + 2)))?;
        if field.len() != n_sites {
            return Err(RunDirError::Corrupt(format!(
                "line {}: {} columns, expected {}",
                lineno + 2,
                field.len() + 1,
                n_sites + 1
            )));
        }
        records.push(SampleRecord { sweep, field });
    }
    Ok((Samples::from_records(&records), records))
}

// ---------------------------------------------------------------------------
// Binary field snapshots and checkpoints
// ---------------------------------------------------------------------------

pub fn write_field_bin(path: &Path, field: &[f64]) -> Result<(), RunDirError> {
    let mut bytes = Vec::with_capacity(field.len() * 8);
    for v in field {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn read_field_bin(path: &Path) -> Result<Vec<f64>, RunDirError> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(RunDirError::Corrupt(format!(
            "{} has {} bytes, not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_checkpoint(dir: &Path, state: &ChainState, extents: &[i64]) -> Result<(), RunDirError> {
    write_field_bin(&dir.join("checkpoint.bin"), &state.field.0)?;
    write_json(
        &dir.join("checkpoint.json"),
        &SnapshotMeta {
            extents: extents.to_vec(),
            sweep: state.sweep,
            seed: state.seed,
            model_hash: Some(state.model_hash.clone()),
        },
    )
}

pub fn read_checkpoint(dir: &Path) -> Result<ChainState, RunDirError> {
    let field = read_field_bin(&dir.join("checkpoint.bin"))?;
    let meta: SnapshotMeta =
        serde_json::from_str(&fs::read_to_string(dir.join("checkpoint.json"))?)?;
    Ok(ChainState {
        field: SpinField(field),
        sweep: meta.sweep,
        seed: meta.seed,
        model_hash: meta
            .model_hash
            .ok_or_else(|| RunDirError::Corrupt("checkpoint.json lacks model_hash".into()))?,
    })
}

pub fn write_snapshot(
    dir: &Path,
    sweep: u64,
    field: &[f64],
    extents: &[i64],
    seed: u64,
) -> Result<(), RunDirError> {
    write_field_bin(&dir.join(format!("field_{sweep}.bin")), field)?;
    write_json(
        &dir.join(format!("field_{sweep}.json")),
        &SnapshotMeta { extents: extents.to_vec(), sweep, seed, model_hash: None },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        let records = vec![
            SampleRecord { sweep: 3, field: vec![0.1, -2.5e-17, 1.0 / 3.0] },
            SampleRecord { sweep: 6, field: vec![f64::MIN_POSITIVE, 42.0, -0.0] },
        ];
        write_samples_csv(&path, 3, &records).unwrap();
        let (_, back) = read_samples_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.sweep, b.sweep);
            for (x, y) in a.field.iter().zip(&b.field) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn rewriting_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let records =
            vec![SampleRecord { sweep: 1, field: vec![0.30000000000000004, 7e300] }];
        write_samples_csv(&a, 2, &records).unwrap();
        write_samples_csv(&b, 2, &records).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn field_bin_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        let field = vec![1.5, -2.25, 1e-300, 0.0];
        write_field_bin(&path, &field).unwrap();
        assert_eq!(read_field_bin(&path).unwrap(), field);
    }

    #[test]
    fn checkpoint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let state = ChainState {
            field: SpinField(vec![0.5, -1.0]),
            sweep: 17,
            seed: 99,
            model_hash: "abc123".into(),
        };
        write_checkpoint(dir.path(), &state, &[2]).unwrap();
        let back = read_checkpoint(dir.path()).unwrap();
        assert_eq!(back.field, state.field);
        assert_eq!(back.sweep, 17);
        assert_eq!(back.seed, 99);
        assert_eq!(back.model_hash, "abc123");
    }

    #[test]
    fn prepare_dir_refuses_non_empty() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("stale"), b"x").unwrap();
        assert!(matches!(
            prepare_dir(dir.path(), false),
            Err(RunDirError::NotEmpty(_))
        ));
        prepare_dir(dir.path(), true).unwrap();
    }

    #[test]
    fn corrupt_samples_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        std::fs::write(&path, "sweep,x_0\n1,notanumber\n").unwrap();
        assert!(matches!(read_samples_csv(&path), Err(RunDirError::Corrupt(_))));
    }
}
