//! On-disk snapshot database.
//!
//! A directory holding `manifest.csv` and one binary file per
//! (parameter, field) pair, plus one weights file per field. Binary files are
//! `LVADSNP\0`, a `u32` version, a `u64` value count, the values as
//! little-endian `f64` and a SHA-256 trailer over all preceding bytes. The
//! manifest repeats the file digest so a resumed sweep can tell finished
//! entries from partial ones.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::FieldData;
use crate::error::{Error, Result};
use crate::podi::SnapshotSet;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"LVADSNP\0";
pub const SNAPSHOT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub param: f64,
    pub omega: f64,
    pub field: String,
    pub length: usize,
    pub file: String,
    pub sha256: String,
    pub fom_seconds: f64,
}

pub fn encode_values(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(52 + 8 * values.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode_values(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::corrupt(path, m);
    if bytes.len() < 52 {
        return Err(bad("file too short"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(bad("checksum mismatch"));
    }
    if &body[..8] != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file"));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
    let data = &body[20..];
    if data.len() != 8 * n {
        return Err(bad(&format!(
            "declared {n} values, found {} bytes",
            data.len()
        )));
    }
    Ok(data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn same_param(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub struct SnapshotDb {
    dir: PathBuf,
    entries: Mutex<Vec<ManifestEntry>>,
}

impl SnapshotDb {
    /// Opens `dir`, creating an empty database if it has no manifest.
    pub fn create_or_open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if dir.join(MANIFEST).exists() {
            return Self::open(dir);
        }
        let db = SnapshotDb {
            dir: dir.to_path_buf(),
            entries: Mutex::new(Vec::new()),
        };
        db.write_manifest(&[])?;
        Ok(db)
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let mut reader =
            csv::Reader::from_path(&path).map_err(|e| Error::corrupt(&path, e.to_string()))?;
        let entries = reader
            .deserialize()
            .collect::<std::result::Result<Vec<ManifestEntry>, _>>()
            .map_err(|e| Error::corrupt(&path, e.to_string()))?;
        Ok(SnapshotDb {
            dir: dir.to_path_buf(),
            entries: Mutex::new(entries),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> Vec<ManifestEntry> {
        self.entries.lock().unwrap().clone()
    }

    /// Distinct parameters, ascending.
    pub fn params(&self) -> Vec<f64> {
        let mut ps: Vec<f64> = Vec::new();
        for e in self.entries.lock().unwrap().iter() {
            if !ps.iter().any(|&p| same_param(p, e.param)) {
                ps.push(e.param);
            }
        }
        ps.sort_by(f64::total_cmp);
        ps
    }

    pub fn fields(&self) -> Vec<String> {
        let mut fs: Vec<String> = Vec::new();
        for e in self.entries.lock().unwrap().iter() {
            if !fs.contains(&e.field) {
                fs.push(e.field.clone());
            }
        }
        fs
    }

    fn write_manifest(&self, entries: &[ManifestEntry]) -> Result<()> {
        let path = self.dir.join(MANIFEST);
        let tmp = self.dir.join(format!("{MANIFEST}.tmp"));
        let mut w =
            csv::Writer::from_path(&tmp).map_err(|e| Error::corrupt(&tmp, e.to_string()))?;
        if entries.is_empty() {
            w.write_record([
                "param",
                "omega",
                "field",
                "length",
                "file",
                "sha256",
                "fom_seconds",
            ])
            .map_err(|e| Error::corrupt(&tmp, e.to_string()))?;
        }
        for e in entries {
            w.serialize(e)
                .map_err(|e| Error::corrupt(&tmp, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
        drop(w);
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn read_checked(&self, file: &str, sha: Option<&str>) -> Result<Vec<f64>> {
        let path = self.dir.join(file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if let Some(sha) = sha {
            if hex::encode(Sha256::digest(&bytes)) != sha {
                return Err(Error::corrupt(&path, "digest differs from manifest"));
            }
        }
        decode_values(&bytes, &path)
    }

    /// True when every field in `fields` is recorded at `param` and its file
    /// matches the manifest digest.
    pub fn is_complete(&self, param: f64, fields: &[&str]) -> bool {
        let entries = self.entries();
        fields.iter().all(|f| {
            entries
                .iter()
                .find(|e| same_param(e.param, param) && e.field == *f)
                .is_some_and(|e| {
                    self.read_checked(&e.file, Some(&e.sha256))
                        .is_ok_and(|v| v.len() == e.length)
                })
        })
    }

    /// Stores all fields of one solve, replacing any earlier entries at `param`.
    pub fn insert(
        &self,
        param: f64,
        omega: f64,
        fom_seconds: f64,
        fields: &[FieldData],
    ) -> Result<()> {
        let mut new = Vec::new();
        for f in fields {
            let file = format!("{}_{}.bin", f.name, param);
            let bytes = encode_values(&f.values);
            let path = self.dir.join(&file);
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            let wpath = self.dir.join(format!("weights_{}.bin", f.name));
            if !wpath.exists() {
                fs::write(&wpath, encode_values(&f.weights)).map_err(|e| Error::io(&wpath, e))?;
            }
            new.push(ManifestEntry {
                param,
                omega,
                field: f.name.clone(),
                length: f.values.len(),
                file,
                sha256: hex::encode(Sha256::digest(&bytes)),
                fom_seconds,
            });
        }
        let mut entries = self.entries.lock().unwrap();
        entries.retain(|e| !same_param(e.param, param));
        entries.extend(new);
        entries.sort_by(|a, b| {
            a.param
                .total_cmp(&b.param)
                .then_with(|| a.field.cmp(&b.field))
        });
        self.write_manifest(&entries)
    }

    pub fn load(&self, param: f64, field: &str) -> Result<Vec<f64>> {
        let e = self
            .entries()
            .into_iter()
            .find(|e| same_param(e.param, param) && e.field == field)
            .ok_or_else(|| Error::invalid(format!("no snapshot of '{field}' at {param}")))?;
        self.read_checked(&e.file, Some(&e.sha256))
    }

    /// Returns `None` when the parameter or field is absent.
    pub fn try_load(&self, param: f64, field: &str) -> Option<Vec<f64>> {
        self.load(param, field).ok()
    }

    pub fn weights(&self, field: &str) -> Result<Vec<f64>> {
        self.read_checked(&format!("weights_{field}.bin"), None)
    }

    /// Mean FOM wall time per entry.
    pub fn mean_fom_seconds(&self) -> Option<f64> {
        let entries = self.entries();
        let mut seen: Vec<(f64, f64)> = Vec::new();
        for e in &entries {
            if !seen.iter().any(|s| same_param(s.0, e.param)) {
                seen.push((e.param, e.fom_seconds));
            }
        }
        (!seen.is_empty()).then(|| seen.iter().map(|s| s.1).sum::<f64>() / seen.len() as f64)
    }

    /// Snapshot matrix of `field` at `params` (all stored ones if `None`).
    pub fn snapshot_set(
        &self,
        field: &str,
        params: Option<&[f64]>,
        weighted: bool,
    ) -> Result<SnapshotSet> {
        let params = match params {
            Some(p) => p.to_vec(),
            None => self.params(),
        };
        let columns = params
            .iter()
            .map(|&p| self.load(p, field))
            .collect::<Result<Vec<_>>>()?;
        let weights = if weighted {
            Some(self.weights(field)?)
        } else {
            None
        };
        SnapshotSet::new(field, params, &columns, weights)
    }
}
