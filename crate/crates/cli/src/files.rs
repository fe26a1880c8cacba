//! Output formats: snapshot blocks, CSV tables, manifests and hashing.

use std::fs;
use std::io::Write;
use std::path::Path;

use kinred::ScenarioConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Magic of a block of distribution values `f(t, x_i, xi_j)`.
pub const DISTRIBUTION_MAGIC: &[u8; 8] = b"KRSNAP01";
/// Magic of a block of reduced parameters `omega(t, x_i)`.
pub const PARAMETER_MAGIC: &[u8; 8] = b"KRPARM01";
/// Magic, three `u64` dimensions, `L`, `dx` and the 32-byte config hash.
pub const HEADER_LEN: usize = 8 + 3 * 8 + 2 * 8 + 32;

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const SNAPSHOTS: &str = "snapshots.bin";
pub const PARAMETERS: &str = "parameters.bin";
pub const AUDIT: &str = "audit.json";
pub const ERROR_TABLE: &str = "error.csv";
pub const ERROR_SUMMARY: &str = "error_summary.json";

/// Row-major `times x cells x width` little-endian `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBlock {
    pub magic: [u8; 8],
    pub times: usize,
    pub cells: usize,
    /// Velocity nodes per cell, or parameters per cell.
    pub width: usize,
    pub half_width: f64,
    pub dx: f64,
    pub config_hash: [u8; 32],
    pub data: Vec<f64>,
}

impl SnapshotBlock {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(&self.magic);
        for d in [self.times, self.cells, self.width] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.half_width.to_le_bytes());
        out.extend_from_slice(&self.dx.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::Input(format!("snapshot block: {m}"));
        if bytes.len() < HEADER_LEN {
            return Err(bad("shorter than its header"));
        }
        let magic: [u8; 8] = bytes[0..8].try_into().unwrap();
        if &magic != DISTRIBUTION_MAGIC && &magic != PARAMETER_MAGIC {
            return Err(bad("unknown magic"));
        }
        let word = |k: usize| <[u8; 8]>::try_from(&bytes[8 + 8 * k..16 + 8 * k]).unwrap();
        let dims: Vec<usize> = (0..3).map(|k| u64::from_le_bytes(word(k)) as usize).collect();
        let half_width = f64::from_le_bytes(word(3));
        let dx = f64::from_le_bytes(word(4));
        let config_hash: [u8; 32] = bytes[48..80].try_into().unwrap();
        let count =
            dims.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d)).ok_or_else(|| bad("dimensions overflow"))?;
        if bytes.len() - HEADER_LEN != 8 * count {
            return Err(bad("payload length does not match its dimensions"));
        }
        let data = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { magic, times: dims[0], cells: dims[1], width: dims[2], half_width, dx, config_hash, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Values of output `t` in cell `i`.
    pub fn row(&self, t: usize, i: usize) -> &[f64] {
        let start = (t * self.cells + i) * self.width;
        &self.data[start..start + self.width]
    }

    /// Values of output `t`, all cells.
    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.cells * self.width;
        &self.data[t * n..(t + 1) * n]
    }
}

/// Git-style content hash of a config: SHA-256 of `blob <len>\0<json>`.
pub fn config_hash(config: &ScenarioConfig) -> [u8; 32] {
    let body = serde_json::to_vec(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    h.finalize().into()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One produced file and the SHA-256 of its content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Run manifest; written last, so its presence marks a complete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub config: ScenarioConfig,
    /// Output times of the snapshot blocks and tables.
    pub times: Vec<f64>,
    pub steps: usize,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text =
            fs::read_to_string(&path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if hex::encode(config_hash(&m.config)) != m.config_hash {
            return Err(CliError::Input(format!("{}: config_hash does not match the config", path.display())));
        }
        Ok(m)
    }
}

/// Writes files into `dir`, keeping the manifest's file list.
pub struct OutputDir<'a> {
    dir: &'a Path,
    files: Vec<FileEntry>,
}

impl<'a> OutputDir<'a> {
    pub fn create(dir: &'a Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry { name: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).expect("report serializes");
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Writes a file that is left out of the manifest, such as timings.
    pub fn write_unlisted<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_vec_pretty(value).expect("report serializes");
        text.push(b'\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn finish(self, command: &str, config: &ScenarioConfig, times: &[f64], steps: usize) -> Result<(), CliError> {
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hex::encode(config_hash(config)),
            config: config.clone(),
            times: times.to_vec(),
            steps,
            files: self.files.clone(),
        };
        self.write_unlisted(MANIFEST, &manifest)
    }
}

/// Full-precision float: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table with a leading `# key=value` provenance line.
pub fn csv_table(provenance: &str, header: &[String], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut out = format!("# {provenance}\n{}\n", header.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// Parses a table written by [`csv_table`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| CliError::Input(format!("{}: empty table", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().map_err(|e| CliError::Input(format!("{}: {e}", path.display()))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_roundtrip_is_exact() {
        let b = SnapshotBlock {
            magic: *DISTRIBUTION_MAGIC,
            times: 2,
            cells: 3,
            width: 4,
            half_width: 10.0,
            dx: 0.1,
            config_hash: [7; 32],
            data: (0..24).map(|k| (k as f64).sqrt() * 1e-300 + 1.0 / (k as f64 + 3.0)).collect(),
        };
        let bytes = b.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 24);
        assert_eq!(SnapshotBlock::from_bytes(&bytes).unwrap(), b);
        assert_eq!(b.row(1, 2), &b.data[20..24]);
        assert!(SnapshotBlock::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ScenarioConfig::demo();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn csv_floats_roundtrip() {
        let v = [0.1 + 0.2, -1.0 / 3.0, 6.02214076e23, 5e-324];
        for x in v {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
