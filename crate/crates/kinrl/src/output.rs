//! File emission: CSV tables, atomic writes, JSON sidecars and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Fixed six-decimal formatting used by the summary tables.
pub fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

/// Builds a CSV document in memory so it can be written in one atomic step.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flushing to memory")
    }
}

/// Writes through a sibling temporary file and a rename, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hash of the config's canonical JSON (keys sorted, no whitespace).
pub fn config_hash<C: Serialize>(config: &C) -> String {
    sha256_hex(canonical_json(config).as_bytes())
}

pub fn canonical_json<C: Serialize>(config: &C) -> String {
    // serde_json's default map keeps keys sorted, which is what makes this canonical.
    let value = serde_json::to_value(config).expect("configs serialize to JSON");
    serde_json::to_string(&value).expect("values serialize")
}

pub fn timestamp(t: SystemTime) -> String {
    DateTime::<Utc>::from(t).to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub config_file: Option<String>,
    pub overrides: Vec<String>,
    pub seeds: Vec<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub files: Vec<FileEntry>,
}

/// Collects the files a command writes so the manifest can list them.
pub struct Emitter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `bytes` to `name` (relative to the output directory).
    pub fn emit(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        bytes.push(b'\n');
        self.emit(name, &bytes)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn into_files(self) -> Vec<FileEntry> {
        self.files
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn canonical_json_sorts_keys() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: f64,
        }
        assert_eq!(
            canonical_json(&S {
                zeta: 1,
                alpha: 0.5
            }),
            r#"{"alpha":0.5,"zeta":1}"#
        );
    }

    #[test]
    fn table_quotes_only_when_needed() {
        let mut t = Table::new(&["a", "b"]);
        t.row(["1.000000", "x,y"]);
        assert_eq!(
            String::from_utf8(t.into_bytes()).unwrap(),
            "a,b\n1.000000,\"x,y\"\n"
        );
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.csv");
        write_atomic(&path, b"hello").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"hello");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn fixed_is_locale_free() {
        assert_eq!(fixed(1.0 / 6.0), "0.166667");
        assert_eq!(fixed(0.0), "0.000000");
    }

    #[test]
    fn timestamps_are_utc() {
        assert_eq!(
            timestamp(SystemTime::UNIX_EPOCH),
            "1970-01-01T00:00:00.000Z"
        );
    }
}
