//! Output naming, CSV formatting and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// 17 significant digits, so every value round-trips.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// First 12 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(6).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: PathBuf::from("<csv buffer>"),
            source: e.into_error(),
        })
    }
}

/// Output directory and naming for one invocation.
pub struct Outputs {
    dir: PathBuf,
    stem: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, hash: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            stem: format!("{command}_{hash}_seed{seed}"),
            written: Vec::new(),
        })
    }

    /// `<command>_<hash>_seed<seed>_<kind>.<ext>`.
    pub fn path(&self, kind: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{}_{kind}.{ext}", self.stem))
    }

    pub fn write(&mut self, kind: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(kind, ext);
        write_atomic(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn table(&mut self, kind: &str, table: &Table) -> Result<PathBuf> {
        self.write(kind, "csv", &table.to_bytes()?)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Records the inputs and every file written so far.
    pub fn manifest(&mut self, inputs: &str, status: &str) -> Result<PathBuf> {
        let mut text = String::from(inputs);
        let _ = writeln!(text, "status={status}");
        for p in &self.written {
            if let Some(name) = p.file_name() {
                let _ = writeln!(text, "output={}", name.to_string_lossy());
            }
        }
        self.write("manifest", "txt", text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01");
        assert_eq!(config_hash("abc").len(), 12);
    }

    #[test]
    fn table_uses_lf() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(String::from_utf8(t.to_bytes().unwrap()).unwrap(), "a,b\n1,\"x,y\"\n");
    }
}
