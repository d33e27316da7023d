//! Atomic artifact writing and the hash manifest.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub struct ArtifactSink {
    dir: PathBuf,
    written: BTreeMap<String, String>,
    pub summary: BTreeMap<String, serde_json::Value>,
    gnuplot: bool,
}

impl ArtifactSink {
    pub fn new(dir: &Path, gnuplot: bool) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactSink { dir: dir.to_path_buf(), written: BTreeMap::new(), summary: BTreeMap::new(), gnuplot })
    }

    /// Write bytes atomically (temp file + rename) and record the hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        let path = self.dir.join(name);
        fs::rename(&tmp, &path)?;
        let mut h = Sha256::new();
        h.update(bytes);
        self.written.insert(name.to_string(), hex::encode(h.finalize()));
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Companion gnuplot script for a CSV artifact, when requested.
    pub fn write_gnuplot(&mut self, csv_name: &str, title: &str, using: &str) -> io::Result<()> {
        if !self.gnuplot {
            return Ok(());
        }
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nplot '{csv_name}' using {using} with points\n"
        );
        let name = format!("{}.gp", csv_name.trim_end_matches(".csv"));
        self.write(&name, script.as_bytes())
    }

    /// Write the manifest listing every artifact with its content hash plus
    /// the summary values. Returns the manifest bytes.
    pub fn finish(self) -> io::Result<Vec<u8>> {
        #[derive(serde::Serialize)]
        struct Manifest<'a> {
            artifacts: &'a BTreeMap<String, String>,
            summary: &'a BTreeMap<String, serde_json::Value>,
        }
        let body = Manifest { artifacts: &self.written, summary: &self.summary };
        let mut bytes = serde_json::to_vec_pretty(&body)?;
        bytes.push(b'\n');
        let tmp = self.dir.join(".manifest.json.tmp");
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, self.dir.join("manifest.json"))?;
        Ok(bytes)
    }
}

/// Stable float formatting: shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
