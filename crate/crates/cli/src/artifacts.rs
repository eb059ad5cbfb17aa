//! Artifact directory with a content-addressed manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    format: u32,
    tool: &'a str,
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
    artifacts: &'a [Entry],
    /// Wall-clock timings; excluded from the determinism contract.
    timing: &'a str,
}

#[derive(Debug, Serialize)]
struct Timing<'a> {
    wall_seconds: f64,
    stages: &'a [(String, f64)],
}

/// Collects the files of one run. Every file goes through [`Artifacts`],
/// so the manifest lists all of them.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<Entry>,
    stages: Vec<(String, f64)>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if name == MANIFEST || name == TIMING || self.entries.iter().any(|e| e.file == name) {
            return Err(CliError::Io(format!("artifact {name} written twice")));
        }
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        f.write_all(bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.entries.push(Entry {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(
        &mut self,
        name: &str,
        value: &T,
    ) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push(b'\n');
        self.write_bytes(name, &text)
    }

    /// Writes whatever `fill` produces into an in-memory buffer first.
    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> geotomo::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    pub fn record_stage(&mut self, name: &str, seconds: f64) {
        self.stages.push((name.to_string(), seconds));
    }

    /// Writes the timing file and the manifest.
    pub fn finish(
        self,
        command: &str,
        config_sha256: &str,
        seed: u64,
        wall_seconds: f64,
    ) -> Result<Vec<Entry>, CliError> {
        let timing = serde_json::to_vec_pretty(&Timing {
            wall_seconds,
            stages: &self.stages,
        })
        .map_err(|e| CliError::Io(e.to_string()))?;
        let write = |name: &str, bytes: &[u8]| {
            let path = self.dir.join(name);
            fs::write(&path, bytes)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
        };
        write(TIMING, &timing)?;
        let manifest = Manifest {
            format: 1,
            tool: concat!("geotomo ", env!("CARGO_PKG_VERSION")),
            command,
            config_sha256,
            seed,
            artifacts: &self.entries,
            timing: TIMING,
        };
        let mut text =
            serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push(b'\n');
        write(MANIFEST, &text)?;
        Ok(self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
