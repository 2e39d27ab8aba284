//! Output files: every file starts with a `#` header naming the program
//! versions and the hash of the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct OutputDir {
    dir: PathBuf,
    header: String,
    written: Vec<PathBuf>,
}

pub fn config_hash(config: &RunConfig) -> String {
    Sha256::digest(config.canonical().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl OutputDir {
    pub fn create(config: &RunConfig, stage: &str) -> Result<Self, CliError> {
        let dir = config.out_dir.clone();
        fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
        let header = format!(
            "# femcycle {} (core {}) stage {stage}\n# config sha256 {}\n",
            env!("CARGO_PKG_VERSION"),
            femcycle::VERSION,
            config_hash(config)
        );
        Ok(Self {
            dir,
            header,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `body` under the header; `fill` renders into a byte buffer.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let mut buf = self.header.clone().into_bytes();
        fill(&mut buf).map_err(CliError::io(&path))?;
        fs::write(&path, buf).map_err(CliError::io(&path))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::io(path))
}
